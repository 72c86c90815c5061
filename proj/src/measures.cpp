#include "parapot/measures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace parapot {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Squared distance from x to the box (0 if inside) and to the farthest corner.
void box_ball_extents(const Box& cell, const Point& x, double& min2, double& max2) {
    min2 = 0;
    max2 = 0;
    for (int a = 0; a < cell.dim(); ++a) {
        double lo = cell.lo[a], hi = cell.hi[a];
        double c = std::min(std::max(x[a], lo), hi);
        min2 += sq(x[a] - c);
        max2 += sq(std::max(x[a] - lo, hi - x[a]));
    }
}

/// vol(cell ∩ B_s(x)) by recursive bisection; leaves use the linear fraction
/// (s - dmin)/(dmax - dmin), which is continuous and nondecreasing in s.
double clip_recurse(const Box& cell, const Point& x, double s, int depth) {
    double min2, max2;
    box_ball_extents(cell, x, min2, max2);
    double s2 = s * s;
    if (max2 <= s2) return cell.volume();
    if (min2 >= s2) return 0;
    if (depth <= 0) {
        double dmin = std::sqrt(min2), dmax = std::sqrt(max2);
        double frac = (s - dmin) / (dmax - dmin);
        return cell.volume() * std::min(1.0, std::max(0.0, frac));
    }
    // split every axis in half
    int dim = cell.dim();
    std::vector<int> idx(dim, 0);
    double total = 0;
    Box sub = cell;
    while (true) {
        for (int a = 0; a < dim; ++a) {
            double mid = 0.5 * (cell.lo[a] + cell.hi[a]);
            sub.lo[a] = idx[a] == 0 ? cell.lo[a] : mid;
            sub.hi[a] = idx[a] == 0 ? mid : cell.hi[a];
        }
        total += clip_recurse(sub, x, s, depth - 1);
        int a = 0;
        while (a < dim) {
            if (++idx[a] < 2) break;
            idx[a] = 0;
            ++a;
        }
        if (a == dim) break;
    }
    return total;
}

double interval_overlap(double a0, double a1, double b0, double b1) {
    return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

/// Exact area of {u in [a0,a1], v in [b0,b1], u^2+v^2 <= s^2} by piecewise
/// analytic slices (box given relative to the disc center).
double disc_box_area(double a0, double a1, double b0, double b1, double s) {
    a0 = std::max(a0, -s);
    a1 = std::min(a1, s);
    if (a1 <= a0) return 0;
    auto F = [s](double x) {  // antiderivative of sqrt(s^2 - x^2)
        double w2 = std::max(0.0, s * s - x * x);
        double w = std::sqrt(w2);
        return 0.5 * (x * w + s * s * std::asin(std::min(1.0, std::max(-1.0, x / s))));
    };
    double bps[6] = {a0, a1, 0, 0, 0, 0};
    int nb = 2;
    for (double c : {b0, b1}) {
        double cc = std::abs(c);
        if (cc < s) {
            double x = std::sqrt(s * s - cc * cc);
            bps[nb++] = x;
            bps[nb++] = -x;
        }
    }
    std::sort(bps, bps + nb);
    double area = 0;
    for (int i = 0; i + 1 < nb; ++i) {
        double lo = std::max(bps[i], a0), hi = std::min(bps[i + 1], a1);
        if (hi <= lo) continue;
        double xm = 0.5 * (lo + hi);
        double w = std::sqrt(std::max(0.0, s * s - xm * xm));
        double top = std::min(b1, w), bot = std::max(b0, -w);
        if (top <= bot) continue;
        double seg = 0;
        if (b1 < w)
            seg += b1 * (hi - lo);
        else
            seg += F(hi) - F(lo);
        if (b0 > -w)
            seg -= b0 * (hi - lo);
        else
            seg += F(hi) - F(lo);
        area += seg;
    }
    return area;
}

double cell_ball_overlap(const Box& cell, const Point& x, double s, int depth) {
    if (cell.dim() == 1)
        return interval_overlap(cell.lo[0], cell.hi[0], x[0] - s, x[0] + s);
    if (cell.dim() == 2)
        return disc_box_area(cell.lo[0] - x[0], cell.hi[0] - x[0], cell.lo[1] - x[1],
                             cell.hi[1] - x[1], s);
    return clip_recurse(cell, x, s, depth);
}

/// Iterate flat indices of the lattice cells whose boxes intersect
/// [x-s, x+s] per axis.  fn(flat, cell_box).
template <typename Fn>
void for_cells_in_window(const Box& box, const std::vector<int>& shape, const Point& x, double s,
                         Fn&& fn) {
    int dim = box.dim();
    std::vector<int> lo(dim), hi(dim), idx(dim);
    for (int a = 0; a < dim; ++a) {
        double h = box.edge(a) / shape[a];
        int i0 = static_cast<int>(std::floor((x[a] - s - box.lo[a]) / h));
        int i1 = static_cast<int>(std::floor((x[a] + s - box.lo[a]) / h));
        lo[a] = std::max(0, i0);
        hi[a] = std::min(shape[a] - 1, i1);
        if (lo[a] > hi[a]) return;
        idx[a] = lo[a];
    }
    Box cell;
    cell.lo.resize(dim);
    cell.hi.resize(dim);
    while (true) {
        std::size_t flat = 0;
        for (int a = 0; a < dim; ++a) {
            flat = flat * shape[a] + idx[a];
            double h = box.edge(a) / shape[a];
            cell.lo[a] = box.lo[a] + idx[a] * h;
            cell.hi[a] = box.lo[a] + (idx[a] + 1) * h;
        }
        fn(flat, cell);
        int a = dim - 1;
        while (a >= 0 && ++idx[a] > hi[a]) idx[a--] = lo[a];
        if (a < 0) break;
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// DensityGrid

DensityGrid::DensityGrid(Box b, std::vector<int> shape_, std::vector<double> values_)
    : box(std::move(b)), shape(std::move(shape_)), values(std::move(values_)) {
    box.validate();
    if (static_cast<int>(shape.size()) != box.dim())
        throw std::invalid_argument("DensityGrid: shape rank mismatch");
    std::size_t n = 1;
    for (int s : shape) {
        if (s < 1) throw std::invalid_argument("DensityGrid: shape entries must be >= 1");
        n *= static_cast<std::size_t>(s);
    }
    if (values.size() != n) throw std::invalid_argument("DensityGrid: values size mismatch");
}

double DensityGrid::cell_volume() const {
    double v = 1;
    for (int a = 0; a < dim(); ++a) v *= cell_edge(a);
    return v;
}

Box DensityGrid::cell_box(std::size_t flat) const {
    Box c;
    c.lo.resize(dim());
    c.hi.resize(dim());
    for (int a = dim() - 1; a >= 0; --a) {
        int i = static_cast<int>(flat % shape[a]);
        flat /= shape[a];
        c.lo[a] = box.lo[a] + i * cell_edge(a);
        c.hi[a] = box.lo[a] + (i + 1) * cell_edge(a);
    }
    return c;
}

Point DensityGrid::cell_center(std::size_t flat) const {
    Box c = cell_box(flat);
    return c.center();
}

double DensityGrid::integral() const {
    double v = cell_volume(), s = 0;
    for (double x : values) s += x;
    return s * v;
}

double DensityGrid::integral_abs() const {
    double v = cell_volume(), s = 0;
    for (double x : values) s += std::abs(x);
    return s * v;
}

double DensityGrid::ball_mass(const Point& x, double s, int depth) const {
    double total = 0;
    for_cells_in_window(box, shape, x, s, [&](std::size_t flat, const Box& cell) {
        double val = values[flat];
        if (val == 0) return;
        total += val * cell_ball_overlap(cell, x, s, depth);
    });
    return total;
}

void DensityGrid::ball_clip(const Point& x, double s, int depth, std::vector<double>& out) const {
    out.assign(cell_count(), 0.0);
    for_cells_in_window(box, shape, x, s, [&](std::size_t flat, const Box& cell) {
        out[flat] = cell_ball_overlap(cell, x, s, depth);
    });
}

DensityGrid DensityGrid::map_values(const std::function<double(double)>& f) const {
    DensityGrid g = *this;
    for (double& v : g.values) v = f(v);
    return g;
}

// ---------------------------------------------------------------------------
// SpaceTimeDensityGrid

SpaceTimeDensityGrid::SpaceTimeDensityGrid(Box b, double t0_, double t1_, std::vector<int> shape_,
                                           int nt_, std::vector<double> values_)
    : box(std::move(b)), t0(t0_), t1(t1_), shape(std::move(shape_)), nt(nt_),
      values(std::move(values_)) {
    box.validate();
    if (static_cast<int>(shape.size()) != box.dim())
        throw std::invalid_argument("SpaceTimeDensityGrid: shape rank mismatch");
    if (nt < 1 || !(t1 > t0)) throw std::invalid_argument("SpaceTimeDensityGrid: bad time extent");
    std::size_t n = 1;
    for (int s : shape) {
        if (s < 1) throw std::invalid_argument("SpaceTimeDensityGrid: bad shape");
        n *= static_cast<std::size_t>(s);
    }
    if (values.size() != n * static_cast<std::size_t>(nt))
        throw std::invalid_argument("SpaceTimeDensityGrid: values size mismatch");
    build_prefix();
}

std::size_t SpaceTimeDensityGrid::spatial_cells() const {
    std::size_t n = 1;
    for (int s : shape) n *= static_cast<std::size_t>(s);
    return n;
}

double SpaceTimeDensityGrid::spatial_cell_volume() const {
    double v = 1;
    for (int a = 0; a < dim(); ++a) v *= box.edge(a) / shape[a];
    return v;
}

Box SpaceTimeDensityGrid::spatial_cell_box(std::size_t flat) const {
    Box c;
    c.lo.resize(dim());
    c.hi.resize(dim());
    for (int a = dim() - 1; a >= 0; --a) {
        int i = static_cast<int>(flat % shape[a]);
        flat /= shape[a];
        double h = box.edge(a) / shape[a];
        c.lo[a] = box.lo[a] + i * h;
        c.hi[a] = box.lo[a] + (i + 1) * h;
    }
    return c;
}

void SpaceTimeDensityGrid::build_prefix() {
    std::size_t S = spatial_cells();
    prefix_.assign(S * (nt + 1), 0.0);
    double dt = cell_dt();
    for (std::size_t i = 0; i < S; ++i)
        for (int k = 0; k < nt; ++k)
            prefix_[i * (nt + 1) + k + 1] =
                prefix_[i * (nt + 1) + k] + values[static_cast<std::size_t>(k) * S + i] * dt;
}

double SpaceTimeDensityGrid::slab_integral(std::size_t i, double a, double b) const {
    a = std::max(a, t0);
    b = std::min(b, t1);
    if (b <= a) return 0;
    double dt = cell_dt();
    std::size_t S = spatial_cells();
    auto eval = [&](double tau) {
        double u = (tau - t0) / dt;
        int k = std::min(nt - 1, std::max(0, static_cast<int>(std::floor(u))));
        return prefix_[i * (nt + 1) + k] + (u - k) * dt * values[static_cast<std::size_t>(k) * S + i];
    };
    return eval(b) - eval(a);
}

double SpaceTimeDensityGrid::integral() const {
    std::size_t S = spatial_cells();
    double v = spatial_cell_volume() * cell_dt(), s = 0;
    for (double x : values) s += x;
    (void)S;
    return s * v;
}

double SpaceTimeDensityGrid::integral_abs() const {
    double v = spatial_cell_volume() * cell_dt(), s = 0;
    for (double x : values) s += std::abs(x);
    return s * v;
}

void SpaceTimeDensityGrid::spatial_ball_clip(const Point& x, double s, int depth,
                                             std::vector<double>& out) const {
    out.assign(spatial_cells(), 0.0);
    for_cells_in_window(box, shape, x, s, [&](std::size_t flat, const Box& cell) {
        out[flat] = cell_ball_overlap(cell, x, s, depth);
    });
}

double SpaceTimeDensityGrid::cylinder_mass(const ParabolicCylinder& c, int depth) const {
    double a = c.t_lo(), b = c.t_hi();
    if (b <= t0 || a >= t1) return 0;
    double total = 0;
    for_cells_in_window(box, shape, c.x, c.s, [&](std::size_t flat, const Box& cell) {
        double area = cell_ball_overlap(cell, c.x, c.s, depth);
        if (area == 0) return;
        total += area / spatial_cell_volume() * slab_integral(flat, a, b) * spatial_cell_volume();
    });
    return total;
}

SpaceTimeDensityGrid SpaceTimeDensityGrid::map_values(
    const std::function<double(double)>& f) const {
    std::vector<double> vals = values;
    for (double& v : vals) v = f(v);
    return SpaceTimeDensityGrid(box, t0, t1, shape, nt, std::move(vals));
}

// ---------------------------------------------------------------------------
// StepFunction

void StepFunction::validate() const {
    for (const Piece& p : pieces) {
        if (!(p.b > p.a)) throw std::invalid_argument("StepFunction: empty piece");
        if (p.v < 0) throw std::invalid_argument("StepFunction: pieces must be nonnegative");
    }
}

double StepFunction::integral(double a, double b) const {
    if (b <= a) return 0;
    double s = 0;
    for (const Piece& p : pieces) s += p.v * interval_overlap(p.a, p.b, a, b);
    return s;
}

double StepFunction::total() const {
    double s = 0;
    for (const Piece& p : pieces) s += p.v * (p.b - p.a);
    return s;
}

double StepFunction::sup() const {
    double s = 0;
    for (const Piece& p : pieces) s = std::max(s, p.v);
    return s;
}

// ---------------------------------------------------------------------------
// SpatialMeasure

SpatialMeasure SpatialMeasure::from_atoms(std::vector<SpatialAtom> atoms) {
    if (atoms.empty()) throw std::invalid_argument("SpatialMeasure: no atoms");
    SpatialMeasure m(static_cast<int>(atoms.front().x.size()));
    for (auto& a : atoms) m.add_atom(std::move(a.x), a.w);
    return m;
}

SpatialMeasure SpatialMeasure::from_density(DensityGrid density) {
    SpatialMeasure m(density.dim());
    m.set_density(std::move(density));
    return m;
}

SpatialMeasure SpatialMeasure::lebesgue(int dim, double constant) {
    SpatialMeasure m(dim);
    m.set_lebesgue(constant);
    return m;
}

void SpatialMeasure::add_atom(Point x, double w) {
    if (dim_ == 0) dim_ = static_cast<int>(x.size());
    if (static_cast<int>(x.size()) != dim_)
        throw std::invalid_argument("SpatialMeasure: atom dimension mismatch");
    atoms_.push_back({std::move(x), w});
}

void SpatialMeasure::set_density(DensityGrid d) {
    if (dim_ == 0) dim_ = d.dim();
    if (d.dim() != dim_) throw std::invalid_argument("SpatialMeasure: density dimension mismatch");
    density_ = std::move(d);
}

void SpatialMeasure::set_lebesgue(double c) { lebesgue_ = c; }

bool SpatialMeasure::is_nonnegative() const {
    for (const auto& a : atoms_)
        if (a.w < 0) return false;
    if (density_)
        for (double v : density_->values)
            if (v < 0) return false;
    return lebesgue_ >= 0;
}

double SpatialMeasure::ball_mass(const Point& x, double s, int clip_depth) const {
    double m = 0;
    double s2 = s * s;
    for (const auto& a : atoms_)
        if (dist2(a.x, x) <= s2) m += a.w;
    if (density_) m += density_->ball_mass(x, s, clip_depth);
    if (lebesgue_ != 0) m += lebesgue_ * unit_ball_volume(dim_) * std::pow(s, dim_);
    return m;
}

double SpatialMeasure::total_variation() const {
    if (lebesgue_ != 0) return kInf;
    double t = 0;
    for (const auto& a : atoms_) t += std::abs(a.w);
    if (density_) t += density_->integral_abs();
    return t;
}

double SpatialMeasure::total_mass() const {
    if (lebesgue_ != 0) return lebesgue_ > 0 ? kInf : -kInf;
    double t = 0;
    for (const auto& a : atoms_) t += a.w;
    if (density_) t += density_->integral();
    return t;
}

SpatialMeasure SpatialMeasure::positive_part() const {
    SpatialMeasure m(dim_);
    for (const auto& a : atoms_)
        if (a.w > 0) m.atoms_.push_back(a);
    if (density_) m.density_ = density_->map_values([](double v) { return std::max(v, 0.0); });
    if (lebesgue_ > 0) m.lebesgue_ = lebesgue_;
    return m;
}

SpatialMeasure SpatialMeasure::negative_part() const {
    SpatialMeasure m(dim_);
    for (const auto& a : atoms_)
        if (a.w < 0) m.atoms_.push_back({a.x, -a.w});
    if (density_) m.density_ = density_->map_values([](double v) { return std::max(-v, 0.0); });
    if (lebesgue_ < 0) m.lebesgue_ = -lebesgue_;
    return m;
}

SpatialMeasure SpatialMeasure::scaled(double c) const {
    SpatialMeasure m = *this;
    for (auto& a : m.atoms_) a.w *= c;
    if (m.density_)
        for (double& v : m.density_->values) v *= c;
    m.lebesgue_ *= c;
    return m;
}

Box SpatialMeasure::support_bounds() const {
    if (lebesgue_ != 0)
        throw std::runtime_error("SpatialMeasure: Lebesgue part has unbounded support");
    if (atoms_.empty() && !density_)
        throw std::runtime_error("SpatialMeasure: empty measure has no support bounds");
    Box b;
    b.lo.assign(dim_, kInf);
    b.hi.assign(dim_, -kInf);
    for (const auto& a : atoms_)
        for (int ax = 0; ax < dim_; ++ax) {
            b.lo[ax] = std::min(b.lo[ax], a.x[ax]);
            b.hi[ax] = std::max(b.hi[ax], a.x[ax]);
        }
    if (density_)
        for (int ax = 0; ax < dim_; ++ax) {
            b.lo[ax] = std::min(b.lo[ax], density_->box.lo[ax]);
            b.hi[ax] = std::max(b.hi[ax], density_->box.hi[ax]);
        }
    return b;
}

// ---------------------------------------------------------------------------
// SpaceTimeMeasure

SpaceTimeMeasure SpaceTimeMeasure::from_atoms(std::vector<SpaceTimeAtom> atoms) {
    if (atoms.empty()) throw std::invalid_argument("SpaceTimeMeasure: no atoms");
    SpaceTimeMeasure m(static_cast<int>(atoms.front().x.size()));
    for (auto& a : atoms) m.add_atom(std::move(a.x), a.t, a.w);
    return m;
}

SpaceTimeMeasure SpaceTimeMeasure::from_density(SpaceTimeDensityGrid density) {
    SpaceTimeMeasure m(density.dim());
    m.set_density(std::move(density));
    return m;
}

SpaceTimeMeasure SpaceTimeMeasure::from_tensor(SpatialMeasure lambda, StepFunction theta) {
    SpaceTimeMeasure m(lambda.dim());
    m.set_tensor(std::move(lambda), std::move(theta));
    return m;
}

SpaceTimeMeasure SpaceTimeMeasure::lebesgue(int dim, double constant) {
    SpaceTimeMeasure m(dim);
    m.set_lebesgue(constant);
    return m;
}

void SpaceTimeMeasure::add_atom(Point x, double t, double w) {
    if (dim_ == 0) dim_ = static_cast<int>(x.size());
    if (static_cast<int>(x.size()) != dim_)
        throw std::invalid_argument("SpaceTimeMeasure: atom dimension mismatch");
    atoms_.push_back({std::move(x), t, w});
}

void SpaceTimeMeasure::set_density(SpaceTimeDensityGrid d) {
    if (dim_ == 0) dim_ = d.dim();
    if (d.dim() != dim_)
        throw std::invalid_argument("SpaceTimeMeasure: density dimension mismatch");
    density_ = std::move(d);
}

void SpaceTimeMeasure::set_tensor(SpatialMeasure lambda, StepFunction theta) {
    theta.validate();
    if (dim_ == 0) dim_ = lambda.dim();
    if (lambda.dim() != dim_)
        throw std::invalid_argument("SpaceTimeMeasure: tensor dimension mismatch");
    if (lambda.lebesgue_constant() != 0)
        throw std::invalid_argument("SpaceTimeMeasure: tensor spatial factor cannot be Lebesgue");
    tensor_ = Tensor{std::move(lambda), std::move(theta)};
}

void SpaceTimeMeasure::set_lebesgue(double c) { lebesgue_ = c; }

bool SpaceTimeMeasure::is_nonnegative() const {
    for (const auto& a : atoms_)
        if (a.w < 0) return false;
    if (density_)
        for (double v : density_->values)
            if (v < 0) return false;
    if (tensor_ && !tensor_->lambda.is_nonnegative()) return false;
    return lebesgue_ >= 0;
}

double SpaceTimeMeasure::cylinder_mass(const ParabolicCylinder& c, int clip_depth) const {
    double m = 0;
    for (const auto& a : atoms_)
        if (c.contains(a.x, a.t)) m += a.w;
    if (density_) m += density_->cylinder_mass(c, clip_depth);
    if (tensor_)
        m += tensor_->lambda.ball_mass(c.x, c.s, clip_depth) *
             tensor_->theta.integral(c.t_lo(), c.t_hi());
    if (lebesgue_ != 0)
        m += lebesgue_ * unit_ball_volume(dim_) * std::pow(c.s, dim_) * (c.s * c.s);
    return m;
}

double SpaceTimeMeasure::total_variation() const {
    if (lebesgue_ != 0) return kInf;
    double t = 0;
    for (const auto& a : atoms_) t += std::abs(a.w);
    if (density_) t += density_->integral_abs();
    if (tensor_) t += tensor_->lambda.total_variation() * tensor_->theta.total();
    return t;
}

double SpaceTimeMeasure::total_mass() const {
    if (lebesgue_ != 0) return lebesgue_ > 0 ? kInf : -kInf;
    double t = 0;
    for (const auto& a : atoms_) t += a.w;
    if (density_) t += density_->integral();
    if (tensor_) t += tensor_->lambda.total_mass() * tensor_->theta.total();
    return t;
}

SpaceTimeMeasure SpaceTimeMeasure::positive_part() const {
    SpaceTimeMeasure m(dim_);
    for (const auto& a : atoms_)
        if (a.w > 0) m.atoms_.push_back(a);
    if (density_) m.density_ = density_->map_values([](double v) { return std::max(v, 0.0); });
    if (tensor_) {
        SpatialMeasure lp = tensor_->lambda.positive_part();
        if (!lp.is_zero()) m.tensor_ = Tensor{std::move(lp), tensor_->theta};
    }
    if (lebesgue_ > 0) m.lebesgue_ = lebesgue_;
    return m;
}

SpaceTimeMeasure SpaceTimeMeasure::negative_part() const {
    SpaceTimeMeasure m(dim_);
    for (const auto& a : atoms_)
        if (a.w < 0) m.atoms_.push_back({a.x, a.t, -a.w});
    if (density_) m.density_ = density_->map_values([](double v) { return std::max(-v, 0.0); });
    if (tensor_) {
        SpatialMeasure ln = tensor_->lambda.negative_part();
        if (!ln.is_zero()) m.tensor_ = Tensor{std::move(ln), tensor_->theta};
    }
    if (lebesgue_ < 0) m.lebesgue_ = -lebesgue_;
    return m;
}

SpaceTimeMeasure SpaceTimeMeasure::scaled(double c) const {
    SpaceTimeMeasure m = *this;
    for (auto& a : m.atoms_) a.w *= c;
    if (m.density_)
        for (double& v : m.density_->values) v *= c;
    if (m.tensor_) m.tensor_->lambda = m.tensor_->lambda.scaled(c);
    m.lebesgue_ *= c;
    return m;
}

void SpaceTimeMeasure::support_bounds(Box& spatial, double& tmin, double& tmax) const {
    if (lebesgue_ != 0)
        throw std::runtime_error("SpaceTimeMeasure: Lebesgue part has unbounded support");
    if (is_zero()) throw std::runtime_error("SpaceTimeMeasure: empty measure has no support");
    spatial.lo.assign(dim_, kInf);
    spatial.hi.assign(dim_, -kInf);
    tmin = kInf;
    tmax = -kInf;
    auto widen = [&](const Point& x) {
        for (int a = 0; a < dim_; ++a) {
            spatial.lo[a] = std::min(spatial.lo[a], x[a]);
            spatial.hi[a] = std::max(spatial.hi[a], x[a]);
        }
    };
    for (const auto& a : atoms_) {
        widen(a.x);
        tmin = std::min(tmin, a.t);
        tmax = std::max(tmax, a.t);
    }
    if (density_) {
        widen(density_->box.lo);
        widen(density_->box.hi);
        tmin = std::min(tmin, density_->t0);
        tmax = std::max(tmax, density_->t1);
    }
    if (tensor_) {
        Box lb = tensor_->lambda.support_bounds();
        widen(lb.lo);
        widen(lb.hi);
        for (const auto& p : tensor_->theta.pieces) {
            tmin = std::min(tmin, p.a);
            tmax = std::max(tmax, p.b);
        }
    }
}

// ---------------------------------------------------------------------------
// Mollification

namespace {

double kernel_profile(MollifierKernel k, double r) {
    if (r >= 1) return 0;
    switch (k) {
        case MollifierKernel::bump:
            return std::exp(-1.0 / (1.0 - r * r));
        case MollifierKernel::wendland: {
            double m = 1 - r;
            return m * m * m * m * (4 * r + 1);
        }
    }
    return 0;
}

/// Normalization so the unit-radius kernel integrates to 1 in `dim` dims.
double kernel_norm(MollifierKernel k, int dim) {
    static std::map<std::pair<int, int>, double> cache;
    auto key = std::make_pair(static_cast<int>(k), dim);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    // surface * ∫_0^1 profile(r) r^{dim-1} dr, composite 64-point midpoint on
    // 64 panels is ample for these smooth profiles.
    double integral = 0;
    const int panels = 256;
    for (int i = 0; i < panels; ++i) {
        double r = (i + 0.5) / panels;
        integral += kernel_profile(k, r) * std::pow(r, dim - 1);
    }
    integral /= panels;
    double surface = dim * unit_ball_volume(dim);
    double c = 1.0 / (surface * integral);
    cache[key] = c;
    return c;
}

}  // namespace

double mollifier_value(MollifierKernel kernel, int dim, int n, const Point& z) {
    double r2 = 0;
    for (double v : z) r2 += v * v;
    double r = std::sqrt(r2) * n;
    if (r >= 1) return 0;
    return kernel_norm(kernel, dim) * kernel_profile(kernel, r) * std::pow(double(n), dim);
}

namespace {

/// Value of (rho_n * omega)(z) for a spatial measure.
double mollified_value_spatial(const SpatialMeasure& omega, const Point& z, int n,
                               MollifierKernel kernel) {
    int dim = omega.dim();
    double radius = 1.0 / n;
    double val = 0;
    Point diff(dim);
    for (const auto& a : omega.atoms()) {
        for (int ax = 0; ax < dim; ++ax) diff[ax] = z[ax] - a.x[ax];
        val += a.w * mollifier_value(kernel, dim, n, diff);
    }
    if (omega.density()) {
        const DensityGrid& g = *omega.density();
        // subdivide input cells to at most radius/6 per axis
        for_cells_in_window(g.box, g.shape, z, radius, [&](std::size_t flat, const Box& cell) {
            double v = g.values[flat];
            if (v == 0) return;
            std::vector<int> sub(dim);
            double w = 1;
            for (int a = 0; a < dim; ++a) {
                sub[a] = std::max(1, static_cast<int>(std::ceil(cell.edge(a) / (radius / 6))));
                w *= cell.edge(a) / sub[a];
            }
            std::vector<int> idx(dim, 0);
            Point y(dim);
            while (true) {
                for (int a = 0; a < dim; ++a)
                    y[a] = z[a] - (cell.lo[a] + (idx[a] + 0.5) * cell.edge(a) / sub[a]);
                val += v * w * mollifier_value(kernel, dim, n, y);
                int a = dim - 1;
                while (a >= 0 && ++idx[a] == sub[a]) idx[a--] = 0;
                if (a < 0) break;
            }
        });
    }
    val += omega.lebesgue_constant();  // kernel integrates to one
    return val;
}

/// Value of (rho_n * mu)(z, tz) for a space-time measure; kernel lives in
/// R^{N+1} with Euclidean radius 1/n.
double mollified_value_spacetime(const SpaceTimeMeasure& mu, const Point& z, double tz, int n,
                                 MollifierKernel kernel) {
    int dim = mu.dim();
    int full = dim + 1;
    double radius = 1.0 / n;
    double val = 0;
    Point diff(full);
    for (const auto& a : mu.atoms()) {
        for (int ax = 0; ax < dim; ++ax) diff[ax] = z[ax] - a.x[ax];
        diff[dim] = tz - a.t;
        val += a.w * mollifier_value(kernel, full, n, diff);
    }
    if (mu.density()) {
        const SpaceTimeDensityGrid& g = *mu.density();
        std::size_t S = g.spatial_cells();
        double dtc = g.cell_dt();
        int tsub = std::max(1, static_cast<int>(std::ceil(dtc / (radius / 6))));
        for_cells_in_window(g.box, g.shape, z, radius, [&](std::size_t flat, const Box& cell) {
            std::vector<int> sub(dim);
            double w = 1;
            for (int a = 0; a < dim; ++a) {
                sub[a] = std::max(1, static_cast<int>(std::ceil(cell.edge(a) / (radius / 6))));
                w *= cell.edge(a) / sub[a];
            }
            w *= dtc / tsub;
            for (int k = 0; k < g.nt; ++k) {
                double v = g.values[static_cast<std::size_t>(k) * S + flat];
                if (v == 0) continue;
                double tk = g.t0 + k * dtc;
                if (tk > tz + radius || tk + dtc < tz - radius) continue;
                std::vector<int> idx(dim, 0);
                while (true) {
                    for (int a = 0; a < dim; ++a)
                        diff[a] = z[a] - (cell.lo[a] + (idx[a] + 0.5) * cell.edge(a) / sub[a]);
                    for (int j = 0; j < tsub; ++j) {
                        diff[dim] = tz - (tk + (j + 0.5) * dtc / tsub);
                        val += v * w * mollifier_value(kernel, full, n, diff);
                    }
                    int a = dim - 1;
                    while (a >= 0 && ++idx[a] == sub[a]) idx[a--] = 0;
                    if (a < 0) break;
                }
            }
        });
    }
    if (mu.tensor()) {
        const auto& tens = *mu.tensor();
        // time integral over theta pieces, midpoint subdivision at radius/8
        auto time_weight = [&](const Point& spatial_diff) {
            double r2 = 0;
            for (int a = 0; a < dim; ++a) r2 += sq(spatial_diff[a]);
            if (r2 >= radius * radius) return 0.0;
            double reach = std::sqrt(radius * radius - r2);
            double acc = 0;
            for (const auto& p : tens.theta.pieces) {
                double a0 = std::max(p.a, tz - reach), b0 = std::min(p.b, tz + reach);
                if (b0 <= a0 || p.v == 0) continue;
                int m = std::max(4, static_cast<int>(std::ceil((b0 - a0) / (radius / 8))));
                double h = (b0 - a0) / m;
                Point d(full);
                for (int a = 0; a < dim; ++a) d[a] = spatial_diff[a];
                for (int j = 0; j < m; ++j) {
                    d[dim] = tz - (a0 + (j + 0.5) * h);
                    acc += p.v * h * mollifier_value(kernel, full, n, d);
                }
            }
            return acc;
        };
        Point sd(dim);
        for (const auto& a : tens.lambda.atoms()) {
            for (int ax = 0; ax < dim; ++ax) sd[ax] = z[ax] - a.x[ax];
            val += a.w * time_weight(sd);
        }
        if (tens.lambda.density()) {
            const DensityGrid& g = *tens.lambda.density();
            for_cells_in_window(g.box, g.shape, z, radius,
                                [&](std::size_t flat, const Box& cell) {
                double v = g.values[flat];
                if (v == 0) return;
                std::vector<int> sub(dim);
                double w = 1;
                for (int a = 0; a < dim; ++a) {
                    sub[a] = std::max(
                        1, static_cast<int>(std::ceil(cell.edge(a) / (radius / 6))));
                    w *= cell.edge(a) / sub[a];
                }
                std::vector<int> idx(dim, 0);
                while (true) {
                    for (int a = 0; a < dim; ++a)
                        sd[a] = z[a] - (cell.lo[a] + (idx[a] + 0.5) * cell.edge(a) / sub[a]);
                    val += v * w * time_weight(sd);
                    int a = dim - 1;
                    while (a >= 0 && ++idx[a] == sub[a]) idx[a--] = 0;
                    if (a < 0) break;
                }
            });
        }
        if (tens.lambda.lebesgue_constant() != 0)
            throw std::runtime_error("mollify: tensor with Lebesgue spatial factor unsupported");
    }
    val += mu.lebesgue_constant();
    return val;
}

constexpr std::size_t kMaxLatticeCells = 6'000'000;

}  // namespace

SpatialMeasure mollify_spatial(const SpatialMeasure& omega, int n, const MollifyOptions& opt) {
    if (n < 1) throw std::invalid_argument("mollify_spatial: n must be >= 1");
    if (omega.lebesgue_constant() != 0 && omega.atoms_only())
        return omega;  // mollifier reproduces the constant exactly
    int dim = omega.dim();
    double radius = 1.0 / n;

    Box lattice;
    std::vector<int> shape;
    if (opt.lattice_box) {
        lattice = *opt.lattice_box;
        shape = opt.lattice_shape.value();
        for (int a = 0; a < dim; ++a)
            if (lattice.edge(a) / shape[a] > 0.5 * radius)
                throw std::runtime_error(
                    "mollify_spatial: lattice under-resolves the mollifier radius");
    } else {
        lattice = omega.support_bounds();
        shape.resize(dim);
        std::size_t cells = 1;
        for (int a = 0; a < dim; ++a) {
            lattice.lo[a] -= radius;
            lattice.hi[a] += radius;
            double target = radius / opt.cells_per_radius;
            shape[a] = std::max(2, static_cast<int>(std::ceil(lattice.edge(a) / target)));
            cells *= static_cast<std::size_t>(shape[a]);
        }
        if (cells > kMaxLatticeCells)
            throw std::runtime_error("mollify_spatial: output lattice too large");
    }

    std::size_t cells = 1;
    for (int s : shape) cells *= static_cast<std::size_t>(s);
    std::vector<double> vals(cells, 0.0);
    DensityGrid out(lattice, shape, std::move(vals));
    int sub = std::max(1, opt.subsamples);
    Point z(dim);
    std::vector<int> idx(dim);
    for (std::size_t c = 0; c < cells; ++c) {
        Box cell = out.cell_box(c);
        double acc = 0;
        idx.assign(dim, 0);
        while (true) {
            for (int a = 0; a < dim; ++a)
                z[a] = cell.lo[a] + (idx[a] + 0.5) * cell.edge(a) / sub;
            acc += mollified_value_spatial(omega, z, n, opt.kernel);
            int a = dim - 1;
            while (a >= 0 && ++idx[a] == sub) idx[a--] = 0;
            if (a < 0) break;
        }
        out.values[c] = acc / std::pow(double(sub), dim);
    }
    return SpatialMeasure::from_density(std::move(out));
}

SpaceTimeMeasure mollify_spacetime(const SpaceTimeMeasure& mu, int n, const MollifyOptions& opt) {
    if (n < 1) throw std::invalid_argument("mollify_spacetime: n must be >= 1");
    int dim = mu.dim();
    double radius = 1.0 / n;

    Box lattice;
    std::vector<int> shape;
    double t0, t1;
    int nt;
    if (opt.lattice_box) {
        lattice = *opt.lattice_box;
        shape = opt.lattice_shape.value();
        t0 = opt.lattice_t0.value();
        t1 = opt.lattice_t1.value();
        nt = opt.lattice_nt.value();
        for (int a = 0; a < dim; ++a)
            if (lattice.edge(a) / shape[a] > 0.5 * radius)
                throw std::runtime_error(
                    "mollify_spacetime: lattice under-resolves the mollifier radius");
        if ((t1 - t0) / nt > 0.5 * radius)
            throw std::runtime_error(
                "mollify_spacetime: time lattice under-resolves the mollifier radius");
    } else {
        double tmin, tmax;
        mu.support_bounds(lattice, tmin, tmax);
        shape.resize(dim);
        std::size_t cells = 1;
        double target = radius / opt.cells_per_radius;
        for (int a = 0; a < dim; ++a) {
            lattice.lo[a] -= radius;
            lattice.hi[a] += radius;
            shape[a] = std::max(2, static_cast<int>(std::ceil(lattice.edge(a) / target)));
            cells *= static_cast<std::size_t>(shape[a]);
        }
        t0 = tmin - radius;
        t1 = tmax + radius;
        nt = std::max(2, static_cast<int>(std::ceil((t1 - t0) / target)));
        cells *= static_cast<std::size_t>(nt);
        if (cells > kMaxLatticeCells)
            throw std::runtime_error("mollify_spacetime: output lattice too large");
    }

    std::size_t S = 1;
    for (int s : shape) S *= static_cast<std::size_t>(s);
    std::vector<double> vals(S * static_cast<std::size_t>(nt), 0.0);
    SpaceTimeDensityGrid tmp(lattice, t0, t1, shape, nt, vals);
    int sub = std::max(1, opt.subsamples);
    Point z(dim);
    std::vector<int> idx(dim);
    for (int k = 0; k < nt; ++k) {
        for (std::size_t c = 0; c < S; ++c) {
            Box cell = tmp.spatial_cell_box(c);
            double acc = 0;
            idx.assign(dim, 0);
            while (true) {
                for (int a = 0; a < dim; ++a)
                    z[a] = cell.lo[a] + (idx[a] + 0.5) * cell.edge(a) / sub;
                for (int j = 0; j < sub; ++j) {
                    double tz = t0 + (k + (j + 0.5) / sub) * tmp.cell_dt();
                    acc += mollified_value_spacetime(mu, z, tz, n, opt.kernel);
                }
                int a = dim - 1;
                while (a >= 0 && ++idx[a] == sub) idx[a--] = 0;
                if (a < 0) break;
            }
            vals[static_cast<std::size_t>(k) * S + c] = acc / std::pow(double(sub), dim + 1);
        }
    }
    return SpaceTimeMeasure::from_density(
        SpaceTimeDensityGrid(lattice, t0, t1, shape, nt, std::move(vals)));
}

SpaceTimeMeasure restrict_to_cylinder(const SpaceTimeMeasure& mu, const ParabolicCylinder& q,
                                      int clip_depth) {
    SpaceTimeMeasure out(mu.dim());
    for (const auto& a : mu.atoms())
        if (q.contains(a.x, a.t)) out.add_atom(a.x, a.t, a.w);
    if (mu.density()) {
        const SpaceTimeDensityGrid& g = *mu.density();
        std::size_t S = g.spatial_cells();
        std::vector<double> clip;
        g.spatial_ball_clip(q.x, q.s, clip_depth, clip);
        double vol = g.spatial_cell_volume();
        double dtc = g.cell_dt();
        std::vector<double> vals(g.values.size(), 0.0);
        for (std::size_t i = 0; i < S; ++i) {
            if (clip[i] == 0) continue;
            double sf = clip[i] / vol;
            for (int k = 0; k < g.nt; ++k) {
                double a = g.t0 + k * dtc, b = a + dtc;
                double tf = interval_overlap(a, b, q.t_lo(), q.t_hi()) / dtc;
                if (tf == 0) continue;
                vals[static_cast<std::size_t>(k) * S + i] =
                    g.values[static_cast<std::size_t>(k) * S + i] * sf * tf;
            }
        }
        out.set_density(SpaceTimeDensityGrid(g.box, g.t0, g.t1, g.shape, g.nt, std::move(vals)));
    }
    if (mu.tensor()) {
        // chi_Q factors over the product: restrict each factor exactly
        const auto& tens = *mu.tensor();
        SpatialMeasure lam(mu.dim());
        for (const auto& a : tens.lambda.atoms())
            if (dist2(a.x, q.x) <= q.s * q.s) lam.add_atom(a.x, a.w);
        if (tens.lambda.density()) {
            const DensityGrid& g = *tens.lambda.density();
            std::vector<double> clip;
            g.ball_clip(q.x, q.s, clip_depth, clip);
            std::vector<double> vals(g.values.size(), 0.0);
            for (std::size_t i = 0; i < vals.size(); ++i)
                vals[i] = g.values[i] * clip[i] / g.cell_volume();
            lam.set_density(DensityGrid(g.box, g.shape, std::move(vals)));
        }
        StepFunction th;
        for (const auto& p : tens.theta.pieces) {
            double a = std::max(p.a, q.t_lo()), b = std::min(p.b, q.t_hi());
            if (b > a) th.pieces.push_back({a, b, p.v});
        }
        if (!lam.is_zero() && !th.pieces.empty()) out.set_tensor(std::move(lam), std::move(th));
    }
    if (mu.lebesgue_constant() != 0) {
        // materialize the constant onto a lattice covering the cylinder
        int dim = mu.dim();
        Box b;
        b.lo.resize(dim);
        b.hi.resize(dim);
        for (int a = 0; a < dim; ++a) {
            b.lo[a] = q.x[a] - q.s;
            b.hi[a] = q.x[a] + q.s;
        }
        std::vector<int> shape(dim, 32);
        std::size_t S = 1;
        for (int s : shape) S *= static_cast<std::size_t>(s);
        int nt = 32;
        SpaceTimeDensityGrid g(b, q.t_lo(), q.t_hi(), shape, nt,
                               std::vector<double>(S * nt, 0.0));
        std::vector<double> clip;
        g.spatial_ball_clip(q.x, q.s, clip_depth, clip);
        std::vector<double> vals(S * nt, 0.0);
        for (std::size_t i = 0; i < S; ++i)
            for (int k = 0; k < nt; ++k)
                vals[static_cast<std::size_t>(k) * S + i] =
                    mu.lebesgue_constant() * clip[i] / g.spatial_cell_volume();
        out.set_density(SpaceTimeDensityGrid(b, q.t_lo(), q.t_hi(), shape, nt, std::move(vals)));
    }
    return out;
}

}  // namespace parapot
