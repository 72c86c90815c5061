#include "parapot/potentials.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "parapot/quadrature.hpp"

namespace parapot {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kGolden = 0.6180339887498949;

double max_support_distance(const Box& b, const Point& x) {
    double s = 0;
    for (int a = 0; a < b.dim(); ++a) s += sq(std::max(std::abs(x[a] - b.lo[a]), std::abs(x[a] - b.hi[a])));
    return std::sqrt(s);
}

double min_support_distance(const Box& b, const Point& x) {
    double s = 0;
    for (int a = 0; a < b.dim(); ++a) {
        double c = std::min(std::max(x[a], b.lo[a]), b.hi[a]);
        s += sq(x[a] - c);
    }
    return std::sqrt(s);
}

}  // namespace

double h1(double s, double alpha) {
    if (!(s > 0)) throw std::invalid_argument("h1: s must be positive");
    return std::pow(-std::log(std::min(s, 0.5)), 1.0 / alpha);
}

double h2(double s, double beta, double d) {
    if (!(s > 0)) throw std::invalid_argument("h2: s must be positive");
    if (!(d > 0)) throw std::invalid_argument("h2: d must be positive");
    return std::pow(std::log(std::max(2 * d / s, 2.0)), -beta);
}

double entry_scale_weight(double r, double R, int N) {
    if (!(r > 0)) return kInf;
    if (std::isinf(R)) return ipow(1.0 / r, N) / N;
    if (r >= R) return 0;
    return (ipow(1.0 / r, N) - ipow(1.0 / R, N)) / N;
}

void parallel_ranges(std::size_t n, int workers,
                     const std::function<void(std::size_t, std::size_t)>& fn) {
    workers = std::max(1, workers);
    if (workers == 1 || n < 2) {
        fn(0, n);
        return;
    }
    std::vector<std::thread> pool;
    std::size_t chunk = (n + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        std::size_t b = std::min(n, w * chunk), e = std::min(n, (w + 1) * chunk);
        if (b >= e) break;
        pool.emplace_back([&fn, b, e] { fn(b, e); });
    }
    for (auto& t : pool) t.join();
}

// ---------------------------------------------------------------------------
// Maximal potentials

namespace {

struct RatioProblem {
    std::function<double(double)> mass;   // nondecreasing in s
    std::function<double(double)> weight; // s^N h(s)
    double s_min = 0, s_cap = 0;
    std::vector<double> candidates;       // entry scales, kinks
    double divergence_threshold = 1e12;
};

MaxValue solve_sup(const RatioProblem& rp) {
    auto ratio = [&](double s) { return rp.mass(s) / rp.weight(s); };

    std::vector<double> cand = rp.candidates;
    // coarse log grid, 16 nodes per decade
    double decades = std::log10(rp.s_cap / rp.s_min);
    int n = std::max(8, static_cast<int>(std::ceil(16 * decades)));
    for (int i = 0; i <= n; ++i)
        cand.push_back(rp.s_min * std::pow(rp.s_cap / rp.s_min, double(i) / n));
    std::sort(cand.begin(), cand.end());
    cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
    cand.erase(std::remove_if(cand.begin(), cand.end(),
                              [&](double s) { return s < rp.s_min || s > rp.s_cap; }),
               cand.end());

    MaxValue best;
    std::size_t best_i = 0;
    for (std::size_t i = 0; i < cand.size(); ++i) {
        double v = ratio(cand[i]);
        if (v > best.value) {
            best.value = v;
            best.arg_s = cand[i];
            best_i = i;
        }
    }

    // golden-section refinement around the best node
    if (!cand.empty()) {
        double lo = best_i == 0 ? rp.s_min : cand[best_i - 1];
        double hi = best_i + 1 >= cand.size() ? rp.s_cap : cand[best_i + 1];
        double a = lo, b = hi;
        double x1 = b - kGolden * (b - a), x2 = a + kGolden * (b - a);
        double f1 = ratio(x1), f2 = ratio(x2);
        for (int it = 0; it < 48 && (b - a) > 1e-14 * rp.s_cap; ++it) {
            if (f1 < f2) {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + kGolden * (b - a);
                f2 = ratio(x2);
            } else {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - kGolden * (b - a);
                f1 = ratio(x1);
            }
            double fm = std::max(f1, f2);
            if (fm > best.value) {
                best.value = fm;
                best.arg_s = f1 > f2 ? x1 : x2;
            }
        }
    }

    // divergence toward s -> 0: ratio above threshold at s_min and growing
    // across the final decade
    double r0 = ratio(rp.s_min);
    if (r0 > rp.divergence_threshold && r0 > ratio(rp.s_min * 10.0)) {
        best.infinite = true;
        best.value = kInf;
        best.arg_s = 0;
    }
    return best;
}

}  // namespace

MaxValue max1(const SpatialMeasure& omega, const Point& x, const PotentialParams& p) {
    p.validate();
    if (!omega.is_nonnegative())
        throw std::invalid_argument("max1: measure must be nonnegative (pass a Jordan part)");
    if (omega.is_zero()) return {};

    int N = omega.dim();
    RatioProblem rp;
    rp.s_min = p.s_min();
    rp.divergence_threshold = p.divergence_threshold;

    double sat = 0;  // scale beyond which the mass saturates (finite support)
    for (const auto& a : omega.atoms()) {
        double r = std::sqrt(dist2(a.x, x));
        if (r == 0 && a.w > 0) {
            MaxValue mv;
            mv.infinite = true;
            mv.value = kInf;
            return mv;
        }
        rp.candidates.push_back(r);
        sat = std::max(sat, r);
    }
    if (omega.density()) sat = std::max(sat, max_support_distance(omega.density()->box, x));
    if (std::isinf(p.R)) {
        rp.s_cap = std::max({sat, p.d, 1.0});
        if (omega.lebesgue_constant() != 0) rp.s_cap = std::max(rp.s_cap, 1.0);
    } else {
        rp.s_cap = p.R;
    }
    rp.candidates.push_back(0.5);  // h1 kink
    rp.candidates.push_back(rp.s_cap);
    if (omega.density()) {
        double lo = min_support_distance(omega.density()->box, x);
        if (lo > 0) rp.candidates.push_back(lo);
    }
    rp.mass = [&](double s) { return omega.ball_mass(x, s, p.clip_depth); };
    rp.weight = [&, N](double s) { return ipow(s, N) * h1(s, p.alpha); };
    return solve_sup(rp);
}

MaxValue max2(const SpaceTimeMeasure& mu, const Point& x, double t, const PotentialParams& p) {
    p.validate();
    if (!mu.is_nonnegative())
        throw std::invalid_argument("max2: measure must be nonnegative (pass a Jordan part)");
    if (mu.is_zero()) return {};

    int N = mu.dim();
    RatioProblem rp;
    rp.s_min = p.s_min();
    rp.divergence_threshold = p.divergence_threshold;

    double sat = 0;
    for (const auto& a : mu.atoms()) {
        double s_entry = std::max(std::sqrt(dist2(a.x, x)), std::sqrt(2 * std::abs(t - a.t)));
        if (s_entry == 0 && a.w > 0) {
            MaxValue mv;
            mv.infinite = true;
            mv.value = kInf;
            return mv;
        }
        rp.candidates.push_back(s_entry);
        sat = std::max(sat, s_entry);
    }
    auto add_time_scale = [&](double tau) {
        double dtv = std::abs(t - tau);
        rp.candidates.push_back(std::sqrt(2 * dtv));
        sat = std::max(sat, std::sqrt(2 * dtv));
    };
    if (mu.density()) {
        const auto& g = *mu.density();
        sat = std::max(sat, max_support_distance(g.box, x));
        double lo = min_support_distance(g.box, x);
        if (lo > 0) rp.candidates.push_back(lo);
        add_time_scale(g.t0);
        add_time_scale(g.t1);
    }
    if (mu.tensor()) {
        const auto& tens = *mu.tensor();
        for (const auto& a : tens.lambda.atoms()) {
            double r = std::sqrt(dist2(a.x, x));
            rp.candidates.push_back(r);
            sat = std::max(sat, r);
        }
        if (tens.lambda.density()) {
            sat = std::max(sat, max_support_distance(tens.lambda.density()->box, x));
            double lo = min_support_distance(tens.lambda.density()->box, x);
            if (lo > 0) rp.candidates.push_back(lo);
        }
        for (const auto& piece : tens.theta.pieces) {
            add_time_scale(piece.a);
            add_time_scale(piece.b);
        }
    }
    if (std::isinf(p.R)) {
        rp.s_cap = std::max({sat, p.d, 1.0});
    } else {
        rp.s_cap = p.R;
    }
    rp.candidates.push_back(p.d);  // h2 kink
    rp.candidates.push_back(rp.s_cap);
    rp.mass = [&](double s) {
        return mu.cylinder_mass(ParabolicCylinder{x, t, s}, p.clip_depth);
    };
    rp.weight = [&, N](double s) { return ipow(s, N) * h2(s, p.beta, p.d); };
    return solve_sup(rp);
}

// ---------------------------------------------------------------------------
// Wolff potentials

WolffValue wolff_atomic(const SpaceTimeMeasure& mu, const Point& x, double t, double R) {
    if (!mu.atoms_only())
        throw std::invalid_argument("wolff_atomic: measure must be atoms-only");
    if (!mu.is_nonnegative())
        throw std::invalid_argument("wolff_atomic: measure must be nonnegative");
    int N = mu.dim();
    WolffValue out;
    for (const auto& a : mu.atoms()) {
        double s2 = std::max(dist2(a.x, x), 2 * std::abs(t - a.t));
        if (s2 == 0) {
            if (a.w > 0) {
                out.infinite = true;
                out.value = kInf;
                return out;
            }
            continue;
        }
        out.value += a.w * entry_scale_weight(std::sqrt(s2), R, N);
    }
    return out;
}

namespace {

/// Mass of the non-atomic parts of mu in Q_s(x,t).
double nonatomic_cylinder_mass(const SpaceTimeMeasure& mu, const Point& x, double t, double s,
                               int clip_depth) {
    double m = 0;
    ParabolicCylinder c{x, t, s};
    if (mu.density()) m += mu.density()->cylinder_mass(c, clip_depth);
    if (mu.tensor())
        m += mu.tensor()->lambda.ball_mass(x, s, clip_depth) *
             mu.tensor()->theta.integral(c.t_lo(), c.t_hi());
    if (mu.lebesgue_constant() != 0)
        m += mu.lebesgue_constant() * unit_ball_volume(mu.dim()) * ipow(s, mu.dim()) * s * s;
    return m;
}

/// Breakpoints of s -> mass(Q_s(x,t)) for the non-atomic parts.
std::vector<double> nonatomic_breaks(const SpaceTimeMeasure& mu, const Point& x, double t) {
    std::vector<double> br;
    auto add_t = [&](double tau) {
        br.push_back(std::sqrt(2 * std::abs(t - tau)));
    };
    if (mu.density()) {
        const auto& g = *mu.density();
        br.push_back(min_support_distance(g.box, x));
        br.push_back(max_support_distance(g.box, x));
        add_t(g.t0);
        add_t(g.t1);
    }
    if (mu.tensor()) {
        const auto& tens = *mu.tensor();
        for (const auto& a : tens.lambda.atoms()) br.push_back(std::sqrt(dist2(a.x, x)));
        if (tens.lambda.density()) {
            br.push_back(min_support_distance(tens.lambda.density()->box, x));
            br.push_back(max_support_distance(tens.lambda.density()->box, x));
        }
        for (const auto& piece : tens.theta.pieces) {
            add_t(piece.a);
            add_t(piece.b);
        }
    }
    return br;
}

/// log-s composite quadrature of mass(s)/s^{N+1} over [s_min, min(R, s_sat)],
/// analytic tail beyond saturation.  panels_scale multiplies the panel count.
double nonatomic_wolff_quad(const SpaceTimeMeasure& mu, const Point& x, double t,
                            const PotentialParams& p, int panel_mult) {
    int N = mu.dim();
    bool lebesgue = mu.lebesgue_constant() != 0;

    double s_sat = kInf;  // saturation scale (mass constant beyond it)
    if (!lebesgue) {
        Box sb;
        double tmin, tmax;
        // Only the non-atomic support matters here.
        SpaceTimeMeasure rest = mu;
        {
            SpaceTimeMeasure tmp(mu.dim());
            if (mu.density()) tmp.set_density(*mu.density());
            if (mu.tensor()) tmp.set_tensor(mu.tensor()->lambda, mu.tensor()->theta);
            rest = std::move(tmp);
        }
        if (rest.is_zero()) return 0;
        rest.support_bounds(sb, tmin, tmax);
        double spatial_reach = max_support_distance(sb, x);
        double time_reach = std::sqrt(2 * std::max(std::abs(t - tmin), std::abs(t - tmax)));
        s_sat = std::max({spatial_reach, time_reach, p.s_min() * 2});
    }

    double hi = std::min(p.R, s_sat);
    double lo = p.s_min();
    double total = 0;

    if (hi > lo) {
        std::vector<double> breaks = nonatomic_breaks(mu, x, t);
        breaks.push_back(lo);
        breaks.push_back(hi);
        for (double& b : breaks) b = std::log(std::min(std::max(b, lo), hi));
        std::sort(breaks.begin(), breaks.end());
        breaks.erase(std::unique(breaks.begin(), breaks.end(),
                                 [](double a, double b) { return std::abs(a - b) < 1e-14; }),
                     breaks.end());
        auto f = [&](double u) {
            double s = std::exp(u);
            return nonatomic_cylinder_mass(mu, x, t, s, p.clip_depth) / ipow(s, N);
        };
        double decades_total = (std::log(hi) - std::log(lo)) / std::log(10.0);
        int panels_total =
            std::max<int>(4, static_cast<int>(std::ceil(decades_total * p.nodes_per_decade / 16.0)));
        panels_total *= panel_mult;
        // distribute panels proportionally to segment length, at least 1 each
        for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
            double len = breaks[i + 1] - breaks[i];
            int n = std::max(1, static_cast<int>(std::ceil(
                                    panels_total * len / (std::log(hi) - std::log(lo)))));
            total += quad::composite_gl16(f, breaks[i], breaks[i + 1], n);
        }
    }

    // analytic tail: mass is constant (= total non-atomic mass) past s_sat
    if (!std::isinf(s_sat) && p.R > s_sat) {
        double mass_total = nonatomic_cylinder_mass(mu, x, t, s_sat * (1 + 1e-12), p.clip_depth);
        total += mass_total * entry_scale_weight(s_sat, p.R, N);
    } else if (lebesgue && !std::isinf(p.R)) {
        // nothing: covered by quadrature up to R
    }
    return total;
}

}  // namespace

WolffValue wolff(const SpaceTimeMeasure& mu, const Point& x, double t, const PotentialParams& p) {
    p.validate();
    if (!mu.is_nonnegative())
        throw std::invalid_argument("wolff: measure must be nonnegative (pass a Jordan part)");
    WolffValue out;
    if (mu.is_zero()) return out;

    if (!mu.atoms().empty()) {
        SpaceTimeMeasure at(mu.dim());
        for (const auto& a : mu.atoms()) at.add_atom(a.x, a.t, a.w);
        WolffValue av = wolff_atomic(at, x, t, p.R);
        if (av.infinite) return av;
        out.value += av.value;
    }
    if (mu.density() || mu.tensor() || mu.lebesgue_constant() != 0) {
        if (std::isinf(p.R) && mu.lebesgue_constant() != 0)
            throw std::invalid_argument("wolff: W_inf of a Lebesgue part diverges");
        double w1 = nonatomic_wolff_quad(mu, x, t, p, 1);
        double w2 = nonatomic_wolff_quad(mu, x, t, p, 2);
        int mult = 2;
        int refine = 0;
        while (std::abs(w2 - w1) > p.quad_rtol * std::max(std::abs(w2), 1e-300)) {
            if (++refine > p.max_refine)
                throw std::runtime_error(
                    "wolff: quadrature did not converge (Richardson check failed)");
            w1 = w2;
            mult *= 2;
            w2 = nonatomic_wolff_quad(mu, x, t, p, mult);
        }
        out.value += w2;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Field sweeps

namespace {

struct AtomSoA {
    std::vector<double> coords;  // dim per atom
    std::vector<double> times;
    std::vector<double> weights;
    int dim = 0;

    void load(const std::vector<SpaceTimeAtom>& atoms, int d) {
        dim = d;
        coords.resize(atoms.size() * d);
        times.resize(atoms.size());
        weights.resize(atoms.size());
        for (std::size_t j = 0; j < atoms.size(); ++j) {
            for (int a = 0; a < d; ++a) coords[j * d + a] = atoms[j].x[a];
            times[j] = atoms[j].t;
            weights[j] = atoms[j].w;
        }
    }
};

}  // namespace

PotentialField wolff_field(const SpaceTimeMeasure& mu, const SpaceTimeGrid& grid,
                           const PotentialParams& p, int workers) {
    p.validate();
    if (!mu.is_nonnegative())
        throw std::invalid_argument("wolff_field: measure must be nonnegative");
    PotentialField f = PotentialField::make(PotentialField::Kind::wolff, grid);
    int N = grid.dim();
    std::size_t S = grid.spatial_count();

    AtomSoA soa;
    soa.load(mu.atoms(), N);
    double Rinv_pow = std::isinf(p.R) ? 0.0 : ipow(1.0 / p.R, N);
    double R2 = std::isinf(p.R) ? kInf : p.R * p.R;

    // atomic part: closed form, tight loop
    if (!mu.atoms().empty()) {
        parallel_ranges(grid.node_count(), workers, [&](std::size_t b, std::size_t e) {
            Point x;
            for (std::size_t node = b; node < e; ++node) {
                std::size_t sp = node % S;
                int k = static_cast<int>(node / S);
                x = grid.spatial_node(sp);
                double t = grid.time_node(k);
                double acc = 0;
                bool inf_flag = false;
                std::size_t m = soa.weights.size();
                for (std::size_t j = 0; j < m; ++j) {
                    double d2 = 0;
                    for (int a = 0; a < N; ++a) d2 += sq(x[a] - soa.coords[j * N + a]);
                    double s2 = std::max(d2, 2 * std::abs(t - soa.times[j]));
                    if (s2 == 0) {
                        inf_flag = true;
                        break;
                    }
                    if (s2 >= R2) continue;
                    double inv = 1.0 / s2;
                    double w;  // s^{-N} via s2^{-N/2}
                    if (N == 2) {
                        w = inv;
                    } else if (N % 2 == 0) {
                        w = ipow(inv, N / 2);
                    } else {
                        w = std::pow(inv, 0.5 * N);
                    }
                    acc += soa.weights[j] * (w - Rinv_pow);
                }
                if (inf_flag) {
                    f.infinite[node] = 1;
                    f.values[node] = kInf;
                } else {
                    f.values[node] = acc / N;
                }
            }
        });
    }

    // non-atomic parts: shared s-node layout per spatial node, time levels
    // reuse the clip vectors
    bool has_density = mu.density().has_value();
    bool has_tensor = mu.tensor().has_value();
    bool has_leb = mu.lebesgue_constant() != 0;
    if (has_density || has_tensor || has_leb) {
        if (std::isinf(p.R))
            throw std::invalid_argument("wolff_field: finite R required for non-atomic parts");
        double lo = p.s_min(), hi = p.R;
        double decades = std::log10(hi / lo);
        int n_nodes = std::max(32, static_cast<int>(std::ceil(decades * p.nodes_per_decade)));
        // trapezoid in u = ln s at fixed nodes; kinks are averaged out at this
        // density, the pointwise wolff() carries the Richardson-checked path
        std::vector<double> s_nodes(n_nodes + 1), tr_w(n_nodes + 1);
        double du = (std::log(hi) - std::log(lo)) / n_nodes;
        for (int i = 0; i <= n_nodes; ++i) {
            s_nodes[i] = std::exp(std::log(lo) + i * du);
            tr_w[i] = (i == 0 || i == n_nodes) ? 0.5 * du : du;
        }
        int nt = grid.nt;
        double leb = mu.lebesgue_constant();
        double wN = unit_ball_volume(N);

        parallel_ranges(S, workers, [&](std::size_t b, std::size_t e) {
            std::vector<double> clip_density, clip_tensor;
            for (std::size_t sp = b; sp < e; ++sp) {
                Point x = grid.spatial_node(sp);
                std::vector<double> acc(nt, 0.0);
                for (int i = 0; i <= n_nodes; ++i) {
                    double s = s_nodes[i];
                    double inv_pow = ipow(1.0 / s, N);
                    double lam_mass = 0;
                    const SpaceTimeDensityGrid* g = has_density ? &*mu.density() : nullptr;
                    if (has_density) g->spatial_ball_clip(x, s, p.clip_depth, clip_density);
                    if (has_tensor)
                        lam_mass = mu.tensor()->lambda.ball_mass(x, s, p.clip_depth);
                    for (int k = 0; k < nt; ++k) {
                        double t = grid.time_node(k);
                        double a0 = t - 0.5 * s * s, b0 = t + 0.5 * s * s;
                        double mass = 0;
                        if (has_density) {
                            double vol = g->spatial_cell_volume();
                            for (std::size_t c = 0; c < clip_density.size(); ++c)
                                if (clip_density[c] != 0)
                                    mass += clip_density[c] / vol * g->slab_integral(c, a0, b0);
                        }
                        if (has_tensor)
                            mass += lam_mass * mu.tensor()->theta.integral(a0, b0);
                        if (has_leb) mass += leb * wN * ipow(s, N) * s * s;
                        acc[k] += tr_w[i] * mass * inv_pow;
                    }
                }
                for (int k = 0; k < nt; ++k) {
                    std::size_t node = grid.flat(k, sp);
                    if (!f.infinite[node]) f.values[node] += acc[k];
                }
            }
        });
    }
    return f;
}

PotentialField max1_field(const SpatialMeasure& omega, const SpaceTimeGrid& grid,
                          const PotentialParams& p, int workers) {
    PotentialField f = PotentialField::make(PotentialField::Kind::max1, grid);
    std::size_t S = grid.spatial_count();
    parallel_ranges(S, workers, [&](std::size_t b, std::size_t e) {
        for (std::size_t sp = b; sp < e; ++sp) {
            MaxValue mv = max1(omega, grid.spatial_node(sp), p);
            for (int k = 0; k < grid.nt; ++k) {
                std::size_t node = grid.flat(k, sp);
                f.values[node] = mv.value;
                f.infinite[node] = mv.infinite ? 1 : 0;
            }
        }
    });
    return f;
}

PotentialField max2_field(const SpaceTimeMeasure& mu, const SpaceTimeGrid& grid,
                          const PotentialParams& p, int workers) {
    PotentialField f = PotentialField::make(PotentialField::Kind::max2, grid);
    std::size_t S = grid.spatial_count();
    parallel_ranges(grid.node_count(), workers, [&](std::size_t b, std::size_t e) {
        for (std::size_t node = b; node < e; ++node) {
            std::size_t sp = node % S;
            int k = static_cast<int>(node / S);
            MaxValue mv = max2(mu, grid.spatial_node(sp), grid.time_node(k), p);
            f.values[node] = mv.value;
            f.infinite[node] = mv.infinite ? 1 : 0;
        }
    });
    return f;
}

// ---------------------------------------------------------------------------
// Sup-norm probe estimates

SupEstimate sup_max1(const SpatialMeasure& omega, const Box& box, int probes_per_axis,
                     const PotentialParams& p) {
    SupEstimate best;
    int dim = box.dim();
    best.arg_x.assign(dim, 0);
    if (omega.is_zero()) return best;

    auto consider = [&](const Point& x) {
        MaxValue mv = max1(omega, x, p);
        if (mv.infinite) {
            best.infinite = true;
            best.value = kInf;
            best.arg_x = x;
            best.arg_s = 0;
            return;
        }
        if (!best.infinite && mv.value > best.value) {
            best.value = mv.value;
            best.arg_x = x;
            best.arg_s = mv.arg_s;
        }
    };

    std::vector<int> idx(dim, 0);
    Point x(dim);
    while (true) {
        for (int a = 0; a < dim; ++a)
            x[a] = box.lo[a] + (idx[a] + 0.5) * box.edge(a) / probes_per_axis;
        consider(x);
        if (best.infinite) return best;
        int a = dim - 1;
        while (a >= 0 && ++idx[a] == probes_per_axis) idx[a--] = 0;
        if (a < 0) break;
    }
    for (const auto& atom : omega.atoms()) {
        consider(atom.x);
        if (best.infinite) return best;
    }

    // two local refinement rounds around the maximizer
    double h = box.edge(0) / probes_per_axis;
    for (int round = 0; round < 2; ++round) {
        h *= 0.25;
        Point c = best.arg_x;
        std::vector<int> off(dim, -2);
        while (true) {
            Point y = c;
            for (int a = 0; a < dim; ++a) y[a] += off[a] * h;
            if (box.contains(y, 1e-12)) consider(y);
            int a = dim - 1;
            while (a >= 0 && ++off[a] == 3) off[a--] = -2;
            if (a < 0) break;
        }
        if (best.infinite) return best;
    }
    return best;
}

SupEstimate sup_max2(const SpaceTimeMeasure& mu, const Box& box, double t0, double t1,
                     int probes_per_axis, int time_probes, const PotentialParams& p) {
    SupEstimate best;
    int dim = box.dim();
    best.arg_x.assign(dim, 0);
    if (mu.is_zero()) return best;

    auto consider = [&](const Point& x, double t) {
        MaxValue mv = max2(mu, x, t, p);
        if (mv.infinite) {
            best.infinite = true;
            best.value = kInf;
            best.arg_x = x;
            best.arg_t = t;
            best.arg_s = 0;
            return;
        }
        if (!best.infinite && mv.value > best.value) {
            best.value = mv.value;
            best.arg_x = x;
            best.arg_t = t;
            best.arg_s = mv.arg_s;
        }
    };

    std::vector<int> idx(dim, 0);
    Point x(dim);
    while (true) {
        for (int a = 0; a < dim; ++a)
            x[a] = box.lo[a] + (idx[a] + 0.5) * box.edge(a) / probes_per_axis;
        for (int j = 0; j < time_probes; ++j) {
            double t = t0 + (j + 0.5) * (t1 - t0) / time_probes;
            consider(x, t);
            if (best.infinite) return best;
        }
        int a = dim - 1;
        while (a >= 0 && ++idx[a] == probes_per_axis) idx[a--] = 0;
        if (a < 0) break;
    }
    for (const auto& atom : mu.atoms()) {
        consider(atom.x, atom.t);
        if (best.infinite) return best;
    }
    if (mu.tensor())
        for (const auto& atom : mu.tensor()->lambda.atoms())
            for (int j = 0; j <= time_probes; ++j)
                consider(atom.x, t0 + j * (t1 - t0) / time_probes);
    if (best.infinite) return best;

    double h = box.edge(0) / probes_per_axis;
    double ht = (t1 - t0) / std::max(1, time_probes);
    for (int round = 0; round < 2; ++round) {
        h *= 0.25;
        ht *= 0.25;
        Point c = best.arg_x;
        double ct = best.arg_t;
        std::vector<int> off(dim, -2);
        while (true) {
            Point y = c;
            for (int a = 0; a < dim; ++a) y[a] += off[a] * h;
            if (box.contains(y, 1e-12))
                for (int j = -2; j <= 2; ++j) {
                    double t = std::min(t1, std::max(t0, ct + j * ht));
                    consider(y, t);
                }
            int a = dim - 1;
            while (a >= 0 && ++off[a] == 3) off[a--] = -2;
            if (a < 0) break;
        }
        if (best.infinite) return best;
    }
    return best;
}

}  // namespace parapot
