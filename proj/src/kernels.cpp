#include "parapot/kernels.hpp"

#include <algorithm>
#include <cmath>

#include "parapot/quadrature.hpp"

namespace parapot {

namespace {

double gauss1(double z, double t) { return std::exp(-z * z / (4 * t)) / std::sqrt(4 * M_PI * t); }

bool use_reflections(const GreenConfig& cfg, double L, double t) {
    switch (cfg.method) {
        case GreenConfig::Method::reflections: return true;
        case GreenConfig::Method::eigen_series: return false;
        case GreenConfig::Method::automatic: return t < cfg.switch_time_for(L);
    }
    return true;
}

[[noreturn]] void truncation_error(const char* what) {
    throw std::runtime_error(std::string("green: truncation insufficient for ") + what +
                             " (raise images/modes or eps_trunc)");
}

}  // namespace

double gauss(const Point& dx, double t) {
    if (t <= 0) return 0;
    int N = static_cast<int>(dx.size());
    double r2 = 0;
    for (double v : dx) r2 += v * v;
    return std::pow(4 * M_PI * t, -0.5 * N) * std::exp(-r2 / (4 * t));
}

double green_interval(double L, double xi, double eta, double t, const GreenConfig& cfg) {
    if (t <= 0) return 0;
    if (use_reflections(cfg, L, t)) {
        double acc = gauss1(xi - eta, t) - gauss1(xi + eta, t);
        double last = 0;
        for (int k = 1; k <= cfg.images; ++k) {
            double term = gauss1(xi - eta - 2 * k * L, t) - gauss1(xi + eta - 2 * k * L, t) +
                          gauss1(xi - eta + 2 * k * L, t) - gauss1(xi + eta + 2 * k * L, t);
            acc += term;
            last = std::max({gauss1(2 * k * L - xi - eta, t), gauss1(2 * k * L + xi - eta, t),
                             gauss1(2 * k * L - xi + eta, t)});
        }
        // bound on the first omitted image pair
        double omitted = gauss1(2 * (cfg.images + 1) * L - xi - eta, t);
        (void)last;
        if (omitted > cfg.eps_trunc) truncation_error("reflections");
        return acc;
    }
    double acc = 0;
    double lam1 = sq(M_PI / L);
    for (int m = 1; m <= cfg.modes; ++m) {
        double decay = std::exp(-lam1 * m * m * t);
        double bound = (2.0 / L) * decay;
        if (bound < cfg.eps_trunc && m > 1) return acc;
        acc += (2.0 / L) * std::sin(m * M_PI * xi / L) * std::sin(m * M_PI * eta / L) * decay;
    }
    if ((2.0 / L) * std::exp(-lam1 * sq(cfg.modes + 1) * t) > cfg.eps_trunc)
        truncation_error("eigen series");
    return acc;
}

double gauss_interval_cell(double x, double a, double b, double t) {
    if (t <= 0) return 0;
    double s = 2 * std::sqrt(t);
    return 0.5 * (std::erf((x - a) / s) - std::erf((x - b) / s));
}

double green_interval_cell(double L, double xi, double a, double b, double t,
                           const GreenConfig& cfg) {
    if (t <= 0) return 0;
    if (use_reflections(cfg, L, t)) {
        double s = 2 * std::sqrt(t);
        auto seg = [&](double center) {
            // ∫_a^b gauss1(center - eta) d eta
            return 0.5 * (std::erf((center - a) / s) - std::erf((center - b) / s));
        };
        auto seg_ref = [&](double center) {
            // ∫_a^b gauss1(center + eta) d eta
            return 0.5 * (std::erf((center + b) / s) - std::erf((center + a) / s));
        };
        double acc = seg(xi) - seg_ref(xi);
        for (int k = 1; k <= cfg.images; ++k) {
            acc += seg(xi - 2 * k * L) - seg_ref(xi - 2 * k * L);
            acc += seg(xi + 2 * k * L) - seg_ref(xi + 2 * k * L);
        }
        if (gauss1(2 * (cfg.images + 1) * L - xi - b, t) * (b - a) > cfg.eps_trunc)
            truncation_error("reflections");
        return acc;
    }
    double acc = 0;
    double lam1 = sq(M_PI / L);
    for (int m = 1; m <= cfg.modes; ++m) {
        double decay = std::exp(-lam1 * m * m * t);
        double bound = (2.0 / (m * M_PI)) * 2 * decay;
        if (bound < cfg.eps_trunc && m > 1) return acc;
        double cell = (L / (m * M_PI)) *
                      (std::cos(m * M_PI * a / L) - std::cos(m * M_PI * b / L));
        acc += (2.0 / L) * std::sin(m * M_PI * xi / L) * decay * cell;
    }
    if ((2.0 / (cfg.modes * M_PI)) * 2 * std::exp(-lam1 * sq(cfg.modes + 1) * t) > cfg.eps_trunc)
        truncation_error("eigen series");
    return acc;
}

double green_box(const Box& box, const Point& x, double t, const Point& y,
                 const GreenConfig& cfg) {
    if (t <= 0) return 0;
    double g = 1;
    for (int a = 0; a < box.dim(); ++a) {
        g *= green_interval(box.edge(a), x[a] - box.lo[a], y[a] - box.lo[a], t, cfg);
        if (g == 0) return 0;
    }
    return g;
}

double gauss_convolution(const SpatialMeasure& omega, const Point& x, double t) {
    if (t <= 0) return 0;
    int N = omega.dim();
    double val = 0;
    Point dx(N);
    for (const auto& a : omega.atoms()) {
        for (int ax = 0; ax < N; ++ax) dx[ax] = x[ax] - a.x[ax];
        val += a.w * gauss(dx, t);
    }
    if (omega.density()) {
        const DensityGrid& g = *omega.density();
        // per-axis cell integrals, then the separable product over cells
        std::vector<std::vector<double>> axis(N);
        for (int a = 0; a < N; ++a) {
            axis[a].resize(g.shape[a]);
            double h = g.cell_edge(a);
            for (int i = 0; i < g.shape[a]; ++i)
                axis[a][i] = gauss_interval_cell(x[a], g.box.lo[a] + i * h,
                                                 g.box.lo[a] + (i + 1) * h, t);
        }
        std::vector<int> idx(N, 0);
        std::size_t flat = 0;
        for (flat = 0; flat < g.cell_count(); ++flat) {
            double v = g.values[flat];
            if (v != 0) {
                std::size_t rem = flat;
                double prod = 1;
                for (int a = N - 1; a >= 0; --a) {
                    prod *= axis[a][rem % g.shape[a]];
                    rem /= g.shape[a];
                }
                val += v * prod;
            }
        }
    }
    val += omega.lebesgue_constant();  // Gaussian integrates to one
    return val;
}

double apply_G_point(const SpatialMeasure& omega, const Box& box, const Point& x, double t,
                     const GreenConfig& cfg, bool whole_space) {
    if (whole_space) return gauss_convolution(omega, x, t);
    if (t <= 0) return 0;
    int N = omega.dim();
    double val = 0;
    for (const auto& a : omega.atoms()) val += a.w * green_box(box, x, t, a.x, cfg);
    if (omega.density()) {
        const DensityGrid& g = *omega.density();
        std::vector<std::vector<double>> axis(N);
        for (int a = 0; a < N; ++a) {
            axis[a].resize(g.shape[a]);
            double h = g.cell_edge(a);
            double L = box.edge(a);
            for (int i = 0; i < g.shape[a]; ++i) {
                double lo = g.box.lo[a] + i * h - box.lo[a];
                double hi = lo + h;
                axis[a][i] = green_interval_cell(L, x[a] - box.lo[a], lo, hi, t, cfg);
            }
        }
        for (std::size_t flat = 0; flat < g.cell_count(); ++flat) {
            double v = g.values[flat];
            if (v != 0) {
                std::size_t rem = flat;
                double prod = 1;
                for (int a = N - 1; a >= 0; --a) {
                    prod *= axis[a][rem % g.shape[a]];
                    rem /= g.shape[a];
                }
                val += v * prod;
            }
        }
    }
    if (omega.lebesgue_constant() != 0)
        throw std::invalid_argument("apply_G: Lebesgue initial data unsupported on a box");
    return val;
}

PotentialField apply_G(const SpatialMeasure& omega, const SpaceTimeGrid& grid,
                       const GreenConfig& cfg, bool whole_space, int workers) {
    PotentialField f = PotentialField::make(PotentialField::Kind::green, grid);
    std::size_t S = grid.spatial_count();
    parallel_ranges(grid.node_count(), workers, [&](std::size_t b, std::size_t e) {
        for (std::size_t node = b; node < e; ++node) {
            std::size_t sp = node % S;
            int k = static_cast<int>(node / S);
            f.values[node] = apply_G_point(omega, grid.spatial, grid.spatial_node(sp),
                                           grid.time_node(k), cfg, whole_space);
        }
    });
    return f;
}

namespace {

/// ∫_{tau0}^{tau1} f(tau) d tau with geometric refinement toward tau = 0,
/// where the kernel stiffens.  f must be defined on (0, tau1].
template <typename F>
double integrate_kernel_time(F&& f, double tau0, double tau1) {
    if (tau1 <= tau0 || tau1 <= 0) return 0;
    tau0 = std::max(tau0, 0.0);
    double acc = 0;
    double hi = tau1;
    const int max_depth = 24;
    for (int depth = 0; depth < max_depth; ++depth) {
        double lo = std::max(tau0, hi * 0.5);
        acc += quad::gl16(f, lo, hi);
        if (lo <= tau0 + 1e-300) return acc;
        hi = lo;
    }
    // residual [tau0, hi]: kernel contribution below 2^-24 of the range
    acc += quad::gl16(f, tau0 + 1e-300 < hi ? tau0 : hi, hi);
    return acc;
}

}  // namespace

double duhamel_point(const SpaceTimeMeasure& mu, const Box& box, const Point& x, double t,
                     const GreenConfig& cfg) {
    if (t <= 0) return 0;
    int N = mu.dim();
    double val = 0;
    for (const auto& a : mu.atoms())
        if (a.t < t) val += a.w * green_box(box, x, t - a.t, a.x, cfg);

    if (mu.tensor()) {
        const auto& tens = *mu.tensor();
        auto lam_kernel = [&](double tau) {
            double k = 0;
            for (const auto& a : tens.lambda.atoms())
                k += a.w * green_box(box, x, tau, a.x, cfg);
            if (tens.lambda.density()) {
                SpatialMeasure dens(mu.dim());
                dens.set_density(*tens.lambda.density());
                k += apply_G_point(dens, box, x, tau, cfg, false);
            }
            return k;
        };
        for (const auto& piece : tens.theta.pieces) {
            double s0 = std::max(piece.a, 0.0), s1 = std::min(piece.b, t);
            if (s1 <= s0 || piece.v == 0) continue;
            val += piece.v *
                   integrate_kernel_time([&](double tau) { return lam_kernel(tau); }, t - s1,
                                         t - s0);
        }
    }

    if (mu.density()) {
        const SpaceTimeDensityGrid& g = *mu.density();
        std::size_t S = g.spatial_cells();
        double dtc = g.cell_dt();
        for (int k = 0; k < g.nt; ++k) {
            double s0 = std::max(g.t0 + k * dtc, 0.0);
            double s1 = std::min(g.t0 + (k + 1) * dtc, t);
            if (s1 <= s0) continue;
            auto slice_kernel = [&](double tau) {
                // spatial sum at time offset tau for the k-th slab values
                double acc = 0;
                std::vector<std::vector<double>> axis(N);
                for (int a = 0; a < N; ++a) {
                    axis[a].resize(g.shape[a]);
                    double h = g.box.edge(a) / g.shape[a];
                    double L = box.edge(a);
                    for (int i = 0; i < g.shape[a]; ++i) {
                        double lo = g.box.lo[a] + i * h - box.lo[a];
                        axis[a][i] =
                            green_interval_cell(L, x[a] - box.lo[a], lo, lo + h, tau, cfg);
                    }
                }
                for (std::size_t i = 0; i < S; ++i) {
                    double v = g.values[static_cast<std::size_t>(k) * S + i];
                    if (v == 0) continue;
                    std::size_t rem = i;
                    double prod = 1;
                    for (int a = N - 1; a >= 0; --a) {
                        prod *= axis[a][rem % g.shape[a]];
                        rem /= g.shape[a];
                    }
                    acc += v * prod;
                }
                return acc;
            };
            val += integrate_kernel_time(slice_kernel, t - s1, t - s0);
        }
    }

    if (mu.lebesgue_constant() != 0)
        throw std::invalid_argument("duhamel: Lebesgue forcing unsupported; use a tensor measure");
    return val;
}

PotentialField duhamel(const SpaceTimeMeasure& mu, const SpaceTimeGrid& grid,
                       const GreenConfig& cfg, int workers) {
    PotentialField f = PotentialField::make(PotentialField::Kind::green, grid);
    std::size_t S = grid.spatial_count();
    parallel_ranges(grid.node_count(), workers, [&](std::size_t b, std::size_t e) {
        for (std::size_t node = b; node < e; ++node) {
            std::size_t sp = node % S;
            int k = static_cast<int>(node / S);
            f.values[node] = duhamel_point(mu, grid.spatial, grid.spatial_node(sp),
                                           grid.time_node(k), cfg);
        }
    });
    return f;
}

}  // namespace parapot
