#include "parapot/solver.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "parapot/quadrature.hpp"

namespace parapot {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double field_l1(const PotentialField& f) {
    double cellvol = f.grid.dt();
    for (int a = 0; a < f.grid.dim(); ++a) cellvol *= f.grid.hx(a);
    double s = 0;
    for (double v : f.values) s += std::abs(v);
    return s * cellvol;
}

double field_l1_diff(const PotentialField& a, const PotentialField& b) {
    double cellvol = a.grid.dt();
    for (int ax = 0; ax < a.grid.dim(); ++ax) cellvol *= a.grid.hx(ax);
    double s = 0;
    for (std::size_t i = 0; i < a.values.size(); ++i) s += std::abs(a.values[i] - b.values[i]);
    return s * cellvol;
}

double field_sup(const PotentialField& f) {
    double s = 0;
    for (double v : f.values) s = std::max(s, std::abs(v));
    return s;
}

/// Cell-lookup value of a spatial grid density at x (0 outside).
double density_value(const DensityGrid& g, const Point& x) {
    std::size_t flat = 0;
    for (int a = 0; a < g.dim(); ++a) {
        double h = g.cell_edge(a);
        int i = static_cast<int>(std::floor((x[a] - g.box.lo[a]) / h));
        if (i < 0 || i >= g.shape[a]) return 0;
        flat = flat * g.shape[a] + i;
    }
    return g.values[flat];
}

/// Average of a space-time grid density over {x} x (a, b].
double st_slab_average(const SpaceTimeDensityGrid& g, const Point& x, double a, double b) {
    std::size_t flat = 0;
    for (int ax = 0; ax < g.dim(); ++ax) {
        double h = g.box.edge(ax) / g.shape[ax];
        int i = static_cast<int>(std::floor((x[ax] - g.box.lo[ax]) / h));
        if (i < 0 || i >= g.shape[ax]) return 0;
        flat = flat * g.shape[ax] + i;
    }
    return g.slab_integral(flat, a, b) / (b - a);
}

double measure_density_value(const SpatialMeasure& m, const Point& x) {
    double v = m.lebesgue_constant();
    if (m.density()) v += density_value(*m.density(), x);
    return v;
}

double measure_slab_average(const SpaceTimeMeasure& m, const Point& x, double a, double b) {
    double v = m.lebesgue_constant();
    if (m.density()) v += st_slab_average(*m.density(), x, a, b);
    if (m.tensor())
        v += measure_density_value(m.tensor()->lambda, x) * m.tensor()->theta.integral(a, b) /
             (b - a);
    return v;
}

}  // namespace

// ---------------------------------------------------------------------------
// ProblemSpec

SpaceTimeGrid ProblemSpec::grid() const {
    if (domain.kind != Domain::Kind::box)
        throw std::invalid_argument("solver: only box domains are supported");
    return SpaceTimeGrid::make(domain.box, domain.T, nx, nt);
}

ConstantsInputs ProblemSpec::constants_inputs() const {
    ConstantsInputs in;
    in.N = domain.dim();
    in.alpha = alpha;
    in.beta = beta;
    in.q = nl.q;
    in.ell = nl.ell;
    in.a = nl.a;
    in.d = domain.d();
    in.delta = delta;
    return in;
}

void ProblemSpec::validate() const {
    if (domain.kind != Domain::Kind::box)
        throw std::invalid_argument("solver: only box domains are supported");
    if (static_cast<int>(nx.size()) != domain.dim())
        throw std::invalid_argument("ProblemSpec: nx rank mismatch");
    if (kind == ProblemKind::source) {
        if (!omega.is_zero() && !omega.is_nonnegative())
            throw std::invalid_argument("ProblemSpec: source kind requires omega >= 0");
        if (!mu.is_zero() && !mu.is_nonnegative())
            throw std::invalid_argument("ProblemSpec: source kind requires mu >= 0");
        ExpNonlinearity::make_source(nl.a, nl.q, nl.ell);
    }
    if (kind != ProblemKind::absorption && (f1 || f2))
        throw std::invalid_argument("ProblemSpec: f1/f2 are absorption-kind data");
    if (omega.lebesgue_constant() != 0 || mu.lebesgue_constant() != 0)
        throw std::invalid_argument("ProblemSpec: Lebesgue parts are potential-only oracles");
}

std::string to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::ok: return "ok";
        case SolveStatus::envelope_violation: return "envelope_violation";
        case SolveStatus::overflow: return "overflow";
        case SolveStatus::not_converged: return "not_converged";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// March engine

HeatMarcher::HeatMarcher(const SpaceTimeGrid& grid, const SchemeOptions& opt)
    : grid_(grid), opt_(opt) {
    int dim = grid_.dim();
    strides_.assign(dim, 1);
    for (int a = dim - 2; a >= 0; --a)
        strides_[a] = strides_[a + 1] * static_cast<std::size_t>(grid_.nx[a + 1]);
}

void HeatMarcher::apply_laplacian(const std::vector<double>& u, std::vector<double>& out) const {
    int dim = grid_.dim();
    std::size_t S = grid_.spatial_count();
    out.assign(S, 0.0);
    std::vector<double> inv_h2(dim);
    for (int a = 0; a < dim; ++a) inv_h2[a] = 1.0 / sq(grid_.hx(a));
    std::vector<int> idx(dim, 0);
    for (std::size_t i = 0; i < S; ++i) {
        double acc = 0;
        for (int a = 0; a < dim; ++a) {
            double left = idx[a] > 0 ? u[i - strides_[a]] : 0.0;
            double right = idx[a] < grid_.nx[a] - 1 ? u[i + strides_[a]] : 0.0;
            acc += (left - 2 * u[i] + right) * inv_h2[a];
        }
        out[i] = acc;
        int a = dim - 1;
        while (a >= 0 && ++idx[a] == grid_.nx[a]) idx[a--] = 0;
    }
}

void HeatMarcher::implicit_solve(std::vector<double>& u, const std::vector<double>& rhs) const {
    // CG on (I - theta dt A) u = rhs; SPD since -A is positive semidefinite
    double c = opt_.theta * grid_.dt();
    std::size_t S = rhs.size();
    std::vector<double> r(S), p(S), Ap(S), lap(S);
    auto apply = [&](const std::vector<double>& v, std::vector<double>& out) {
        apply_laplacian(v, lap);
        out.resize(S);
        for (std::size_t i = 0; i < S; ++i) out[i] = v[i] - c * lap[i];
    };
    u = rhs;  // warm start
    apply(u, Ap);
    double rr = 0;
    for (std::size_t i = 0; i < S; ++i) {
        r[i] = rhs[i] - Ap[i];
        p[i] = r[i];
        rr += r[i] * r[i];
    }
    double rhs_norm = 0;
    for (double v : rhs) rhs_norm += v * v;
    double tol2 = sq(opt_.cg_rtol) * std::max(rhs_norm, 1e-300);
    for (int it = 0; it < opt_.cg_maxit && rr > tol2; ++it) {
        apply(p, Ap);
        double pAp = 0;
        for (std::size_t i = 0; i < S; ++i) pAp += p[i] * Ap[i];
        double alpha = rr / pAp;
        double rr_new = 0;
        for (std::size_t i = 0; i < S; ++i) {
            u[i] += alpha * p[i];
            r[i] -= alpha * Ap[i];
            rr_new += r[i] * r[i];
        }
        double beta = rr_new / rr;
        rr = rr_new;
        for (std::size_t i = 0; i < S; ++i) p[i] = r[i] + beta * p[i];
    }
}

double absorption_step(double rhs, double dt, const ExpNonlinearity& nl, double tol, int maxit) {
    if (rhs == 0) return 0;
    double sgn = rhs > 0 ? 1.0 : -1.0;
    double b = std::abs(rhs);
    // root of F(v) = v + dt g(v) - b on [0, b]; F(0) <= 0 <= F(b) when finite
    double lo = 0, hi = b, v = b;
    for (int it = 0; it < maxit; ++it) {
        double g = g_ell(v, nl);
        double F = std::isinf(g) ? kInf : v + dt * g - b;
        if (std::abs(F) <= tol * std::max(1.0, b) && std::isfinite(F)) break;
        if (F > 0)
            hi = v;
        else
            lo = v;
        double step = kInf;
        if (std::isfinite(g)) {
            double dF = 1 + dt * g_ell_prime(v, nl);
            if (std::isfinite(dF) && dF > 0) step = v - F / dF;
        }
        if (!(step > lo && step < hi)) step = 0.5 * (lo + hi);
        v = step;
    }
    return sgn * v;
}

PotentialField HeatMarcher::march(const std::vector<double>& initial,
                                  const std::function<void(int, std::vector<double>&)>& forcing,
                                  const ExpNonlinearity* nl) const {
    std::size_t S = grid_.spatial_count();
    if (initial.size() != S) throw std::invalid_argument("march: initial size mismatch");
    PotentialField f = PotentialField::make(PotentialField::Kind::solution, grid_);
    double dt = grid_.dt();
    std::vector<double> u = initial, rhs(S), F(S), lap;
    for (int k = 0; k < grid_.nt; ++k) {
        forcing(k, F);
        if (opt_.theta < 1) {
            apply_laplacian(u, lap);
            for (std::size_t i = 0; i < S; ++i)
                rhs[i] = u[i] + (1 - opt_.theta) * dt * lap[i] + dt * F[i];
        } else {
            for (std::size_t i = 0; i < S; ++i) rhs[i] = u[i] + dt * F[i];
        }
        implicit_solve(u, rhs);
        if (nl)
            for (std::size_t i = 0; i < S; ++i)
                u[i] = absorption_step(u[i], dt, *nl, opt_.newton_tol, opt_.newton_maxit);
        std::copy(u.begin(), u.end(), f.values.begin() + k * S);
    }
    return f;
}

// ---------------------------------------------------------------------------
// Admissibility

namespace {

AdmissibilityReport admissibility_report(const ProblemSpec& spec, ProblemKind kind) {
    AdmissibilityReport rep;
    Thresholds th = thresholds(kind, spec.constants_inputs());
    rep.M1 = th.M1;
    rep.M2 = th.M2;

    PotentialParams p1;
    p1.alpha = spec.alpha;
    p1.beta = spec.beta;
    p1.d = spec.domain.d();
    p1.R = kInf;
    Box probe = spec.domain.box;

    auto m1_of = [&](const SpatialMeasure& part) {
        return part.is_zero() ? SupEstimate{} : sup_max1(part, probe, spec.scheme.norm_probes, p1);
    };
    auto m2_of = [&](const SpaceTimeMeasure& part) {
        return part.is_zero()
                   ? SupEstimate{}
                   : sup_max2(part, probe, 0, spec.domain.T, spec.scheme.norm_probes,
                              spec.scheme.norm_time_probes, p1);
    };
    SupEstimate a = m1_of(spec.omega.positive_part());
    SupEstimate b = m1_of(spec.omega.negative_part());
    SupEstimate c = m2_of(spec.mu.positive_part());
    SupEstimate d = m2_of(spec.mu.negative_part());
    rep.m1_pos = a.value;
    rep.m1_neg = b.value;
    rep.m2_pos = c.value;
    rep.m2_neg = d.value;
    rep.m1_infinite = a.infinite || b.infinite;
    rep.m2_infinite = c.infinite || d.infinite;
    if (rep.m1_infinite || std::max(rep.m1_pos, rep.m1_neg) > rep.M1) {
        rep.within = false;
        rep.warnings.push_back("M1 admissibility probe exceeds the threshold; "
                               "the condition is sufficient, proceeding");
    }
    if (rep.m2_infinite || std::max(rep.m2_pos, rep.m2_neg) > rep.M2) {
        rep.within = false;
        rep.warnings.push_back("M2 admissibility probe exceeds the threshold; "
                               "the condition is sufficient, proceeding");
    }
    return rep;
}

struct MollifiedData {
    // all parts mapped to grid densities; null when the part vanishes
    std::optional<SpatialMeasure> omega_pos, omega_neg;
    std::optional<SpaceTimeMeasure> mu_pos, mu_neg;
};

MollifiedData mollify_data(const ProblemSpec& spec, int n, MollifierKernel kernel) {
    MollifiedData out;
    MollifyOptions opt;
    opt.kernel = kernel;
    auto sp = [&](const SpatialMeasure& m) -> std::optional<SpatialMeasure> {
        if (m.is_zero()) return std::nullopt;
        return mollify_spatial(m, n, opt);
    };
    auto st = [&](const SpaceTimeMeasure& m) -> std::optional<SpaceTimeMeasure> {
        if (m.is_zero()) return std::nullopt;
        return mollify_spacetime(m, n, opt);
    };
    out.omega_pos = sp(spec.omega.positive_part());
    out.omega_neg = sp(spec.omega.negative_part());
    out.mu_pos = st(spec.mu.positive_part());
    out.mu_neg = st(spec.mu.negative_part());
    return out;
}

void warn_support_margin(const ProblemSpec& spec, int n, std::vector<std::string>& notes) {
    double r = 1.0 / n;
    auto check = [&](const Box& b, const char* what) {
        for (int a = 0; a < spec.domain.dim(); ++a)
            if (b.lo[a] - spec.domain.box.lo[a] < r || spec.domain.box.hi[a] - b.hi[a] < r) {
                notes.push_back(std::string("data support within a mollifier radius of the "
                                            "boundary (") +
                                what + "); mass outside the domain is dropped");
                return;
            }
    };
    if (!spec.omega.is_zero() && spec.omega.lebesgue_constant() == 0)
        check(spec.omega.support_bounds(), "omega");
    if (!spec.mu.is_zero() && spec.mu.lebesgue_constant() == 0) {
        Box sb;
        double t0, t1;
        spec.mu.support_bounds(sb, t0, t1);
        check(sb, "mu");
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// Linear solve

Solution solve_linear(const ProblemSpec& spec) {
    spec.validate();
    if (spec.kind != ProblemKind::linear)
        throw std::invalid_argument("solve_linear: spec.kind must be linear");
    SpaceTimeGrid grid = spec.grid();
    Solution sol;
    sol.admissibility = admissibility_report(spec, ProblemKind::linear);

    if (spec.omega.is_zero() && spec.mu.is_zero()) {
        sol.u = PotentialField::make(PotentialField::Kind::solution, grid);
        sol.notes.push_back("zero data: zero solution");
        return sol;
    }

    PotentialField g_part = apply_G(spec.omega, grid, spec.green, false, spec.scheme.workers);
    PotentialField d_part = duhamel(spec.mu, grid, spec.green, spec.scheme.workers);
    sol.u = PotentialField::make(PotentialField::Kind::solution, grid);
    for (std::size_t i = 0; i < sol.u.values.size(); ++i)
        sol.u.values[i] = g_part.values[i] + d_part.values[i];

    // Wolff domination of the forced part for nonnegative data
    if (spec.mu.is_nonnegative() && !spec.mu.is_zero()) {
        PotentialParams pw;
        pw.beta = spec.beta;
        pw.d = spec.domain.d();
        pw.R = 2 * pw.d;
        double c20 = c20_quadrature(spec.domain.dim());
        PotentialField W = wolff_field(spec.mu, grid, pw, spec.scheme.workers);
        double worst = 0;
        for (std::size_t i = 0; i < W.values.size(); ++i) {
            if (W.infinite[i]) continue;
            worst = std::max(worst, d_part.values[i] - c20 * W.values[i]);
        }
        sol.diagnostics["wolff_domination_worst_gap"] = worst;
        sol.diagnostics["wolff_domination_ok"] = worst <= 1e-9 ? 1.0 : 0.0;
    }

    // cross-validation against the implicit march with mollified data
    int n = spec.scheme.moll_base << (spec.scheme.moll_levels - 1);
    warn_support_margin(spec, n, sol.notes);
    MollifiedData md = mollify_data(spec, n, spec.scheme.kernel);
    HeatMarcher marcher(grid, spec.scheme);
    std::size_t S = grid.spatial_count();
    std::vector<double> init(S, 0.0);
    for (std::size_t i = 0; i < S; ++i) {
        Point x = grid.spatial_node(i);
        double v = 0;
        if (md.omega_pos && md.omega_pos->density()) v += density_value(*md.omega_pos->density(), x);
        if (md.omega_neg && md.omega_neg->density()) v -= density_value(*md.omega_neg->density(), x);
        init[i] = v;
    }
    auto forcing = [&](int k, std::vector<double>& F) {
        F.assign(S, 0.0);
        double a = k * grid.dt(), b = (k + 1) * grid.dt();
        for (std::size_t i = 0; i < S; ++i) {
            Point x = grid.spatial_node(i);
            double v = 0;
            if (md.mu_pos) v += measure_slab_average(*md.mu_pos, x, a, b);
            if (md.mu_neg) v -= measure_slab_average(*md.mu_neg, x, a, b);
            F[i] = v;
        }
    };
    PotentialField fd = marcher.march(init, forcing, nullptr);
    double rel = field_l1_diff(sol.u, fd) / std::max(field_l1(sol.u), 1e-300);
    sol.diagnostics["cross_validation_rel_l1"] = rel;
    if (rel > spec.scheme.cross_validation_rtol)
        throw std::runtime_error("solve_linear: kernel path and finite-difference march "
                                 "disagree beyond tolerance (rel L1 " +
                                 std::to_string(rel) + ")");
    return sol;
}

// ---------------------------------------------------------------------------
// Absorption solve

namespace {

struct AbsorptionLevel {
    PotentialField u;
    IterateInfo info;
};

AbsorptionLevel absorption_level(const ProblemSpec& spec, const SpaceTimeGrid& grid, int n,
                                 double k_trunc, MollifierKernel kernel) {
    MollifiedData md = mollify_data(spec, n, kernel);
    HeatMarcher marcher(grid, spec.scheme);
    std::size_t S = grid.spatial_count();

    std::optional<DensityGrid> f1p, f1n;
    std::optional<SpaceTimeDensityGrid> f2p, f2n;
    if (spec.f1 && k_trunc > 0) {
        f1p = spec.f1->map_values([&](double v) { return std::max(truncate(v, k_trunc), 0.0); });
        f1n = spec.f1->map_values([&](double v) { return std::max(-truncate(v, k_trunc), 0.0); });
    }
    if (spec.f2 && k_trunc > 0) {
        f2p = spec.f2->map_values([&](double v) { return std::max(truncate(v, k_trunc), 0.0); });
        f2n = spec.f2->map_values([&](double v) { return std::max(-truncate(v, k_trunc), 0.0); });
    }

    enum Part { pos, neg, both };
    auto initial = [&](Part part) {
        std::vector<double> init(S, 0.0);
        for (std::size_t i = 0; i < S; ++i) {
            Point x = grid.spatial_node(i);
            double v = 0;
            if (part != neg) {
                if (md.omega_pos && md.omega_pos->density())
                    v += density_value(*md.omega_pos->density(), x);
                if (f1p) v += density_value(*f1p, x);
            }
            if (part != pos) {
                double w = 0;
                if (md.omega_neg && md.omega_neg->density())
                    w += density_value(*md.omega_neg->density(), x);
                if (f1n) w += density_value(*f1n, x);
                v += (part == both) ? -w : w;
            }
            init[i] = v;
        }
        return init;
    };
    auto forcing = [&](Part part) {
        return [&, part](int k, std::vector<double>& F) {
            F.assign(S, 0.0);
            double a = k * grid.dt(), b = (k + 1) * grid.dt();
            for (std::size_t i = 0; i < S; ++i) {
                Point x = grid.spatial_node(i);
                double v = 0;
                if (part != neg) {
                    if (md.mu_pos) v += measure_slab_average(*md.mu_pos, x, a, b);
                    if (f2p) v += st_slab_average(*f2p, x, a, b);
                }
                if (part != pos) {
                    double w = 0;
                    if (md.mu_neg) w += measure_slab_average(*md.mu_neg, x, a, b);
                    if (f2n) w += st_slab_average(*f2n, x, a, b);
                    v += (part == both) ? -w : w;
                }
                F[i] = v;
            }
        };
    };

    AbsorptionLevel out;
    out.info.ladder = "moll";
    out.info.level = n;
    out.u = marcher.march(initial(both), forcing(both), &spec.nl);
    PotentialField u1 = marcher.march(initial(pos), forcing(pos), &spec.nl);
    PotentialField u2 = marcher.march(initial(neg), forcing(neg), &spec.nl);
    PotentialField v1 = marcher.march(initial(pos), forcing(pos), nullptr);
    PotentialField v2 = marcher.march(initial(neg), forcing(neg), nullptr);

    double scale = std::max({field_sup(v1), field_sup(v2), 1.0});
    double tol = 1e-9 * scale;
    out.info.sandwich_ok = true;
    for (std::size_t i = 0; i < out.u.values.size(); ++i) {
        double u = out.u.values[i];
        bool ok = (-v2.values[i] - tol <= -u2.values[i]) && (-u2.values[i] - tol <= u) &&
                  (u <= u1.values[i] + tol) && (u1.values[i] <= v1.values[i] + tol);
        if (!ok) {
            out.info.sandwich_ok = false;
            break;
        }
    }

    double cellvol = grid.dt();
    for (int a = 0; a < grid.dim(); ++a) cellvol *= grid.hx(a);
    double gmass = 0;
    for (double v : out.u.values) gmass += g_ell(v, spec.nl);
    gmass *= cellvol;
    out.info.g_mass = gmass;
    double bound = spec.mu.total_variation() + spec.omega.total_variation();
    if (spec.f1 && k_trunc > 0) {
        bound += f1p->integral() + f1n->integral();
    }
    if (spec.f2 && k_trunc > 0) {
        bound += f2p->integral() + f2n->integral();
    }
    out.info.mass_bound = bound;
    out.info.mass_bound_ok = gmass <= 1.01 * bound + 1e-12;
    return out;
}

}  // namespace

Solution solve_absorption(const ProblemSpec& spec) {
    spec.validate();
    if (spec.kind != ProblemKind::absorption)
        throw std::invalid_argument("solve_absorption: spec.kind must be absorption");
    SpaceTimeGrid grid = spec.grid();
    Solution sol;
    sol.admissibility = admissibility_report(spec, ProblemKind::absorption);

    if (spec.omega.is_zero() && spec.mu.is_zero() && !spec.f1 && !spec.f2) {
        sol.u = PotentialField::make(PotentialField::Kind::solution, grid);
        sol.notes.push_back("zero data: zero solution");
        return sol;
    }
    warn_support_margin(spec, spec.scheme.moll_base, sol.notes);

    bool has_f = spec.f1.has_value() || spec.f2.has_value();
    std::vector<double> k_ladder;
    if (has_f)
        for (int j = 0; j < spec.scheme.trunc_levels; ++j)
            k_ladder.push_back(spec.scheme.trunc_base * std::pow(2.0, j));
    else
        k_ladder.push_back(0);  // no truncation pass

    std::optional<PotentialField> prev_k;
    std::optional<PotentialField> final_u;
    for (std::size_t kj = 0; kj < k_ladder.size(); ++kj) {
        std::optional<PotentialField> prev_n;
        for (int lvl = 0; lvl < spec.scheme.moll_levels; ++lvl) {
            int n = spec.scheme.moll_base << lvl;
            AbsorptionLevel L =
                absorption_level(spec, grid, n, k_ladder[kj], spec.scheme.kernel);
            if (prev_n) L.info.l1_delta = field_l1_diff(L.u, *prev_n);
            prev_n = L.u;
            sol.iterates.push_back(L.info);
        }
        if (kj + 1 == k_ladder.size()) final_u = *prev_n;
        if (has_f) {
            IterateInfo ki;
            ki.ladder = "trunc";
            ki.level = static_cast<int>(k_ladder[kj]);
            if (prev_k) ki.l1_delta = field_l1_diff(*prev_n, *prev_k);
            prev_k = *prev_n;
            sol.iterates.push_back(ki);
        }
    }
    sol.u = *final_u;

    // Cauchy check along the mollification ladder (final truncation level)
    std::vector<double> deltas;
    for (auto it = sol.iterates.rbegin(); it != sol.iterates.rend(); ++it)
        if (it->ladder == "moll" && it->l1_delta >= 0) {
            deltas.push_back(it->l1_delta);
            if (deltas.size() >= 2) break;
        }
    if (deltas.size() >= 2 && deltas[0] > deltas[1])
        sol.notes.push_back("mollification ladder deltas are not decreasing; "
                            "data may be inadmissible");
    return sol;
}

// ---------------------------------------------------------------------------
// Source problem, Picard iteration

Solution solve_source_picard(const ProblemSpec& spec) {
    spec.validate();
    if (spec.kind != ProblemKind::source)
        throw std::invalid_argument("solve_source_picard: spec.kind must be source");
    SpaceTimeGrid grid = spec.grid();
    Solution sol;
    sol.admissibility = admissibility_report(spec, ProblemKind::source);

    if (spec.omega.is_zero() && spec.mu.is_zero()) {
        sol.u = PotentialField::make(PotentialField::Kind::solution, grid);
        sol.notes.push_back("zero data: zero solution, converged at iteration 1");
        return sol;
    }

    int N = grid.dim();
    double c20 = c20_quadrature(N);
    Thresholds th = thresholds(ProblemKind::source, spec.constants_inputs());

    PotentialField g_part = apply_G(spec.omega, grid, spec.green, false, spec.scheme.workers);
    PotentialField d_part = duhamel(spec.mu, grid, spec.green, spec.scheme.workers);

    PotentialParams pw;
    pw.beta = spec.beta;
    pw.d = spec.domain.d();
    pw.R = 2 * pw.d;
    PotentialField W = spec.mu.is_zero()
                           ? PotentialField::make(PotentialField::Kind::wolff, grid)
                           : wolff_field(spec.mu, grid, pw, spec.scheme.workers);

    std::size_t n_nodes = grid.node_count();
    std::vector<double> envelope(n_nodes);
    std::vector<std::uint8_t> env_inf(n_nodes, 0);
    for (std::size_t i = 0; i < n_nodes; ++i) {
        if (W.infinite[i]) {
            env_inf[i] = 1;
            envelope[i] = kInf;
        } else {
            envelope[i] = g_part.values[i] + c20 * W.values[i] + c20 * th.b0;
        }
    }
    double env_tol = 1e-8 * (1 + field_sup(g_part) + c20 * th.b0);

    PotentialField u = PotentialField::make(PotentialField::Kind::solution, grid);
    for (std::size_t i = 0; i < n_nodes; ++i) u.values[i] = g_part.values[i] + d_part.values[i];

    auto envelope_check = [&](const PotentialField& f, std::size_t& bad) {
        for (std::size_t i = 0; i < n_nodes; ++i)
            if (!env_inf[i] && f.values[i] > envelope[i] + env_tol) {
                bad = i;
                return false;
            }
        return true;
    };
    std::size_t bad = 0;
    if (!envelope_check(u, bad)) {
        sol.status = SolveStatus::envelope_violation;
        sol.u = u;
        sol.notes.push_back("envelope violated by the linear iterate at node " +
                            std::to_string(bad));
        return sol;
    }

    HeatMarcher marcher(grid, spec.scheme);
    std::size_t S = grid.spatial_count();
    std::vector<double> g_vals(n_nodes);
    std::vector<double> zero_init(S, 0.0);

    for (int it = 1; it <= spec.scheme.picard_maxit; ++it) {
        bool overflow = false;
        for (std::size_t i = 0; i < n_nodes; ++i) {
            g_vals[i] = g_ell(u.values[i], spec.nl);
            if (std::isinf(g_vals[i])) {
                overflow = true;
                bad = i;
                break;
            }
        }
        if (overflow) {
            sol.status = SolveStatus::overflow;
            sol.u = u;
            sol.notes.push_back("nonlinearity overflow at node " + std::to_string(bad) +
                                "; divergence evidence");
            return sol;
        }
        auto forcing = [&](int k, std::vector<double>& F) {
            F.assign(S, 0.0);
            for (std::size_t i = 0; i < S; ++i) F[i] = g_vals[grid.flat(k, i)];
        };
        PotentialField forced = marcher.march(zero_init, forcing, nullptr);

        IterateInfo info;
        info.ladder = "picard";
        info.level = it;
        double sup_delta = 0;
        double min_gap = 0;
        PotentialField u_next = u;
        for (std::size_t i = 0; i < n_nodes; ++i) {
            double v = g_part.values[i] + d_part.values[i] + forced.values[i];
            min_gap = std::min(min_gap, v - u.values[i]);
            sup_delta = std::max(sup_delta, std::abs(v - u.values[i]));
            u_next.values[i] = v;
        }
        info.monotone_ok = min_gap >= -1e-10 * std::max(1.0, field_sup(u_next));
        info.sup_delta = sup_delta;
        if (!envelope_check(u_next, bad)) {
            sol.status = SolveStatus::envelope_violation;
            sol.iterates.push_back(info);
            sol.u = u_next;
            sol.notes.push_back("envelope violated at iteration " + std::to_string(it) +
                                ", node " + std::to_string(bad) + "; divergence evidence");
            return sol;
        }
        sol.iterates.push_back(info);
        u = u_next;
        if (sup_delta < spec.scheme.picard_tol) {
            sol.diagnostics["picard_iterations"] = it;
            sol.u = u;
            // local integrability of the doubled envelope
            double integral = 0;
            bool finite = true;
            double cellvol = grid.dt();
            for (int a = 0; a < grid.dim(); ++a) cellvol *= grid.hx(a);
            for (std::size_t i = 0; i < n_nodes; ++i) {
                if (env_inf[i]) continue;
                double g2 = g_ell(2 * envelope[i], spec.nl);
                if (std::isinf(g2)) {
                    finite = false;
                    break;
                }
                integral += g2 * cellvol;
            }
            sol.diagnostics["exploc_integral"] = finite ? integral : kInf;
            sol.diagnostics["exploc_finite"] = finite ? 1.0 : 0.0;
            return sol;
        }
    }
    sol.status = SolveStatus::not_converged;
    sol.u = u;
    sol.notes.push_back("Picard iteration did not reach the tolerance");
    return sol;
}

Solution solve(const ProblemSpec& spec) {
    switch (spec.kind) {
        case ProblemKind::linear: return solve_linear(spec);
        case ProblemKind::absorption: return solve_absorption(spec);
        case ProblemKind::source: return solve_source_picard(spec);
    }
    throw std::logic_error("solve: unknown kind");
}

// ---------------------------------------------------------------------------
// Weak residual

namespace {

struct Zeta {
    std::vector<int> k;
    int p = 1;
    Box box;
    double T = 0;

    double spatial(const Point& x) const {
        double v = 1;
        for (std::size_t a = 0; a < k.size(); ++a)
            v *= std::sin(k[a] * M_PI * (x[a] - box.lo[a]) / box.edge(a));
        return v;
    }
    double time_factor(double t) const { return std::pow((T - t) / T, p); }
    double time_factor_dt(double t) const {
        return -(p / T) * std::pow((T - t) / T, p - 1);
    }
    double laplacian_coef() const {
        double s = 0;
        for (std::size_t a = 0; a < k.size(); ++a) s += sq(k[a] * M_PI / box.edge(a));
        return -s;
    }
    double value(const Point& x, double t) const { return spatial(x) * time_factor(t); }
    double heat_adjoint(const Point& x, double t) const {
        // zeta_t + Lap zeta
        return spatial(x) * (time_factor_dt(t) + laplacian_coef() * time_factor(t));
    }
};

double measure_pairing_spatial(const SpatialMeasure& m, const Zeta& z) {
    double acc = 0;
    for (const auto& a : m.atoms()) acc += a.w * z.spatial(a.x);
    if (m.density()) {
        const DensityGrid& g = *m.density();
        for (std::size_t i = 0; i < g.cell_count(); ++i) {
            double v = g.values[i];
            if (v == 0) continue;
            acc += v * z.spatial(g.cell_center(i)) * g.cell_volume();
        }
    }
    return acc;
}

double measure_pairing_spacetime(const SpaceTimeMeasure& m, const Zeta& z) {
    double acc = 0;
    for (const auto& a : m.atoms()) acc += a.w * z.value(a.x, a.t);
    if (m.density()) {
        const SpaceTimeDensityGrid& g = *m.density();
        std::size_t S = g.spatial_cells();
        for (std::size_t i = 0; i < S; ++i) {
            Point c = g.spatial_cell_box(i).center();
            double sp = z.spatial(c);
            if (sp == 0) continue;
            for (int k = 0; k < g.nt; ++k) {
                double v = g.values[static_cast<std::size_t>(k) * S + i];
                if (v == 0) continue;
                double a0 = g.t0 + k * g.cell_dt(), b0 = a0 + g.cell_dt();
                double tf = quad::gl16([&](double t) { return z.time_factor(t); }, a0, b0);
                acc += v * sp * tf * g.spatial_cell_volume();
            }
        }
    }
    if (m.tensor()) {
        const auto& tens = *m.tensor();
        double sp = 0;
        for (const auto& a : tens.lambda.atoms()) sp += a.w * z.spatial(a.x);
        if (tens.lambda.density()) {
            const DensityGrid& g = *tens.lambda.density();
            for (std::size_t i = 0; i < g.cell_count(); ++i)
                if (g.values[i] != 0)
                    sp += g.values[i] * z.spatial(g.cell_center(i)) * g.cell_volume();
        }
        double tf = 0;
        for (const auto& piece : tens.theta.pieces)
            tf += piece.v *
                  quad::gl16([&](double t) { return z.time_factor(t); }, piece.a, piece.b);
        acc += sp * tf;
    }
    return acc;
}

}  // namespace

std::vector<ResidualEntry> weak_residual(const PotentialField& u, const ProblemSpec& spec,
                                         int modes_per_axis, int max_poly) {
    const SpaceTimeGrid& grid = u.grid;
    int dim = grid.dim();
    std::size_t S = grid.spatial_count();
    double cellvol = 1;
    for (int a = 0; a < dim; ++a) cellvol *= grid.hx(a);

    // initial slice from the density part of omega (atoms enter via the
    // measure pairing only; the t=0 trapezoid endpoint uses the density value)
    std::vector<double> u0(S, 0.0);
    for (std::size_t i = 0; i < S; ++i)
        u0[i] = measure_density_value(spec.omega, grid.spatial_node(i));

    std::vector<ResidualEntry> out;
    std::vector<int> kvec(dim, 1);
    while (true) {
        for (int p = 1; p <= max_poly; ++p) {
            Zeta z;
            z.k = kvec;
            z.p = p;
            z.box = grid.spatial;
            z.T = grid.T;

            double lhs = 0;
            // time trapezoid over levels 0..nt with the t=0 slice
            for (int k = -1; k < grid.nt; ++k) {
                double t = k < 0 ? 0.0 : grid.time_node(k);
                double wt = (k == -1 || k == grid.nt - 1) ? 0.5 * grid.dt() : grid.dt();
                double acc = 0;
                for (std::size_t i = 0; i < S; ++i) {
                    double uv = k < 0 ? u0[i] : u.values[grid.flat(k, i)];
                    Point x = grid.spatial_node(i);
                    double term = -uv * z.heat_adjoint(x, t);
                    if (spec.kind == ProblemKind::absorption)
                        term += signed_g_ell(uv, spec.nl) * z.value(x, t);
                    acc += term;
                }
                lhs += wt * acc * cellvol;
            }
            double rhs = measure_pairing_spacetime(spec.mu, z);
            // zeta(.,0) pairing with omega: spatial factor times time_factor(0)=1
            Zeta z0 = z;
            rhs += measure_pairing_spatial(spec.omega, z0) * z.time_factor(0.0);
            if (spec.f2) {
                SpaceTimeMeasure f2m(dim);
                f2m.set_density(*spec.f2);
                rhs += measure_pairing_spacetime(f2m, z);
            }
            if (spec.f1) {
                SpatialMeasure f1m(dim);
                f1m.set_density(*spec.f1);
                rhs += measure_pairing_spatial(f1m, z) * z.time_factor(0.0);
            }
            out.push_back({ZetaSpec{kvec, p}, lhs - rhs});
        }
        int a = dim - 1;
        while (a >= 0 && ++kvec[a] > modes_per_axis) kvec[a--] = 1;
        if (a < 0) break;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Uniqueness proxy

std::vector<double> backward_weight(const SpaceTimeGrid& grid, int modes_per_axis) {
    int dim = grid.dim();
    std::size_t S = grid.spatial_count();
    std::vector<double> psi(grid.node_count(), 0.0);
    std::vector<int> kvec(dim, 1);
    while (true) {
        bool all_odd = true;
        for (int a = 0; a < dim; ++a)
            if (kvec[a] % 2 == 0) all_odd = false;
        if (all_odd) {
            double lam = 0, coef = 1;
            for (int a = 0; a < dim; ++a) {
                double L = grid.spatial.edge(a);
                lam += sq(kvec[a] * M_PI / L);
                coef *= (2.0 / L) * (2 * L / (kvec[a] * M_PI));  // <1,phi> phi up to sin
            }
            for (int k = 0; k < grid.nt; ++k) {
                double tau = grid.T - grid.time_node(k);  // time to the horizon
                double tf = (1 - std::exp(-lam * tau)) / lam;
                for (std::size_t i = 0; i < S; ++i) {
                    Point x = grid.spatial_node(i);
                    double sp = 1;
                    for (int a = 0; a < dim; ++a)
                        sp *= std::sin(kvec[a] * M_PI * (x[a] - grid.spatial.lo[a]) /
                                       grid.spatial.edge(a));
                    psi[grid.flat(k, i)] += coef * tf * sp;
                }
            }
        }
        int a = dim - 1;
        while (a >= 0 && ++kvec[a] > modes_per_axis) kvec[a--] = 1;
        if (a < 0) break;
    }
    return psi;
}

UniquenessVerdict check_uniqueness(const Solution& a, const Solution& b, const ProblemSpec& spec,
                                   double tol) {
    const SpaceTimeGrid& grid = a.u.grid;
    std::vector<double> psi = backward_weight(grid);
    double num = 0, den = 0, l1 = 0;
    double cellvol = grid.dt();
    for (int ax = 0; ax < grid.dim(); ++ax) cellvol *= grid.hx(ax);
    for (std::size_t i = 0; i < psi.size(); ++i) {
        double gap = std::abs(a.u.values[i] - b.u.values[i]);
        num += gap * psi[i];
        den += psi[i];
        l1 += gap * cellvol;
    }
    UniquenessVerdict v;
    v.weighted_gap = den > 0 ? num / den : 0;
    v.plain_l1 = l1;
    v.tolerance = tol;
    v.coincide = v.weighted_gap <= tol;
    (void)spec;
    return v;
}

}  // namespace parapot
