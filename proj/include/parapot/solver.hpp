#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "parapot/constants.hpp"
#include "parapot/kernels.hpp"
#include "parapot/measures.hpp"
#include "parapot/nonlinearity.hpp"
#include "parapot/potentials.hpp"

namespace parapot {

struct SchemeOptions {
    double theta = 1.0;  // implicit weight; 1 keeps the step monotone
    double cg_rtol = 1e-12;
    int cg_maxit = 4000;

    int moll_base = 8;  // coarsest smoothing index n0
    int moll_levels = 3;
    double ladder_rtol = 1e-3;

    int trunc_levels = 3;    // T_k ladder for the L^1 perturbations
    double trunc_base = 1.0; // k0

    double newton_tol = 1e-12;
    int newton_maxit = 80;

    double cross_validation_rtol = 0.25;  // kernel path vs march, linear kind

    int picard_maxit = 50;
    double picard_tol = 1e-6;

    MollifierKernel kernel = MollifierKernel::bump;
    int norm_probes = 7;  // admissibility sup-norm probes per axis
    int norm_time_probes = 5;
    int workers = 1;
};

struct ProblemSpec {
    Domain domain;
    ProblemKind kind = ProblemKind::linear;
    ExpNonlinearity nl{1, 1, 1};
    SpatialMeasure omega;
    SpaceTimeMeasure mu;
    std::optional<DensityGrid> f1;            // absorption kind only
    std::optional<SpaceTimeDensityGrid> f2;   // absorption kind only
    std::vector<int> nx;
    int nt = 16;
    double alpha = 1;
    double beta = 0;
    double delta = 1;  // exponential-integrability exponent (linear kind)
    SchemeOptions scheme;
    GreenConfig green;

    SpaceTimeGrid grid() const;
    ConstantsInputs constants_inputs() const;
    void validate() const;
};

enum class SolveStatus { ok, envelope_violation, overflow, not_converged };

std::string to_string(SolveStatus s);

struct IterateInfo {
    std::string ladder;  // "moll" | "trunc" | "picard"
    int level = 0;
    double l1_delta = -1;
    double g_mass = 0;
    double mass_bound = 0;
    bool mass_bound_ok = true;
    bool sandwich_ok = true;
    double sup_delta = -1;
    bool monotone_ok = true;
};

struct AdmissibilityReport {
    double m1_pos = 0, m1_neg = 0;
    double m2_pos = 0, m2_neg = 0;
    bool m1_infinite = false, m2_infinite = false;
    double M1 = 0, M2 = 0;
    bool within = true;
    std::vector<std::string> warnings;
};

struct Solution {
    PotentialField u;
    SolveStatus status = SolveStatus::ok;
    std::vector<IterateInfo> iterates;
    AdmissibilityReport admissibility;
    std::map<std::string, double> diagnostics;
    std::vector<std::string> notes;
};

Solution solve(const ProblemSpec& spec);
Solution solve_linear(const ProblemSpec& spec);
Solution solve_absorption(const ProblemSpec& spec);
Solution solve_source_picard(const ProblemSpec& spec);

/// Method-of-lines engine: centered Laplacian on the interior lattice,
/// theta-weighted implicit step solved by CG, then a per-node scalar solve
/// of u + dt sign(u) g(u) = u* (monotone, Newton with bisection fallback).
class HeatMarcher {
  public:
    HeatMarcher(const SpaceTimeGrid& grid, const SchemeOptions& opt);

    /// forcing(k, out) fills the average forcing over (t_k, t_{k+1}] per
    /// spatial node, k = 0..nt-1.  nl == nullptr marches the linear problem.
    PotentialField march(const std::vector<double>& initial,
                         const std::function<void(int, std::vector<double>&)>& forcing,
                         const ExpNonlinearity* nl) const;

    const SpaceTimeGrid& grid() const { return grid_; }

  private:
    void apply_laplacian(const std::vector<double>& u, std::vector<double>& out) const;
    void implicit_solve(std::vector<double>& u, const std::vector<double>& rhs) const;

    SpaceTimeGrid grid_;
    SchemeOptions opt_;
    std::vector<std::size_t> strides_;
};

/// Scalar root of u + dt sign(u) g(u) = rhs.
double absorption_step(double rhs, double dt, const ExpNonlinearity& nl, double tol, int maxit);

struct ZetaSpec {
    std::vector<int> k;  // sine mode per axis
    int p = 1;           // power of (T - t)/T
};

struct ResidualEntry {
    ZetaSpec zeta;
    double residual = 0;
};

/// Weak-form defect of a solution field against the analytic test family
/// of Dirichlet sine modes times (T-t)/T powers.
std::vector<ResidualEntry> weak_residual(const PotentialField& u, const ProblemSpec& spec,
                                         int modes_per_axis = 2, int max_poly = 2);

struct UniquenessVerdict {
    bool coincide = false;
    double weighted_gap = 0;  // psi-weighted mean |u1 - u2|
    double plain_l1 = 0;
    double tolerance = 0;
};

/// Weighted-gap criterion with the backward test function solving
/// -psi_t - Lap psi = 1, psi(.,T) = 0 (assembled by eigen series).
UniquenessVerdict check_uniqueness(const Solution& a, const Solution& b, const ProblemSpec& spec,
                                   double tol);

/// Fill per-node values of the backward weight psi on the grid.
std::vector<double> backward_weight(const SpaceTimeGrid& grid, int modes_per_axis = 31);

}  // namespace parapot
