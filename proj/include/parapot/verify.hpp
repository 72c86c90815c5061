#pragma once

#include <map>
#include <string>
#include <vector>

#include "parapot/kernels.hpp"
#include "parapot/measures.hpp"
#include "parapot/potentials.hpp"

namespace parapot {

enum class Verdict { PASS, FAIL, INAPPLICABLE, INCONCLUSIVE };

std::string to_string(Verdict v);

struct CheckReport {
    std::string name;
    Verdict verdict = Verdict::INCONCLUSIVE;
    std::map<std::string, double> metrics;
    std::vector<std::map<std::string, double>> rows;  // one per ladder entry
    std::vector<std::string> notes;
    std::string dependence;  // what the theoretical constant depends on
};

/// Superlevel-set decay: counts |{W_R > 3 lambda, M2 <= eps lambda}| against
/// the exponential factor times |{W_R > lambda}| on a cell lattice over
/// Q_{2r}(x*, t*); PASS iff the fitted prefactor is non-increasing along the
/// descending eps ladder.
struct LevelsetOptions {
    double beta = 0;
    double R = 0;
    double d = 1;
    Point center_x;
    double center_t = 0;
    double r = 1;  // support radius bound of mu
    std::vector<double> lambda_ladder;
    std::vector<double> eps_ladder;  // descending
    int cells_per_axis = 32;
    int time_cells = 16;
    int workers = 1;
};
CheckReport check_levelset_decay(const SpaceTimeMeasure& mu, const LevelsetOptions& opt);

/// Average of exp(delta (W_R[mu*]/M2)^{1/(1-beta)}) over Q_{2r'}; PASS iff
/// finite for every delta < delta1 in the ladder and the growth fits no
/// worse than C/(delta1 - delta) (log-log slope >= -1.1).
struct DoubleAvgOptions {
    double beta = 0;
    double R = 0;
    double d = 1;
    double r = 1;        // support radius of the restriction
    double r_prime = 1;  // <= r
    Point center_x;
    double center_t = 0;
    std::vector<double> delta_ladder;  // values in (0, delta1)
    int cells_per_axis = 24;
    int time_cells = 12;
    int workers = 1;
};
CheckReport check_double_average(const SpaceTimeMeasure& mu, const DoubleAvgOptions& opt);

/// Local exponential integrability and its Wolff lift: both quantities are
/// computed on a probe set and must be finite and stable under one grid
/// refinement (ratio within 5%).
struct HexpOptions {
    double beta = 0;
    double R = 0;
    double d = 1;
    std::vector<double> r_ladder;
    std::vector<Point> centers_x;
    std::vector<double> centers_t;
    int cells_per_axis = 16;
    int time_cells = 10;
    int workers = 1;
};
CheckReport check_hexp(const SpaceTimeMeasure& mu, const HexpOptions& opt);

/// exp(delta u^alpha) <= c18 t^{-1/2} + 2 for the whole-space upper field of
/// nonnegative omega with probe norm <= M1 = c19^{-1} delta^{-1/alpha}.
struct InitExpOptions {
    double alpha = 1;
    double delta = 1;
    double d = 1;
    Box probe_box;
    int probes_per_axis = 12;
    std::vector<double> t_ladder;
    int norm_probes = 12;
    int workers = 1;
};
CheckReport check_initial_exp_bound(const SpatialMeasure& omega, const InitExpOptions& opt);

/// Nodewise duhamel(mu) <= c20 W_{2d}[mu] on the grid.
struct WolffDomOptions {
    double beta = 0;
    GreenConfig green;
    int workers = 1;
};
CheckReport check_wolff_domination(const SpaceTimeMeasure& mu, const SpaceTimeGrid& grid,
                                   const WolffDomOptions& opt);

}  // namespace parapot
