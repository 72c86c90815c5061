#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "parapot/geometry.hpp"
#include "parapot/measures.hpp"

namespace parapot {

/// Parameters of the truncated maximal potentials and the Wolff quadrature.
struct PotentialParams {
    double alpha = 1;  // >= 1
    double beta = 0;   // in [0, 1)
    double R = std::numeric_limits<double>::infinity();
    double d = 1;  // diam(domain) + T of the active domain

    int nodes_per_decade = 64;  // log-s quadrature density
    double s_min_factor = 1e-6; // s_min = s_min_factor * d
    int clip_depth = 4;         // ball/cylinder cell clipping depth
    double quad_rtol = 1e-7;    // Richardson acceptance for pointwise wolff
    int max_refine = 8;
    double divergence_threshold = 1e12;

    double s_min() const { return s_min_factor * d; }

    void validate() const {
        if (!(alpha >= 1)) throw std::invalid_argument("PotentialParams: alpha must be >= 1");
        if (!(beta >= 0) || !(beta < 1))
            throw std::invalid_argument("PotentialParams: beta must be in [0,1)");
        if (!(R > 0)) throw std::invalid_argument("PotentialParams: R must be positive");
        if (!(d > 0)) throw std::invalid_argument("PotentialParams: d must be positive");
        if (!(s_min() > 0)) throw std::invalid_argument("PotentialParams: s_min must be positive");
    }
};

/// h1(s) = (-ln(s ∧ 1/2))^(1/alpha); constant (ln 2)^(1/alpha) for s >= 1/2.
double h1(double s, double alpha);

/// h2(s) = (ln(2 d / s ∨ 2))^(-beta); constant (ln 2)^(-beta) for s >= d.
double h2(double s, double beta, double d);

/// (r ∧ R)^(-N) - R^(-N), all over N; the Wolff weight picked up by a unit
/// mass entering the cylinder at scale r.  R may be infinite.
double entry_scale_weight(double r, double R, int N);

struct MaxValue {
    double value = 0;
    bool infinite = false;
    double arg_s = 0;  // scale attaining the (finite) supremum estimate
};

/// sup_{0<s<=R} omega(B_s(x)) / (s^N h1(s)); omega must be nonnegative.
MaxValue max1(const SpatialMeasure& omega, const Point& x, const PotentialParams& p);

/// sup_{0<s<=R} mu(Q_s(x,t)) / (s^N h2(s)); mu must be nonnegative.
MaxValue max2(const SpaceTimeMeasure& mu, const Point& x, double t, const PotentialParams& p);

struct WolffValue {
    double value = 0;
    bool infinite = false;
};

/// Exact closed form for atoms-only nonnegative measures:
/// sum_j w_j * entry_scale_weight(s_j, R, N), s_j = max(|x-y_j|, sqrt(2|t-tau_j|)).
WolffValue wolff_atomic(const SpaceTimeMeasure& mu, const Point& x, double t, double R);

/// W_R[mu](x,t); atomic part closed form, remaining parts by log-s composite
/// quadrature with a Richardson doubling check (throws on non-convergence).
WolffValue wolff(const SpaceTimeMeasure& mu, const Point& x, double t, const PotentialParams& p);

struct PotentialField {
    enum class Kind { wolff, max1, max2, solution, green };

    Kind kind = Kind::wolff;
    SpaceTimeGrid grid;
    std::vector<double> values;
    std::vector<std::uint8_t> infinite;

    static PotentialField make(Kind kind, const SpaceTimeGrid& grid) {
        PotentialField f;
        f.kind = kind;
        f.grid = grid;
        f.values.assign(grid.node_count(), 0.0);
        f.infinite.assign(grid.node_count(), 0);
        return f;
    }

    double value_at(int k, std::size_t sp) const { return values[grid.flat(k, sp)]; }
    bool infinite_at(int k, std::size_t sp) const { return infinite[grid.flat(k, sp)] != 0; }
};

/// Grid sweep of W_R[mu]; byte-identical results for any worker count.
PotentialField wolff_field(const SpaceTimeMeasure& mu, const SpaceTimeGrid& grid,
                           const PotentialParams& p, int workers = 1);

/// Grid sweep of M^1[omega] (time-independent; replicated across levels).
PotentialField max1_field(const SpatialMeasure& omega, const SpaceTimeGrid& grid,
                          const PotentialParams& p, int workers = 1);

/// Grid sweep of M^2[mu].
PotentialField max2_field(const SpaceTimeMeasure& mu, const SpaceTimeGrid& grid,
                          const PotentialParams& p, int workers = 1);

struct SupEstimate {
    double value = 0;
    bool infinite = false;
    Point arg_x;
    double arg_t = 0;
    double arg_s = 0;
};

/// Probe-lattice estimate of ||M^1[omega]||_inf over `box` (atom positions
/// are always included as probes); a lower bound of the true sup, tightened
/// by two local refinement rounds around the maximizer.
SupEstimate sup_max1(const SpatialMeasure& omega, const Box& box, int probes_per_axis,
                     const PotentialParams& p);

/// Same for ||M^2[mu]||_inf over box x [t0, t1].
SupEstimate sup_max2(const SpaceTimeMeasure& mu, const Box& box, double t0, double t1,
                     int probes_per_axis, int time_probes, const PotentialParams& p);

/// Partition [0, n) into `workers` contiguous chunks and run fn(begin, end)
/// on each; results must be written to disjoint slots for determinism.
void parallel_ranges(std::size_t n, int workers,
                     const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace parapot
