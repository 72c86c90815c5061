#pragma once

#include "parapot/geometry.hpp"
#include "parapot/measures.hpp"
#include "parapot/potentials.hpp"

namespace parapot {

/// Dirichlet Green function construction on box domains.
struct GreenConfig {
    enum class Method { automatic, reflections, eigen_series };

    int images = 5;           // reflection images per axis, each side
    int modes = 64;           // eigen-series modes per axis
    double eps_trunc = 1e-10; // last-term truncation bound
    double switch_time = -1;  // < 0: per-axis default L^2/(4 pi^2)
    Method method = Method::automatic;

    double switch_time_for(double L) const {
        return switch_time > 0 ? switch_time : L * L / (4 * M_PI * M_PI);
    }
};

/// Whole-space heat kernel (4 pi t)^{-N/2} exp(-|dx|^2 / 4t); 0 for t <= 0.
double gauss(const Point& dx, double t);

/// One-axis Dirichlet kernel on [0, L] evaluated at (xi, eta).
double green_interval(double L, double xi, double eta, double t, const GreenConfig& cfg);

/// ∫_a^b of the one-axis Dirichlet kernel in its second argument.
double green_interval_cell(double L, double xi, double a, double b, double t,
                           const GreenConfig& cfg);

/// One-axis whole-space kernel integral ∫_a^b (4 pi t)^{-1/2} e^{-(x-y)^2/4t} dy.
double gauss_interval_cell(double x, double a, double b, double t);

/// Product-form Dirichlet Green function of the box; throws when the
/// configured truncation cannot reach eps_trunc.
double green_box(const Box& box, const Point& x, double t, const Point& y,
                 const GreenConfig& cfg);

/// Whole-space convolution ∫ G(x-y, t) d omega(y); exact per density cell
/// via erf products.
double gauss_convolution(const SpatialMeasure& omega, const Point& x, double t);

/// G[omega](x,t) = ∫ G^Omega(x, t, y) d omega(y) on the box, or the
/// whole-space bound when whole_space is set.
double apply_G_point(const SpatialMeasure& omega, const Box& box, const Point& x, double t,
                     const GreenConfig& cfg, bool whole_space = false);

PotentialField apply_G(const SpatialMeasure& omega, const SpaceTimeGrid& grid,
                       const GreenConfig& cfg, bool whole_space = false, int workers = 1);

/// Duhamel value ∫_{Q_t} G^Omega(x, t-s, y) d mu(y, s).
double duhamel_point(const SpaceTimeMeasure& mu, const Box& box, const Point& x, double t,
                     const GreenConfig& cfg);

PotentialField duhamel(const SpaceTimeMeasure& mu, const SpaceTimeGrid& grid,
                       const GreenConfig& cfg, int workers = 1);

}  // namespace parapot
