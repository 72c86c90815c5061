#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "parapot/geometry.hpp"

namespace parapot {

struct SpatialAtom {
    Point x;
    double w = 0;
};

struct SpaceTimeAtom {
    Point x;
    double t = 0;
    double w = 0;
};

/// Cell-wise constant density on a uniform spatial lattice.
/// values row-major, axis 0 slowest.
class DensityGrid {
  public:
    Box box;
    std::vector<int> shape;
    std::vector<double> values;

    DensityGrid() = default;
    DensityGrid(Box b, std::vector<int> shape, std::vector<double> values);

    int dim() const { return box.dim(); }
    std::size_t cell_count() const { return values.size(); }
    double cell_edge(int axis) const { return box.edge(axis) / shape[axis]; }
    double cell_volume() const;
    Box cell_box(std::size_t flat) const;
    Point cell_center(std::size_t flat) const;

    double integral() const;       // signed mass
    double integral_abs() const;   // total variation of the density part

    /// Mass of the ball B_s(x): sum over cells of value * vol(cell ∩ ball),
    /// boundary cells resolved by recursive subdivision to `depth`.
    double ball_mass(const Point& x, double s, int depth) const;

    /// Per-cell clipped volumes vol(cell ∩ B_s(x)); out resized to cell_count.
    void ball_clip(const Point& x, double s, int depth, std::vector<double>& out) const;

    DensityGrid map_values(const std::function<double(double)>& f) const;
};

/// Cell-wise constant density on a uniform space-time lattice.
/// values time-major: values[k * spatial_cells + i].
class SpaceTimeDensityGrid {
  public:
    Box box;
    double t0 = 0, t1 = 0;
    std::vector<int> shape;
    int nt = 0;
    std::vector<double> values;

    SpaceTimeDensityGrid() = default;
    SpaceTimeDensityGrid(Box b, double t0, double t1, std::vector<int> shape, int nt,
                         std::vector<double> values);

    int dim() const { return box.dim(); }
    std::size_t spatial_cells() const;
    double cell_dt() const { return (t1 - t0) / nt; }
    double spatial_cell_volume() const;
    Box spatial_cell_box(std::size_t flat) const;

    double integral() const;
    double integral_abs() const;

    /// ∫_{max(a,t0)}^{min(b,t1)} values(i, ·) dt via the time prefix table.
    double slab_integral(std::size_t spatial_cell, double a, double b) const;

    double cylinder_mass(const ParabolicCylinder& c, int depth) const;

    SpaceTimeDensityGrid map_values(const std::function<double(double)>& f) const;

  private:
    std::vector<double> prefix_;  // (nt+1) per spatial cell: cumulative time integral
    void build_prefix();

  public:
    /// Spatial-only clip helper shared with the amortized field sweeps.
    void spatial_ball_clip(const Point& x, double s, int depth, std::vector<double>& out) const;
};

/// Nonnegative integrable step function of time, as disjoint pieces [a,b) -> v.
struct StepFunction {
    struct Piece {
        double a = 0, b = 0, v = 0;
    };
    std::vector<Piece> pieces;

    double integral(double a, double b) const;
    double total() const;
    double sup() const;
    void validate() const;
};

/// Bounded signed Radon measure on R^N: atoms + optional grid density
/// (+ an analytic constant-Lebesgue part used for exact potential oracles;
/// it has infinite total variation and is rejected by the solver).
class SpatialMeasure {
  public:
    SpatialMeasure() = default;
    explicit SpatialMeasure(int dim) : dim_(dim) {}

    static SpatialMeasure from_atoms(std::vector<SpatialAtom> atoms);
    static SpatialMeasure from_density(DensityGrid density);
    static SpatialMeasure lebesgue(int dim, double constant);

    void add_atom(Point x, double w);
    void set_density(DensityGrid d);
    void set_lebesgue(double c);

    int dim() const { return dim_; }
    const std::vector<SpatialAtom>& atoms() const { return atoms_; }
    const std::optional<DensityGrid>& density() const { return density_; }
    double lebesgue_constant() const { return lebesgue_; }

    bool atoms_only() const { return !density_ && lebesgue_ == 0; }
    bool is_zero() const { return atoms_.empty() && !density_ && lebesgue_ == 0; }
    bool is_nonnegative() const;

    double ball_mass(const Point& x, double s, int clip_depth = 4) const;
    double total_variation() const;
    double total_mass() const;  // signed

    SpatialMeasure positive_part() const;
    SpatialMeasure negative_part() const;
    SpatialMeasure scaled(double c) const;

    /// Bounding box of atoms + density support; throws for a Lebesgue part.
    Box support_bounds() const;

  private:
    int dim_ = 0;
    std::vector<SpatialAtom> atoms_;
    std::optional<DensityGrid> density_;
    double lebesgue_ = 0;
};

/// Bounded signed Radon measure on R^{N+1}: atoms + grid density
/// + optional tensor product lambda ⊗ theta (+ analytic Lebesgue part).
class SpaceTimeMeasure {
  public:
    struct Tensor {
        SpatialMeasure lambda;
        StepFunction theta;
    };

    SpaceTimeMeasure() = default;
    explicit SpaceTimeMeasure(int dim) : dim_(dim) {}

    static SpaceTimeMeasure from_atoms(std::vector<SpaceTimeAtom> atoms);
    static SpaceTimeMeasure from_density(SpaceTimeDensityGrid density);
    static SpaceTimeMeasure from_tensor(SpatialMeasure lambda, StepFunction theta);
    static SpaceTimeMeasure lebesgue(int dim, double constant);

    void add_atom(Point x, double t, double w);
    void set_density(SpaceTimeDensityGrid d);
    void set_tensor(SpatialMeasure lambda, StepFunction theta);
    void set_lebesgue(double c);

    int dim() const { return dim_; }
    const std::vector<SpaceTimeAtom>& atoms() const { return atoms_; }
    const std::optional<SpaceTimeDensityGrid>& density() const { return density_; }
    const std::optional<Tensor>& tensor() const { return tensor_; }
    double lebesgue_constant() const { return lebesgue_; }

    bool atoms_only() const { return !density_ && !tensor_ && lebesgue_ == 0; }
    bool is_zero() const { return atoms_.empty() && !density_ && !tensor_ && lebesgue_ == 0; }
    bool is_nonnegative() const;

    double cylinder_mass(const ParabolicCylinder& c, int clip_depth = 4) const;
    double total_variation() const;
    double total_mass() const;

    SpaceTimeMeasure positive_part() const;
    SpaceTimeMeasure negative_part() const;
    SpaceTimeMeasure scaled(double c) const;

    /// Bounding box of the spatial support and [tmin, tmax] of the time support.
    void support_bounds(Box& spatial, double& tmin, double& tmax) const;

  private:
    int dim_ = 0;
    std::vector<SpaceTimeAtom> atoms_;
    std::optional<SpaceTimeDensityGrid> density_;
    std::optional<Tensor> tensor_;
    double lebesgue_ = 0;
};

enum class MollifierKernel {
    bump,      // exp(-1/(1-|z|^2)) on |z|<1, normalized
    wendland,  // (1-|z|)^4 (4|z|+1) on |z|<1, normalized
};

struct MollifyOptions {
    MollifierKernel kernel = MollifierKernel::bump;
    int cells_per_radius = 8;   // output lattice resolution relative to 1/n
    int subsamples = 4;         // per-axis subsamples for cell averages
    std::optional<Box> lattice_box;            // override output spatial lattice
    std::optional<std::vector<int>> lattice_shape;
    std::optional<double> lattice_t0, lattice_t1;
    std::optional<int> lattice_nt;
};

/// rho_n * omega as a pure grid density; mollifier radius 1/n.
/// Throws if an explicit lattice cannot resolve the kernel
/// (cell edge > half the radius).
SpatialMeasure mollify_spatial(const SpatialMeasure& omega, int n,
                               const MollifyOptions& opt = {});

SpaceTimeMeasure mollify_spacetime(const SpaceTimeMeasure& mu, int n,
                                   const MollifyOptions& opt = {});

/// Pointwise mollifier value (normalized, radius 1/n).
double mollifier_value(MollifierKernel kernel, int dim, int n, const Point& z);

/// Restriction mu * chi_{Q}: atoms filtered, density cells scaled by the
/// clipped volume fraction, tensor materialized onto the density grid.
SpaceTimeMeasure restrict_to_cylinder(const SpaceTimeMeasure& mu, const ParabolicCylinder& q,
                                      int clip_depth = 4);

}  // namespace parapot
