#pragma once

#include <map>
#include <string>
#include <vector>

#include "parapot/nonlinearity.hpp"

namespace parapot {

enum class ProblemKind { linear, absorption, source };

std::string to_string(ProblemKind k);
ProblemKind problem_kind_from_string(const std::string& s);

/// Inputs every admissibility constant depends on.
struct ConstantsInputs {
    int N = 2;
    double alpha = 1;   // >= q
    double beta = 0;    // in [(q-1)/q, 1)
    double q = 1;
    int ell = 1;
    double a = 1;
    double d = 1;       // diam(domain) + T
    double delta = 1;   // exponent of the exponential-integrability target

    void validate() const;
};

// Quadrature values (the table entries) and their closed-form oracles.
double c19_quadrature(int N);
double c19_closed(int N);  // pi^{-N/2} Gamma(N/2 + 1)
double c18_quadrature(int N);
double c18_closed(int N);  // Gamma((N+1)/2) / (2 Gamma(N/2 + 1))
double c21_quadrature(int N);
double c21_closed(int N);  // includes the upper incomplete gamma at 1/2
double c20_quadrature(int N);  // 2^N/(2^N - 1) * c21

/// Upper incomplete gamma Gamma(a, x) for a in {1/2, 1, 3/2, ...} by the
/// recurrence from erfc / exp bases.
double upper_incomplete_gamma(double a, double x);

double delta1(double beta);

struct Delta2 {
    double value = 0;
    double kappa = 0;
    double c15 = 0;
};
Delta2 delta2(double beta);

/// l(r, R) = N^{-1}((r ∧ R)^{-N} - R^{-N}); l(r, inf) = N^{-1} r^{-N}.
double level_floor(double r, double R, int N);

/// Quadrature of W_{2d}[1] = 2 omega_N d^2 for the unit Lebesgue density.
double w2d_of_unit_density(int N, double d);

struct FixedPointB0 {
    double value = 0;      // clamped to (0, 1]
    double root = 0;       // unclamped fixed-point root
    double alternate = 0;  // (16/3 omega_N d^3 g)^{1/(lq-1)}, recorded for comparison
    bool clamped = false;
};
FixedPointB0 b0_fixed_point(const ConstantsInputs& in);

/// Empirical envelope for the unavailable exponential-Wolff bound, estimated
/// over a canonical scale-invariant probe family and doubled; cached.
double c30_empirical(int N, double beta, double d);

struct Thresholds {
    double M1 = 0, M2 = 0;
    double b0 = 0, eps1 = 0, eps2 = 0, c28 = 0, c30 = 0;  // source kind only
};
Thresholds thresholds(ProblemKind kind, const ConstantsInputs& in);

struct ConstantEntry {
    double value = 0;
    std::string formula;
    std::string provenance;
};

/// Queryable table of every admissibility constant, in a fixed row order.
class ConstantsTable {
  public:
    void add(const std::string& name, double value, std::string formula, std::string provenance);
    bool has(const std::string& name) const;
    const ConstantEntry& get(const std::string& name) const;
    const std::vector<std::string>& names() const { return order_; }

  private:
    std::vector<std::string> order_;
    std::map<std::string, ConstantEntry> entries_;
};

/// Builds the full table: geometry constants, delta ladder, and the
/// thresholds of all three problem kinds (source rows skipped when lq <= 1).
ConstantsTable make_constants_table(const ConstantsInputs& in);

}  // namespace parapot
