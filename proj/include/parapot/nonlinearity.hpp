#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

namespace parapot {

/// Parameters (a, q, ell) of the exponential nonlinearity
/// g(u) = E_ell(a |u|^q) with E_ell(s) = e^s - sum_{j<ell} s^j/j!.
struct ExpNonlinearity {
    double a = 1;
    double q = 1;
    int ell = 1;

    static ExpNonlinearity make(double a, double q, int ell) {
        if (!(a > 0)) throw std::invalid_argument("ExpNonlinearity: a must be > 0");
        if (!(q >= 1)) throw std::invalid_argument("ExpNonlinearity: q must be >= 1");
        if (ell < 1) throw std::invalid_argument("ExpNonlinearity: ell must be >= 1");
        return ExpNonlinearity{a, q, ell};
    }

    /// Source problems additionally require ell*q > 1.
    static ExpNonlinearity make_source(double a, double q, int ell) {
        ExpNonlinearity nl = make(a, q, ell);
        if (!(ell * q > 1))
            throw std::invalid_argument("ExpNonlinearity: source problems require ell*q > 1");
        return nl;
    }
};

/// E_ell(s) = e^s - sum_{j=0}^{ell-1} s^j/j! for s >= 0.
/// Evaluated by the tail series sum_{j>=ell} s^j/j! when s < ell/2 to avoid
/// the catastrophic cancellation of the direct formula at small s.
/// Overflow saturates to +infinity.
double E_ell(double s, int ell);

/// Derivative: E_ell'(s) = E_{ell-1}(s), with E_0(s) = e^s.
double E_ell_prime(double s, int ell);

/// g(u) = E_ell(a |u|^q); even in u.
double g_ell(double u, const ExpNonlinearity& nl);

/// d/du g(u) for u >= 0: a q u^{q-1} E_{ell-1}(a u^q).
double g_ell_prime(double u, const ExpNonlinearity& nl);

/// The signed absorption term sign(u) g(u).
inline double signed_g_ell(double u, const ExpNonlinearity& nl) {
    double g = g_ell(u, nl);
    return u < 0 ? -g : g;
}

/// T_k(s) = min{k, max{-k, s}}.
inline double truncate(double s, double k) {
    if (!(k > 0)) throw std::invalid_argument("truncate: k must be > 0");
    return std::min(k, std::max(-k, s));
}

/// Primitive of T_k: s^2/2 on |s| <= k, k|s| - k^2/2 beyond.
inline double truncate_primitive(double s, double k) {
    if (!(k > 0)) throw std::invalid_argument("truncate_primitive: k must be > 0");
    double as = std::abs(s);
    if (as <= k) return 0.5 * s * s;
    return k * as - 0.5 * k * k;
}

}  // namespace parapot
