#include "parapot/nonlinearity.hpp"

#include <cmath>

namespace parapot {

namespace {

constexpr double kOverflowArg = 709.0;  // exp overflows just above this

double tail_series(double s, int ell) {
    // sum_{j>=ell} s^j/j!, terms generated by recurrence, machine-precision stop.
    double term = 1.0;
    for (int j = 1; j <= ell; ++j) term *= s / j;  // s^ell/ell!
    double sum = term;
    int j = ell;
    while (true) {
        ++j;
        term *= s / j;
        double next = sum + term;
        if (next == sum) break;
        sum = next;
        if (j > ell + 2000) break;  // unreachable for s < ell/2, cheap guard
    }
    return sum;
}

}  // namespace

double E_ell(double s, int ell) {
    if (s < 0) throw std::invalid_argument("E_ell: s must be >= 0");
    if (s == 0) return 0;
    if (s > kOverflowArg) return std::numeric_limits<double>::infinity();
    if (ell == 1) return std::expm1(s);
    if (s < 0.5 * ell) return tail_series(s, ell);
    double head = 0, term = 1;
    head = term;
    for (int j = 1; j < ell; ++j) {
        term *= s / j;
        head += term;
    }
    return std::exp(s) - head;
}

double E_ell_prime(double s, int ell) {
    if (ell <= 1) {
        if (s > kOverflowArg) return std::numeric_limits<double>::infinity();
        return std::exp(s);
    }
    return E_ell(s, ell - 1);
}

double g_ell(double u, const ExpNonlinearity& nl) {
    double au = std::abs(u);
    double arg = nl.a * std::pow(au, nl.q);
    if (!std::isfinite(arg)) return std::numeric_limits<double>::infinity();
    return E_ell(arg, nl.ell);
}

double g_ell_prime(double u, const ExpNonlinearity& nl) {
    double au = std::abs(u);
    if (au == 0) {
        // q > 1: zero slope at the origin. q == 1: a * E_{ell-1}(0); E_0(0) = 1.
        if (nl.q > 1) return 0;
        return nl.ell == 1 ? nl.a : 0;
    }
    double arg = nl.a * std::pow(au, nl.q);
    if (!std::isfinite(arg)) return std::numeric_limits<double>::infinity();
    return nl.a * nl.q * std::pow(au, nl.q - 1) * E_ell_prime(arg, nl.ell);
}

}  // namespace parapot
