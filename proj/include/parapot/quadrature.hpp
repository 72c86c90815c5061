#pragma once

#include <array>
#include <cmath>
#include <vector>

namespace parapot::quad {

// 16-point Gauss-Legendre rule on [-1, 1].
inline constexpr std::array<double, 8> kGL16X = {
    0.09501250983763744, 0.28160355077925891, 0.45801677765722739, 0.61787624440264375,
    0.75540440835500303, 0.86563120238783174, 0.94457502307323258, 0.98940093499164993};
inline constexpr std::array<double, 8> kGL16W = {
    0.18945061045506850, 0.18260341504492359, 0.16915651939500254, 0.14959598881657673,
    0.12462897125553387, 0.09515851168249278, 0.06225352393864789, 0.02715245941175409};

template <typename F>
double gl16(F&& f, double a, double b) {
    double c = 0.5 * (a + b), h = 0.5 * (b - a);
    double s = 0;
    for (int i = 0; i < 8; ++i) {
        double dx = h * kGL16X[i];
        s += kGL16W[i] * (f(c - dx) + f(c + dx));
    }
    return s * h;
}

/// Composite GL16 over [a, b] with n equal panels.
template <typename F>
double composite_gl16(F&& f, double a, double b, int n) {
    double s = 0, h = (b - a) / n;
    for (int i = 0; i < n; ++i) s += gl16(f, a + i * h, a + (i + 1) * h);
    return s;
}

/// Composite GL16 over a sorted breakpoint chain, n panels per segment.
template <typename F>
double composite_gl16_chain(F&& f, const std::vector<double>& breaks, int n_per_segment) {
    double s = 0;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i)
        s += composite_gl16(f, breaks[i], breaks[i + 1], n_per_segment);
    return s;
}

}  // namespace parapot::quad
