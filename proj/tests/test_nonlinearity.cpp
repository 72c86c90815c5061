#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "parapot/nonlinearity.hpp"

using namespace parapot;

namespace {

// independent long-double oracle for the exponential tail
long double tail_oracle(long double s, int ell, int terms = 60) {
    long double term = 1.0L;
    for (int j = 1; j <= ell; ++j) term *= s / j;
    long double sum = term;
    for (int j = ell + 1; j < ell + terms; ++j) {
        term *= s / j;
        sum += term;
    }
    return sum;
}

}  // namespace

TEST_CASE("E_ell definition values") {
    CHECK(E_ell(1.0, 1) == doctest::Approx(std::exp(1.0) - 1).epsilon(1e-14));
    CHECK(E_ell(0.0, 3) == 0.0);
    // leading tail behaviour s^3/6 (1 + O(s))
    double s = 1e-5;
    CHECK(E_ell(s, 3) == doctest::Approx(s * s * s / 6).epsilon(1e-4));
}

TEST_CASE("E_ell tail series avoids cancellation at tiny arguments") {
    double s = 1e-8;
    double expect = static_cast<double>(tail_oracle(1e-8L, 2));
    CHECK(E_ell(s, 2) == doctest::Approx(expect).epsilon(1e-13));
    CHECK(E_ell(s, 2) == doctest::Approx(5.0000000166666672e-17).epsilon(1e-12));
}

TEST_CASE("tail and direct evaluation agree on the overlap band") {
    for (int ell : {2, 3, 5}) {
        for (double frac : {0.25, 0.4, 0.49, 0.6, 1.0}) {
            double s = ell * frac;
            double direct;
            {
                long double head = 1.0L, term = 1.0L;
                for (int j = 1; j < ell; ++j) {
                    term *= static_cast<long double>(s) / j;
                    head += term;
                }
                direct = static_cast<double>(std::exp(static_cast<long double>(s)) - head);
            }
            CHECK(E_ell(s, ell) == doctest::Approx(direct).epsilon(1e-12));
        }
    }
}

TEST_CASE("overflow saturates to a flagged infinity") {
    CHECK(std::isinf(E_ell(800.0, 1)));
    ExpNonlinearity nl = ExpNonlinearity::make(1, 2, 1);
    CHECK(std::isinf(g_ell(40.0, nl)));  // a u^q = 1600
}

TEST_CASE("g_ell is even and vanishes at zero") {
    ExpNonlinearity nl = ExpNonlinearity::make(1, 1, 1);
    CHECK(g_ell(0.0, nl) == 0.0);
    CHECK(g_ell(-1.0, nl) == doctest::Approx(std::exp(1.0) - 1).epsilon(1e-14));
    CHECK(g_ell(-1.0, nl) == g_ell(1.0, nl));
    CHECK(signed_g_ell(-1.0, nl) == -g_ell(1.0, nl));
}

TEST_CASE("epsilon-scaling instance and property") {
    ExpNonlinearity nl = ExpNonlinearity::make(1, 1, 1);
    CHECK(g_ell(1.0, nl) <= 0.5 * g_ell(2.0, nl));
    CHECK(0.5 * g_ell(2.0, nl) == doctest::Approx((std::exp(2.0) - 1) / 2).epsilon(1e-14));

    std::mt19937_64 rng(1234);
    std::uniform_real_distribution<double> ueps(0.01, 1.0), us(0.0, 6.0), uq(1.0, 2.5);
    std::uniform_int_distribution<int> uell(1, 4);
    for (int i = 0; i < 200; ++i) {
        double eps = ueps(rng), s = us(rng);
        ExpNonlinearity n = ExpNonlinearity::make(1.0, uq(rng), uell(rng));
        double lhs = g_ell(s, n);
        double rhs = std::pow(eps, n.ell * n.q) * g_ell(s / eps, n);
        if (std::isinf(rhs)) continue;
        CHECK(lhs <= rhs * (1 + 1e-12) + 1e-300);
    }
}

TEST_CASE("convexity three-term split with the stated weights") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> ux(0.0, 2.0), ug(0.05, 0.95);
    ExpNonlinearity nl = ExpNonlinearity::make(0.7, 1.0, 2);
    for (int i = 0; i < 100; ++i) {
        double A = ux(rng), B = ux(rng), C = ux(rng), gam = ug(rng);
        double w = gam / (4 * (1 + gam));
        double w3 = (2 + gam) / (2 * (1 + gam));
        double lhs = g_ell(2 * A + 2 * B + 2 * C, nl);
        double rhs = w * g_ell(8 * (1 + gam) / gam * A, nl) +
                     w * g_ell(8 * (1 + gam) / gam * B, nl) +
                     w3 * g_ell(4 * (1 + gam) / (2 + gam) * C, nl);
        if (std::isinf(rhs)) continue;
        CHECK(lhs <= rhs * (1 + 1e-12));
    }
}

TEST_CASE("signed absorption term is nondecreasing") {
    ExpNonlinearity nl = ExpNonlinearity::make(1.3, 1.5, 2);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    for (int i = 0; i < 200; ++i) {
        double x = u(rng), y = u(rng);
        if (x > y) std::swap(x, y);
        CHECK(signed_g_ell(x, nl) <= signed_g_ell(y, nl) + 1e-14);
    }
}

TEST_CASE("g_ell_prime matches central differences") {
    ExpNonlinearity nl = ExpNonlinearity::make(0.8, 1.7, 3);
    for (double u : {0.3, 1.0, 2.4}) {
        double h = 1e-6;
        double fd = (g_ell(u + h, nl) - g_ell(u - h, nl)) / (2 * h);
        CHECK(g_ell_prime(u, nl) == doctest::Approx(fd).epsilon(1e-7));
    }
}

TEST_CASE("truncations") {
    CHECK(truncate(0.0, 1.0) == 0.0);
    CHECK(truncate_primitive(0.0, 1.0) == 0.0);
    CHECK(truncate(5.0, 2.0) == 2.0);
    CHECK(truncate_primitive(5.0, 2.0) == doctest::Approx(8.0));
    CHECK(truncate_primitive(1.5, 2.0) == doctest::Approx(1.125));
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-9.0, 9.0);
    for (int i = 0; i < 100; ++i) {
        double s = u(rng);
        CHECK(truncate(-s, 2.5) == -truncate(s, 2.5));
        CHECK(truncate_primitive(-s, 2.5) == truncate_primitive(s, 2.5));
    }
}

TEST_CASE("source constructor enforces ell q > 1") {
    CHECK_THROWS(ExpNonlinearity::make_source(1.0, 1.0, 1));
    CHECK_NOTHROW(ExpNonlinearity::make_source(1.0, 1.0, 2));
    CHECK_NOTHROW(ExpNonlinearity::make_source(1.0, 1.5, 1));
    CHECK_THROWS(ExpNonlinearity::make(0.0, 1.0, 1));
    CHECK_THROWS(ExpNonlinearity::make(1.0, 0.5, 1));
}
