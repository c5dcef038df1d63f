#include "gjf/statdist.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace gjf;

TEST_SUITE_BEGIN("statdist");

TEST_CASE("chi2 cdf at zero and closed forms") {
    for (int m : {1, 2, 5}) CHECK(chi2_cdf(0.0, m) == 0.0);
    // chi^2(2) cdf is 1 - exp(-x/2)
    CHECK(chi2_cdf(2.0 * std::log(2.0), 2) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(chi2_cdf(3.841459, 1) == doctest::Approx(0.95).epsilon(1e-6));
    CHECK_THROWS_AS(chi2_cdf(-1.0, 1), std::domain_error);
    CHECK_THROWS_AS(chi2_cdf(1.0, 0), std::domain_error);
}

TEST_CASE("chi2 cdf is nondecreasing and lands in [0,1)") {
    for (int m : {1, 2, 3, 5}) {
        double prev = 0.0;
        for (double x = 0.0; x <= 40.0; x += 0.37) {
            const double v = chi2_cdf(x, m);
            CHECK(v >= prev);
            CHECK(v >= 0.0);
            CHECK(v < 1.0);
            prev = v;
        }
    }
}

TEST_CASE("threshold constant") {
    CHECK(std::isinf(threshold_constant(0.0, 1)));
    CHECK(threshold_constant(0.5, 2) ==
          doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-10));
    CHECK(threshold_constant(0.05, 1) == doctest::Approx(3.841459).epsilon(1e-5));
    // inverse property
    for (int m : {1, 3, 5})
        for (double alpha : {0.01, 0.2, 0.7}) {
            const double c = threshold_constant(alpha, m);
            CHECK(chi2_cdf(c, m) == doctest::Approx(1.0 - alpha).epsilon(1e-12));
        }
}

TEST_CASE("truncation factor values") {
    for (int m : {1, 2, 4}) CHECK(truncation_factor(0.0, m) == 1.0);
    // frozen from the quadrature oracle below
    CHECK(truncation_factor(0.05, 1) == doctest::Approx(0.720909).epsilon(1e-4));
    // closed form 1 - e^{-c/2}(1 + c/2) at c = 2 ln 2
    const double c = 2.0 * std::log(2.0);
    const double closed = 1.0 - std::exp(-0.5 * c) * (1.0 + 0.5 * c);
    CHECK(closed == doctest::Approx(0.1534264).epsilon(1e-4));
    CHECK(truncation_factor(0.5, 2) == doctest::Approx(closed).epsilon(1e-10));
}

TEST_CASE("moment identity against quadrature") {
    for (int m : {1, 2, 3, 5}) {
        for (double alpha : {0.01, 0.1, 0.5, 0.9, 0.99}) {
            const double c = threshold_constant(alpha, m);
            const double direct = oracles::truncation_factor_quadrature(c, m);
            CHECK(truncation_factor(alpha, m) == doctest::Approx(direct).epsilon(1e-10));
        }
    }
}

TEST_CASE("quantile inversion holds at the extremes") {
    for (int m : {1, 2, 5}) {
        for (double p : {1e-6, 0.001, 0.5, 0.999, 1.0 - 1e-9}) {
            const double x = chi2_quantile(p, m);
            CHECK(chi2_cdf(x, m) == doctest::Approx(p).epsilon(1e-9));
        }
    }
    CHECK(chi2_quantile(0.0, 3) == 0.0);
}

TEST_CASE("monotonicity in alpha") {
    for (int m : {1, 3}) {
        double prev_q = 1.0 + 1e-12;
        double prev_c = std::numeric_limits<double>::infinity();
        for (double alpha = 0.02; alpha < 1.0; alpha += 0.07) {
            const double q = truncation_factor(alpha, m);
            const double c = threshold_constant(alpha, m);
            CHECK(q < prev_q);
            CHECK(c < prev_c);
            prev_q = q;
            prev_c = c;
        }
    }
}

TEST_CASE("truncation constants bundle") {
    const auto zero = TruncationConstants::make(0.0, 2);
    CHECK(std::isinf(zero.c));
    CHECK(zero.q == 1.0);
    CHECK(zero.p == 1.0);
    for (double alpha : {0.05, 0.3, 0.8}) {
        const auto tc = TruncationConstants::make(alpha, 3);
        CHECK(tc.p == 1.0 - alpha);
        CHECK(tc.q > 0.0);
        CHECK(tc.q <= tc.p);
        CHECK(tc.p <= 1.0);
    }
}

TEST_CASE("normal quantile sanity") {
    CHECK(normal_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(normal_quantile(0.975) == doctest::Approx(1.959963985).epsilon(1e-8));
    CHECK(normal_cdf(normal_quantile(0.123)) == doctest::Approx(0.123).epsilon(1e-10));
}

TEST_SUITE_END();
