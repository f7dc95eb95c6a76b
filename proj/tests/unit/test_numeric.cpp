// Copyright 2026 The fcdnp Authors.
// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <numbers>

#include <doctest.h>

#include "fcdnp/error.hpp"
#include "fcdnp/numeric.hpp"

using namespace fcdnp;
using namespace fcdnp::numeric;

TEST_SUITE("numeric")
{
    TEST_CASE("adaptive Simpson matches closed-form integrals")
    {
        double const sin_int = adaptive_simpson([](double x) { return std::sin(x); }, 0,
                                                std::numbers::pi, 1e-12);
        CHECK(sin_int == doctest::Approx(2.0).epsilon(1e-11));
        double const gauss = adaptive_simpson([](double x) { return std::exp(-x * x); }, -6, 6,
                                              1e-12);
        CHECK(gauss == doctest::Approx(std::sqrt(std::numbers::pi)).epsilon(1e-11));
    }

    TEST_CASE("find_root and bisect_root agree on monotone functions")
    {
        auto f = [](double x) { return x * x * x - 2; };
        double const r1 = find_root(f, 0, 2);
        double const r2 = bisect_root(f, 0, 2);
        CHECK(r1 == doctest::Approx(std::cbrt(2.0)).epsilon(1e-14));
        CHECK(std::fabs(r2 - std::cbrt(2.0)) <= 4e-16);
        CHECK_THROWS_AS(find_root(f, 2, 3), CalibrationError);
    }

    TEST_CASE("monotone cubic is exact at nodes and does not overshoot")
    {
        std::vector<double> x{0, 1, 2, 3, 4, 5};
        std::vector<double> y{0, 0.1, 0.1, 5, 5.2, 10};
        MonotoneCubic c(x, y);
        for (std::size_t i = 0; i < x.size(); ++i)
            CHECK(c(x[i]) == y[i]);
        double prev = c(0);
        for (int i = 1; i <= 5000; ++i)
        {
            double const v = c(i * 1e-3);
            CHECK(v >= prev - 1e-15);
            prev = v;
        }
        // Flat segment stays flat.
        CHECK(c(1.5) == doctest::Approx(0.1));
        // Derivative against a central difference.
        double const h = 1e-6;
        CHECK(c.derivative(2.5) == doctest::Approx((c(2.5 + h) - c(2.5 - h)) / (2 * h)).epsilon(1e-6));
    }
}
