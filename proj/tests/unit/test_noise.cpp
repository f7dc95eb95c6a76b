// Copyright 2026 The fcdnp Authors.
// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include <doctest.h>

#include "fcdnp/noise.hpp"

using namespace fcdnp;

TEST_SUITE("noise")
{
    TEST_CASE("splitmix64 and xoshiro256++ reference outputs")
    {
        std::uint64_t s = 0;
        CHECK(splitmix64(s) == 0xe220a8397b1dcdafULL);
        Xoshiro256pp x;
        x.state() = {1, 2, 3, 4};
        CHECK(x() == 41943041ULL);
        CHECK(x() == 58720359ULL);
    }

    TEST_CASE("derived seeds differ per stream and are stable")
    {
        CHECK(derive_seed(1, 0) != derive_seed(1, 1));
        CHECK(derive_seed(1, 0) != derive_seed(2, 0));
        CHECK(derive_seed(5, 9) == derive_seed(5, 9));
    }

    TEST_CASE("ziggurat normals have standard moments and tails")
    {
        NormalStream n(42, 0);
        constexpr int count = 2'000'000;
        double m1 = 0, m2 = 0, m4 = 0;
        int tail3 = 0;
        for (int i = 0; i < count; ++i)
        {
            double const z = n();
            m1 += z;
            m2 += z * z;
            m4 += z * z * z * z;
            tail3 += std::fabs(z) > 3;
        }
        m1 /= count;
        m2 /= count;
        m4 /= count;
        CHECK(std::fabs(m1) < 5 * std::sqrt(1.0 / count));
        CHECK(m2 == doctest::Approx(1.0).epsilon(0.005));
        CHECK(m4 == doctest::Approx(3.0).epsilon(0.02));
        double const p3 = std::erfc(3 / std::sqrt(2.0));
        CHECK(double(tail3) / count == doctest::Approx(p3).epsilon(0.06));
    }
}
