// Copyright 2026 The fcdnp Authors.
// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <numbers>

#include <doctest.h>

#include "fcdnp/error.hpp"
#include "fcdnp/numeric.hpp"
#include "fcdnp/spinmodel.hpp"

using namespace fcdnp;

TEST_SUITE("spinmodel")
{
    TEST_CASE("T1 law passes through its anchors")
    {
        auto const p = default_relaxation();
        CHECK(t1_of(0.027, 100, p) == doctest::Approx(386).epsilon(1e-9));
        CHECK(t1_of(9.4, 100, p) == doctest::Approx(3094).epsilon(1e-9));
        double prev = 0;
        for (double b = 0.01; b < 10; b *= 1.2)
        {
            double const t = t1_of(b, 100, p);
            CHECK(t > prev);
            prev = t;
        }
        CHECK(t1_of(1.0, 295, p) < t1_of(1.0, 100, p));
    }

    TEST_CASE("relaxation along a trace matches an oversampled integral")
    {
        auto const p = default_relaxation();
        FieldTrace coarse;
        for (int i = 0; i <= 100; ++i)
            coarse.push_back({i * 1.0, 0.03 + 9.0 * i / 100.0});
        auto s = SpinEnsembleState::with_polarization(0.01, 100, 0.03);
        double const got = relax(s, coarse, p).polarization();

        auto rate = [&](double t) { return 1 / t1_of(0.03 + 9.0 * t / 100.0, 100, p); };
        double const integral = numeric::adaptive_simpson(rate, 0, 100, 1e-12);
        CHECK(got == doctest::Approx(0.01 * std::exp(-integral)).epsilon(1e-4));
    }

    TEST_CASE("relax_at is an exact exponential with equilibrium offset")
    {
        auto p = default_relaxation();
        p.p_eq = 1e-5;
        auto const s = SpinEnsembleState::with_polarization(0.002, 100, 9.4);
        double const t1 = t1_of(9.4, 100, p);
        double const got = relax_at(s, 9.4, 500, p).polarization();
        double const want = 1e-5 + (0.002 - 1e-5) * std::exp(-500 / t1);
        CHECK(got == doctest::Approx(want).epsilon(1e-12));
        CHECK(relax_at(s, 9.4, 0, p).polarization() == doctest::Approx(0.002));
        CHECK_THROWS_AS(relax_at(s, 9.4, -1, p), ValidationError);
    }

    TEST_CASE("EPR integral matches quadrature of the density")
    {
        DnpParams const d;
        auto const spec = epr_spectrum(100, d);
        for (auto [lo, hi] : {std::pair{2.6, 3.0}, {2.86, 2.91}, {2.70, 2.74}})
        {
            double const q = numeric::adaptive_simpson(
                [&](double f) { return spec.density(f); }, lo, hi, 1e-13);
            CHECK(spec.integral(lo, hi) == doctest::Approx(q).epsilon(1e-10));
        }
        CHECK(d.zfs_center(295) == doctest::Approx(2.87));
        CHECK(d.zfs_center(100) - d.zfs_center(295) == doctest::Approx(-7.4e-5 * -195));
    }

    TEST_CASE("DNP pumping matches a fine explicit integration")
    {
        auto const p = default_relaxation();
        DnpParams const d;
        auto const spec = epr_spectrum(100, d);
        PumpWindow const w{d.zfs_center(100), 0.025};
        double const r = pump_rate(w, spec, d);
        double const k1 = 1 / t1_of(0.027, 100, p);
        auto const s0 = SpinEnsembleState::with_polarization(0.001, 100, 0.027);
        double const got = dnp_pump(s0, w, 60, spec, d, 0.027, p).polarization();

        // RK4 on dP/dt = r (P_max - P) - P / T1.
        double y = 0.001;
        double const h = 0.01;
        auto f = [&](double v) { return r * (d.p_max - v) - k1 * v; };
        for (int i = 0; i < 6000; ++i)
        {
            double const a = f(y), b = f(y + h / 2 * a), c = f(y + h / 2 * b), e = f(y + h * c);
            y += h / 6 * (a + 2 * b + 2 * c + e);
        }
        CHECK(got == doctest::Approx(y).epsilon(1e-10));
    }

    TEST_CASE("low temperature pumps three times harder")
    {
        auto const p = default_relaxation();
        DnpParams const d;
        auto pumped = [&](double temp) {
            auto const spec = epr_spectrum(temp, d);
            auto const s0 = SpinEnsembleState::with_polarization(0, temp, 0.027);
            return dnp_pump(s0, {d.zfs_center(temp), 0.025}, 90, spec, d, 0.027, p).polarization();
        };
        CHECK(pumped(100) / pumped(295) == doctest::Approx(3.0).epsilon(1e-6));
        CHECK(calibrate_temperature_exponent(p, d) == doctest::Approx(p.temp_exponent).epsilon(1e-6));
    }

    TEST_CASE("T2' table interpolates log-log and clamps")
    {
        auto const p = default_relaxation();
        CHECK(p.t2_prime(100) == doctest::Approx(93.5));
        CHECK(p.t2_prime(1) == p.t2_prime(10));
        CHECK(p.t2_prime(1000) == p.t2_prime(295));
        double const t = 200;
        double const want = std::exp(std::log(93.5)
                                     + (std::log(25.0) - std::log(93.5))
                                           * (std::log(t) - std::log(100.0))
                                           / (std::log(295.0) - std::log(100.0)));
        CHECK(p.t2_prime(t) == doctest::Approx(want).epsilon(1e-12));
    }

    TEST_CASE("FID and spin-lock decays have their defining 1/e times")
    {
        auto const p = default_relaxation();
        auto const s = SpinEnsembleState::with_polarization(0.004, 100, 9.4);
        auto const fid = fid_series(s, p, 1e-5, 200);
        CHECK(fid.y[0] == doctest::Approx(0.004));
        CHECK(fid.y[110] == doctest::Approx(0.004 / std::numbers::e).epsilon(1e-12));
        CHECK(spinlock_amplitude(0.004, std::numbers::pi / 2, 93.5, 100, p)
              == doctest::Approx(0.004 / std::numbers::e).epsilon(1e-12));
    }

    TEST_CASE("texture crossing: closed form matches the sampled series")
    {
        auto const p = default_relaxation();
        auto const s = SpinEnsembleState::with_polarization(0.004, 100, 9.4);
        auto const half = spinlock_series(s, std::numbers::pi / 2, 68e-6, 75e-6, 400000, p);
        CHECK_FALSE(zero_crossing_time(half).has_value());
        CHECK_FALSE(texture_crossing_time(std::numbers::pi / 2, 100, p).has_value());
        auto const full = spinlock_series(s, std::numbers::pi, 68e-6, 75e-6, 2000000, p);
        auto const tc = zero_crossing_time(full);
        auto const ta = texture_crossing_time(std::numbers::pi, 100, p);
        REQUIRE(tc.has_value());
        REQUIRE(ta.has_value());
        CHECK(*tc == doctest::Approx(*ta).epsilon(1e-6));
        CHECK_THROWS_AS(spinlock_series(s, 1.0, 80e-6, 75e-6, 10, p), ValidationError);
    }

    TEST_CASE("zero-crossing interpolation is linear")
    {
        DecaySeries s;
        s.t = {0, 1, 2, 3};
        s.y = {3, 1, -1, -3};
        CHECK(*zero_crossing_time(s) == doctest::Approx(1.5));
    }
}
