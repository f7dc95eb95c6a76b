// Copyright 2026 The fcdnp Authors.
// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <numbers>

#include <doctest.h>

#include "fcdnp/error.hpp"
#include "fcdnp/protocols.hpp"

using namespace fcdnp;

namespace {

ProtocolConfig quick(ProtocolKind kind)
{
    ProtocolConfig c;
    c.kind = kind;
    c.readout_duration_s = 10;
    c.integration_s = 10;
    c.seed = 17;
    c.readout_mode = ReadoutMode::model;
    return c;
}

}  // namespace

TEST_SUITE("protocols")
{
    TEST_CASE("protocol names round trip")
    {
        for (auto k : {ProtocolKind::fid, ProtocolKind::spinlock, ProtocolKind::dnp_epr_scan,
                       ProtocolKind::relaxometry, ProtocolKind::texture_scan})
            CHECK(protocol_from_string(to_string(k)) == k);
        CHECK(protocol_from_string("spinlock") == ProtocolKind::spinlock);
        CHECK_FALSE(protocol_from_string("NMR").has_value());
    }

    TEST_CASE("config mapping and rejection")
    {
        auto c = Config::parse("protocol = RELAXOMETRY\ntemperature_K = 295\n"
                               "relax.t_int_s = 1, 2, 3\nspinlock.t2prime = 10:100, 300:20\n"
                               "pump.center_GHz = 2.88\n");
        auto const p = protocol_config_from(c);
        CHECK(p.kind == ProtocolKind::relaxometry);
        CHECK(p.temperature_K == 295);
        CHECK(p.t_int_s == std::vector<double>{1, 2, 3});
        CHECK(p.relax.t2_prime(10) == 100);
        CHECK(p.pump_center_GHz == 2.88);
        CHECK_THROWS_AS(protocol_config_from(Config::parse("bogus.key = 1\n")), ConfigError);
        CHECK_THROWS_AS(protocol_config_from(Config::parse("protocol = ESR\n")), ConfigError);
        CHECK_THROWS_AS(protocol_config_from(Config::parse("acq.fs_Hz = 10\n")), ConfigError);
        CHECK(default_t_int_s().size() == 8);
    }

    TEST_CASE("stage accounting is exact and programs validate")
    {
        auto c = quick(ProtocolKind::relaxometry);
        c.t_int_s = {0.5, 3.25};
        auto const r = run_protocol(c);
        REQUIRE(r.records.size() == 4);
        for (auto const& rec : r.records)
        {
            CHECK(rec.stages.program_ns == rec.stages.total());
            CHECK(rec.stages.pump_ns == 60'000'000'000ULL);
            CHECK(rec.stages.wait_ns == std::uint64_t(std::llround(rec.axis_value * 1e9)));
        }
    }

    TEST_CASE("identical configuration and seed reproduce bit-identical results")
    {
        auto c = quick(ProtocolKind::spinlock);
        c.readout_mode = ReadoutMode::synthesize;
        c.acq.n_samples = 500;
        c.readout_duration_s = 1;
        c.integration_s = 1;
        auto const a = run_protocol(c);
        c.acq.workers = 3;
        auto const b = run_protocol(c);
        CHECK(a.windows == b.windows);
        CHECK(a.summary == b.summary);
        CHECK(a.fits.front().fit.params == b.fits.front().fit.params);
    }

    TEST_CASE("t_int = 0 gives equal signals across B_int")
    {
        auto c = quick(ProtocolKind::relaxometry);
        c.t_int_s = {0};
        c.acq.noise_sigma = 0;
        c.b_int_T = {0.027, 1.0, 9.4};
        auto const r = run_protocol(c);
        double const ref = *r.records[0].values.at("corrected_signal");
        for (auto const& rec : r.records)
            CHECK(*rec.values.at("corrected_signal") == doctest::Approx(ref).epsilon(0.01));
    }

    TEST_CASE("unreachable B_int is a shuttle-stage error")
    {
        auto c = quick(ProtocolKind::relaxometry);
        c.b_int_T = {12.0};
        c.t_int_s = {1};
        CHECK_THROWS_WITH_AS(run_protocol(c), doctest::Contains("[shuttle]"), ProtocolError);
    }

    TEST_CASE("zero pump with zero thermal polarization fails at the fit stage")
    {
        auto c = quick(ProtocolKind::spinlock);
        c.pump_duration_s = 0;
        c.acq.noise_sigma = 0;
        auto const r0 = [&] {
            auto d = c;
            d.thermal = true;
            d.thermal_polarization = 0;
            return d;
        }();
        CHECK_THROWS_WITH_AS(run_protocol(r0), doctest::Contains("[fit]"), ProtocolError);
        auto f = r0;
        f.kind = ProtocolKind::fid;
        CHECK_THROWS_WITH_AS(run_protocol(f), doctest::Contains("[fit]"), ProtocolError);
    }

    TEST_CASE("noiseless spin-lock fit is exact")
    {
        auto c = quick(ProtocolKind::spinlock);
        c.acq.noise_sigma = 0;
        auto const r = run_protocol(c);
        CHECK(r.summary.at("t2prime_fit_s") == doctest::Approx(93.5).epsilon(1e-8));
        CHECK(r.fits.front().fit.residual < 1e-9);
    }

    TEST_CASE("doubling the noise halves the spectral SNR")
    {
        auto c = quick(ProtocolKind::spinlock);
        c.acq.noise_sigma = 1;
        double const s1 = run_protocol(c).summary.at("spectrum_snr");
        c.acq.noise_sigma = 2;
        double const s2 = run_protocol(c).summary.at("spectrum_snr");
        CHECK(s1 / s2 == doctest::Approx(2.0).epsilon(0.2));
    }

    TEST_CASE("scan main-peak shift follows the zero-field splitting")
    {
        auto c = quick(ProtocolKind::dnp_epr_scan);
        c.acq.noise_sigma = 0;
        c.temperature_K = 100;
        auto const cold = run_protocol(c);
        c.temperature_K = 295;
        auto const warm = run_protocol(c);
        double const shift = cold.summary.at("main_center_GHz") - warm.summary.at("main_center_GHz");
        CHECK(std::fabs(shift - (c.dnp.zfs_center(100) - c.dnp.zfs_center(295))) < 1e-3);
    }

    TEST_CASE("texture scan reports analytic and sampled crossings")
    {
        auto c = quick(ProtocolKind::texture_scan);
        c.theta_pi = {0.5, 1.0};
        c.texture_readout_s = 60;
        auto const r = run_protocol(c);
        CHECK(*r.records[0].values.at("n_crossings") == 0);
        CHECK_FALSE(r.records[0].values.at("crossing_time_s").has_value());
        CHECK(*r.records[1].values.at("n_crossings") == 1);
        CHECK(*r.records[1].values.at("crossing_time_s")
              == doctest::Approx(*r.records[1].values.at("analytic_crossing_s")).epsilon(1e-6));
    }

    TEST_CASE("empty axes are rejected")
    {
        auto c = quick(ProtocolKind::dnp_epr_scan);
        c.scan_freqs_GHz.clear();
        CHECK_THROWS_AS(run_protocol(c), ProtocolError);
        auto t = quick(ProtocolKind::texture_scan);
        t.theta_pi.clear();
        CHECK_THROWS_AS(run_protocol(t), ProtocolError);
    }
}
