// Copyright 2026 The fcdnp Authors.
// SPDX-License-Identifier: Apache-2.0
#include <filesystem>
#include <fstream>

#include <doctest.h>

#include "fcdnp/error.hpp"
#include "fcdnp/result_io.hpp"

using namespace fcdnp;

namespace {

ProtocolResult sample_result()
{
    ProtocolResult r;
    r.protocol = ProtocolKind::relaxometry;
    r.temperature_K = 100;
    r.axis = "t_int_s";
    r.seed = 99;
    r.config_hash = 0xdeadbeefcafef00dULL;
    r.config = {{"protocol", "RELAXOMETRY"}, {"seed", "99"}};
    ResultRecord rec;
    rec.axis_value = 10;
    rec.values["signal"] = 1.0 / 3.0;
    rec.values["missing"] = std::nullopt;
    rec.stages = {1, 2, 3, 4, 10};
    r.records.push_back(rec);
    r.summary["t1"] = 386.0000000001;
    r.summary["inf"] = std::numeric_limits<double>::infinity();
    DecayFit f;
    f.model = DecayModel::stretched;
    f.params = {1, 2, 0.5};
    f.e_fold_time_s = 2;
    r.fits.push_back({"t1_raw@0.027T", f});
    r.peaks.push_back({2.72, 0.025, 0.4});
    DecaySeries s;
    s.t = {1, 2};
    s.y = {0.1, 0.2};
    s.protocol = "RELAXOMETRY";
    s.temperature_K = 100;
    r.series.push_back({"relax_0.027T", s});
    r.windows = {{0, 1, 0}, {1, 0.5, 0.1}};
    return r;
}

}  // namespace

TEST_SUITE("result_io")
{
    TEST_CASE("JSON and directory round trip")
    {
        auto const dir = std::filesystem::temp_directory_path() / "fcdnp_result_io_test";
        std::filesystem::remove_all(dir);
        auto const r = sample_result();
        auto const written = write_result(dir, r);
        CHECK(written.size() == 3);
        auto const back = load_result(dir);
        CHECK(back.protocol == r.protocol);
        CHECK(back.seed == 99);
        CHECK(back.config_hash == r.config_hash);
        CHECK(back.config == r.config);
        CHECK(*back.records[0].values.at("signal") == 1.0 / 3.0);
        CHECK_FALSE(back.records[0].values.at("missing").has_value());
        CHECK(back.records[0].stages.program_ns == 10);
        CHECK(back.summary.at("t1") == 386.0000000001);
        CHECK(std::isnan(back.summary.at("inf")));
        CHECK(back.fits[0].fit.params == r.fits[0].fit.params);
        CHECK(back.peaks[0].center_GHz == 2.72);
        CHECK(back.series[0].series.y == r.series[0].series.y);
        CHECK(back.windows == r.windows);
        CHECK(result_to_json(back).size() > 0);
        std::filesystem::remove_all(dir);
    }

    TEST_CASE("foreign or newer documents are version errors")
    {
        CHECK_THROWS_WITH_AS(result_from_json("{\"format\": \"other\", \"format_version\": 1}"),
                             doctest::Contains("bad magic"), VersionError);
        CHECK_THROWS_AS(result_from_json("{\"format\": \"fcdnp.result\", \"format_version\": 2}"),
                        VersionError);
        CHECK_THROWS_AS(result_from_json("not json"), VersionError);
        CHECK_THROWS_AS(result_from_json("{\"format\": \"fcdnp.result\", \"format_version\": 1}"),
                        DataError);
    }

    TEST_CASE("manifest round trip")
    {
        RunManifest m{"/a/b.cfg", "/out", 7, "SPINLOCK", "2026-01-01T00:00:00Z", 42, {"result.json"}, {"seed=7"}};
        auto const back = manifest_from_json(manifest_to_json(m));
        CHECK(back.config_path == m.config_path);
        CHECK(back.seed == 7);
        CHECK(back.config_hash == 42);
        CHECK(back.artifacts == m.artifacts);
        CHECK(back.overrides == m.overrides);
        CHECK(utc_timestamp().size() == 20);
    }
}
