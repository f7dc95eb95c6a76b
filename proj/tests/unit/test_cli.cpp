// Copyright 2026 The fcdnp Authors.
// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>
#include <json.hpp>

#include "cli.hpp"
#include "fcdnp/result_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome
{
    int code = 0;
    std::string out;
    std::string err;
};

Outcome cli(std::vector<std::string> args)
{
    args.insert(args.begin(), "fcdnp");
    std::vector<char const*> argv;
    for (auto const& a : args)
        argv.push_back(a.c_str());
    std::ostringstream out, err;
    int const code = fcdnp::cli::run(int(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(std::string const& name)
{
    auto const p = fs::temp_directory_path() / ("fcdnp_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string source(std::string const& rel)
{
    return std::string(FCDNP_SOURCE_DIR) + "/" + rel;
}

double field(std::string const& text, std::string const& key)
{
    auto const pos = text.find(key + "=");
    REQUIRE(pos != std::string::npos);
    return std::stod(text.substr(pos + key.size() + 1));
}

std::string slurp(fs::path const& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Short, model-mode spin-lock run.
std::vector<std::string> quick_spinlock(fs::path const& out)
{
    return {"run", source("configs/spinlock.cfg"), "readout.duration_s=5", "readout.integration_s=5",
            "readout.mode=model", "-o", out.string()};
}

}  // namespace

TEST_CASE("plan reports the default transfer and matches its CSV")
{
    auto const dir = scratch("plan");
    auto const r = cli({"plan", source("configs/plan.cfg"), "-o", dir.string()});
    REQUIRE(r.code == 0);
    double const total = field(r.out, "total_time_s");
    double const below = field(r.out, "below_1T_s");
    CHECK(total == doctest::Approx(91).epsilon(2.0 / 91));
    CHECK(below <= 3.0);
    CHECK(field(r.out, "max_force_N") <= field(r.out, "load_set_point_N"));

    std::ifstream csv(dir / "trajectory.csv");
    std::string line;
    std::getline(csv, line);
    CHECK(line == "t_s,z_mm,v_mm_s,B_T");
    double t_prev = 0, b_prev = 0, t_last = 0, recomputed = 0;
    bool first = true;
    while (std::getline(csv, line))
    {
        std::stringstream ls(line);
        std::string f;
        std::vector<double> v;
        while (std::getline(ls, f, ','))
            v.push_back(std::stod(f));
        if (!first)
            recomputed += 0.5 * (v[0] - t_prev) * ((b_prev < 1.0) + (v[3] < 1.0));
        first = false;
        t_prev = t_last = v[0];
        b_prev = v[3];
    }
    CHECK(t_last == doctest::Approx(total).epsilon(1e-15));
    CHECK(recomputed == doctest::Approx(below).epsilon(1e-12));
}

TEST_CASE("zero-length move plans to zero time")
{
    auto const dir = scratch("plan0");
    auto const r = cli({"plan", source("configs/plan.cfg"), "plan.start_mm=300", "plan.end_mm=300",
                        "-o", dir.string()});
    REQUIRE(r.code == 0);
    CHECK(field(r.out, "total_time_s") == 0);
}

TEST_CASE("missing config exits 2 and names the path")
{
    auto const r = cli({"run", "/no/such/config.cfg"});
    CHECK(r.code == 2);
    CHECK(r.err.find("/no/such/config.cfg") != std::string::npos);
    CHECK(cli({"run", source("configs/spinlock.cfg"), "bad.key=1"}).code == 2);
    CHECK(cli({"frobnicate"}).code == 2);
}

TEST_CASE("run writes result, series, manifest; analyze reproduces the SNR")
{
    auto const dir = scratch("run");
    auto const r = cli(quick_spinlock(dir));
    REQUIRE(r.code == 0);
    auto const doc = json::parse(slurp(dir / "result.json"));
    CHECK(doc.at("summary").contains("t2prime_fit_s"));
    CHECK(doc.at("provenance").at("seed") == 1);
    CHECK(fs::exists(dir / "series_spinlock.csv"));
    auto const man = fcdnp::manifest_from_json(slurp(dir / "manifest.json"));
    CHECK(man.seed == 1);
    CHECK(man.protocol == "SPINLOCK");

    auto const an_dir = scratch("analyze");
    auto const a = cli({"analyze", dir.string(), "spectrum", "-o", an_dir.string()});
    REQUIRE(a.code == 0);
    CHECK(json::parse(a.out).at("snr").get<double>()
          == doc.at("summary").at("spectrum_snr").get<double>());
}

TEST_CASE("re-running from the manifest reproduces the result")
{
    auto const a = scratch("rerun_a");
    REQUIRE(cli(quick_spinlock(a)).code == 0);
    auto const man = fcdnp::manifest_from_json(slurp(a / "manifest.json"));
    auto const b = scratch("rerun_b");
    std::vector<std::string> args{"run", man.config_path};
    args.insert(args.end(), man.overrides.begin(), man.overrides.end());
    args.insert(args.end(), {"-o", b.string()});
    REQUIRE(cli(args).code == 0);
    CHECK(slurp(a / "result.json") == slurp(b / "result.json"));
    CHECK(slurp(a / "series_spinlock.csv") == slurp(b / "series_spinlock.csv"));
}

TEST_CASE("noiseless override gives a near-perfect fit")
{
    auto const dir = scratch("noiseless");
    auto args = quick_spinlock(dir);
    args.push_back("acq.noise_sigma=0");
    REQUIRE(cli(args).code == 0);
    auto const doc = json::parse(slurp(dir / "result.json"));
    CHECK(doc.at("fits").at(0).at("residual").get<double>() < 1e-9);
}

TEST_CASE("smooth then fit stays within 1% of the plain fit")
{
    auto const dir = scratch("smooth");
    auto args = quick_spinlock(dir);
    args.push_back("acq.noise_sigma=0");
    REQUIRE(cli(args).code == 0);
    auto const an = scratch("smooth_an");
    auto const plain = cli({"analyze", dir.string(), "fit", "-o", an.string()});
    auto const smooth = cli({"analyze", dir.string(), "fit", "--width", "101", "-o", an.string()});
    REQUIRE(plain.code == 0);
    REQUIRE(smooth.code == 0);
    double const a = json::parse(plain.out).at("e_fold_time_s").get<double>();
    double const b = json::parse(smooth.out).at("e_fold_time_s").get<double>();
    CHECK(b == doctest::Approx(a).epsilon(0.01));
    CHECK(cli({"analyze", dir.string(), "smooth", "--width", "101", "-o", an.string()}).code == 0);
    CHECK(fs::exists(an / "smoothed.csv"));
}

TEST_CASE("corrupted artifacts exit 4 with bad magic")
{
    auto const dir = scratch("corrupt");
    REQUIRE(cli({"run", source("configs/spinlock.cfg"), "readout.duration_s=0.01",
                 "readout.integration_s=0.01", "acq.n_samples=500", "-o", dir.string()})
                .code
            == 0);
    REQUIRE(fs::exists(dir / "windows.fcwr"));
    {
        std::fstream f(dir / "windows.fcwr", std::ios::in | std::ios::out | std::ios::binary);
        f.write("XXXX", 4);
    }
    auto const r = cli({"analyze", (dir / "windows.fcwr").string(), "spectrum", "-o", dir.string()});
    CHECK(r.code == 4);
    CHECK(r.err.find("bad magic") != std::string::npos);
    CHECK(cli({"analyze", dir.string(), "spectrum", "-o", dir.string()}).code == 4);

    auto doc = json::parse(slurp(dir / "result.json"));
    doc["format_version"] = 99;
    std::ofstream(dir / "result.json") << doc.dump();
    CHECK(cli({"analyze", dir.string(), "fit", "-o", dir.string()}).code == 4);
}

TEST_CASE("validate accepts good programs and flags violations")
{
    auto const dir = scratch("validate");
    auto const ok = cli({"validate", source("programs/spinlock.pulse"), "--events",
                         (dir / "e.fcev").string()});
    CHECK(ok.code == 0);
    CHECK(slurp(dir / "e.fcev").substr(0, 4) == "FCEV");
    auto const bad = cli({"validate", source("programs/violations.pulse")});
    CHECK(bad.code == 3);
    for (char const* k : {"rf_acq_overlap", "shuttle_during_acq", "unmatched_edge", "loop_overrun"})
        CHECK(bad.out.find(k) != std::string::npos);
    std::ofstream(dir / "broken.pulse") << "at 0 XYZ on\n";
    CHECK(cli({"validate", (dir / "broken.pulse").string()}).code == 2);
}

TEST_CASE("protocol failures exit 3")
{
    auto const dir = scratch("proto_fail");
    auto const r = cli({"run", source("configs/relaxometry.cfg"), "relax.b_int_T=12",
                        "relax.t_int_s=1", "-o", dir.string()});
    CHECK(r.code == 3);
    CHECK(r.err.find("shuttle") != std::string::npos);
}

TEST_CASE("output directory falls back to the environment")
{
    auto const dir = scratch("env");
    ::setenv(fcdnp::cli::output_dir_env, dir.string().c_str(), 1);
    auto const r = cli({"plan", source("configs/plan.cfg")});
    ::unsetenv(fcdnp::cli::output_dir_env);
    REQUIRE(r.code == 0);
    CHECK(fs::exists(dir / "trajectory.csv"));
}
