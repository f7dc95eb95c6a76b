// Copyright 2026 The fcdnp Authors.
// SPDX-License-Identifier: Apache-2.0
#include "cli.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "fcdnp/error.hpp"
#include "fcdnp/protocols.hpp"
#include "fcdnp/result_io.hpp"

namespace fcdnp::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// One structured line per event on stderr.
class Log
{
  public:
    explicit Log(std::ostream& err) : err_(err) {}

    template<class... Fields>
    void operator()(char const* level, char const* event, Fields const&... fields)
    {
        std::ostringstream os;
        os << std::setprecision(10) << "level=" << level << " event=" << event;
        ((os << ' ' << fields.first << '=' << quoted(fields.second)), ...);
        err_ << os.str() << '\n';
    }

  private:
    template<class T>
    static std::string quoted(T const& v)
    {
        std::ostringstream os;
        os << std::setprecision(10) << v;
        std::string s = os.str();
        if (s.find_first_of(" \"=") == std::string::npos && !s.empty())
            return s;
        std::string q = "\"";
        for (char c : s)
        {
            if (c == '"' || c == '\\')
                q += '\\';
            q += c;
        }
        return q + '"';
    }

    std::ostream& err_;
};

template<class T>
std::pair<char const*, T> kv(char const* k, T v)
{
    return {k, std::move(v)};
}

Config load_config(std::string const& path, std::vector<std::string> const& overrides)
{
    Config cfg = Config::load(path);
    for (auto const& o : overrides)
        cfg.apply_override(o);
    return cfg;
}

fs::path output_dir(std::string const& flag, Config const* cfg)
{
    if (!flag.empty())
        return flag;
    if (char const* env = std::getenv(output_dir_env); env && *env)
        return env;
    if (cfg && cfg->has("output.dir"))
        return cfg->get_string("output.dir", "");
    return "fcdnp_out";
}

void write_text(fs::path const& path, std::string const& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out || !(out << text))
        throw Error("cannot write " + path.string());
}

//---------------------------------------------------------------------------//
// plan
//---------------------------------------------------------------------------//

int cmd_plan(std::string const& config_path,
             std::vector<std::string> const& overrides,
             std::string const& out_flag,
             std::ostream& out,
             Log& log)
{
    Config const cfg = load_config(config_path, overrides);
    ProtocolConfig const pc = protocol_config_from(cfg);
    FieldMap const map = protocol_field_map(pc);

    auto position = [&](char const* mm_key, char const* t_key, double fallback) {
        if (cfg.has(mm_key))
            return cfg.get_double(mm_key, fallback);
        if (cfg.has(t_key))
            return map.position_of_field(cfg.get_double(t_key, 0));
        return fallback;
    };
    double const start = position("plan.start_mm", "plan.start_T",
                                  map.position_of_field(pc.anchors.b_dnp_T));
    double const end = position("plan.end_mm", "plan.end_T", map.sweet_spot());
    auto const traj = plan_trajectory(map, start, end, pc.motion, pc.plan);

    double fmax = 0;
    for (auto const& s : traj.samples)
        fmax = std::max(fmax, std::fabs(eddy_force(map, pc.motion, s.z_mm, s.v_mm_s)));
    double const below = time_in_band(traj, map, -1.0, 1.0);

    fs::path const dir = output_dir(out_flag, &cfg);
    fs::create_directories(dir);
    {
        std::ofstream csv(dir / "trajectory.csv", std::ios::binary);
        if (!csv)
            throw Error("cannot write " + (dir / "trajectory.csv").string());
        write_trajectory_csv(csv, traj, map);
    }
    out << std::setprecision(17) << "total_time_s=" << traj.total_time_s << '\n'
        << "below_1T_s=" << below << '\n'
        << "max_force_N=" << fmax << '\n'
        << "load_set_point_N=" << pc.motion.load_set_point_N << '\n'
        << "start_mm=" << start << '\n'
        << "end_mm=" << end << '\n'
        << "samples=" << traj.samples.size() << '\n'
        << "trajectory_csv=" << (dir / "trajectory.csv").string() << '\n';
    log("info", "plan", kv("total_time_s", traj.total_time_s), kv("below_1T_s", below),
        kv("output", (dir / "trajectory.csv").string()));
    return exit_ok;
}

//---------------------------------------------------------------------------//
// run
//---------------------------------------------------------------------------//

int cmd_run(std::string const& config_path,
            std::vector<std::string> const& overrides,
            std::string const& out_flag,
            std::ostream& out,
            Log& log)
{
    Config const cfg = load_config(config_path, overrides);
    ProtocolConfig const pc = protocol_config_from(cfg);
    fs::path const dir = output_dir(out_flag, &cfg);
    log("info", "run_start", kv("protocol", std::string(to_string(pc.kind))),
        kv("seed", pc.seed), kv("config", config_path));

    ProtocolResult res = run_protocol(pc);
    res.config = cfg.entries();
    res.config_hash = cfg.hash();
    res.seed = pc.seed;

    auto const written = write_result(dir, res);
    RunManifest m;
    m.config_path = fs::absolute(config_path).string();
    m.output_dir = fs::absolute(dir).string();
    m.seed = pc.seed;
    m.protocol = std::string(to_string(pc.kind));
    m.timestamp = utc_timestamp();
    m.config_hash = res.config_hash;
    m.overrides = overrides;
    for (auto const& p : written)
        m.artifacts.push_back(p.filename().string());
    write_text(dir / "manifest.json", manifest_to_json(m));

    out << std::setprecision(10);
    for (auto const& [k, v] : res.summary)
        out << k << '=' << v << '\n';
    out << "result=" << (dir / "result.json").string() << '\n';
    log("info", "run_done", kv("protocol", m.protocol), kv("output", m.output_dir),
        kv("artifacts", m.artifacts.size()));
    return exit_ok;
}

//---------------------------------------------------------------------------//
// analyze
//---------------------------------------------------------------------------//

// Window log as an in-phase series on the default spin-lock grid.
ProtocolResult result_from_window_log(fs::path const& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot open " + path.string());
    ProtocolResult r;
    r.windows = read_window_log(in);
    double const period = double(SequenceTiming{}.period_ns) * 1e-9;
    NamedSeries s{"windows", {}};
    for (auto const& w : r.windows)
    {
        s.series.t.push_back(double(w.index + 1) * period);
        s.series.y.push_back(in_phase(w));
    }
    s.series.protocol = "SPINLOCK";
    r.series.push_back(std::move(s));
    return r;
}

NamedSeries const& pick_series(ProtocolResult const& r, std::string const& name)
{
    if (r.series.empty())
        throw DataError("result holds no series");
    if (name.empty())
        return r.series.front();
    for (auto const& s : r.series)
    {
        if (s.name == name)
            return s;
    }
    throw DataError("no series named '" + name + "'");
}

int cmd_analyze(std::string const& input,
                std::string const& analysis,
                std::string const& series_name,
                std::string const& model_name,
                std::size_t width,
                std::string const& out_flag,
                std::ostream& out,
                Log& log)
{
    fs::path const in_path(input);
    if (!fs::exists(in_path))
        throw ConfigError("result not found: " + input);
    ProtocolResult const r = in_path.extension() == ".fcwr" ? result_from_window_log(in_path)
                                                            : load_result(in_path);
    NamedSeries const& ns = pick_series(r, series_name);
    fs::path const dir = output_dir(out_flag, nullptr);
    fs::create_directories(dir);

    json doc{{"analysis", analysis}, {"series", ns.name}, {"points", ns.series.size()}};
    if (analysis == "fit")
    {
        auto const model = decay_model_from_string(model_name);
        if (!model)
            throw ConfigError("unknown model '" + model_name + "'");
        DecaySeries const s = width > 1 ? boxcar_smooth(ns.series, width) : ns.series;
        auto const fit = fit_decay(s, *model);
        json params = json::object();
        auto const names = parameter_names(*model);
        for (std::size_t i = 0; i < names.size(); ++i)
            params[std::string(names[i])] = fit.params[i];
        doc["model"] = std::string(to_string(*model));
        doc["smooth_width"] = width;
        doc["params"] = params;
        doc["e_fold_time_s"] = fit.e_fold_time_s;
        doc["residual"] = fit.residual;
        doc["rms"] = fit.rms;
        doc["iterations"] = fit.iterations;
    }
    else if (analysis == "spectrum")
    {
        auto const spec = spectrum_of_series(ns.series);
        doc["peak_index"] = spec.peak_index;
        doc["peak_frequency_Hz"] = spec.frequency_Hz.at(spec.peak_index);
        doc["peak"] = spec.peak;
        doc["noise_floor"] = spec.noise_floor;
        doc["snr"] = spec.snr;
        std::ofstream csv(dir / "spectrum.csv", std::ios::binary);
        csv << "frequency_Hz,magnitude\n" << std::setprecision(17);
        for (std::size_t i = 0; i < spec.magnitude.size(); ++i)
            csv << spec.frequency_Hz[i] << ',' << spec.magnitude[i] << '\n';
        doc["csv"] = (dir / "spectrum.csv").string();
    }
    else if (analysis == "smooth")
    {
        if (width < 1)
            throw ConfigError("--width must be at least 1");
        auto const s = boxcar_smooth(ns.series, width);
        std::ofstream csv(dir / "smoothed.csv", std::ios::binary);
        write_series_csv(csv, s);
        doc["smooth_width"] = width;
        doc["csv"] = (dir / "smoothed.csv").string();
    }
    else
    {
        throw ConfigError("unknown analysis '" + analysis + "' (fit, spectrum, smooth)");
    }
    std::string const text = doc.dump(2) + "\n";
    write_text(dir / ("analysis_" + analysis + ".json"), text);
    out << text;
    log("info", "analyze", kv("analysis", analysis), kv("series", ns.name));
    return exit_ok;
}

//---------------------------------------------------------------------------//
// validate
//---------------------------------------------------------------------------//

int cmd_validate(std::string const& path,
                 std::string const& events_path,
                 std::ostream& out,
                 Log& log)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("cannot read program " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    PulseProgram prog;
    try
    {
        prog = parse_program(ss.str());
    }
    catch (ParseError const& e)
    {
        throw ConfigError(path + ":" + e.what());
    }
    auto const report = validate(prog);
    for (auto const& v : report.violations)
        out << to_string(v.kind) << " t_ns=" << v.t_ns << ": " << v.message << '\n';
    out << "violations=" << report.total << '\n';
    if (!report.ok())
    {
        log("error", "validate", kv("program", path), kv("violations", report.total));
        return exit_protocol;
    }
    auto const stream = compile_unchecked(prog);
    out << "events=" << stream.size() << '\n' << "duration_ns=" << stream.duration_ns() << '\n';
    if (!events_path.empty())
    {
        std::ofstream ev(events_path, std::ios::binary);
        if (!ev)
            throw Error("cannot write " + events_path);
        write_event_log(ev, stream);
    }
    log("info", "validate", kv("program", path), kv("events", stream.size()));
    return exit_ok;
}

}  // namespace

int run(int argc, char const* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Field-cycling DNP experiment simulator", "fcdnp"};
    app.require_subcommand(1);

    std::string config_path, out_dir, input, analysis, series, model = "exponential", program,
                                                               events;
    std::vector<std::string> overrides;
    std::size_t width = 1;

    auto* plan = app.add_subcommand("plan", "Plan the default shuttle transfer");
    plan->add_option("config", config_path, "Configuration file")->required();
    plan->add_option("overrides", overrides, "key=value overrides");
    plan->add_option("-o,--out", out_dir, "Output directory");

    auto* runc = app.add_subcommand("run", "Run the configured protocol");
    runc->add_option("config", config_path, "Configuration file")->required();
    runc->add_option("overrides", overrides, "key=value overrides");
    runc->add_option("-o,--out", out_dir, "Output directory");

    auto* an = app.add_subcommand("analyze", "Re-analyze a stored result");
    an->add_option("result", input, "result.json, its directory, or a .fcwr log")->required();
    an->add_option("analysis", analysis, "fit | spectrum | smooth")->required();
    an->add_option("--series", series, "Series name (default: first)");
    an->add_option("--model", model, "Decay model for fit");
    an->add_option("--width", width, "Boxcar width for smooth (and fit)");
    an->add_option("-o,--out", out_dir, "Output directory");

    auto* val = app.add_subcommand("validate", "Check a pulse program");
    val->add_option("program", program, "Pulse program file")->required();
    val->add_option("--events", events, "Write the compiled FCEV event log");

    try
    {
        app.parse(argc, argv);
    }
    catch (CLI::ParseError const& e)
    {
        int const code = app.exit(e, out, err);
        return code == 0 ? exit_ok : exit_config;
    }

    Log log(err);
    try
    {
        if (*plan)
            return cmd_plan(config_path, overrides, out_dir, out, log);
        if (*runc)
            return cmd_run(config_path, overrides, out_dir, out, log);
        if (*an)
            return cmd_analyze(input, analysis, series, model, width, out_dir, out, log);
        return cmd_validate(program, events, out, log);
    }
    catch (ConfigError const& e)
    {
        log("error", "config", kv("message", std::string(e.what())));
        return exit_config;
    }
    catch (VersionError const& e)
    {
        log("error", "artifact", kv("message", std::string(e.what())));
        return exit_version;
    }
    catch (ProtocolError const& e)
    {
        log("error", "protocol", kv("stage", e.stage()), kv("message", std::string(e.what())));
        return exit_protocol;
    }
    catch (Error const& e)
    {
        log("error", "protocol", kv("message", std::string(e.what())));
        return exit_protocol;
    }
    catch (std::exception const& e)
    {
        log("error", "internal", kv("message", std::string(e.what())));
        return exit_failure;
    }
}

}  // namespace fcdnp::cli
