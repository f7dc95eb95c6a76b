// Copyright 2026 The fcdnp Authors.
// SPDX-License-Identifier: Apache-2.0
#include "fcdnp/result_io.hpp"

#include <cctype>
#include <chrono>
#include <ctime>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fcdnp/error.hpp"

namespace fcdnp {

namespace {

using nlohmann::json;

constexpr char const* result_format_tag = "fcdnp.result";
constexpr char const* manifest_format_tag = "fcdnp.manifest";

json number_or_null(double v)
{
    return std::isfinite(v) ? json(v) : json(nullptr);
}

double number_from(json const& j)
{
    return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

json stages_to_json(StageAccount const& s)
{
    return {{"pump_ns", s.pump_ns},
            {"shuttle_ns", s.shuttle_ns},
            {"wait_ns", s.wait_ns},
            {"readout_ns", s.readout_ns},
            {"program_ns", s.program_ns}};
}

StageAccount stages_from_json(json const& j)
{
    StageAccount s;
    s.pump_ns = j.at("pump_ns").get<std::uint64_t>();
    s.shuttle_ns = j.at("shuttle_ns").get<std::uint64_t>();
    s.wait_ns = j.at("wait_ns").get<std::uint64_t>();
    s.readout_ns = j.at("readout_ns").get<std::uint64_t>();
    s.program_ns = j.at("program_ns").get<std::uint64_t>();
    return s;
}

std::string read_text(std::filesystem::path const& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void check_format(json const& doc, char const* tag, int version)
{
    if (!doc.is_object() || !doc.contains("format"))
        throw VersionError("bad magic: expected format '" + std::string(tag) + "'");
    if (doc.at("format") != tag)
        throw VersionError("bad magic: expected format '" + std::string(tag) + "', got "
                           + doc.at("format").dump());
    int const v = doc.at("format_version").get<int>();
    if (v != version)
        throw VersionError("unsupported " + std::string(tag) + " version "
                           + std::to_string(v) + " (expected "
                           + std::to_string(version) + ")");
}

}  // namespace

std::string series_file_name(std::string const& series_name)
{
    std::string out = "series_";
    for (char c : series_name)
    {
        bool const keep = std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-'
                          || c == '_';
        out += keep ? c : '_';
    }
    return out + ".csv";
}

std::string result_to_json(ProtocolResult const& r)
{
    json doc;
    doc["format"] = result_format_tag;
    doc["format_version"] = result_format_version;
    doc["protocol"] = std::string(to_string(r.protocol));
    doc["temperature_K"] = r.temperature_K;
    doc["provenance"] = {{"seed", r.seed},
                         {"config_hash", hex_u64(r.config_hash)},
                         {"library_version", "0.1.0"}};
    doc["config"] = r.config;
    doc["axis"] = r.axis;

    json records = json::array();
    for (auto const& rec : r.records)
    {
        json values = json::object();
        for (auto const& [k, v] : rec.values)
            values[k] = v ? number_or_null(*v) : json(nullptr);
        records.push_back(
            {{"axis_value", rec.axis_value}, {"values", values}, {"stages", stages_to_json(rec.stages)}});
    }
    doc["records"] = records;

    json summary = json::object();
    for (auto const& [k, v] : r.summary)
        summary[k] = number_or_null(v);
    doc["summary"] = summary;

    json fits = json::array();
    for (auto const& f : r.fits)
    {
        json params = json::array();
        for (double p : f.fit.params)
            params.push_back(number_or_null(p));
        fits.push_back({{"name", f.name},
                        {"model", std::string(to_string(f.fit.model))},
                        {"params", params},
                        {"e_fold_time_s", number_or_null(f.fit.e_fold_time_s)},
                        {"residual", number_or_null(f.fit.residual)},
                        {"rms", number_or_null(f.fit.rms)},
                        {"iterations", f.fit.iterations}});
    }
    doc["fits"] = fits;

    json peaks = json::array();
    for (auto const& p : r.peaks)
        peaks.push_back({{"center_GHz", p.center_GHz},
                         {"sigma_GHz", p.sigma_GHz},
                         {"amplitude", p.amplitude}});
    doc["peaks"] = peaks;

    json series = json::array();
    for (auto const& s : r.series)
        series.push_back({{"name", s.name},
                          {"file", series_file_name(s.name)},
                          {"points", s.series.size()},
                          {"protocol", s.series.protocol},
                          {"temperature_K", s.series.temperature_K}});
    doc["series"] = series;
    if (!r.windows.empty())
        doc["windows"] = {{"file", "windows.fcwr"}, {"count", r.windows.size()}};
    return doc.dump(2) + "\n";
}

ProtocolResult result_from_json(std::string const& text)
{
    json doc;
    try
    {
        doc = json::parse(text);
    }
    catch (json::parse_error const& e)
    {
        throw VersionError(std::string("bad magic: not a result document (") + e.what() + ")");
    }
    check_format(doc, result_format_tag, result_format_version);
    try
    {
        ProtocolResult r;
        auto const kind = protocol_from_string(doc.at("protocol").get<std::string>());
        if (!kind)
            throw DataError("unknown protocol " + doc.at("protocol").dump());
        r.protocol = *kind;
        r.temperature_K = doc.at("temperature_K").get<double>();
        auto const& prov = doc.at("provenance");
        r.seed = prov.at("seed").get<std::uint64_t>();
        r.config_hash = std::stoull(prov.at("config_hash").get<std::string>(), nullptr, 16);
        r.config = doc.at("config").get<std::map<std::string, std::string>>();
        r.axis = doc.at("axis").get<std::string>();
        for (auto const& jr : doc.at("records"))
        {
            ResultRecord rec;
            rec.axis_value = jr.at("axis_value").get<double>();
            for (auto const& [k, v] : jr.at("values").items())
                rec.values[k] = v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
            rec.stages = stages_from_json(jr.at("stages"));
            r.records.push_back(std::move(rec));
        }
        for (auto const& [k, v] : doc.at("summary").items())
            r.summary[k] = number_from(v);
        for (auto const& jf : doc.at("fits"))
        {
            NamedFit f;
            f.name = jf.at("name").get<std::string>();
            auto const model = decay_model_from_string(jf.at("model").get<std::string>());
            if (!model)
                throw DataError("unknown decay model " + jf.at("model").dump());
            f.fit.model = *model;
            for (auto const& p : jf.at("params"))
                f.fit.params.push_back(number_from(p));
            f.fit.e_fold_time_s = number_from(jf.at("e_fold_time_s"));
            f.fit.residual = number_from(jf.at("residual"));
            f.fit.rms = number_from(jf.at("rms"));
            f.fit.iterations = jf.at("iterations").get<int>();
            r.fits.push_back(std::move(f));
        }
        for (auto const& jp : doc.at("peaks"))
            r.peaks.push_back({jp.at("center_GHz").get<double>(), jp.at("sigma_GHz").get<double>(),
                               jp.at("amplitude").get<double>()});
        for (auto const& js : doc.at("series"))
        {
            NamedSeries s;
            s.name = js.at("name").get<std::string>();
            s.series.protocol = js.at("protocol").get<std::string>();
            s.series.temperature_K = js.at("temperature_K").get<double>();
            r.series.push_back(std::move(s));
        }
        return r;
    }
    catch (json::exception const& e)
    {
        throw DataError(std::string("malformed result document: ") + e.what());
    }
}

std::vector<std::filesystem::path> write_result(std::filesystem::path const& dir,
                                                ProtocolResult const& result)
{
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw Error("cannot create output directory " + dir.string() + ": " + ec.message());

    std::vector<fs::path> written;
    auto open = [&](fs::path const& p, std::ios::openmode mode) {
        std::ofstream out(p, mode);
        if (!out)
            throw Error("cannot write " + p.string());
        written.push_back(p);
        return out;
    };
    {
        auto out = open(dir / "result.json", std::ios::binary);
        out << result_to_json(result);
    }
    for (auto const& s : result.series)
    {
        auto out = open(dir / series_file_name(s.name), std::ios::binary);
        write_series_csv(out, s.series);
    }
    if (!result.windows.empty())
    {
        auto out = open(dir / "windows.fcwr", std::ios::binary);
        WindowLogWriter w(out);
        w.write(result.windows);
    }
    return written;
}

ProtocolResult load_result(std::filesystem::path const& path)
{
    namespace fs = std::filesystem;
    fs::path const file = fs::is_directory(path) ? path / "result.json" : path;
    fs::path const dir = file.parent_path();
    ProtocolResult r = result_from_json(read_text(file));
    for (auto& s : r.series)
    {
        fs::path const p = dir / series_file_name(s.name);
        std::ifstream in(p, std::ios::binary);
        if (!in)
            throw DataError("missing series file " + p.string());
        auto loaded = read_series_csv(in);
        loaded.protocol = s.series.protocol;
        loaded.temperature_K = s.series.temperature_K;
        s.series = std::move(loaded);
    }
    fs::path const wl = dir / "windows.fcwr";
    if (fs::exists(wl))
    {
        std::ifstream in(wl, std::ios::binary);
        r.windows = read_window_log(in);
    }
    return r;
}

std::string manifest_to_json(RunManifest const& m)
{
    json doc{{"format", manifest_format_tag},
             {"format_version", result_format_version},
             {"config_path", m.config_path},
             {"output_dir", m.output_dir},
             {"seed", m.seed},
             {"protocol", m.protocol},
             {"timestamp", m.timestamp},
             {"config_hash", hex_u64(m.config_hash)},
             {"overrides", m.overrides},
             {"artifacts", m.artifacts}};
    return doc.dump(2) + "\n";
}

RunManifest manifest_from_json(std::string const& text)
{
    json doc;
    try
    {
        doc = json::parse(text);
    }
    catch (json::parse_error const& e)
    {
        throw VersionError(std::string("bad magic: not a manifest (") + e.what() + ")");
    }
    check_format(doc, manifest_format_tag, result_format_version);
    try
    {
        RunManifest m;
        m.config_path = doc.at("config_path").get<std::string>();
        m.output_dir = doc.at("output_dir").get<std::string>();
        m.seed = doc.at("seed").get<std::uint64_t>();
        m.protocol = doc.at("protocol").get<std::string>();
        m.timestamp = doc.at("timestamp").get<std::string>();
        m.config_hash = std::stoull(doc.at("config_hash").get<std::string>(), nullptr, 16);
        m.overrides = doc.at("overrides").get<std::vector<std::string>>();
        m.artifacts = doc.at("artifacts").get<std::vector<std::string>>();
        return m;
    }
    catch (json::exception const& e)
    {
        throw DataError(std::string("malformed manifest: ") + e.what());
    }
}

std::string utc_timestamp()
{
    auto const now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace fcdnp
