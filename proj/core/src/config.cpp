// Copyright 2026 The fcdnp Authors.
// SPDX-License-Identifier: Apache-2.0
#include "fcdnp/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "fcdnp/error.hpp"

namespace fcdnp {
namespace {

std::string_view trim(std::string_view s)
{
    auto const first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos)
        return {};
    auto const last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

bool valid_key(std::string_view key)
{
    return !key.empty() && std::all_of(key.begin(), key.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_';
    });
}

double to_double(std::string const& key, std::string_view text)
{
    std::string const s(trim(text));
    char* end = nullptr;
    errno = 0;
    double const v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v))
        throw ConfigError(key + ": expected a finite number, got '" + s + "'");
    return v;
}

}  // namespace

Config Config::parse(std::string_view text, std::string const& origin)
{
    Config cfg;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size())
    {
        auto const nl = text.find('\n', pos);
        std::string_view line = text.substr(
            pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (auto const hash = line.find('#'); hash != std::string_view::npos)
            line = line.substr(0, hash);
        line = trim(line);
        if (line.empty())
            continue;
        auto const eq = line.find('=');
        auto fail = [&](std::string const& msg) {
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + msg);
        };
        if (eq == std::string_view::npos)
            fail("expected key = value");
        std::string key(trim(line.substr(0, eq)));
        if (!valid_key(key))
            fail("invalid key '" + key + "'");
        if (cfg.entries_.contains(key))
            fail("duplicate key '" + key + "'");
        cfg.entries_.emplace(std::move(key), std::string(trim(line.substr(eq + 1))));
    }
    return cfg;
}

Config Config::load(std::string const& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("cannot read config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path);
}

void Config::set(std::string key, std::string value)
{
    if (!valid_key(key))
        throw ConfigError("invalid key '" + key + "'");
    entries_[std::move(key)] = std::string(trim(value));
}

void Config::apply_override(std::string_view assignment)
{
    auto const eq = assignment.find('=');
    if (eq == std::string_view::npos)
        throw ConfigError("override '" + std::string(assignment) + "' is not key=value");
    set(std::string(trim(assignment.substr(0, eq))),
        std::string(assignment.substr(eq + 1)));
}

std::optional<std::string> Config::raw(std::string const& key) const
{
    auto const it = entries_.find(key);
    if (it == entries_.end())
        return std::nullopt;
    return it->second;
}

std::string Config::get_string(std::string const& key, std::string fallback) const
{
    auto const v = raw(key);
    return v ? *v : std::move(fallback);
}

double Config::get_double(std::string const& key, double fallback) const
{
    auto const v = raw(key);
    return v ? to_double(key, *v) : fallback;
}

std::uint64_t Config::get_u64(std::string const& key, std::uint64_t fallback) const
{
    auto const v = raw(key);
    if (!v)
        return fallback;
    std::uint64_t out = 0;
    std::string_view const s = trim(*v);
    int base = 10;
    std::string_view digits = s;
    if (digits.starts_with("0x") || digits.starts_with("0X"))
    {
        base = 16;
        digits.remove_prefix(2);
    }
    auto const [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), out, base);
    if (digits.empty() || ec != std::errc{} || p != digits.data() + digits.size())
        throw ConfigError(key + ": expected a non-negative integer, got '" + *v + "'");
    return out;
}

bool Config::get_bool(std::string const& key, bool fallback) const
{
    auto const v = raw(key);
    if (!v)
        return fallback;
    if (*v == "true" || *v == "1" || *v == "yes" || *v == "on")
        return true;
    if (*v == "false" || *v == "0" || *v == "no" || *v == "off")
        return false;
    throw ConfigError(key + ": expected a boolean, got '" + *v + "'");
}

std::vector<double> Config::get_doubles(std::string const& key,
                                        std::vector<double> fallback) const
{
    auto const v = raw(key);
    if (!v)
        return fallback;
    std::vector<double> out;
    std::string_view rest = *v;
    while (true)
    {
        auto const comma = rest.find(',');
        out.push_back(to_double(key, rest.substr(0, comma)));
        if (comma == std::string_view::npos)
            break;
        rest.remove_prefix(comma + 1);
    }
    return out;
}

void Config::require_known(std::span<std::string_view const> known) const
{
    std::string unknown;
    for (auto const& [k, v] : entries_)
    {
        if (std::find(known.begin(), known.end(), k) == known.end())
            unknown += (unknown.empty() ? "" : ", ") + k;
    }
    if (!unknown.empty())
        throw ConfigError("unknown configuration key(s): " + unknown);
}

std::string Config::canonical() const
{
    std::string out;
    for (auto const& [k, v] : entries_)
        out += k + "=" + v + "\n";
    return out;
}

std::uint64_t Config::hash() const
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : canonical())
    {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex_u64(std::uint64_t v)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace fcdnp
