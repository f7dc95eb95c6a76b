// Copyright 2026 The fcdnp Authors.
// SPDX-License-Identifier: Apache-2.0
//! \file fcdnp/config.hpp
//! Flat `key = value` configuration files.
//!
//! One assignment per line; `#` starts a comment; blank lines are
//! ignored. Keys are dotted names (`acq.noise_sigma`); values are taken
//! verbatim after trimming. Lists are comma separated.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fcdnp {

class Config
{
  public:
    Config() = default;

    //! Throws ConfigError naming `origin` and the line on bad syntax or a
    //! repeated key.
    static Config parse(std::string_view text, std::string const& origin = "<string>");
    //! Throws ConfigError naming the path if it cannot be read.
    static Config load(std::string const& path);

    void set(std::string key, std::string value);
    //! Apply a `key=value` override.
    void apply_override(std::string_view assignment);

    bool has(std::string const& key) const { return entries_.contains(key); }
    std::optional<std::string> raw(std::string const& key) const;

    std::string get_string(std::string const& key, std::string fallback) const;
    double get_double(std::string const& key, double fallback) const;
    std::uint64_t get_u64(std::string const& key, std::uint64_t fallback) const;
    bool get_bool(std::string const& key, bool fallback) const;
    std::vector<double> get_doubles(std::string const& key,
                                    std::vector<double> fallback) const;

    //! Throws ConfigError listing keys outside `known`.
    void require_known(std::span<std::string_view const> known) const;

    std::map<std::string, std::string> const& entries() const { return entries_; }
    //! Sorted `key=value` lines; independent of input order.
    std::string canonical() const;
    //! FNV-1a 64 of canonical().
    std::uint64_t hash() const;

  private:
    std::map<std::string, std::string> entries_;
};

std::string hex_u64(std::uint64_t v);

}  // namespace fcdnp
