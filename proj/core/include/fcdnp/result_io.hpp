// Copyright 2026 The fcdnp Authors.
// SPDX-License-Identifier: Apache-2.0
//! \file fcdnp/result_io.hpp
//! On-disk protocol results: a JSON document with the configuration echo,
//! provenance and records, one `t_s,y` CSV per series, and an optional
//! binary window log.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "protocols.hpp"

namespace fcdnp {

inline constexpr int result_format_version = 1;

//! Series and windows are not embedded; they are referenced by file name.
std::string result_to_json(ProtocolResult const& result);
//! Parses the JSON only (series and windows stay empty). Throws
//! VersionError on a foreign or newer document, DataError when malformed.
ProtocolResult result_from_json(std::string const& text);

//! File name used for a series inside a result directory.
std::string series_file_name(std::string const& series_name);

//! Writes result.json, one CSV per series and windows.fcwr when the
//! result carries window records. Returns the written paths.
std::vector<std::filesystem::path> write_result(std::filesystem::path const& dir,
                                                ProtocolResult const& result);

//! Loads result.json (or the given JSON file) together with its series
//! and window log.
ProtocolResult load_result(std::filesystem::path const& path);

struct RunManifest
{
    std::string config_path;
    std::string output_dir;
    std::uint64_t seed = 0;
    std::string protocol;
    std::string timestamp;  //!< UTC, ISO 8601
    std::uint64_t config_hash = 0;
    std::vector<std::string> artifacts;
    std::vector<std::string> overrides;
};

std::string manifest_to_json(RunManifest const& manifest);
RunManifest manifest_from_json(std::string const& text);

//! Current UTC time as YYYY-MM-DDTHH:MM:SSZ.
std::string utc_timestamp();

}  // namespace fcdnp
