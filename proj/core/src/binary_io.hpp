// Copyright 2026 The fcdnp Authors.
// SPDX-License-Identifier: Apache-2.0
// Little-endian primitives for the binary logs.
#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "fcdnp/error.hpp"

namespace fcdnp::detail {

template<class T>
void put_le(std::ostream& out, T value)
{
    static_assert(std::is_trivially_copyable_v<T>);
    std::array<char, sizeof(T)> buf;
    std::memcpy(buf.data(), &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big)
        std::reverse(buf.begin(), buf.end());
    out.write(buf.data(), sizeof(T));
}

//! Returns false on a clean end of input before any byte was read.
template<class T>
bool get_le(std::istream& in, T& value)
{
    std::array<char, sizeof(T)> buf;
    in.read(buf.data(), sizeof(T));
    if (in.gcount() == 0)
        return false;
    if (in.gcount() != std::streamsize(sizeof(T)))
        throw DataError("truncated record");
    if constexpr (std::endian::native == std::endian::big)
        std::reverse(buf.begin(), buf.end());
    std::memcpy(&value, buf.data(), sizeof(T));
    return true;
}

inline void write_header(std::ostream& out, std::string_view magic, std::uint16_t version)
{
    out.write(magic.data(), std::streamsize(magic.size()));
    put_le(out, version);
}

inline void read_header(std::istream& in, std::string_view magic, std::uint16_t version)
{
    std::string got(magic.size(), '\0');
    in.read(got.data(), std::streamsize(got.size()));
    if (in.gcount() != std::streamsize(magic.size()) || got != magic)
        throw VersionError("bad magic: expected " + std::string(magic));
    std::uint16_t v = 0;
    if (!get_le(in, v))
        throw VersionError("missing version after magic");
    if (v != version)
    {
        throw VersionError("unsupported " + std::string(magic) + " version "
                           + std::to_string(v) + " (expected "
                           + std::to_string(version) + ")");
    }
}

}  // namespace fcdnp::detail
