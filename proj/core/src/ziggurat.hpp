// Copyright 2026 The fcdnp Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include "fcdnp/noise.hpp"

namespace fcdnp::detail {

inline constexpr int zig_layers = 256;

struct ZigguratTables
{
    alignas(64) double x[zig_layers + 1];
    alignas(64) double ratio[zig_layers];  // x[i+1] / x[i]
    double f[zig_layers + 1];              // exp(-x[i]^2 / 2)
};

ZigguratTables const& ziggurat_tables();

//! Uniform in [-1, 1) from the top 53 bits.
inline double signed_unit(std::uint64_t bits)
{
    return double(static_cast<std::int64_t>(bits) >> 11) * 0x1.0p-52;
}

//! Finish a draw whose fast test failed for layer i with uniform u; any
//! further randomness comes from `slow`.
double ziggurat_slow(double u, int i, Xoshiro256pp& slow);

}  // namespace fcdnp::detail
