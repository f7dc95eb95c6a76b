// Copyright 2026 The fcdnp Authors.
// SPDX-License-Identifier: Apache-2.0
//! \file fcdnp/noise.hpp
//! Counter-seeded random streams and a fast standard-normal sampler.
#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace fcdnp {

//! Advance a SplitMix64 state and return the next output.
inline std::uint64_t splitmix64(std::uint64_t& state)
{
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

//! Independent 64-bit key for stream `stream` of a run seeded with `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

//! xoshiro256++ (Blackman & Vigna); a UniformRandomBitGenerator.
class Xoshiro256pp
{
  public:
    using result_type = std::uint64_t;

    explicit Xoshiro256pp(std::uint64_t seed = 0);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()()
    {
        auto rotl = [](std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); };
        std::uint64_t const r = rotl(s_[0] + s_[3], 23) + s_[0];
        std::uint64_t const t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return r;
    }

    std::array<std::uint64_t, 4>& state() { return s_; }

  private:
    std::array<std::uint64_t, 4> s_{};
};

//! Standard normal deviate by the 256-layer Marsaglia-Tsang ziggurat.
double ziggurat_normal(Xoshiro256pp& rng);

//! Seeded stream of N(0, 1) deviates.
class NormalStream
{
  public:
    NormalStream(std::uint64_t seed, std::uint64_t stream)
        : rng_(derive_seed(seed, stream))
    {
    }

    double operator()() { return ziggurat_normal(rng_); }

  private:
    Xoshiro256pp rng_;
};

}  // namespace fcdnp
