// Copyright 2026 The fcdnp Authors.
// SPDX-License-Identifier: Apache-2.0
#include "fcdnp/noise.hpp"

#include <cmath>

#include "ziggurat.hpp"

namespace fcdnp {
namespace detail {
namespace {

constexpr double zig_r = 3.6541528853610088;
constexpr double zig_v = 0.00492867323399;

double gauss(double x)
{
    return std::exp(-0.5 * x * x);
}

double unit_open(std::uint64_t bits)
{
    return double(bits >> 11) * 0x1.0p-53 + 0x1.0p-54;
}

ZigguratTables make_tables()
{
    ZigguratTables t{};
    t.x[0] = zig_v / gauss(zig_r);
    t.x[1] = zig_r;
    for (int i = 1; i < zig_layers - 1; ++i)
        t.x[i + 1] = std::sqrt(-2 * std::log(zig_v / t.x[i] + gauss(t.x[i])));
    t.x[zig_layers] = 0;
    for (int i = 0; i < zig_layers; ++i)
        t.ratio[i] = t.x[i + 1] / t.x[i];
    for (int i = 0; i <= zig_layers; ++i)
        t.f[i] = gauss(t.x[i]);
    return t;
}

}  // namespace

ZigguratTables const& ziggurat_tables()
{
    static ZigguratTables const tables = make_tables();
    return tables;
}

double ziggurat_slow(double u, int i, Xoshiro256pp& slow)
{
    auto const& t = ziggurat_tables();
    while (true)
    {
        if (std::fabs(u) < t.ratio[i])
            return u * t.x[i];
        if (i == 0)
        {
            // Tail beyond R (Marsaglia 1964).
            double x, y;
            do
            {
                x = -std::log(unit_open(slow())) / zig_r;
                y = -std::log(unit_open(slow()));
            } while (2 * y < x * x);
            return u < 0 ? -(zig_r + x) : zig_r + x;
        }
        double const xv = u * t.x[i];
        double const y = t.f[i] + double(slow() >> 11) * 0x1.0p-53
                                      * (t.f[i + 1] - t.f[i]);
        if (y < gauss(xv))
            return xv;
        std::uint64_t const bits = slow();
        i = int(bits & 0xff);
        u = signed_unit(bits);
    }
}

}  // namespace detail

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream)
{
    std::uint64_t s = seed ^ 0x6a09e667f3bcc908ULL;
    std::uint64_t const a = splitmix64(s);
    std::uint64_t t = stream ^ a;
    std::uint64_t const b = splitmix64(t);
    return a ^ (b * 0xd1342543de82ef95ULL);
}

Xoshiro256pp::Xoshiro256pp(std::uint64_t seed)
{
    for (auto& w : s_)
        w = splitmix64(seed);
}

double ziggurat_normal(Xoshiro256pp& rng)
{
    std::uint64_t const bits = rng();
    int const i = int(bits & 0xff);
    double const u = detail::signed_unit(bits);
    auto const& t = detail::ziggurat_tables();
    if (std::fabs(u) < t.ratio[i])
        return u * t.x[i];
    return detail::ziggurat_slow(u, i, rng);
}

}  // namespace fcdnp
