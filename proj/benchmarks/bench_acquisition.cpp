// Copyright 2026 The fcdnp Authors.
// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <vector>

#include <benchmark/benchmark.h>

#include "fcdnp/acquisition.hpp"

using namespace fcdnp;

static void BM_Synthesize(benchmark::State& state)
{
    AcqConfig c;
    c.allow_simd = state.range(0) != 0;
    WindowSynthesizer const syn(c);
    std::vector<double> buf(c.n_samples);
    std::uint64_t w = 0;
    for (auto _ : state)
    {
        syn.synthesize(w++, 1.0, 0.3, buf);
        benchmark::DoNotOptimize(buf.data());
    }
    state.SetItemsProcessed(state.iterations() * std::int64_t(c.n_samples));
}
BENCHMARK(BM_Synthesize)->Arg(0)->Arg(1);

static void BM_Goertzel(benchmark::State& state)
{
    AcqConfig c;
    c.allow_simd = state.range(0) != 0;
    ToneExtractor const ex(c);
    auto const samples = synthesize_window(1.0, 0.3, c, 1);
    for (auto _ : state)
        benchmark::DoNotOptimize(ex.bin_value(samples));
    state.SetItemsProcessed(state.iterations() * std::int64_t(c.n_samples));
}
BENCHMARK(BM_Goertzel)->Arg(0)->Arg(1);

static void BM_DftOracle(benchmark::State& state)
{
    AcqConfig c;
    auto const samples = synthesize_window(1.0, 0.3, c, 1);
    for (auto _ : state)
        benchmark::DoNotOptimize(dft_bin_oracle(samples, c.f_het_Hz, c.fs_Hz));
    state.SetItemsProcessed(state.iterations() * std::int64_t(c.n_samples));
}
BENCHMARK(BM_DftOracle);

static void BM_StreamProcess(benchmark::State& state)
{
    AcqConfig c;
    c.workers = unsigned(state.range(0));
    std::uint64_t const count = 20000;
    auto const src = synthetic_source(
        count, [](std::uint64_t i) { return ToneEstimate{std::exp(-1e-5 * double(i)), 0.0}; }, c);
    for (auto _ : state)
    {
        double sum = 0;
        stream_process(src, c, [&](std::span<WindowRecord const> recs) {
            for (auto const& r : recs)
                sum += r.amplitude;
        });
        benchmark::DoNotOptimize(sum);
    }
    state.SetItemsProcessed(state.iterations() * std::int64_t(count));
}
BENCHMARK(BM_StreamProcess)->Arg(1)->Arg(0)->Unit(benchmark::kMillisecond);
