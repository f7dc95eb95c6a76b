// Copyright 2026 The fcdnp Authors.
// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "fcdnp/sequencer.hpp"

using namespace fcdnp;

static void BM_CompileLazy(benchmark::State& state)
{
    auto const prog = build_spinlock_program(std::uint64_t(state.range(0)), 68000, 75000, 69000,
                                             74000);
    for (auto _ : state)
        benchmark::DoNotOptimize(compile_unchecked(prog).size());
}
BENCHMARK(BM_CompileLazy)->Arg(1000)->Arg(10'000'000);

static void BM_ReadEvents(benchmark::State& state)
{
    auto const stream = compile_unchecked(build_spinlock_program(100000, 68000, 75000, 69000, 74000));
    for (auto _ : state)
    {
        Event e;
        std::uint64_t n = 0;
        for (auto r = stream.reader(); r.next(e);)
            ++n;
        benchmark::DoNotOptimize(n);
    }
    state.SetItemsProcessed(state.iterations() * std::int64_t(stream.size()));
}
BENCHMARK(BM_ReadEvents);

static void BM_Validate(benchmark::State& state)
{
    auto const prog = build_spinlock_program(100000, 68000, 75000, 69000, 74000);
    for (auto _ : state)
        benchmark::DoNotOptimize(validate(prog).total);
    state.SetItemsProcessed(state.iterations() * 400000);
}
BENCHMARK(BM_Validate);

static void BM_ParsePrint(benchmark::State& state)
{
    auto const text = print_program(build_spinlock_program(800000, 68000, 75000, 69000, 74000));
    for (auto _ : state)
        benchmark::DoNotOptimize(print_program(parse_program(text)));
}
BENCHMARK(BM_ParsePrint);
