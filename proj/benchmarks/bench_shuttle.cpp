// Copyright 2026 The fcdnp Authors.
// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "fcdnp/shuttle.hpp"

using namespace fcdnp;

static void BM_CalibrateMap(benchmark::State& state)
{
    for (auto _ : state)
        benchmark::DoNotOptimize(calibrate_default_map().sweet_spot());
}
BENCHMARK(BM_CalibrateMap);

static void BM_PlanTrajectory(benchmark::State& state)
{
    FieldMap const map = calibrate_default_map();
    for (auto _ : state)
        benchmark::DoNotOptimize(plan_trajectory(map, 0.0, map.sweet_spot(), MotionLimits{}).total_time_s);
}
BENCHMARK(BM_PlanTrajectory);
