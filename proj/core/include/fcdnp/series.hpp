// Copyright 2026 The fcdnp Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace fcdnp {

//! Sampled decay trace; y may be signed for texture runs.
struct DecaySeries
{
    std::vector<double> t;  //!< seconds, strictly increasing
    std::vector<double> y;
    double temperature_K = 0;
    std::string protocol;

    std::size_t size() const { return t.size(); }
    bool empty() const { return t.empty(); }
};

}  // namespace fcdnp
