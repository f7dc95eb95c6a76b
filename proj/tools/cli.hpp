// Copyright 2026 The fcdnp Authors.
// SPDX-License-Identifier: Apache-2.0
//! \file cli.hpp
//! `fcdnp` command-line front end.
//!
//!   fcdnp plan CONFIG [key=value...] [-o DIR]
//!   fcdnp run CONFIG [key=value...] [-o DIR]
//!   fcdnp analyze RESULT {fit|spectrum|smooth} [--series NAME] [--model M]
//!                 [--width N] [-o DIR]
//!   fcdnp validate PROGRAM [--events FILE]
//!
//! The output directory defaults to $FCDNP_OUTPUT_DIR, then the config's
//! `output.dir`, then `fcdnp_out`.
#pragma once

#include <iosfwd>

namespace fcdnp::cli {

enum ExitCode : int
{
    exit_ok = 0,
    exit_failure = 1,
    exit_config = 2,
    exit_protocol = 3,
    exit_version = 4,
};

inline constexpr char const* output_dir_env = "FCDNP_OUTPUT_DIR";

int run(int argc, char const* const* argv, std::ostream& out, std::ostream& err);

}  // namespace fcdnp::cli
