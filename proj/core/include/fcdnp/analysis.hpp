// Copyright 2026 The fcdnp Authors.
// SPDX-License-Identifier: Apache-2.0
//! \file fcdnp/analysis.hpp
//! Smoothing, decay fitting, and spectral SNR of decay series.
#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "series.hpp"
#include "spinmodel.hpp"

namespace fcdnp {

//! Centered moving average; windows are truncated (and renormalized) at
//! the edges. `width` must be odd and no longer than the series.
DecaySeries boxcar_smooth(DecaySeries const& series, std::size_t width);

enum class DecayModel
{
    exponential,       //!< A exp(-t/T)
    stretched,         //!< A exp(-(t/T)^beta)
    gaussian,          //!< A exp(-(t/T)^2)
    two_shell_signed,  //!< A [(1-w) exp(-t/tau_p) - w exp(-t/tau_m)]
};

std::string_view to_string(DecayModel m);
std::optional<DecayModel> decay_model_from_string(std::string_view name);
std::size_t parameter_count(DecayModel m);
std::vector<std::string_view> parameter_names(DecayModel m);

double model_value(DecayModel m, std::span<double const> params, double t);
//! d(model)/d(params) at t.
std::vector<double> model_jacobian(DecayModel m,
                                   std::span<double const> params,
                                   double t);

struct FitOptions
{
    double rel_tol = 1e-10;
    int max_iterations = 200;
};

struct DecayFit
{
    DecayModel model = DecayModel::exponential;
    std::vector<double> params;
    double e_fold_time_s = 0;  //!< first t with |fit(t)| = |fit(0)|/e
    double residual = 0;       //!< sum of squared residuals
    double rms = 0;
    int iterations = 0;
};

//! Levenberg-Marquardt fit started from a log-linear regression. Memory
//! use does not depend on the series length. Throws FitError when the
//! iteration does not converge.
DecayFit fit_decay(DecaySeries const& series,
                   DecayModel model,
                   FitOptions const& options = {});

//! Fit starting from explicit parameters instead of the regression.
DecayFit fit_decay_from(DecaySeries const& series,
                        DecayModel model,
                        std::vector<double> initial,
                        FitOptions const& options = {});

//! Least-squares fit of a sum of Gaussians (no baseline) to (x, y),
//! starting from `initial`.
std::vector<EprPeak> fit_gaussians(std::span<double const> x,
                                   std::span<double const> y,
                                   std::vector<EprPeak> initial,
                                   FitOptions const& options = {});

struct Spectrum
{
    std::vector<double> frequency_Hz;
    std::vector<double> magnitude;
    std::size_t peak_index = 0;
    double peak = 0;
    double noise_floor = 0;  //!< 1.4826 * MAD of off-peak bins
    double snr = 0;          //!< 0 for an all-zero series
};

//! One-sided magnitude DFT of a uniformly sampled series.
Spectrum spectrum_of_series(DecaySeries const& series);

//! `t_s,y` CSV.
void write_series_csv(std::ostream& out, DecaySeries const& series);
DecaySeries read_series_csv(std::istream& in);

}  // namespace fcdnp
