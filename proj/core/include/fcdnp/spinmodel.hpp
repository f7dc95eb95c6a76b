// Copyright 2026 The fcdnp Authors.
// SPDX-License-Identifier: Apache-2.0
//! \file fcdnp/spinmodel.hpp
//! Phenomenological nuclear polarization dynamics: field- and
//! temperature-dependent T1, optical DNP pumping over an EPR lineshape,
//! FID and pulsed spin-lock decay, and two-shell spin textures.
#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "series.hpp"
#include "shuttle.hpp"

namespace fcdnp {

//! One shell of like-signed nuclear polarization.
struct Shell
{
    double weight = 0;  //!< >= 0
    int sign = 1;       //!< +1 or -1
};

struct SpinEnsembleState
{
    std::vector<Shell> shells{Shell{}};  //!< shells[0] is the bulk
    double temperature_K = 100;
    double field_T = 0;

    //! Net polarization, the signed sum over shells.
    double polarization() const;

    static SpinEnsembleState with_polarization(double p,
                                               double temperature_K,
                                               double field_T);
};

//! Piecewise log-log interpolated T2'(T), clamped outside the table.
class T2PrimeTable
{
  public:
    T2PrimeTable() = default;
    explicit T2PrimeTable(std::vector<std::pair<double, double>> kelvin_seconds);

    double operator()(double temperature_K) const;
    std::vector<std::pair<double, double>> const& points() const { return pts_; }

  private:
    std::vector<std::pair<double, double>> pts_;  // ascending in K
};

//! Two-shell texture model for spin-lock angles away from pi/2.
struct TextureParams
{
    double w_max = 0.45;           //!< minority (negative) shell weight at pi
    double sigma_pi = 0.15;        //!< angular width, in units of pi
    double tau_plus_ratio = 0.5;   //!< tau_+ / T2'
    double tau_minus_ratio = 1.0;  //!< tau_- / T2'

    double minority_weight(double theta) const;
};

struct RelaxationParams
{
    double t1_high_s = 0;       //!< high-field asymptote at temp_ref_K
    double r_low_per_s = 0;     //!< extra low-field rate amplitude
    double bc_T = 0.1;
    double temp_ref_K = 100;
    double temp_exponent = 0;   //!< s(T) = (T / temp_ref_K)^temp_exponent
    double t2_star_s = 1.1e-3;
    T2PrimeTable t2_prime;
    double beta = 1.0;
    double p_eq = 0;
    TextureParams texture;

    double temp_scale(double temperature_K) const;
    void validate() const;
};

//! Solve T1_high and R_low so that t1_of(b1) = t1 and t1_of(b2) = t2 at
//! the reference temperature.
void solve_t1_law(RelaxationParams& params,
                  double b1_T,
                  double t1_s,
                  double b2_T,
                  double t2_s);

//! Defaults with the T1 law anchored at 27 mT and 9.4 T (100 K).
RelaxationParams default_relaxation();

double t1_of(double b_T, double temperature_K, RelaxationParams const& params);

//! Exponential-step relaxation along B(t), with the rate averaged over
//! each sample interval (exact for piecewise-constant B).
SpinEnsembleState relax(SpinEnsembleState state,
                        FieldTrace const& trace,
                        RelaxationParams const& params);

//! Relaxation at a fixed field.
SpinEnsembleState relax_at(SpinEnsembleState state,
                           double b_T,
                           double duration_s,
                           RelaxationParams const& params);

struct EprPeak
{
    double center_GHz = 0;
    double sigma_GHz = 0;
    double amplitude = 0;
};

struct EprSpectrum
{
    std::vector<EprPeak> peaks;
    double temperature_K = 0;

    double density(double f_GHz) const;
    //! Exact integral of the density over [lo, hi].
    double integral(double lo_GHz, double hi_GHz) const;
};

struct DnpParams
{
    double pump_rate = 1e-3;  //!< 1/s per unit integrated density
    double p_max = 1.0;
    double zfs_ref_GHz = 2.87;
    double zfs_ref_K = 295;
    double zfs_slope_GHz_per_K = -7.4e-5;
    double main_sigma_GHz = 0.030;
    double main_amplitude = 1.0;
    double second_center_GHz = 2.72;
    double second_sigma_GHz = 0.025;
    double second_amplitude = 0.4;

    double zfs_center(double temperature_K) const;
    void validate() const;
};

EprSpectrum epr_spectrum(double temperature_K, DnpParams const& dnp);

struct PumpWindow
{
    double center_GHz = 0;
    double width_GHz = 0.025;
};

//! r = Gamma * integral of g over the window (adaptive Simpson).
double pump_rate(PumpWindow const& window,
                 EprSpectrum const& spectrum,
                 DnpParams const& dnp);

SpinEnsembleState dnp_pump(SpinEnsembleState state,
                           PumpWindow const& window,
                           double duration_s,
                           EprSpectrum const& spectrum,
                           DnpParams const& dnp,
                           double b_T,
                           RelaxationParams const& params);

//! Exponent p giving polarization(T_low) / polarization(T_high) = ratio
//! for a pump centred on the main EPR peak.
double calibrate_temperature_exponent(RelaxationParams params,
                                      DnpParams const& dnp,
                                      double target_ratio = 3.0,
                                      double t_low_K = 100,
                                      double t_high_K = 295,
                                      double pump_s = 90,
                                      double window_GHz = 0.025,
                                      double b_T = 0.027);

//! Gaussian FID |P| exp(-(t/T2*)^2) sampled at t = k dt, k < n.
DecaySeries fid_series(SpinEnsembleState const& state,
                       RelaxationParams const& params,
                       double dt_s,
                       std::size_t n);

//! Spin-lock amplitude after pulse k (k >= 1) at pulse angle theta.
double spinlock_amplitude(double polarization,
                          double theta,
                          double t_s,
                          double temperature_K,
                          RelaxationParams const& params);

//! Per-pulse amplitude series for k = 1..n_pulses at t = k * period.
DecaySeries spinlock_series(SpinEnsembleState const& state,
                            double theta,
                            double t_p_s,
                            double period_s,
                            std::size_t n_pulses,
                            RelaxationParams const& params);

//! First sign change, linearly interpolated in t.
std::optional<double> zero_crossing_time(DecaySeries const& series);

//! Closed-form cancellation time of the two-shell model (none if the
//! minority shell is absent or never catches up).
std::optional<double> texture_crossing_time(double theta,
                                            double temperature_K,
                                            RelaxationParams const& params);

}  // namespace fcdnp
