// Copyright 2026 The fcdnp Authors.
// SPDX-License-Identifier: Apache-2.0
#include "fcdnp/spinmodel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "fcdnp/error.hpp"
#include "fcdnp/numeric.hpp"

namespace fcdnp {
namespace {

void scale_shells(SpinEnsembleState& s, double factor)
{
    for (auto& sh : s.shells)
        sh.weight *= factor;
}

void add_to_bulk(SpinEnsembleState& s, double delta)
{
    Shell& bulk = s.shells.front();
    double const v = bulk.sign * bulk.weight + delta;
    bulk.weight = std::fabs(v);
    bulk.sign = v < 0 ? -1 : 1;
}

double stretched(double t, double tau, double beta)
{
    return std::exp(-std::pow(t / tau, beta));
}

}  // namespace

double SpinEnsembleState::polarization() const
{
    double p = 0;
    for (auto const& sh : shells)
        p += sh.sign * sh.weight;
    return p;
}

SpinEnsembleState SpinEnsembleState::with_polarization(double p,
                                                       double temperature_K,
                                                       double field_T)
{
    if (!(std::fabs(p) <= 1))
        throw ValidationError("polarization must lie in [-1, 1]");
    if (!(temperature_K > 0))
        throw ValidationError("temperature must be positive");
    SpinEnsembleState s;
    s.shells = {Shell{std::fabs(p), p < 0 ? -1 : 1}};
    s.temperature_K = temperature_K;
    s.field_T = field_T;
    return s;
}

T2PrimeTable::T2PrimeTable(std::vector<std::pair<double, double>> kelvin_seconds)
    : pts_(std::move(kelvin_seconds))
{
    if (pts_.empty())
        throw ValidationError("T2' table is empty");
    std::sort(pts_.begin(), pts_.end());
    for (std::size_t i = 0; i < pts_.size(); ++i)
    {
        if (!(pts_[i].first > 0 && pts_[i].second > 0))
            throw ValidationError("T2' table entries must be positive");
        if (i > 0 && pts_[i].first == pts_[i - 1].first)
            throw ValidationError("T2' table has duplicate temperatures");
    }
}

double T2PrimeTable::operator()(double temperature_K) const
{
    if (pts_.empty())
        throw ValidationError("T2' table is empty");
    if (temperature_K <= pts_.front().first)
        return pts_.front().second;
    if (temperature_K >= pts_.back().first)
        return pts_.back().second;
    auto hi = std::upper_bound(
        pts_.begin(), pts_.end(), temperature_K,
        [](double t, auto const& p) { return t < p.first; });
    auto lo = hi - 1;
    if (lo->first == temperature_K)
        return lo->second;
    double const f = std::log(temperature_K / lo->first)
                     / std::log(hi->first / lo->first);
    return std::exp(std::log(lo->second)
                    + f * std::log(hi->second / lo->second));
}

double TextureParams::minority_weight(double theta) const
{
    double const d = theta - std::numbers::pi;
    double const s = sigma_pi * std::numbers::pi;
    return w_max * std::exp(-d * d / (2 * s * s));
}

double RelaxationParams::temp_scale(double temperature_K) const
{
    return std::pow(temperature_K / temp_ref_K, temp_exponent);
}

void RelaxationParams::validate() const
{
    if (!(t1_high_s > 0 && r_low_per_s >= 0 && bc_T > 0 && temp_ref_K > 0))
        throw ValidationError("T1 law parameters must be positive");
    if (!(t2_star_s > 0))
        throw ValidationError("T2* must be positive");
    if (!(beta > 0 && beta <= 1))
        throw ValidationError("stretch exponent must lie in (0, 1]");
    if (!(std::fabs(p_eq) <= 1))
        throw ValidationError("equilibrium polarization must lie in [-1, 1]");
    if (!(texture.w_max >= 0 && texture.w_max < 0.5 && texture.sigma_pi > 0
          && texture.tau_plus_ratio > 0 && texture.tau_minus_ratio > 0))
    {
        throw ValidationError("texture parameters out of range");
    }
    t2_prime(temp_ref_K);
}

void solve_t1_law(RelaxationParams& params,
                  double b1_T,
                  double t1_s,
                  double b2_T,
                  double t2_s)
{
    auto lorentz = [&](double b) { return 1 / (1 + (b / params.bc_T) * (b / params.bc_T)); };
    double const a1 = lorentz(b1_T);
    double const a2 = lorentz(b2_T);
    if (a1 == a2)
        throw CalibrationError("T1 anchors must be at distinct fields");
    params.r_low_per_s = (1 / t1_s - 1 / t2_s) / (a1 - a2);
    double const high_rate = 1 / t1_s - a1 * params.r_low_per_s;
    if (!(params.r_low_per_s >= 0 && high_rate > 0))
        throw CalibrationError("T1 anchors inconsistent with a rate decreasing in B");
    params.t1_high_s = 1 / high_rate;
}

RelaxationParams default_relaxation()
{
    RelaxationParams p;
    solve_t1_law(p, 0.027, 386.0, 9.4, 3094.0);
    p.temp_exponent = 2.4303297914;
    p.t2_prime = T2PrimeTable({{10, 180.0}, {100, 93.5}, {295, 25.0}});
    return p;
}

double t1_of(double b_T, double temperature_K, RelaxationParams const& params)
{
    double const x = b_T / params.bc_T;
    double const rate = params.temp_scale(temperature_K)
                        * (1 / params.t1_high_s + params.r_low_per_s / (1 + x * x));
    return 1 / rate;
}

SpinEnsembleState relax(SpinEnsembleState state,
                        FieldTrace const& trace,
                        RelaxationParams const& params)
{
    if (trace.empty())
        throw ValidationError("relax requires a non-empty field trace");
    double exponent = 0;
    double prev_rate = 1 / t1_of(trace.front().b_T, state.temperature_K, params);
    for (std::size_t i = 1; i < trace.size(); ++i)
    {
        double const rate = 1 / t1_of(trace[i].b_T, state.temperature_K, params);
        exponent += 0.5 * (prev_rate + rate) * (trace[i].t_s - trace[i - 1].t_s);
        prev_rate = rate;
    }
    double const decay = std::exp(-exponent);
    scale_shells(state, decay);
    if (params.p_eq != 0)
        add_to_bulk(state, params.p_eq * (1 - decay));
    state.field_T = trace.back().b_T;
    return state;
}

SpinEnsembleState relax_at(SpinEnsembleState state,
                           double b_T,
                           double duration_s,
                           RelaxationParams const& params)
{
    if (!(duration_s >= 0))
        throw ValidationError("relaxation duration must be non-negative");
    return relax(std::move(state), {{0.0, b_T}, {duration_s, b_T}}, params);
}

double EprSpectrum::density(double f_GHz) const
{
    double g = 0;
    for (auto const& pk : peaks)
    {
        double const d = (f_GHz - pk.center_GHz) / pk.sigma_GHz;
        g += pk.amplitude * std::exp(-0.5 * d * d);
    }
    return g;
}

double EprSpectrum::integral(double lo_GHz, double hi_GHz) const
{
    double sum = 0;
    for (auto const& pk : peaks)
    {
        double const s = pk.sigma_GHz * std::numbers::sqrt2;
        sum += pk.amplitude * pk.sigma_GHz * std::sqrt(std::numbers::pi / 2)
               * (std::erf((hi_GHz - pk.center_GHz) / s)
                  - std::erf((lo_GHz - pk.center_GHz) / s));
    }
    return sum;
}

double DnpParams::zfs_center(double temperature_K) const
{
    return zfs_ref_GHz + zfs_slope_GHz_per_K * (temperature_K - zfs_ref_K);
}

void DnpParams::validate() const
{
    if (!(pump_rate > 0))
        throw ValidationError("DNP pump rate must be positive");
    if (!(p_max > 0 && p_max <= 1))
        throw ValidationError("P_max must lie in (0, 1]");
    if (!(main_sigma_GHz > 0 && second_sigma_GHz > 0 && main_amplitude > 0
          && second_amplitude > 0))
    {
        throw ValidationError("EPR peak widths and amplitudes must be positive");
    }
}

EprSpectrum epr_spectrum(double temperature_K, DnpParams const& dnp)
{
    if (!(temperature_K > 0))
        throw ValidationError("temperature must be positive");
    EprSpectrum s;
    s.temperature_K = temperature_K;
    s.peaks = {
        {dnp.zfs_center(temperature_K), dnp.main_sigma_GHz, dnp.main_amplitude},
        {dnp.second_center_GHz, dnp.second_sigma_GHz, dnp.second_amplitude},
    };
    return s;
}

double pump_rate(PumpWindow const& window,
                 EprSpectrum const& spectrum,
                 DnpParams const& dnp)
{
    if (!(window.width_GHz > 0))
        throw ValidationError("pump window width must be positive");
    double const lo = window.center_GHz - window.width_GHz / 2;
    double const hi = window.center_GHz + window.width_GHz / 2;
    return dnp.pump_rate
           * numeric::adaptive_simpson(
               [&](double f) { return spectrum.density(f); }, lo, hi, 1e-9);
}

SpinEnsembleState dnp_pump(SpinEnsembleState state,
                           PumpWindow const& window,
                           double duration_s,
                           EprSpectrum const& spectrum,
                           DnpParams const& dnp,
                           double b_T,
                           RelaxationParams const& params)
{
    if (!(duration_s >= 0))
        throw ValidationError("pump duration must be non-negative");
    double const r = pump_rate(window, spectrum, dnp);
    double const k = r + 1 / t1_of(b_T, state.temperature_K, params);
    double const decay = std::exp(-k * duration_s);
    scale_shells(state, decay);
    add_to_bulk(state, r * dnp.p_max / k * (1 - decay));
    state.field_T = b_T;
    return state;
}

double calibrate_temperature_exponent(RelaxationParams params,
                                      DnpParams const& dnp,
                                      double target_ratio,
                                      double t_low_K,
                                      double t_high_K,
                                      double pump_s,
                                      double window_GHz,
                                      double b_T)
{
    auto pumped = [&](double temperature) {
        auto const spec = epr_spectrum(temperature, dnp);
        PumpWindow const w{dnp.zfs_center(temperature), window_GHz};
        auto const s0 = SpinEnsembleState::with_polarization(0, temperature, b_T);
        return dnp_pump(s0, w, pump_s, spec, dnp, b_T, params).polarization();
    };
    auto residual = [&](double p) {
        params.temp_exponent = p;
        return pumped(t_low_K) / pumped(t_high_K) - target_ratio;
    };
    return numeric::find_root(residual, 0.0, 10.0);
}

DecaySeries fid_series(SpinEnsembleState const& state,
                       RelaxationParams const& params,
                       double dt_s,
                       std::size_t n)
{
    if (n < 1 || !(dt_s > 0))
        throw ValidationError("FID series needs n >= 1 and dt > 0");
    double const a = std::fabs(state.polarization());
    DecaySeries out;
    out.temperature_K = state.temperature_K;
    out.protocol = "FID";
    out.t.resize(n);
    out.y.resize(n);
    for (std::size_t k = 0; k < n; ++k)
    {
        double const t = double(k) * dt_s;
        double const x = t / params.t2_star_s;
        out.t[k] = t;
        out.y[k] = a * std::exp(-x * x);
    }
    return out;
}

double spinlock_amplitude(double polarization,
                          double theta,
                          double t_s,
                          double temperature_K,
                          RelaxationParams const& params)
{
    double const t2p = params.t2_prime(temperature_K);
    if (std::fabs(theta - std::numbers::pi / 2) < std::numbers::pi / 4)
        return std::fabs(polarization) * stretched(t_s, t2p, params.beta);
    auto const& tx = params.texture;
    double const wm = tx.minority_weight(theta);
    return polarization
           * ((1 - wm) * stretched(t_s, tx.tau_plus_ratio * t2p, params.beta)
              - wm * stretched(t_s, tx.tau_minus_ratio * t2p, params.beta));
}

DecaySeries spinlock_series(SpinEnsembleState const& state,
                            double theta,
                            double t_p_s,
                            double period_s,
                            std::size_t n_pulses,
                            RelaxationParams const& params)
{
    if (!(t_p_s > 0 && t_p_s < period_s))
    {
        std::ostringstream os;
        os << "spin-lock geometry requires 0 < t_p < period (t_p=" << t_p_s
           << " s, period=" << period_s << " s)";
        throw ValidationError(os.str());
    }
    if (n_pulses < 1)
        throw ValidationError("spin-lock series needs at least one pulse");
    double const p = state.polarization();
    DecaySeries out;
    out.temperature_K = state.temperature_K;
    out.protocol = "SPINLOCK";
    out.t.resize(n_pulses);
    out.y.resize(n_pulses);
    for (std::size_t k = 0; k < n_pulses; ++k)
    {
        double const t = double(k + 1) * period_s;
        out.t[k] = t;
        out.y[k] = spinlock_amplitude(p, theta, t, state.temperature_K, params);
    }
    return out;
}

std::optional<double> zero_crossing_time(DecaySeries const& series)
{
    if (series.empty())
        throw ValidationError("zero_crossing_time needs a non-empty series");
    for (std::size_t i = 0; i + 1 < series.size(); ++i)
    {
        double const a = series.y[i];
        double const b = series.y[i + 1];
        if (a == 0 && i == 0)
            continue;
        if ((a > 0 && b <= 0) || (a < 0 && b >= 0))
        {
            if (b == 0)
                return series.t[i + 1];
            double const f = a / (a - b);
            return series.t[i] + f * (series.t[i + 1] - series.t[i]);
        }
    }
    return std::nullopt;
}

std::optional<double> texture_crossing_time(double theta,
                                            double temperature_K,
                                            RelaxationParams const& params)
{
    if (std::fabs(theta - std::numbers::pi / 2) < std::numbers::pi / 4)
        return std::nullopt;
    auto const& tx = params.texture;
    double const wm = tx.minority_weight(theta);
    double const wp = 1 - wm;
    double const t2p = params.t2_prime(temperature_K);
    double const b = params.beta;
    double const rate_gap = std::pow(tx.tau_plus_ratio * t2p, -b)
                            - std::pow(tx.tau_minus_ratio * t2p, -b);
    if (!(wm > 0 && wp > wm && rate_gap > 0))
        return std::nullopt;
    return std::pow(std::log(wp / wm) / rate_gap, 1 / b);
}

}  // namespace fcdnp
