// Copyright 2026 The fcdnp Authors.
// SPDX-License-Identifier: Apache-2.0
#include "fcdnp/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <mutex>
#include <numbers>
#include <ostream>
#include <sstream>

#include <Eigen/Dense>
#include <fftw3.h>

#include "fcdnp/error.hpp"

namespace fcdnp {
namespace {

struct LmResult
{
    std::vector<double> params;
    double cost = 0;
    int iterations = 0;
};

// Streaming Levenberg-Marquardt. `eval(i, p, grad)` returns the residual
// y_i - f(t_i; p) and writes df/dp into grad.
template<class Eval, class Feasible>
LmResult levenberg_marquardt(std::size_t n_points,
                             std::vector<double> p,
                             Eval&& eval,
                             Feasible&& feasible,
                             FitOptions const& opt)
{
    auto const m = Eigen::Index(p.size());
    Eigen::MatrixXd jtj(m, m);
    Eigen::VectorXd jtr(m);
    std::vector<double> grad(p.size());

    auto accumulate = [&](std::vector<double> const& q, Eigen::MatrixXd& a,
                          Eigen::VectorXd& g) {
        a.setZero();
        g.setZero();
        double cost = 0;
        for (std::size_t i = 0; i < n_points; ++i)
        {
            double const r = eval(i, q.data(), grad.data());
            cost += r * r;
            for (Eigen::Index u = 0; u < m; ++u)
            {
                g[u] += grad[std::size_t(u)] * r;
                for (Eigen::Index v = 0; v <= u; ++v)
                    a(u, v) += grad[std::size_t(u)] * grad[std::size_t(v)];
            }
        }
        a.triangularView<Eigen::StrictlyUpper>() = a.transpose();
        return cost;
    };

    LmResult res;
    double cost = accumulate(p, jtj, jtr);
    if (!std::isfinite(cost))
        throw FitError("non-finite residual at the initial guess", cost);
    double lambda = 1e-3;
    Eigen::MatrixXd jtj_new(m, m);
    Eigen::VectorXd jtr_new(m);
    std::vector<double> trial(p.size());

    for (int it = 1; it <= opt.max_iterations; ++it)
    {
        res.iterations = it;
        bool accepted = false;
        while (!accepted)
        {
            Eigen::MatrixXd a = jtj;
            for (Eigen::Index u = 0; u < m; ++u)
                a(u, u) += lambda * std::max(jtj(u, u), 1e-300);
            Eigen::VectorXd const step = a.ldlt().solve(jtr);
            double max_rel_step = 0;
            for (std::size_t u = 0; u < p.size(); ++u)
            {
                trial[u] = p[u] + step[Eigen::Index(u)];
                max_rel_step = std::max(
                    max_rel_step, std::fabs(step[Eigen::Index(u)]) / (std::fabs(p[u]) + 1e-300));
            }
            if (step.allFinite() && feasible(trial))
            {
                double const new_cost = accumulate(trial, jtj_new, jtr_new);
                if (std::isfinite(new_cost) && new_cost <= cost)
                {
                    bool const done = cost - new_cost <= opt.rel_tol * cost
                                      || max_rel_step <= opt.rel_tol;
                    p = trial;
                    cost = new_cost;
                    jtj.swap(jtj_new);
                    jtr.swap(jtr_new);
                    lambda = std::max(lambda / 10, 1e-12);
                    if (done)
                    {
                        res.params = std::move(p);
                        res.cost = cost;
                        return res;
                    }
                    accepted = true;
                    continue;
                }
            }
            lambda *= 10;
            if (lambda > 1e16 || max_rel_step <= opt.rel_tol)
            {
                // No descent direction left at working precision.
                res.params = std::move(p);
                res.cost = cost;
                return res;
            }
        }
    }
    throw FitError("Levenberg-Marquardt did not converge in "
                       + std::to_string(opt.max_iterations) + " iterations",
                   cost);
}

struct Line
{
    double intercept = 0;
    double slope = 0;
};

// Least-squares line through (x, ln y) over points with y above 10% of
// the series maximum.
std::optional<Line> log_regression(DecaySeries const& s, bool square_t)
{
    double const ymax = *std::max_element(s.y.begin(), s.y.end());
    double sx = 0, sy = 0, sxx = 0, sxy = 0, n = 0;
    for (std::size_t i = 0; i < s.size(); ++i)
    {
        if (!(s.y[i] > 0.1 * ymax))
            continue;
        double const x = square_t ? s.t[i] * s.t[i] : s.t[i];
        double const y = std::log(s.y[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        n += 1;
    }
    double const den = n * sxx - sx * sx;
    if (n < 2 || !(den > 0))
        return std::nullopt;
    Line l;
    l.slope = (n * sxy - sx * sy) / den;
    l.intercept = (sy - l.slope * sx) / n;
    return l;
}

double decay_time_from(std::optional<Line> const& line,
                       DecaySeries const& s,
                       bool square_t)
{
    double const span = s.t.back() - s.t.front();
    if (!line || !(line->slope < 0))
        return span > 0 ? span : 1.0;
    return square_t ? std::sqrt(-1 / line->slope) : -1 / line->slope;
}

std::vector<double> initial_guess(DecaySeries const& s, DecayModel m)
{
    bool const sq = m == DecayModel::gaussian;
    auto const line = log_regression(s, sq);
    double const tau = decay_time_from(line, s, sq);
    double amp = line ? std::exp(line->intercept) : s.y.front();
    if (!(amp > 0) || !std::isfinite(amp))
        amp = *std::max_element(s.y.begin(), s.y.end());
    switch (m)
    {
        case DecayModel::exponential:
        case DecayModel::gaussian:
            return {amp, tau};
        case DecayModel::stretched:
            return {amp, tau, 1.0};
        case DecayModel::two_shell_signed:
            return {s.y.front() / 0.5, 0.25, tau, 2 * tau};
    }
    return {};
}

bool feasible_params(DecayModel m, std::vector<double> const& p)
{
    switch (m)
    {
        case DecayModel::exponential:
        case DecayModel::gaussian:
            return p[1] > 0;
        case DecayModel::stretched:
            return p[1] > 0 && p[2] > 0 && p[2] <= 2;
        case DecayModel::two_shell_signed:
            return p[1] >= 0 && p[1] < 1 && p[2] > 0 && p[3] > 0;
    }
    return false;
}

// Jacobian written into grad; returns the model value.
double eval_model(DecayModel m, double const* p, double t, double* grad)
{
    switch (m)
    {
        case DecayModel::exponential:
        {
            double const e = std::exp(-t / p[1]);
            grad[0] = e;
            grad[1] = p[0] * e * t / (p[1] * p[1]);
            return p[0] * e;
        }
        case DecayModel::gaussian:
        {
            double const x = t / p[1];
            double const e = std::exp(-x * x);
            grad[0] = e;
            grad[1] = p[0] * e * 2 * x * x / p[1];
            return p[0] * e;
        }
        case DecayModel::stretched:
        {
            double const x = t / p[1];
            double const xb = x > 0 ? std::pow(x, p[2]) : 0.0;
            double const e = std::exp(-xb);
            grad[0] = e;
            grad[1] = p[0] * e * xb * p[2] / p[1];
            grad[2] = x > 0 ? -p[0] * e * xb * std::log(x) : 0.0;
            return p[0] * e;
        }
        case DecayModel::two_shell_signed:
        {
            double const ep = std::exp(-t / p[2]);
            double const em = std::exp(-t / p[3]);
            double const w = p[1];
            grad[0] = (1 - w) * ep - w * em;
            grad[1] = p[0] * (-ep - em);
            grad[2] = p[0] * (1 - w) * ep * t / (p[2] * p[2]);
            grad[3] = -p[0] * w * em * t / (p[3] * p[3]);
            return p[0] * grad[0];
        }
    }
    return 0;
}

double e_fold_time(DecayModel m, std::vector<double> const& p)
{
    if (m != DecayModel::two_shell_signed)
        return p[1];
    std::array<double, 4> g{};
    double const y0 = std::fabs(eval_model(m, p.data(), 0, g.data()));
    auto below = [&](double t) {
        return std::fabs(eval_model(m, p.data(), t, g.data())) <= y0 / std::numbers::e;
    };
    double const horizon = 50 * std::max(p[2], p[3]);
    std::size_t const steps = 100000;
    double prev = 0;
    for (std::size_t k = 1; k <= steps; ++k)
    {
        double const t = horizon * double(k) / double(steps);
        if (below(t))
        {
            double lo = prev, hi = t;
            for (int i = 0; i < 100 && hi - lo > 1e-15 * hi; ++i)
            {
                double const mid = 0.5 * (lo + hi);
                (below(mid) ? hi : lo) = mid;
            }
            return hi;
        }
        prev = t;
    }
    return horizon;
}

void check_series(DecaySeries const& s)
{
    if (s.t.size() != s.y.size())
        throw DataError("series t and y lengths differ");
    for (std::size_t i = 0; i < s.size(); ++i)
    {
        if (!std::isfinite(s.t[i]) || !std::isfinite(s.y[i]))
            throw DataError("series contains non-finite values at index "
                            + std::to_string(i));
        if (i > 0 && !(s.t[i] > s.t[i - 1]))
            throw DataError("series time axis is not strictly increasing at index "
                            + std::to_string(i));
    }
}

std::mutex fftw_planner_mutex;

double median_in_place(std::vector<double>& v)
{
    auto const mid = v.begin() + std::ptrdiff_t(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    double const upper = *mid;
    if (v.size() % 2)
        return upper;
    double const lower = *std::max_element(v.begin(), mid);
    return 0.5 * (lower + upper);
}

}  // namespace

DecaySeries boxcar_smooth(DecaySeries const& series, std::size_t width)
{
    if (width == 0 || width % 2 == 0)
        throw ValidationError("boxcar width must be odd and positive");
    if (width > series.size())
        throw ValidationError("boxcar width exceeds series length");
    DecaySeries out = series;
    if (width == 1)
        return out;
    std::size_t const n = series.size();
    std::size_t const h = width / 2;
    std::vector<double> prefix(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        prefix[i + 1] = prefix[i] + series.y[i];
    for (std::size_t i = 0; i < n; ++i)
    {
        std::size_t const lo = i >= h ? i - h : 0;
        std::size_t const hi = std::min(n, i + h + 1);
        out.y[i] = (prefix[hi] - prefix[lo]) / double(hi - lo);
    }
    return out;
}

std::string_view to_string(DecayModel m)
{
    switch (m)
    {
        case DecayModel::exponential:
            return "exponential";
        case DecayModel::stretched:
            return "stretched";
        case DecayModel::gaussian:
            return "gaussian";
        case DecayModel::two_shell_signed:
            return "two-shell-signed";
    }
    return "unknown";
}

std::optional<DecayModel> decay_model_from_string(std::string_view name)
{
    for (auto m : {DecayModel::exponential, DecayModel::stretched,
                   DecayModel::gaussian, DecayModel::two_shell_signed})
    {
        if (to_string(m) == name)
            return m;
    }
    return std::nullopt;
}

std::size_t parameter_count(DecayModel m)
{
    return parameter_names(m).size();
}

std::vector<std::string_view> parameter_names(DecayModel m)
{
    switch (m)
    {
        case DecayModel::exponential:
        case DecayModel::gaussian:
            return {"amplitude", "tau_s"};
        case DecayModel::stretched:
            return {"amplitude", "tau_s", "beta"};
        case DecayModel::two_shell_signed:
            return {"amplitude", "w_minus", "tau_plus_s", "tau_minus_s"};
    }
    return {};
}

double model_value(DecayModel m, std::span<double const> params, double t)
{
    if (params.size() != parameter_count(m))
        throw ValidationError("wrong parameter count for decay model");
    std::array<double, 4> g{};
    return eval_model(m, params.data(), t, g.data());
}

std::vector<double> model_jacobian(DecayModel m,
                                   std::span<double const> params,
                                   double t)
{
    if (params.size() != parameter_count(m))
        throw ValidationError("wrong parameter count for decay model");
    std::vector<double> g(params.size());
    eval_model(m, params.data(), t, g.data());
    return g;
}

DecayFit fit_decay(DecaySeries const& series,
                   DecayModel model,
                   FitOptions const& options)
{
    check_series(series);
    if (series.size() < 8)
        throw FitError("decay fit needs at least 8 points", 0);
    if (!(*std::max_element(series.y.begin(), series.y.end()) > 0))
        throw FitError("decay fit needs a positive initial amplitude", 0);
    return fit_decay_from(series, model, initial_guess(series, model), options);
}

DecayFit fit_decay_from(DecaySeries const& series,
                        DecayModel model,
                        std::vector<double> initial,
                        FitOptions const& options)
{
    check_series(series);
    if (initial.size() != parameter_count(model))
        throw ValidationError("wrong parameter count for decay model");
    if (!feasible_params(model, initial))
        throw FitError("infeasible initial parameters", 0);
    auto eval = [&](std::size_t i, double const* p, double* g) {
        return series.y[i] - eval_model(model, p, series.t[i], g);
    };
    auto ok = [&](std::vector<double> const& p) { return feasible_params(model, p); };
    auto const r = levenberg_marquardt(series.size(), std::move(initial), eval, ok,
                                       options);
    DecayFit fit;
    fit.model = model;
    fit.params = r.params;
    fit.residual = r.cost;
    fit.rms = std::sqrt(r.cost / double(series.size()));
    fit.iterations = r.iterations;
    fit.e_fold_time_s = e_fold_time(model, fit.params);
    return fit;
}

std::vector<EprPeak> fit_gaussians(std::span<double const> x,
                                   std::span<double const> y,
                                   std::vector<EprPeak> initial,
                                   FitOptions const& options)
{
    if (x.size() != y.size())
        throw ValidationError("x and y lengths differ");
    if (initial.empty())
        throw ValidationError("Gaussian fit needs at least one initial peak");
    if (x.size() < 3 * initial.size())
        throw FitError("too few points for the number of Gaussian peaks", 0);
    std::vector<double> p;
    for (auto const& pk : initial)
    {
        p.push_back(pk.center_GHz);
        p.push_back(pk.sigma_GHz);
        p.push_back(pk.amplitude);
    }
    std::size_t const npk = initial.size();
    auto eval = [&](std::size_t i, double const* q, double* g) {
        double f = 0;
        for (std::size_t k = 0; k < npk; ++k)
        {
            double const c = q[3 * k], s = q[3 * k + 1], a = q[3 * k + 2];
            double const d = (x[i] - c) / s;
            double const e = std::exp(-0.5 * d * d);
            f += a * e;
            g[3 * k] = a * e * d / s;
            g[3 * k + 1] = a * e * d * d / s;
            g[3 * k + 2] = e;
        }
        return y[i] - f;
    };
    auto ok = [&](std::vector<double> const& q) {
        for (std::size_t k = 0; k < npk; ++k)
        {
            if (!(q[3 * k + 1] > 0))
                return false;
        }
        return true;
    };
    auto const r = levenberg_marquardt(x.size(), std::move(p), eval, ok, options);
    std::vector<EprPeak> out(npk);
    for (std::size_t k = 0; k < npk; ++k)
        out[k] = {r.params[3 * k], r.params[3 * k + 1], r.params[3 * k + 2]};
    return out;
}

Spectrum spectrum_of_series(DecaySeries const& series)
{
    check_series(series);
    std::size_t const n = series.size();
    if (n < 4)
        throw ValidationError("spectrum needs at least 4 points");
    double const dt = (series.t.back() - series.t.front()) / double(n - 1);
    for (std::size_t i = 1; i < n; ++i)
    {
        if (std::fabs((series.t[i] - series.t[i - 1]) - dt) > 1e-6 * dt)
            throw DataError("spectrum requires a uniform time grid");
    }

    std::size_t const nf = n / 2 + 1;
    double* in = fftw_alloc_real(n);
    fftw_complex* out = fftw_alloc_complex(nf);
    fftw_plan plan;
    {
        std::lock_guard lock(fftw_planner_mutex);
        plan = fftw_plan_dft_r2c_1d(int(n), in, out, FFTW_ESTIMATE);
    }
    std::copy(series.y.begin(), series.y.end(), in);
    fftw_execute(plan);

    Spectrum s;
    s.frequency_Hz.resize(nf);
    s.magnitude.resize(nf);
    for (std::size_t k = 0; k < nf; ++k)
    {
        s.frequency_Hz[k] = double(k) / (double(n) * dt);
        s.magnitude[k] = std::hypot(out[k][0], out[k][1]);
    }
    {
        std::lock_guard lock(fftw_planner_mutex);
        fftw_destroy_plan(plan);
    }
    fftw_free(in);
    fftw_free(out);

    auto const peak = std::max_element(s.magnitude.begin(), s.magnitude.end());
    s.peak_index = std::size_t(peak - s.magnitude.begin());
    s.peak = *peak;
    if (s.peak == 0)
        return s;

    std::size_t const guard = std::max<std::size_t>(8, n / 1000);
    std::vector<double> off;
    off.reserve(nf);
    for (std::size_t k = 0; k < nf; ++k)
    {
        std::size_t const d = k > s.peak_index ? k - s.peak_index : s.peak_index - k;
        if (d > guard)
            off.push_back(s.magnitude[k]);
    }
    if (off.empty())
        throw DataError("series too short to estimate a spectral noise floor");
    double const med = median_in_place(off);
    for (auto& v : off)
        v = std::fabs(v - med);
    s.noise_floor = 1.4826 * median_in_place(off);
    s.snr = s.noise_floor > 0 ? s.peak / s.noise_floor
                              : std::numeric_limits<double>::infinity();
    return s;
}

void write_series_csv(std::ostream& out, DecaySeries const& series)
{
    out << "t_s,y\n" << std::setprecision(17);
    for (std::size_t i = 0; i < series.size(); ++i)
        out << series.t[i] << ',' << series.y[i] << '\n';
}

DecaySeries read_series_csv(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line))
        throw DataError("empty series CSV");
    if (!line.empty() && line.back() == '\r')
        line.pop_back();
    if (line != "t_s,y")
        throw DataError("series CSV header must be 't_s,y'");
    DecaySeries s;
    std::size_t row = 1;
    while (std::getline(in, line))
    {
        ++row;
        if (line.empty() || line == "\r")
            continue;
        std::istringstream ls(line);
        double t, y;
        char comma;
        if (!(ls >> t >> comma >> y) || comma != ',')
            throw DataError("malformed series CSV row " + std::to_string(row));
        s.t.push_back(t);
        s.y.push_back(y);
    }
    check_series(s);
    return s;
}

}  // namespace fcdnp
