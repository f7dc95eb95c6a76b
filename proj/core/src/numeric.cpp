// Copyright 2026 The fcdnp Authors.
// SPDX-License-Identifier: Apache-2.0
#include "fcdnp/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include <boost/math/tools/roots.hpp>
#include <boost/math/tools/toms748_solve.hpp>

#include "fcdnp/error.hpp"

namespace fcdnp::numeric {
namespace {

double simpson_step(std::function<double(double)> const& f,
                    double a,
                    double fa,
                    double b,
                    double fb,
                    double m,
                    double fm,
                    double whole,
                    double tol,
                    int depth)
{
    double const lm = 0.5 * (a + m);
    double const rm = 0.5 * (m + b);
    double const flm = f(lm);
    double const frm = f(rm);
    double const left = (m - a) / 6 * (fa + 4 * flm + fm);
    double const right = (b - m) / 6 * (fm + 4 * frm + fb);
    double const delta = left + right - whole;
    if (depth <= 0 || std::fabs(delta) <= 15 * tol)
    {
        return left + right + delta / 15;
    }
    return simpson_step(f, a, fa, m, fm, lm, flm, left, tol / 2, depth - 1)
           + simpson_step(f, m, fm, b, fb, rm, frm, right, tol / 2, depth - 1);
}

}  // namespace

double adaptive_simpson(std::function<double(double)> const& f,
                        double a,
                        double b,
                        double rel_tol,
                        int max_depth)
{
    if (a == b)
        return 0;
    double const fa = f(a);
    double const fb = f(b);
    double const m = 0.5 * (a + b);
    double const fm = f(m);
    double const whole = (b - a) / 6 * (fa + 4 * fm + fb);

    // Seed the absolute tolerance from a coarse composite estimate so a
    // near-zero integrand still terminates.
    double coarse = 0;
    constexpr int n = 64;
    double const h = (b - a) / n;
    for (int i = 0; i < n; ++i)
    {
        double const x0 = a + i * h;
        coarse += h / 6 * (f(x0) + 4 * f(x0 + h / 2) + f(x0 + h));
    }
    double const tol = std::max(rel_tol * std::fabs(coarse), 1e-300);
    return simpson_step(f, a, fa, b, fb, m, fm, whole, tol, max_depth);
}

double find_root(std::function<double(double)> const& f,
                 double lo,
                 double hi,
                 int bits)
{
    double const flo = f(lo);
    double const fhi = f(hi);
    if (flo == 0)
        return lo;
    if (fhi == 0)
        return hi;
    if ((flo < 0) == (fhi < 0))
    {
        throw CalibrationError("root not bracketed on ["
                               + std::to_string(lo) + ", "
                               + std::to_string(hi) + "]");
    }
    std::uintmax_t max_iter = 500;
    auto const r = boost::math::tools::toms748_solve(
        f, lo, hi, flo, fhi, boost::math::tools::eps_tolerance<double>(bits),
        max_iter);
    // Pick the endpoint with the smaller residual.
    double const a = r.first;
    double const b = r.second;
    return std::fabs(f(a)) <= std::fabs(f(b)) ? a : b;
}

double bisect_root(std::function<double(double)> const& f, double lo, double hi)
{
    double flo = f(lo);
    double const fhi = f(hi);
    if (flo == 0)
        return lo;
    if (fhi == 0)
        return hi;
    if ((flo < 0) == (fhi < 0))
    {
        throw CalibrationError("root not bracketed on ["
                               + std::to_string(lo) + ", "
                               + std::to_string(hi) + "]");
    }
    for (int i = 0; i < 2000; ++i)
    {
        double const mid = 0.5 * (lo + hi);
        if (mid <= std::min(lo, hi) || mid >= std::max(lo, hi))
            break;
        double const fm = f(mid);
        if (fm == 0)
            return mid;
        if ((fm < 0) == (flo < 0))
        {
            lo = mid;
            flo = fm;
        }
        else
        {
            hi = mid;
        }
    }
    return std::fabs(f(lo)) <= std::fabs(f(hi)) ? lo : hi;
}

//---------------------------------------------------------------------------//
MonotoneCubic::MonotoneCubic(std::vector<double> x, std::vector<double> y)
    : x_(std::move(x)), y_(std::move(y))
{
    if (x_.size() != y_.size() || x_.size() < 2)
    {
        throw DataError("monotone cubic needs at least two (x, y) nodes");
    }
    for (std::size_t i = 1; i < x_.size(); ++i)
    {
        if (!(x_[i] > x_[i - 1]))
            throw DataError("interpolation nodes must be strictly increasing");
    }

    std::size_t const n = x_.size();
    std::vector<double> h(n - 1), secant(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i)
    {
        h[i] = x_[i + 1] - x_[i];
        secant[i] = (y_[i + 1] - y_[i]) / h[i];
    }

    slope_.assign(n, 0.0);
    if (n == 2)
    {
        slope_[0] = slope_[1] = secant[0];
        return;
    }
    for (std::size_t i = 1; i + 1 < n; ++i)
    {
        double const d0 = secant[i - 1];
        double const d1 = secant[i];
        if (d0 * d1 <= 0)
            continue;
        double const w1 = 2 * h[i] + h[i - 1];
        double const w2 = h[i] + 2 * h[i - 1];
        slope_[i] = (w1 + w2) / (w1 / d0 + w2 / d1);
    }

    // Three-point one-sided end slopes, clamped to preserve shape.
    auto end_slope = [](double h0, double h1, double d0, double d1) {
        double s = ((2 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if (s * d0 <= 0)
            s = 0;
        else if (d0 * d1 <= 0 && std::fabs(s) > std::fabs(3 * d0))
            s = 3 * d0;
        return s;
    };
    slope_[0] = end_slope(h[0], h[1], secant[0], secant[1]);
    slope_[n - 1]
        = end_slope(h[n - 2], h[n - 3], secant[n - 2], secant[n - 3]);
}

std::size_t MonotoneCubic::segment(double x) const
{
    auto it = std::upper_bound(x_.begin(), x_.end(), x);
    std::size_t i = it == x_.begin() ? 0 : std::size_t(it - x_.begin()) - 1;
    return std::min(i, x_.size() - 2);
}

double MonotoneCubic::operator()(double x) const
{
    std::size_t const i = segment(x);
    if (x == x_[i])
        return y_[i];
    if (x == x_[i + 1])
        return y_[i + 1];
    double const h = x_[i + 1] - x_[i];
    double const t = (x - x_[i]) / h;
    double const t2 = t * t;
    double const t3 = t2 * t;
    double const h00 = 2 * t3 - 3 * t2 + 1;
    double const h10 = t3 - 2 * t2 + t;
    double const h01 = -2 * t3 + 3 * t2;
    double const h11 = t3 - t2;
    return h00 * y_[i] + h10 * h * slope_[i] + h01 * y_[i + 1]
           + h11 * h * slope_[i + 1];
}

double MonotoneCubic::derivative(double x) const
{
    std::size_t const i = segment(x);
    double const h = x_[i + 1] - x_[i];
    double const t = (x - x_[i]) / h;
    double const t2 = t * t;
    double const d00 = 6 * t2 - 6 * t;
    double const d10 = 3 * t2 - 4 * t + 1;
    double const d01 = -6 * t2 + 6 * t;
    double const d11 = 3 * t2 - 2 * t;
    return (d00 * y_[i] + d01 * y_[i + 1]) / h + d10 * slope_[i]
           + d11 * slope_[i + 1];
}

}  // namespace fcdnp::numeric
