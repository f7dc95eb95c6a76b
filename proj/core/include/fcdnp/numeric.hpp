// Copyright 2026 The fcdnp Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <span>
#include <vector>

namespace fcdnp::numeric {

//! Adaptive Simpson quadrature on [a, b] to relative tolerance `rel_tol`.
double adaptive_simpson(std::function<double(double)> const& f,
                        double a,
                        double b,
                        double rel_tol,
                        int max_depth = 50);

//! Root of f on [lo, hi] (f(lo), f(hi) of opposite sign) via TOMS 748.
//! Iterates until the bracket agrees to `bits` binary digits; throws
//! CalibrationError if the bracket is invalid.
double find_root(std::function<double(double)> const& f,
                 double lo,
                 double hi,
                 int bits = 52);

//! Root by plain bisection down to adjacent doubles. Slower than
//! find_root but bit-reproducible and robust on monotone functions.
double bisect_root(std::function<double(double)> const& f,
                   double lo,
                   double hi);

//---------------------------------------------------------------------------//
/*!
 * Shape-preserving piecewise cubic Hermite interpolant (Fritsch-Carlson).
 *
 * Node slopes are the weighted harmonic mean of adjacent secants, zero at
 * local extrema, so monotone data yield a monotone interpolant with no
 * overshoot. Evaluation is exact at the nodes.
 */
class MonotoneCubic
{
  public:
    MonotoneCubic() = default;
    MonotoneCubic(std::vector<double> x, std::vector<double> y);

    double operator()(double x) const;
    double derivative(double x) const;

    double front() const { return x_.front(); }
    double back() const { return x_.back(); }
    std::span<double const> nodes() const { return x_; }
    std::span<double const> values() const { return y_; }

  private:
    std::size_t segment(double x) const;

    std::vector<double> x_;
    std::vector<double> y_;
    std::vector<double> slope_;
};

}  // namespace fcdnp::numeric
