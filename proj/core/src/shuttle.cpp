// Copyright 2026 The fcdnp Authors.
// SPDX-License-Identifier: Apache-2.0
#include "fcdnp/shuttle.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "fcdnp/error.hpp"

namespace fcdnp {
namespace {

constexpr double mm_per_m = 1000.0;

// Planned motion from lo to hi (lo <= hi) on a uniform position grid with
// constant acceleration inside each cell.
struct Profile
{
    double lo = 0;
    double h = 0;
    std::vector<double> v;       // node speeds, mm/s
    std::vector<double> t;       // node arrival times, s
    double total() const { return t.back(); }
};

Profile build_profile(FieldMap const& map,
                      double lo,
                      double hi,
                      MotionLimits const& limits,
                      double step)
{
    Profile p;
    p.lo = lo;
    double const distance = hi - lo;
    auto const n = std::max<std::size_t>(
        2, static_cast<std::size_t>(std::ceil(distance / step)));
    p.h = distance / double(n);

    std::vector<double> cap(n + 1);
    for (std::size_t i = 0; i <= n; ++i)
    {
        double const z = i == n ? hi : lo + double(i) * p.h;
        cap[i] = velocity_cap(map, limits, z);
        if (!(cap[i] > 0) && i != 0 && i != n)
        {
            std::ostringstream os;
            os << "shuttle infeasible: eddy load cap forces v=0 at z=" << z
               << " mm";
            throw ValidationError(os.str());
        }
    }

    double const two_ah = 2 * limits.a_max_mm_s2 * p.h;
    p.v = cap;
    p.v.front() = 0;
    p.v.back() = 0;
    for (std::size_t i = 0; i < n; ++i)
        p.v[i + 1] = std::min(p.v[i + 1], std::sqrt(p.v[i] * p.v[i] + two_ah));
    for (std::size_t i = n; i > 0; --i)
        p.v[i - 1] = std::min(p.v[i - 1], std::sqrt(p.v[i] * p.v[i] + two_ah));

    p.t.assign(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        p.t[i + 1] = p.t[i] + 2 * p.h / (p.v[i] + p.v[i + 1]);
    return p;
}

// Position and speed on the profile at time tau (0 <= tau <= total).
TrajectorySample sample_profile(Profile const& p, std::size_t& cell, double tau)
{
    std::size_t const n = p.v.size() - 1;
    while (cell + 1 < n && p.t[cell + 1] <= tau)
        ++cell;
    while (cell > 0 && p.t[cell] > tau)
        --cell;
    double const v0 = p.v[cell];
    double const v1 = p.v[cell + 1];
    double const accel = (v1 * v1 - v0 * v0) / (2 * p.h);
    double const dt = std::clamp(tau - p.t[cell], 0.0, p.t[cell + 1] - p.t[cell]);
    TrajectorySample s;
    s.t_s = tau;
    s.z_mm = p.lo + double(cell) * p.h + v0 * dt + 0.5 * accel * dt * dt;
    s.z_mm = std::clamp(s.z_mm, p.lo + double(cell) * p.h,
                        p.lo + double(cell + 1) * p.h);
    s.v_mm_s = std::max(0.0, v0 + accel * dt);
    return s;
}

}  // namespace

double eddy_force(FieldMap const& map,
                  MotionLimits const& limits,
                  double z_mm,
                  double v_mm_s)
{
    double const g = map.gradient_at(z_mm);
    return limits.eddy_k * (v_mm_s / mm_per_m) * g * g;
}

double velocity_cap(FieldMap const& map, MotionLimits const& limits, double z_mm)
{
    double const g = map.gradient_at(z_mm);
    double const denom = limits.eddy_k * g * g;
    if (!std::isfinite(denom))
        return 0;
    double cap = limits.v_max_mm_s;
    if (denom > 0)
        cap = std::min(cap, mm_per_m * limits.load_set_point_N / denom);
    // Rounding must never leave the cap above the set point.
    while (cap > 0 && eddy_force(map, limits, z_mm, cap) > limits.load_set_point_N)
        cap = std::nextafter(cap, 0.0);
    return cap;
}

double plan_duration(FieldMap const& map,
                     double z_start_mm,
                     double z_end_mm,
                     MotionLimits const& limits,
                     PlanOptions const& options)
{
    if (z_start_mm == z_end_mm)
        return 0;
    double const lo = std::min(z_start_mm, z_end_mm);
    double const hi = std::max(z_start_mm, z_end_mm);
    return build_profile(map, lo, hi, limits, options.position_step_mm).total();
}

ShuttleTrajectory plan_trajectory(FieldMap const& map,
                                  double z_start_mm,
                                  double z_end_mm,
                                  MotionLimits const& limits,
                                  PlanOptions const& options)
{
    if (!(limits.v_max_mm_s > 0 && limits.a_max_mm_s2 > 0 && limits.eddy_k > 0
          && limits.load_set_point_N > 0))
    {
        throw ValidationError("motion limits must be strictly positive");
    }
    if (!(options.grid_s > 0 && options.position_step_mm > 0))
        throw ValidationError("plan grid steps must be positive");
    map.field_at(z_start_mm);
    map.field_at(z_end_mm);

    ShuttleTrajectory traj;
    traj.start_mm = z_start_mm;
    traj.end_mm = z_end_mm;
    if (z_start_mm == z_end_mm)
    {
        traj.samples.push_back({0.0, z_start_mm, 0.0});
        return traj;
    }

    bool const ascending = z_end_mm > z_start_mm;
    double const lo = std::min(z_start_mm, z_end_mm);
    double const hi = std::max(z_start_mm, z_end_mm);
    Profile const prof
        = build_profile(map, lo, hi, limits, options.position_step_mm);
    double const total = prof.total();
    traj.total_time_s = total;

    auto const steps = static_cast<std::size_t>(std::floor(total / options.grid_s));
    traj.samples.reserve(steps + 2);
    std::size_t cell = ascending ? 0 : prof.v.size() - 2;
    for (std::size_t k = 0; k <= steps; ++k)
    {
        double const t = double(k) * options.grid_s;
        if (t >= total)
            break;
        double const tau = ascending ? t : total - t;
        TrajectorySample s = sample_profile(prof, cell, tau);
        s.v_mm_s = std::min(s.v_mm_s, velocity_cap(map, limits, s.z_mm));
        s.t_s = t;
        if (!ascending)
            s.v_mm_s = -s.v_mm_s;
        traj.samples.push_back(s);
    }
    traj.samples.front() = {0.0, z_start_mm, 0.0};
    traj.samples.push_back({total, z_end_mm, 0.0});
    return traj;
}

FieldTrace field_vs_time(ShuttleTrajectory const& traj, FieldMap const& map)
{
    FieldTrace out;
    out.reserve(traj.samples.size());
    for (auto const& s : traj.samples)
        out.push_back({s.t_s, map.field_at(s.z_mm)});
    return out;
}

double time_in_band(ShuttleTrajectory const& traj,
                    FieldMap const& map,
                    double b_low_T,
                    double b_high_T)
{
    if (!(b_low_T < b_high_T))
        throw ValidationError("time_in_band requires B_low < B_high");
    auto const trace = field_vs_time(traj, map);
    auto inside = [&](double b) { return b >= b_low_T && b < b_high_T ? 1.0 : 0.0; };
    double sum = 0;
    for (std::size_t i = 0; i + 1 < trace.size(); ++i)
    {
        double const dt = trace[i + 1].t_s - trace[i].t_s;
        sum += 0.5 * dt * (inside(trace[i].b_T) + inside(trace[i + 1].b_T));
    }
    return sum;
}

MotionLimits calibrate_eddy_coefficient(FieldMap const& map,
                                        double z_start_mm,
                                        double z_end_mm,
                                        double target_time_s,
                                        MotionLimits base,
                                        PlanOptions const& options)
{
    auto residual = [&](double log_k) {
        MotionLimits l = base;
        l.eddy_k = std::exp(log_k);
        return plan_duration(map, z_start_mm, z_end_mm, l, options) - target_time_s;
    };
    double const log_k = numeric::find_root(residual, std::log(1e-6), std::log(1e6), 36);
    base.eddy_k = std::exp(log_k);
    return base;
}

void write_trajectory_csv(std::ostream& out,
                          ShuttleTrajectory const& traj,
                          FieldMap const& map)
{
    out << "t_s,z_mm,v_mm_s,B_T\n" << std::setprecision(17);
    for (auto const& s : traj.samples)
    {
        out << s.t_s << ',' << s.z_mm << ',' << s.v_mm_s << ','
            << map.field_at(s.z_mm) << '\n';
    }
}

}  // namespace fcdnp
