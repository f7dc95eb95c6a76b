// Copyright 2026 The fcdnp Authors.
// SPDX-License-Identifier: Apache-2.0
#include "fcdnp/fieldmap.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "fcdnp/error.hpp"

namespace fcdnp {
namespace {

// Normalized finite-solenoid shape and its derivatives in u (mm).
double shape(double u, double L, double R)
{
    double const a = u + L;
    double const b = u - L;
    return a / std::sqrt(a * a + R * R) - b / std::sqrt(b * b + R * R);
}

double shape_d1(double u, double L, double R)
{
    double const a = u + L;
    double const b = u - L;
    double const R2 = R * R;
    return R2 / std::pow(a * a + R2, 1.5) - R2 / std::pow(b * b + R2, 1.5);
}

double shape_d2(double u, double L, double R)
{
    double const a = u + L;
    double const b = u - L;
    double const R2 = R * R;
    return -3 * R2 * a / std::pow(a * a + R2, 2.5)
           + 3 * R2 * b / std::pow(b * b + R2, 2.5);
}

// Location (u < 0) of the gradient maximum of the unit-half-length shape.
double unit_peak_offset(double rho)
{
    auto d2 = [rho](double u) { return shape_d2(u, 1.0, rho); };
    return numeric::find_root(d2, -1.0 - 20.0 * rho - 1.0, -1e-9);
}

// Field ratio B(peak)/B(center) as a function of R/L.
double peak_field_ratio(double rho)
{
    double const u = unit_peak_offset(rho);
    return shape(u, 1.0, rho) / shape(0.0, 1.0, rho);
}

}  // namespace

//---------------------------------------------------------------------------//
double CalibrationResiduals::max() const
{
    return std::max({std::fabs(sweet), std::fabs(gradient_peak_field),
                     std::fabs(gradient_peak_offset), std::fabs(dnp_field)});
}

FieldMap FieldMap::analytic(SolenoidParams params, double z_min_mm)
{
    if (!(params.half_length_mm > 0 && params.radius_mm > 0
          && params.plateau_T > 0 && params.center_mm > z_min_mm))
    {
        throw ValidationError("solenoid parameters must be positive with the "
                              "center above the travel start");
    }
    FieldMap m;
    m.model_ = params;
    m.z_min_ = z_min_mm;
    m.z_max_ = params.center_mm + (params.center_mm - z_min_mm);
    m.sweet_spot_ = params.center_mm;
    m.plateau_field_ = params.plateau_T;
    m.shape_norm_ = shape(0.0, params.half_length_mm, params.radius_mm);
    m.gradient_peak_ = m.locate_gradient_peak();
    return m;
}

FieldMap FieldMap::tabulated(std::vector<double> z_mm, std::vector<double> b_T)
{
    for (double b : b_T)
    {
        if (!(b > 0) || !std::isfinite(b))
            throw DataError("field map values must be finite and positive");
    }
    FieldMap m;
    auto peak = std::max_element(b_T.begin(), b_T.end());
    std::size_t const ipeak = std::size_t(peak - b_T.begin());
    m.sweet_spot_ = z_mm.at(ipeak);
    m.plateau_field_ = *peak;
    m.z_min_ = z_mm.front();
    m.z_max_ = z_mm.back();
    m.model_ = numeric::MonotoneCubic(std::move(z_mm), std::move(b_T));
    m.gradient_peak_ = m.locate_gradient_peak();
    return m;
}

std::optional<SolenoidParams> FieldMap::solenoid() const
{
    if (auto const* p = std::get_if<SolenoidParams>(&model_))
        return *p;
    return std::nullopt;
}

void FieldMap::check_range(double z_mm) const
{
    if (!(z_mm >= z_min_ && z_mm <= z_max_))
    {
        std::ostringstream os;
        os << "position " << z_mm << " mm outside field map range [" << z_min_
           << ", " << z_max_ << "]";
        throw RangeError(os.str());
    }
}

double FieldMap::field_at(double z_mm) const
{
    check_range(z_mm);
    if (auto const* p = std::get_if<SolenoidParams>(&model_))
    {
        double const u = z_mm - p->center_mm;
        return p->plateau_T * shape(u, p->half_length_mm, p->radius_mm)
               / shape_norm_;
    }
    return std::get<numeric::MonotoneCubic>(model_)(z_mm);
}

double FieldMap::gradient_at(double z_mm) const
{
    check_range(z_mm);
    constexpr double per_mm_to_per_m = 1000.0;
    if (auto const* p = std::get_if<SolenoidParams>(&model_))
    {
        double const u = z_mm - p->center_mm;
        return per_mm_to_per_m * p->plateau_T
               * shape_d1(u, p->half_length_mm, p->radius_mm) / shape_norm_;
    }
    return per_mm_to_per_m
           * std::get<numeric::MonotoneCubic>(model_).derivative(z_mm);
}

double FieldMap::position_of_field(double b_T) const
{
    double const lo_field = field_at(z_min_);
    // Anchor fields are only reproduced to rounding; snap them to the ends.
    double const tol = 1e-9 * plateau_field_;
    if (b_T < lo_field && b_T >= lo_field - tol)
        b_T = lo_field;
    if (b_T > plateau_field_ && b_T <= plateau_field_ + tol)
        b_T = plateau_field_;
    if (!(b_T >= lo_field && b_T <= plateau_field_))
    {
        std::ostringstream os;
        os << "field " << b_T << " T outside attainable range [" << lo_field
           << ", " << plateau_field_ << "]";
        throw RangeError(os.str());
    }
    if (b_T == lo_field)
        return z_min_;
    if (b_T == plateau_field_)
        return sweet_spot_;
    return numeric::bisect_root(
        [this, b_T](double z) { return field_at(z) - b_T; }, z_min_,
        sweet_spot_);
}

double FieldMap::locate_gradient_peak() const
{
    if (auto const* p = std::get_if<SolenoidParams>(&model_))
    {
        double const u = p->half_length_mm
                         * unit_peak_offset(p->radius_mm / p->half_length_mm);
        return std::clamp(p->center_mm + u, z_min_, sweet_spot_);
    }
    // Tabulated: dense scan then golden refinement on the best cell.
    auto const& cubic = std::get<numeric::MonotoneCubic>(model_);
    constexpr int n = 20000;
    double const h = (sweet_spot_ - z_min_) / n;
    if (!(h > 0))
        return z_min_;
    int best = 0;
    double best_g = -1;
    for (int i = 0; i <= n; ++i)
    {
        double const g = cubic.derivative(z_min_ + i * h);
        if (g > best_g)
        {
            best_g = g;
            best = i;
        }
    }
    double a = z_min_ + std::max(0, best - 1) * h;
    double b = z_min_ + std::min(n, best + 1) * h;
    double const inv_phi = 0.5 * (std::sqrt(5.0) - 1);
    for (int it = 0; it < 200 && b - a > 1e-12; ++it)
    {
        double const c = b - inv_phi * (b - a);
        double const d = a + inv_phi * (b - a);
        if (cubic.derivative(c) > cubic.derivative(d))
            b = d;
        else
            a = c;
    }
    return 0.5 * (a + b);
}

//---------------------------------------------------------------------------//
CalibrationResiduals calibration_residuals(FieldMap const& map,
                                           FieldAnchors const& anchors)
{
    CalibrationResiduals r;
    double const sweet = map.sweet_spot();
    r.sweet = (map.field_at(sweet) - anchors.b_sweet_T) / anchors.b_sweet_T;
    double const zp = map.gradient_peak_position();
    r.gradient_peak_field = (map.field_at(zp) - anchors.b_gradient_peak_T)
                            / anchors.b_gradient_peak_T;
    r.gradient_peak_offset = ((sweet - zp) - anchors.peak_offset_mm)
                             / anchors.peak_offset_mm;
    r.dnp_field = (map.field_at(anchors.dnp_position_mm) - anchors.b_dnp_T)
                  / anchors.b_dnp_T;
    return r;
}

FieldMap calibrate_default_map(FieldAnchors const& a)
{
    if (!(0 < a.b_dnp_T && a.b_dnp_T < a.b_gradient_peak_T
          && a.b_gradient_peak_T < a.b_sweet_T && a.peak_offset_mm > 0))
    {
        throw CalibrationError(
            "inconsistent anchors: require 0 < B_dnp < B_gradient_peak < "
            "B_sweet and a positive peak offset");
    }
    double const target = a.b_gradient_peak_T / a.b_sweet_T;

    // Attainable ratio range of the finite solenoid: long coil -> 1/2,
    // short coil (current loop) -> 1.25^-1.5.
    constexpr double rho_lo = 1e-3;
    constexpr double rho_hi = 1e2;
    double const ratio_lo = peak_field_ratio(rho_lo);
    double const ratio_hi = peak_field_ratio(rho_hi);
    if (!(target > ratio_lo && target < ratio_hi))
    {
        std::ostringstream os;
        os << "gradient-peak field ratio " << target
           << " not attainable by a finite solenoid (range " << ratio_lo
           << " .. " << ratio_hi << ")";
        throw CalibrationError(os.str());
    }
    double const rho = numeric::find_root(
        [target](double r) { return peak_field_ratio(r) - target; }, rho_lo,
        rho_hi);
    double const half_length = a.peak_offset_mm / -unit_peak_offset(rho);
    double const radius = rho * half_length;

    // Distance from the park position to the center that yields B_dnp.
    double const norm = shape(0.0, half_length, radius);
    double const dnp_ratio = a.b_dnp_T / a.b_sweet_T;
    auto park = [&](double d) {
        return shape(-d, half_length, radius) / norm - dnp_ratio;
    };
    double hi = 2 * a.peak_offset_mm;
    while (park(hi) > 0)
    {
        hi *= 2;
        if (hi > 1e9)
            throw CalibrationError("DNP field not reached by the fringe model");
    }
    double const distance = numeric::find_root(park, a.peak_offset_mm, hi);

    SolenoidParams p;
    p.center_mm = a.dnp_position_mm + distance;
    p.half_length_mm = half_length;
    p.radius_mm = radius;
    p.plateau_T = a.b_sweet_T;
    FieldMap map = FieldMap::analytic(p, a.dnp_position_mm);

    auto const res = calibration_residuals(map, a);
    if (!(res.max() < 1e-6))
    {
        std::ostringstream os;
        os << std::setprecision(3)
           << "field map calibration did not converge: residuals sweet="
           << res.sweet << " peak_field=" << res.gradient_peak_field
           << " peak_offset=" << res.gradient_peak_offset
           << " dnp=" << res.dnp_field;
        throw CalibrationError(os.str());
    }
    return map;
}

//---------------------------------------------------------------------------//
FieldMap read_field_csv(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line))
        throw DataError("field map CSV is empty");
    if (!line.empty() && line.back() == '\r')
        line.pop_back();
    if (line != "position_mm,field_T")
        throw DataError("field map CSV header must be 'position_mm,field_T'");

    std::vector<double> z, b;
    std::size_t lineno = 1;
    while (std::getline(in, line))
    {
        ++lineno;
        if (line.empty())
            continue;
        auto comma = line.find(',');
        if (comma == std::string::npos)
        {
            throw DataError("field map CSV line " + std::to_string(lineno)
                            + ": expected two columns");
        }
        try
        {
            std::size_t used = 0;
            double const zi = std::stod(line.substr(0, comma), &used);
            double const bi = std::stod(line.substr(comma + 1));
            if (!z.empty() && !(zi > z.back()))
            {
                throw DataError("field map CSV line " + std::to_string(lineno)
                                + ": positions must be strictly increasing");
            }
            z.push_back(zi);
            b.push_back(bi);
        }
        catch (std::invalid_argument const&)
        {
            throw DataError("field map CSV line " + std::to_string(lineno)
                            + ": not a number");
        }
    }
    if (z.size() < 2)
        throw DataError("field map CSV needs at least two rows");
    return FieldMap::tabulated(std::move(z), std::move(b));
}

FieldMap load_field_csv(std::string const& path)
{
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open field map '" + path + "'");
    return read_field_csv(in);
}

void write_field_csv(std::ostream& out, FieldMap const& map, double step_mm)
{
    out << "position_mm,field_T\n" << std::setprecision(17);
    auto const n = static_cast<long>(
        std::floor((map.z_max() - map.z_min()) / step_mm));
    for (long i = 0; i <= n; ++i)
    {
        double const z = map.z_min() + double(i) * step_mm;
        out << z << ',' << map.field_at(z) << '\n';
    }
}

}  // namespace fcdnp
