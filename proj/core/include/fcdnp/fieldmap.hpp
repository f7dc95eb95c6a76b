// Copyright 2026 The fcdnp Authors.
// SPDX-License-Identifier: Apache-2.0
//! \file fcdnp/fieldmap.hpp
//! On-axis magnet field profile B(z) and gradient dB/dz.
//!
//! Coordinates: z in mm along the shuttle travel, z = 0 at the DNP park
//! position, increasing toward the magnet's sweet spot. Fields in tesla,
//! gradients in T/m.
#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "numeric.hpp"

namespace fcdnp {

//! Anchor points the default analytic map is calibrated against.
struct FieldAnchors
{
    double b_sweet_T = 9.4;
    double b_gradient_peak_T = 5.1;
    double peak_offset_mm = 186.0;  //!< gradient peak distance before sweet spot
    double b_dnp_T = 0.027;
    double dnp_position_mm = 0.0;
};

//! Finite-solenoid on-axis model parameters.
struct SolenoidParams
{
    double center_mm = 0;
    double half_length_mm = 0;
    double radius_mm = 0;
    double plateau_T = 0;

    bool operator==(SolenoidParams const&) const = default;
};

//---------------------------------------------------------------------------//
/*!
 * Immutable on-axis field profile.
 *
 * Either an analytic finite solenoid
 * \f[
 *   B(u) = B_p \frac{f(u)}{f(0)},\quad
 *   f(u) = \frac{u+L}{\sqrt{(u+L)^2+R^2}} - \frac{u-L}{\sqrt{(u-L)^2+R^2}}
 * \f]
 * with \f$u = z - z_c\f$, or a tabulated map interpolated with a monotone
 * cubic. The sweet spot is the field maximum; the "monotone segment" runs
 * from the start of the modeled range to the sweet spot.
 */
class FieldMap
{
  public:
    static FieldMap analytic(SolenoidParams params, double z_min_mm);
    static FieldMap tabulated(std::vector<double> z_mm, std::vector<double> b_T);

    //! Field in tesla; throws RangeError outside [z_min, z_max].
    double field_at(double z_mm) const;
    //! dB/dz in T/m; throws RangeError outside [z_min, z_max].
    double gradient_at(double z_mm) const;
    //! Inverse of field_at on the monotone segment; throws RangeError if
    //! B lies outside [field_at(z_min), plateau_field].
    double position_of_field(double b_T) const;

    double z_min() const { return z_min_; }
    double z_max() const { return z_max_; }
    double sweet_spot() const { return sweet_spot_; }
    double plateau_field() const { return plateau_field_; }
    //! Position of the maximum of dB/dz on the monotone segment.
    double gradient_peak_position() const { return gradient_peak_; }

    bool is_analytic() const
    {
        return std::holds_alternative<SolenoidParams>(model_);
    }
    std::optional<SolenoidParams> solenoid() const;

  private:
    FieldMap() = default;
    void check_range(double z_mm) const;
    double locate_gradient_peak() const;

    std::variant<SolenoidParams, numeric::MonotoneCubic> model_;
    double z_min_ = 0;
    double z_max_ = 0;
    double sweet_spot_ = 0;
    double plateau_field_ = 0;
    double gradient_peak_ = 0;
    double shape_norm_ = 1;  // f(0) for the analytic model
};

//! Solve the finite-solenoid parameters so the four anchors hold to 1e-6
//! relative. Throws CalibrationError on inconsistent anchors or if the
//! solved model misses any constraint.
FieldMap calibrate_default_map(FieldAnchors const& anchors = {});

//! Residuals of each anchor constraint for a solved map (relative).
struct CalibrationResiduals
{
    double sweet = 0;
    double gradient_peak_field = 0;
    double gradient_peak_offset = 0;
    double dnp_field = 0;

    double max() const;
};
CalibrationResiduals calibration_residuals(FieldMap const& map,
                                           FieldAnchors const& anchors);

//! Read a `position_mm,field_T` CSV table.
FieldMap read_field_csv(std::istream& in);
FieldMap load_field_csv(std::string const& path);
//! Write the map sampled at `step_mm` in the same CSV format.
void write_field_csv(std::ostream& out, FieldMap const& map, double step_mm);

}  // namespace fcdnp
