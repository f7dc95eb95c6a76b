// Copyright 2026 The fcdnp Authors.
// SPDX-License-Identifier: Apache-2.0
//! \file fcdnp/protocols.hpp
//! End-to-end field-cycling experiments: pump at low field, shuttle,
//! optionally relax at an intermediate field, and read out at the
//! magnet's sweet spot.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "acquisition.hpp"
#include "analysis.hpp"
#include "config.hpp"
#include "fieldmap.hpp"
#include "sequencer.hpp"
#include "shuttle.hpp"
#include "spinmodel.hpp"

namespace fcdnp {

enum class ProtocolKind
{
    fid,
    spinlock,
    dnp_epr_scan,
    relaxometry,
    texture_scan,
};

std::string_view to_string(ProtocolKind kind);
std::optional<ProtocolKind> protocol_from_string(std::string_view name);

//! Default scan grid (2.6-3.0 GHz, 5 MHz) and relaxometry times (8
//! log-spaced points, 10-5000 s).
std::vector<double> default_scan_freqs_GHz();
std::vector<double> default_t_int_s();

//! Pulse-program geometry, integer ns.
struct SequenceTiming
{
    std::uint64_t period_ns = 75000;
    std::uint64_t pulse_ns = 68000;
    std::uint64_t acq_start_ns = 69000;
    std::uint64_t acq_end_ns = 74000;
    std::uint64_t shuttle_trigger_ns = 1000;
    std::uint64_t fid_pulse_ns = 10000;
    std::uint64_t fid_dead_ns = 1000;
};

enum class ReadoutMode
{
    automatic,  //!< synthesize for SL/FID runs, model for scans
    synthesize, //!< raw samples through Goertzel extraction
    model,      //!< per-window estimate with its exact noise law
};

struct ProtocolConfig
{
    ProtocolKind kind = ProtocolKind::spinlock;
    double temperature_K = 100;

    // Setup
    FieldAnchors anchors;
    std::string field_table_csv;  //!< overrides the analytic map when set
    MotionLimits motion;
    PlanOptions plan;
    RelaxationParams relax = default_relaxation();
    DnpParams dnp;
    AcqConfig acq;
    SequenceTiming timing;
    double signal_gain = 100;  //!< signal units per unit polarization

    // Pump
    double pump_duration_s = 60;
    std::optional<double> pump_center_GHz;  //!< default: main EPR peak
    double pump_width_GHz = 0.2;

    // Readout
    double readout_duration_s = 60;
    double integration_s = 60;  //!< single-shot metric window
    ReadoutMode readout_mode = ReadoutMode::automatic;
    bool thermal = false;  //!< start from thermal polarization at high field
    double thermal_polarization = 2.4e-5;
    double spinlock_theta = 1.5707963267948966;
    double fid_duration_s = 5e-3;
    bool keep_windows = true;  //!< keep the SL window records in the result

    // Scan axes
    std::vector<double> scan_freqs_GHz = default_scan_freqs_GHz();
    double scan_width_GHz = 0.025;
    double scan_pump_s = 90;
    std::vector<double> b_int_T{0.027, 9.4};
    std::vector<double> t_int_s = default_t_int_s();
    std::vector<double> theta_pi{0.5, 0.8, 0.85, 0.9, 0.95, 1.0};
    double texture_readout_s = 300;

    std::uint64_t seed = 0;
};

//! Every key understood by protocol_config_from().
std::span<std::string_view const> known_config_keys();

//! Throws ConfigError on unknown keys or bad values.
ProtocolConfig protocol_config_from(Config const& cfg);

//! Exact stage bookkeeping for one axis point, in ns.
struct StageAccount
{
    std::uint64_t pump_ns = 0;
    std::uint64_t shuttle_ns = 0;
    std::uint64_t wait_ns = 0;
    std::uint64_t readout_ns = 0;
    std::uint64_t program_ns = 0;  //!< compiled program duration

    std::uint64_t total() const { return pump_ns + shuttle_ns + wait_ns + readout_ns; }
};

struct ResultRecord
{
    double axis_value = 0;
    std::map<std::string, std::optional<double>> values;
    StageAccount stages;
};

struct NamedSeries
{
    std::string name;
    DecaySeries series;
};

struct NamedFit
{
    std::string name;
    DecayFit fit;
};

struct ProtocolResult
{
    ProtocolKind protocol = ProtocolKind::spinlock;
    double temperature_K = 0;
    std::string axis;
    std::vector<ResultRecord> records;
    std::map<std::string, double> summary;
    std::vector<NamedFit> fits;
    std::vector<EprPeak> peaks;
    std::vector<NamedSeries> series;
    std::vector<WindowRecord> windows;

    std::uint64_t seed = 0;
    std::uint64_t config_hash = 0;
    std::map<std::string, std::string> config;
};

//! Field map used by the protocols (analytic unless a table is given).
FieldMap protocol_field_map(ProtocolConfig const& cfg);

ProtocolResult run_spinlock_protocol(ProtocolConfig const& cfg);
ProtocolResult run_fid_protocol(ProtocolConfig const& cfg);
ProtocolResult run_dnp_epr_scan(ProtocolConfig const& cfg);
ProtocolResult run_relaxometry(ProtocolConfig const& cfg);
ProtocolResult run_texture_scan(ProtocolConfig const& cfg);

//! Dispatch on cfg.kind.
ProtocolResult run_protocol(ProtocolConfig const& cfg);
//! Parse, run, and record the configuration echo and hash.
ProtocolResult run_protocol(Config const& cfg);

}  // namespace fcdnp
