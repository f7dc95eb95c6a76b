// Copyright 2026 The fcdnp Authors.
// SPDX-License-Identifier: Apache-2.0
#include "fcdnp/protocols.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <sstream>

#include "fcdnp/error.hpp"
#include "fcdnp/noise.hpp"

namespace fcdnp {

namespace {

constexpr std::array<std::pair<ProtocolKind, std::string_view>, 5> protocol_names{{
    {ProtocolKind::fid, "FID"},
    {ProtocolKind::spinlock, "SPINLOCK"},
    {ProtocolKind::dnp_epr_scan, "DNP_EPR_SCAN"},
    {ProtocolKind::relaxometry, "RELAXOMETRY"},
    {ProtocolKind::texture_scan, "TEXTURE_SCAN"},
}};

constexpr std::string_view config_keys[] = {
    "protocol", "temperature_K", "seed", "output.dir",
    "fieldmap.b_sweet_T", "fieldmap.b_gradient_peak_T", "fieldmap.peak_offset_mm",
    "fieldmap.b_dnp_T", "fieldmap.table_csv",
    "shuttle.v_max_mm_s", "shuttle.a_max_mm_s2", "shuttle.eddy_k",
    "shuttle.load_set_point_N", "shuttle.grid_s", "shuttle.position_step_mm",
    "plan.start_mm", "plan.end_mm", "plan.start_T", "plan.end_T",
    "t1.bc_T", "t1.low_field_T", "t1.low_field_s", "t1.high_field_T", "t1.high_field_s",
    "t1.temp_exponent", "t1.temp_ref_K",
    "spin.p_eq", "fid.t2star_s", "spinlock.t2prime", "spinlock.beta",
    "texture.w_max", "texture.sigma_pi", "texture.tau_plus_ratio", "texture.tau_minus_ratio",
    "dnp.pump_rate", "dnp.p_max", "dnp.zfs_ref_GHz", "dnp.zfs_ref_K",
    "dnp.zfs_slope_GHz_per_K", "dnp.main_sigma_GHz", "dnp.main_amplitude",
    "dnp.second_center_GHz", "dnp.second_sigma_GHz", "dnp.second_amplitude",
    "seq.period_ns", "seq.pulse_ns", "seq.acq_start_ns", "seq.acq_end_ns",
    "seq.shuttle_trigger_ns", "seq.fid_pulse_ns", "seq.fid_dead_ns",
    "acq.f_het_Hz", "acq.fs_Hz", "acq.n_samples", "acq.noise_sigma", "acq.signal_gain",
    "acq.workers", "acq.chunk_windows", "acq.simd",
    "pump.duration_s", "pump.center_GHz", "pump.width_GHz",
    "readout.duration_s", "readout.integration_s", "readout.mode", "readout.thermal",
    "readout.keep_windows", "thermal.polarization", "spinlock.theta_pi", "fid.duration_s",
    "scan.freqs_GHz", "scan.start_GHz", "scan.stop_GHz", "scan.step_GHz",
    "scan.width_GHz", "scan.pump_s",
    "relax.b_int_T", "relax.t_int_s", "texture.theta_pi", "texture.readout_s",
    "fieldmap.dnp_position_mm",
};

std::uint64_t to_ns(double seconds)
{
    if (!(seconds >= 0) || seconds > 1.8e10)
        throw ValidationError("duration out of range: " + std::to_string(seconds) + " s");
    return static_cast<std::uint64_t>(std::llround(seconds * 1e9));
}

std::vector<std::pair<double, double>> parse_t2prime(std::string const& text)
{
    std::vector<std::pair<double, double>> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
    {
        auto const colon = item.find(':');
        if (colon == std::string::npos)
            throw ConfigError("spinlock.t2prime: expected K:s pairs, got '" + item + "'");
        try
        {
            out.emplace_back(std::stod(item.substr(0, colon)),
                             std::stod(item.substr(colon + 1)));
        }
        catch (std::exception const&)
        {
            throw ConfigError("spinlock.t2prime: bad number in '" + item + "'");
        }
    }
    return out;
}

template<class F>
auto stage(char const* name, F&& f) -> decltype(f())
{
    try
    {
        return f();
    }
    catch (ProtocolError const&)
    {
        throw;
    }
    catch (std::exception const& e)
    {
        throw ProtocolError(name, e.what());
    }
}

//---------------------------------------------------------------------------//
// Shared experiment plumbing
//---------------------------------------------------------------------------//

struct Setup
{
    FieldMap map;
    double park_mm = 0;
    double sweet_mm = 0;
    double pump_field_T = 0;
};

Setup make_setup(ProtocolConfig const& cfg)
{
    return stage("setup", [&] {
        cfg.relax.validate();
        cfg.dnp.validate();
        cfg.acq.validate();
        if (!(cfg.temperature_K > 0))
            throw ValidationError("temperature must be positive");
        Setup s{protocol_field_map(cfg)};
        s.park_mm = s.map.position_of_field(cfg.anchors.b_dnp_T);
        s.sweet_mm = s.map.sweet_spot();
        s.pump_field_T = s.map.field_at(s.park_mm);
        return s;
    });
}

struct Leg
{
    std::uint64_t ns = 0;
    double survival = 1;
};

// Move between two positions, relaxing along B(t).
Leg shuttle_leg(ProtocolConfig const& cfg,
                Setup const& setup,
                SpinEnsembleState& state,
                double from_mm,
                double to_mm)
{
    return stage("shuttle", [&] {
        Leg leg;
        auto const traj = plan_trajectory(setup.map, from_mm, to_mm, cfg.motion, cfg.plan);
        leg.ns = to_ns(traj.total_time_s);
        double const before = state.polarization();
        state = relax(state, field_vs_time(traj, setup.map), cfg.relax);
        leg.survival = before != 0 ? state.polarization() / before : 1.0;
        return leg;
    });
}

struct ReadoutPlan
{
    bool fid = false;
    std::uint64_t windows = 0;        // spin-lock windows
    std::uint64_t fid_duration_ns = 0;
};

struct StagePlan
{
    std::uint64_t pump_ns = 0;
    std::vector<std::uint64_t> legs_ns;  // wait sits after the first leg
    std::uint64_t wait_ns = 0;
    ReadoutPlan readout;
};

PulseProgram experiment_program(StagePlan const& plan, SequenceTiming const& tm)
{
    PulseProgram p;
    auto edge = [&](std::uint64_t t, Channel ch, Action a) {
        p.statements.push_back(Statement{EdgeStmt{t, ch, a}});
    };
    std::uint64_t t = 0;
    if (plan.pump_ns > 0)
    {
        edge(0, Channel::laser, Action::on);
        edge(0, Channel::mw, Action::on);
        edge(plan.pump_ns, Channel::laser, Action::off);
        edge(plan.pump_ns, Channel::mw, Action::off);
        t = plan.pump_ns;
    }
    for (std::size_t i = 0; i < plan.legs_ns.size(); ++i)
    {
        std::uint64_t const leg = plan.legs_ns[i];
        if (leg > 0)
        {
            edge(t, Channel::shuttle, Action::on);
            edge(t + std::min(tm.shuttle_trigger_ns, leg), Channel::shuttle, Action::off);
        }
        t += leg;
        if (i == 0)
            t += plan.wait_ns;
    }
    if (plan.legs_ns.empty())
        t += plan.wait_ns;

    if (plan.readout.fid)
    {
        edge(t, Channel::rf, Action::on);
        edge(t + tm.fid_pulse_ns, Channel::rf, Action::off);
        std::uint64_t const acq = t + tm.fid_pulse_ns + tm.fid_dead_ns;
        edge(acq, Channel::acq, Action::on);
        edge(acq + plan.readout.fid_duration_ns, Channel::acq, Action::off);
    }
    else
    {
        auto sl = build_spinlock_program(plan.readout.windows, tm.pulse_ns, tm.period_ns,
                                         tm.acq_start_ns, tm.acq_end_ns);
        std::get<LoopStmt>(sl.statements.front().node).at_ns = t;
        p.statements.push_back(std::move(sl.statements.front()));
    }
    return p;
}

std::uint64_t readout_ns(ReadoutPlan const& r, SequenceTiming const& tm)
{
    return r.fid ? tm.fid_pulse_ns + tm.fid_dead_ns + r.fid_duration_ns
                 : r.windows * tm.period_ns;
}

// Validates each distinct program once per protocol run.
class ProgramChecker
{
  public:
    StageAccount account(StagePlan const& plan, SequenceTiming const& tm)
    {
        return stage("sequence", [&] {
            PulseProgram const prog = experiment_program(plan, tm);
            if (!last_ || !(*last_ == prog))
            {
                auto const report = validate(prog, 3);
                if (!report.ok())
                {
                    std::string msg = std::to_string(report.total) + " violation(s)";
                    for (auto const& v : report.violations)
                        msg += "; " + v.message;
                    throw ValidationError(msg);
                }
                last_ = prog;
            }
            StageAccount a;
            a.pump_ns = plan.pump_ns;
            for (auto l : plan.legs_ns)
                a.shuttle_ns += l;
            a.wait_ns = plan.wait_ns;
            a.readout_ns = readout_ns(plan.readout, tm);
            a.program_ns = compile_unchecked(prog).duration_ns();
            if (a.program_ns != a.total())
                throw ValidationError("stage accounting mismatch: program "
                                      + std::to_string(a.program_ns) + " ns vs stages "
                                      + std::to_string(a.total()) + " ns");
            return a;
        });
    }

  private:
    std::optional<PulseProgram> last_;
};

SpinEnsembleState pump_state(ProtocolConfig const& cfg,
                             Setup const& setup,
                             PumpWindow const& window,
                             double duration_s)
{
    return stage("pump", [&] {
        auto s = SpinEnsembleState::with_polarization(0, cfg.temperature_K, setup.pump_field_T);
        auto const spec = epr_spectrum(cfg.temperature_K, cfg.dnp);
        return dnp_pump(s, window, duration_s, spec, cfg.dnp, setup.pump_field_T, cfg.relax);
    });
}

PumpWindow default_pump_window(ProtocolConfig const& cfg)
{
    return {cfg.pump_center_GHz.value_or(cfg.dnp.zfs_center(cfg.temperature_K)),
            cfg.pump_width_GHz};
}

bool synthesize_readout(ProtocolConfig const& cfg)
{
    switch (cfg.readout_mode)
    {
        case ReadoutMode::synthesize:
            return true;
        case ReadoutMode::model:
            return false;
        case ReadoutMode::automatic:
            return cfg.kind == ProtocolKind::spinlock || cfg.kind == ProtocolKind::fid;
    }
    return true;
}

struct Readout
{
    DecaySeries series;      // in-phase amplitude per window
    double quad_sigma = 0;   // rms of the quadrature component
    std::vector<WindowRecord> windows;
};

// Per-window readout of true signed amplitudes `truth(k)`.
template<class Truth>
Readout acquire(ProtocolConfig const& cfg,
                std::uint64_t count,
                Truth&& truth,
                double t0,
                double dt,
                std::uint64_t seed,
                bool keep_windows)
{
    return stage("acquisition", [&] {
        Readout r;
        r.series.temperature_K = cfg.temperature_K;
        r.series.t.resize(count);
        r.series.y.resize(count);
        for (std::uint64_t k = 0; k < count; ++k)
            r.series.t[k] = t0 + double(k) * dt;
        double quad_ss = 0;
        if (synthesize_readout(cfg))
        {
            AcqConfig acq = cfg.acq;
            acq.seed = seed;
            auto src = synthetic_source(
                count, [&](std::uint64_t k) { return ToneEstimate{truth(k), 0.0}; }, acq);
            if (keep_windows)
                r.windows.reserve(count);
            stream_process(src, acq, [&](std::span<WindowRecord const> recs) {
                for (auto const& w : recs)
                {
                    r.series.y[w.index] = in_phase(w);
                    double const q = w.amplitude * std::sin(w.phase);
                    quad_ss += q * q;
                }
                if (keep_windows)
                    r.windows.insert(r.windows.end(), recs.begin(), recs.end());
            });
        }
        else
        {
            double const sw = cfg.acq.window_noise_sigma();
            NormalStream in(seed, 1);
            NormalStream quad(seed, 2);
            for (std::uint64_t k = 0; k < count; ++k)
            {
                r.series.y[k] = truth(k) + sw * in();
                double const q = sw * quad();
                quad_ss += q * q;
            }
        }
        r.quad_sigma = count ? std::sqrt(quad_ss / double(count)) : 0.0;
        return r;
    });
}

// Fit on a block-averaged copy first so noisy tails cannot derail the
// log-linear start, then refine on the full series.
DecayFit robust_fit(DecaySeries const& s, DecayModel model)
{
    return stage("fit", [&] {
        std::size_t const blocks = std::min<std::size_t>(s.size(), 1000);
        std::size_t const per = s.size() / blocks;
        DecaySeries avg;
        for (std::size_t b = 0; b < blocks; ++b)
        {
            double st = 0, sy = 0;
            for (std::size_t i = b * per; i < (b + 1) * per; ++i)
            {
                st += s.t[i];
                sy += s.y[i];
            }
            avg.t.push_back(st / double(per));
            avg.y.push_back(sy / double(per));
        }
        auto const coarse = fit_decay(avg, model);
        return fit_decay_from(s, model, coarse.params);
    });
}

double integrated(DecaySeries const& s, std::size_t n)
{
    double sum = 0;
    for (std::size_t i = 0; i < std::min(n, s.size()); ++i)
        sum += s.y[i];
    return sum;
}

ProtocolResult base_result(ProtocolConfig const& cfg, std::string axis)
{
    ProtocolResult r;
    r.protocol = cfg.kind;
    r.temperature_K = cfg.temperature_K;
    r.axis = std::move(axis);
    r.seed = cfg.seed;
    return r;
}

std::uint64_t window_count(double duration_s, std::uint64_t period_ns)
{
    auto const n = static_cast<std::uint64_t>(std::floor(duration_s * 1e9 / double(period_ns)));
    if (n < 1)
        throw ProtocolError("setup", "readout shorter than one spin-lock period");
    return n;
}

// Pump at the park position, then shuttle to the sweet spot.
struct Prepared
{
    SpinEnsembleState state;
    double pump_polarization = 0;
    Leg leg;
    std::uint64_t pump_ns = 0;
};

Prepared prepare_hyperpolarized(ProtocolConfig const& cfg,
                                Setup const& setup,
                                PumpWindow const& window,
                                double pump_s)
{
    Prepared p;
    p.state = pump_state(cfg, setup, window, pump_s);
    p.pump_polarization = p.state.polarization();
    p.pump_ns = to_ns(pump_s);
    p.leg = shuttle_leg(cfg, setup, p.state, setup.park_mm, setup.sweet_mm);
    return p;
}

Prepared prepare_readout_state(ProtocolConfig const& cfg, Setup const& setup)
{
    if (!cfg.thermal)
        return prepare_hyperpolarized(cfg, setup, default_pump_window(cfg), cfg.pump_duration_s);
    Prepared p;
    p.state = SpinEnsembleState::with_polarization(
        cfg.thermal_polarization, cfg.temperature_K, setup.map.plateau_field());
    p.pump_polarization = 0;
    return p;
}

double kernel_sum(ProtocolConfig const& cfg, std::uint64_t n, double theta)
{
    double const period = double(cfg.timing.period_ns) * 1e-9;
    double sum = 0;
    for (std::uint64_t k = 0; k < n; ++k)
        sum += spinlock_amplitude(1.0, theta, double(k + 1) * period, cfg.temperature_K, cfg.relax);
    return sum;
}

std::string field_tag(double b)
{
    std::ostringstream os;
    os << b << "T";
    return os.str();
}

}  // namespace

std::string_view to_string(ProtocolKind kind)
{
    for (auto const& [k, name] : protocol_names)
    {
        if (k == kind)
            return name;
    }
    return "UNKNOWN";
}

std::optional<ProtocolKind> protocol_from_string(std::string_view name)
{
    for (auto const& [k, n] : protocol_names)
    {
        if (n.size() == name.size()
            && std::equal(n.begin(), n.end(), name.begin(), [](char a, char b) {
                   return a == std::toupper(static_cast<unsigned char>(b));
               }))
        {
            return k;
        }
    }
    return std::nullopt;
}

std::span<std::string_view const> known_config_keys()
{
    return config_keys;
}

std::vector<double> default_scan_freqs_GHz()
{
    std::vector<double> f;
    for (int i = 0; i <= 80; ++i)
        f.push_back(2.6 + 0.005 * i);
    return f;
}

std::vector<double> default_t_int_s()
{
    std::vector<double> t;
    for (int i = 0; i < 8; ++i)
        t.push_back(10 * std::pow(500.0, double(i) / 7));
    return t;
}

ProtocolConfig protocol_config_from(Config const& c)
{
    c.require_known(known_config_keys());
    ProtocolConfig p;
    auto const name = c.get_string("protocol", "SPINLOCK");
    auto const kind = protocol_from_string(name);
    if (!kind)
        throw ConfigError("protocol: unknown protocol '" + name + "'");
    p.kind = *kind;
    p.temperature_K = c.get_double("temperature_K", p.temperature_K);
    p.seed = c.get_u64("seed", p.seed);

    auto& a = p.anchors;
    a.b_sweet_T = c.get_double("fieldmap.b_sweet_T", a.b_sweet_T);
    a.b_gradient_peak_T = c.get_double("fieldmap.b_gradient_peak_T", a.b_gradient_peak_T);
    a.peak_offset_mm = c.get_double("fieldmap.peak_offset_mm", a.peak_offset_mm);
    a.b_dnp_T = c.get_double("fieldmap.b_dnp_T", a.b_dnp_T);
    a.dnp_position_mm = c.get_double("fieldmap.dnp_position_mm", a.dnp_position_mm);
    p.field_table_csv = c.get_string("fieldmap.table_csv", "");

    auto& m = p.motion;
    m.v_max_mm_s = c.get_double("shuttle.v_max_mm_s", m.v_max_mm_s);
    m.a_max_mm_s2 = c.get_double("shuttle.a_max_mm_s2", m.a_max_mm_s2);
    m.eddy_k = c.get_double("shuttle.eddy_k", m.eddy_k);
    m.load_set_point_N = c.get_double("shuttle.load_set_point_N", m.load_set_point_N);
    p.plan.grid_s = c.get_double("shuttle.grid_s", p.plan.grid_s);
    p.plan.position_step_mm = c.get_double("shuttle.position_step_mm", p.plan.position_step_mm);

    auto& r = p.relax;
    r.bc_T = c.get_double("t1.bc_T", r.bc_T);
    solve_t1_law(r, c.get_double("t1.low_field_T", 0.027), c.get_double("t1.low_field_s", 386),
                 c.get_double("t1.high_field_T", 9.4), c.get_double("t1.high_field_s", 3094));
    r.temp_exponent = c.get_double("t1.temp_exponent", r.temp_exponent);
    r.temp_ref_K = c.get_double("t1.temp_ref_K", r.temp_ref_K);
    r.p_eq = c.get_double("spin.p_eq", r.p_eq);
    r.t2_star_s = c.get_double("fid.t2star_s", r.t2_star_s);
    if (auto t2 = c.raw("spinlock.t2prime"))
        r.t2_prime = T2PrimeTable(parse_t2prime(*t2));
    r.beta = c.get_double("spinlock.beta", r.beta);
    r.texture.w_max = c.get_double("texture.w_max", r.texture.w_max);
    r.texture.sigma_pi = c.get_double("texture.sigma_pi", r.texture.sigma_pi);
    r.texture.tau_plus_ratio = c.get_double("texture.tau_plus_ratio", r.texture.tau_plus_ratio);
    r.texture.tau_minus_ratio = c.get_double("texture.tau_minus_ratio", r.texture.tau_minus_ratio);

    auto& d = p.dnp;
    d.pump_rate = c.get_double("dnp.pump_rate", d.pump_rate);
    d.p_max = c.get_double("dnp.p_max", d.p_max);
    d.zfs_ref_GHz = c.get_double("dnp.zfs_ref_GHz", d.zfs_ref_GHz);
    d.zfs_ref_K = c.get_double("dnp.zfs_ref_K", d.zfs_ref_K);
    d.zfs_slope_GHz_per_K = c.get_double("dnp.zfs_slope_GHz_per_K", d.zfs_slope_GHz_per_K);
    d.main_sigma_GHz = c.get_double("dnp.main_sigma_GHz", d.main_sigma_GHz);
    d.main_amplitude = c.get_double("dnp.main_amplitude", d.main_amplitude);
    d.second_center_GHz = c.get_double("dnp.second_center_GHz", d.second_center_GHz);
    d.second_sigma_GHz = c.get_double("dnp.second_sigma_GHz", d.second_sigma_GHz);
    d.second_amplitude = c.get_double("dnp.second_amplitude", d.second_amplitude);

    auto& t = p.timing;
    t.period_ns = c.get_u64("seq.period_ns", t.period_ns);
    t.pulse_ns = c.get_u64("seq.pulse_ns", t.pulse_ns);
    t.acq_start_ns = c.get_u64("seq.acq_start_ns", t.acq_start_ns);
    t.acq_end_ns = c.get_u64("seq.acq_end_ns", t.acq_end_ns);
    t.shuttle_trigger_ns = c.get_u64("seq.shuttle_trigger_ns", t.shuttle_trigger_ns);
    t.fid_pulse_ns = c.get_u64("seq.fid_pulse_ns", t.fid_pulse_ns);
    t.fid_dead_ns = c.get_u64("seq.fid_dead_ns", t.fid_dead_ns);
    if (t.period_ns == 0)
        throw ConfigError("seq.period_ns must be positive");

    auto& q = p.acq;
    q.f_het_Hz = c.get_double("acq.f_het_Hz", q.f_het_Hz);
    q.fs_Hz = c.get_double("acq.fs_Hz", q.fs_Hz);
    q.n_samples = c.get_u64("acq.n_samples", q.n_samples);
    q.noise_sigma = c.get_double("acq.noise_sigma", q.noise_sigma);
    q.workers = unsigned(c.get_u64("acq.workers", q.workers));
    q.chunk_windows = c.get_u64("acq.chunk_windows", q.chunk_windows);
    q.allow_simd = c.get_bool("acq.simd", q.allow_simd);
    p.signal_gain = c.get_double("acq.signal_gain", p.signal_gain);

    p.pump_duration_s = c.get_double("pump.duration_s", p.pump_duration_s);
    if (c.has("pump.center_GHz") && c.get_string("pump.center_GHz", "") != "auto")
        p.pump_center_GHz = c.get_double("pump.center_GHz", 0);
    p.pump_width_GHz = c.get_double("pump.width_GHz", p.pump_width_GHz);

    p.readout_duration_s = c.get_double("readout.duration_s", p.readout_duration_s);
    p.integration_s = c.get_double("readout.integration_s", p.integration_s);
    auto const mode = c.get_string("readout.mode", "auto");
    if (mode == "auto")
        p.readout_mode = ReadoutMode::automatic;
    else if (mode == "synthesize")
        p.readout_mode = ReadoutMode::synthesize;
    else if (mode == "model")
        p.readout_mode = ReadoutMode::model;
    else
        throw ConfigError("readout.mode: expected auto, synthesize or model");
    p.thermal = c.get_bool("readout.thermal", p.thermal);
    p.keep_windows = c.get_bool("readout.keep_windows", p.keep_windows);
    p.thermal_polarization = c.get_double("thermal.polarization", p.thermal_polarization);
    p.spinlock_theta = std::numbers::pi * c.get_double("spinlock.theta_pi", 0.5);
    p.fid_duration_s = c.get_double("fid.duration_s", p.fid_duration_s);

    if (c.has("scan.freqs_GHz"))
    {
        p.scan_freqs_GHz = c.get_doubles("scan.freqs_GHz", {});
    }
    else if (c.has("scan.start_GHz") || c.has("scan.stop_GHz") || c.has("scan.step_GHz"))
    {
        double const lo = c.get_double("scan.start_GHz", 2.6);
        double const hi = c.get_double("scan.stop_GHz", 3.0);
        double const step = c.get_double("scan.step_GHz", 0.005);
        if (!(step > 0 && hi >= lo))
            throw ConfigError("scan: need step_GHz > 0 and stop_GHz >= start_GHz");
        auto const n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9));
        for (std::size_t i = 0; i <= n; ++i)
            p.scan_freqs_GHz.push_back(lo + step * double(i));
    }
    else
    {
        p.scan_freqs_GHz = default_scan_freqs_GHz();
    }
    p.scan_width_GHz = c.get_double("scan.width_GHz", p.scan_width_GHz);
    p.scan_pump_s = c.get_double("scan.pump_s", p.scan_pump_s);
    p.b_int_T = c.get_doubles("relax.b_int_T", p.b_int_T);
    p.t_int_s = c.get_doubles("relax.t_int_s", default_t_int_s());
    p.theta_pi = c.get_doubles("texture.theta_pi", p.theta_pi);
    p.texture_readout_s = c.get_double("texture.readout_s", p.texture_readout_s);

    try
    {
        p.relax.validate();
        p.dnp.validate();
        p.acq.validate();
    }
    catch (ValidationError const& e)
    {
        throw ConfigError(e.what());
    }
    if (!(p.temperature_K > 0))
        throw ConfigError("temperature_K must be positive");
    if (!(p.pump_duration_s >= 0 && p.readout_duration_s >= 0 && p.scan_pump_s >= 0
          && p.fid_duration_s >= 0 && p.texture_readout_s >= 0))
    {
        throw ConfigError("durations must be non-negative");
    }
    if (!(p.signal_gain > 0))
        throw ConfigError("acq.signal_gain must be positive");
    return p;
}

FieldMap protocol_field_map(ProtocolConfig const& cfg)
{
    if (!cfg.field_table_csv.empty())
        return load_field_csv(cfg.field_table_csv);
    return calibrate_default_map(cfg.anchors);
}

//---------------------------------------------------------------------------//
// Protocols
//---------------------------------------------------------------------------//

ProtocolResult run_spinlock_protocol(ProtocolConfig const& cfg)
{
    Setup const setup = make_setup(cfg);
    Prepared const prep = prepare_readout_state(cfg, setup);
    std::uint64_t const n = window_count(cfg.readout_duration_s, cfg.timing.period_ns);
    double const period = double(cfg.timing.period_ns) * 1e-9;

    ProgramChecker checker;
    StagePlan plan;
    plan.pump_ns = cfg.thermal ? 0 : prep.pump_ns;
    if (!cfg.thermal)
        plan.legs_ns = {prep.leg.ns};
    plan.readout.windows = n;
    StageAccount const acct = checker.account(plan, cfg.timing);

    double const p = prep.state.polarization();
    double const theta = cfg.spinlock_theta;
    auto truth = [&](std::uint64_t k) {
        return cfg.signal_gain
               * spinlock_amplitude(p, theta, double(k + 1) * period, cfg.temperature_K, cfg.relax);
    };
    Readout ro = acquire(cfg, n, truth, period, period, cfg.seed, cfg.keep_windows);
    ro.series.protocol = "SPINLOCK";

    ProtocolResult res = base_result(cfg, "theta_pi");
    auto const model = cfg.relax.beta == 1 ? DecayModel::exponential : DecayModel::stretched;
    auto const fit = robust_fit(ro.series, model);
    auto const spec = stage("spectrum", [&] { return spectrum_of_series(ro.series); });

    auto const n_int = std::min<std::uint64_t>(n, window_count(cfg.integration_s, cfg.timing.period_ns));
    double const integ = integrated(ro.series, n_int);
    double const t2p_model = cfg.relax.t2_prime(cfg.temperature_K);

    ResultRecord rec;
    rec.axis_value = theta / std::numbers::pi;
    rec.stages = acct;
    rec.values["t2prime_fit_s"] = fit.e_fold_time_s;
    rec.values["integrated_signal"] = integ;
    res.records.push_back(rec);

    auto& s = res.summary;
    s["pump_polarization"] = prep.pump_polarization;
    s["shuttle_survival"] = prep.leg.survival;
    s["shuttle_time_s"] = double(prep.leg.ns) * 1e-9;
    s["readout_polarization"] = p;
    s["n_windows"] = double(n);
    s["t2prime_fit_s"] = fit.e_fold_time_s;
    s["t2prime_model_s"] = t2p_model;
    s["t2star_model_s"] = cfg.relax.t2_star_s;
    s["t2prime_over_t2star"] = fit.e_fold_time_s / cfg.relax.t2_star_s;
    s["spectrum_snr"] = spec.snr;
    s["spectrum_peak"] = spec.peak;
    s["spectrum_noise_floor"] = spec.noise_floor;
    s["window_noise_sigma"] = ro.quad_sigma;
    s["integrated_signal"] = integ;
    s["integrated_windows"] = double(n_int);
    s["integrated_snr"] = ro.quad_sigma > 0 ? integ / (ro.quad_sigma * std::sqrt(double(n_int)))
                                            : std::numeric_limits<double>::infinity();
    s["first_window_snr"] = ro.quad_sigma > 0 ? ro.series.y.front() / ro.quad_sigma
                                              : std::numeric_limits<double>::infinity();
    s["readout_kernel"] = kernel_sum(cfg, n_int, theta);
    s["program_duration_s"] = double(acct.program_ns) * 1e-9;

    res.fits.push_back({"spinlock", fit});
    res.windows = std::move(ro.windows);
    res.series.push_back({"spinlock", std::move(ro.series)});
    return res;
}

ProtocolResult run_fid_protocol(ProtocolConfig const& cfg)
{
    Setup const setup = make_setup(cfg);
    Prepared const prep = prepare_readout_state(cfg, setup);
    double const seg = double(cfg.acq.n_samples) / cfg.acq.fs_Hz;
    auto const n = static_cast<std::uint64_t>(std::llround(cfg.fid_duration_s / seg));
    if (n < 8)
        throw ProtocolError("setup", "FID readout needs at least 8 acquisition segments");

    ProgramChecker checker;
    StagePlan plan;
    plan.pump_ns = cfg.thermal ? 0 : prep.pump_ns;
    if (!cfg.thermal)
        plan.legs_ns = {prep.leg.ns};
    plan.readout.fid = true;
    plan.readout.fid_duration_ns = to_ns(double(n) * seg);
    StageAccount const acct = checker.account(plan, cfg.timing);

    auto const model = fid_series(prep.state, cfg.relax, seg, n);
    auto truth = [&](std::uint64_t k) { return cfg.signal_gain * model.y[k]; };
    Readout ro = acquire(cfg, n, truth, 0.0, seg, cfg.seed, false);
    ro.series.protocol = "FID";

    double head = 0;
    for (std::size_t i = 0; i < 4; ++i)
        head += ro.series.y[i] / 4;
    if (!(head > 2.5 * ro.quad_sigma) || !(head > 0))
    {
        throw ProtocolError("fit", "FID signal is not above the noise floor (first points "
                                       + std::to_string(head) + ", noise "
                                       + std::to_string(ro.quad_sigma) + ")");
    }
    auto const fit = stage("fit", [&] { return fit_decay(ro.series, DecayModel::gaussian); });
    auto const spec = stage("spectrum", [&] { return spectrum_of_series(ro.series); });

    ProtocolResult res = base_result(cfg, "t_s");
    ResultRecord rec;
    rec.axis_value = 0;
    rec.stages = acct;
    rec.values["fid_e_fold_s"] = fit.e_fold_time_s;
    res.records.push_back(rec);

    auto& s = res.summary;
    s["pump_polarization"] = prep.pump_polarization;
    s["shuttle_survival"] = prep.leg.survival;
    s["readout_polarization"] = prep.state.polarization();
    s["fid_e_fold_s"] = fit.e_fold_time_s;
    s["t2star_model_s"] = cfg.relax.t2_star_s;
    s["spectrum_snr"] = spec.snr;
    s["window_noise_sigma"] = ro.quad_sigma;
    s["first_point_snr"] = ro.quad_sigma > 0 ? ro.series.y.front() / ro.quad_sigma
                                             : std::numeric_limits<double>::infinity();
    s["n_segments"] = double(n);
    s["program_duration_s"] = double(acct.program_ns) * 1e-9;
    res.fits.push_back({"fid", fit});
    res.series.push_back({"fid", std::move(ro.series)});
    return res;
}

ProtocolResult run_dnp_epr_scan(ProtocolConfig const& cfg)
{
    if (cfg.scan_freqs_GHz.empty())
        throw ProtocolError("setup", "frequency axis is empty");
    Setup const setup = make_setup(cfg);
    std::uint64_t const n = window_count(cfg.readout_duration_s, cfg.timing.period_ns);
    auto const n_int = std::min<std::uint64_t>(n, window_count(cfg.integration_s, cfg.timing.period_ns));
    double const period = double(cfg.timing.period_ns) * 1e-9;
    double const kernel = kernel_sum(cfg, n_int, std::numbers::pi / 2);
    auto const spectrum = epr_spectrum(cfg.temperature_K, cfg.dnp);

    ProgramChecker checker;
    ProtocolResult res = base_result(cfg, "f_center_GHz");
    DecaySeries curve;
    for (std::size_t i = 0; i < cfg.scan_freqs_GHz.size(); ++i)
    {
        double const f = cfg.scan_freqs_GHz[i];
        PumpWindow const w{f, cfg.scan_width_GHz};
        Prepared const prep = prepare_hyperpolarized(cfg, setup, w, cfg.scan_pump_s);
        StagePlan plan;
        plan.pump_ns = prep.pump_ns;
        plan.legs_ns = {prep.leg.ns};
        plan.readout.windows = n;
        StageAccount const acct = checker.account(plan, cfg.timing);

        double const p = prep.state.polarization();
        auto truth = [&](std::uint64_t k) {
            return cfg.signal_gain
                   * spinlock_amplitude(p, std::numbers::pi / 2, double(k + 1) * period,
                                        cfg.temperature_K, cfg.relax);
        };
        Readout const ro = acquire(cfg, n, truth, period, period, cfg.seed ^ i, false);
        double const raw = integrated(ro.series, n_int);
        double const corrected = raw / (cfg.signal_gain * kernel * prep.leg.survival);

        ResultRecord rec;
        rec.axis_value = f;
        rec.stages = acct;
        rec.values["raw_integrated_signal"] = raw;
        rec.values["dnp_polarization"] = corrected;
        rec.values["enhancement"] = corrected / cfg.thermal_polarization;
        rec.values["pump_polarization"] = prep.pump_polarization;
        rec.values["pump_rate"] = pump_rate(w, spectrum, cfg.dnp);
        rec.values["shuttle_survival"] = prep.leg.survival;
        res.records.push_back(rec);
        curve.t.push_back(f);
        curve.y.push_back(corrected / cfg.thermal_polarization);
    }
    curve.temperature_K = cfg.temperature_K;
    curve.protocol = "DNP_EPR_SCAN";

    // Seed the two-peak fit from the data: the global maximum and the
    // largest point at least 80 MHz away from it.
    if (curve.size() >= 6)
    {
        auto const imax = std::size_t(std::max_element(curve.y.begin(), curve.y.end())
                                      - curve.y.begin());
        std::optional<std::size_t> i2;
        for (std::size_t i = 0; i < curve.size(); ++i)
        {
            if (std::fabs(curve.t[i] - curve.t[imax]) < 0.08)
                continue;
            if (!i2 || curve.y[i] > curve.y[*i2])
                i2 = i;
        }
        if (i2)
        {
            std::vector<EprPeak> init{{curve.t[imax], 0.03, curve.y[imax]},
                                      {curve.t[*i2], 0.03, curve.y[*i2]}};
            auto peaks = stage("fit", [&] { return fit_gaussians(curve.t, curve.y, init); });
            std::sort(peaks.begin(), peaks.end(),
                      [](EprPeak const& a, EprPeak const& b) { return a.amplitude > b.amplitude; });
            res.peaks = peaks;
            res.summary["main_center_GHz"] = peaks[0].center_GHz;
            res.summary["main_sigma_GHz"] = peaks[0].sigma_GHz;
            res.summary["main_amplitude"] = peaks[0].amplitude;
            res.summary["secondary_center_GHz"] = peaks[1].center_GHz;
            res.summary["secondary_sigma_GHz"] = peaks[1].sigma_GHz;
            res.summary["secondary_amplitude"] = peaks[1].amplitude;
        }
    }
    res.summary["peak_enhancement"] = *std::max_element(curve.y.begin(), curve.y.end());
    res.summary["zfs_center_model_GHz"] = cfg.dnp.zfs_center(cfg.temperature_K);
    res.summary["readout_kernel"] = kernel;
    res.series.push_back({"scan", std::move(curve)});
    return res;
}

ProtocolResult run_relaxometry(ProtocolConfig const& cfg)
{
    if (cfg.b_int_T.empty() || cfg.t_int_s.empty())
        throw ProtocolError("setup", "B_int and t_int axes must be non-empty");
    Setup const setup = make_setup(cfg);
    std::uint64_t const n = window_count(cfg.readout_duration_s, cfg.timing.period_ns);
    auto const n_int = std::min<std::uint64_t>(n, window_count(cfg.integration_s, cfg.timing.period_ns));
    double const period = double(cfg.timing.period_ns) * 1e-9;
    double const kernel = kernel_sum(cfg, n_int, std::numbers::pi / 2);
    PumpWindow const window = default_pump_window(cfg);

    ProgramChecker checker;
    ProtocolResult res = base_result(cfg, "t_int_s");
    std::uint64_t point = 0;
    for (double b : cfg.b_int_T)
    {
        double const z_int = stage("shuttle", [&] { return setup.map.position_of_field(b); });
        DecaySeries raw_curve;
        DecaySeries corr_curve;
        for (double t_int : cfg.t_int_s)
        {
            if (!(t_int >= 0))
                throw ProtocolError("setup", "t_int must be non-negative");
            auto state = pump_state(cfg, setup, window, cfg.pump_duration_s);
            double const pumped = state.polarization();
            Leg const out = shuttle_leg(cfg, setup, state, setup.park_mm, z_int);
            state = stage("relax", [&] { return relax_at(state, b, t_int, cfg.relax); });
            Leg const back = shuttle_leg(cfg, setup, state, z_int, setup.sweet_mm);

            StagePlan plan;
            plan.pump_ns = to_ns(cfg.pump_duration_s);
            plan.legs_ns = {out.ns, back.ns};
            plan.wait_ns = to_ns(t_int);
            plan.readout.windows = n;
            StageAccount const acct = checker.account(plan, cfg.timing);

            double const p = state.polarization();
            auto truth = [&](std::uint64_t k) {
                return cfg.signal_gain
                       * spinlock_amplitude(p, std::numbers::pi / 2, double(k + 1) * period,
                                            cfg.temperature_K, cfg.relax);
            };
            Readout const ro = acquire(cfg, n, truth, period, period, cfg.seed ^ point, false);
            double const raw = integrated(ro.series, n_int);
            double const legs = out.survival * back.survival;
            double const corrected = raw / legs;

            ResultRecord rec;
            rec.axis_value = t_int;
            rec.stages = acct;
            rec.values["b_int_T"] = b;
            rec.values["signal"] = raw;
            rec.values["corrected_signal"] = corrected;
            rec.values["shuttle_survival"] = legs;
            rec.values["pump_polarization"] = pumped;
            rec.values["readout_polarization"] = p;
            rec.values["polarization_estimate"] = raw / (cfg.signal_gain * kernel);
            res.records.push_back(rec);
            raw_curve.t.push_back(t_int);
            raw_curve.y.push_back(raw);
            corr_curve.t.push_back(t_int);
            corr_curve.y.push_back(corrected);
            ++point;
        }
        std::string const tag = field_tag(b);
        raw_curve.temperature_K = corr_curve.temperature_K = cfg.temperature_K;
        raw_curve.protocol = corr_curve.protocol = "RELAXOMETRY";
        if (raw_curve.size() >= 8)
        {
            auto const raw_fit = stage("fit", [&] { return fit_decay(raw_curve, DecayModel::exponential); });
            auto const corr_fit = stage("fit", [&] { return fit_decay(corr_curve, DecayModel::exponential); });
            res.fits.push_back({"t1_raw@" + tag, raw_fit});
            res.fits.push_back({"t1_corrected@" + tag, corr_fit});
            res.summary["t1_fit_s@" + tag] = raw_fit.e_fold_time_s;
            res.summary["t1_corrected_fit_s@" + tag] = corr_fit.e_fold_time_s;
        }
        res.summary["t1_model_s@" + tag] = t1_of(b, cfg.temperature_K, cfg.relax);
        res.series.push_back({"relax_" + tag, std::move(raw_curve)});
    }
    return res;
}

ProtocolResult run_texture_scan(ProtocolConfig const& cfg)
{
    if (cfg.theta_pi.empty())
        throw ProtocolError("setup", "theta axis is empty");
    Setup const setup = make_setup(cfg);
    Prepared const prep = prepare_readout_state(cfg, setup);
    std::uint64_t const n = window_count(cfg.texture_readout_s, cfg.timing.period_ns);
    double const period = double(cfg.timing.period_ns) * 1e-9;
    double const t_p = double(cfg.timing.pulse_ns) * 1e-9;

    ProgramChecker checker;
    StagePlan plan;
    plan.pump_ns = cfg.thermal ? 0 : prep.pump_ns;
    if (!cfg.thermal)
        plan.legs_ns = {prep.leg.ns};
    plan.readout.windows = n;

    ProtocolResult res = base_result(cfg, "theta_pi");
    for (double th_pi : cfg.theta_pi)
    {
        StageAccount const acct = checker.account(plan, cfg.timing);
        double const theta = th_pi * std::numbers::pi;
        auto const series = stage("spinmodel", [&] {
            return spinlock_series(prep.state, theta, t_p, period, n, cfg.relax);
        });
        std::size_t crossings = 0;
        for (std::size_t k = 0; k + 1 < series.size(); ++k)
        {
            if ((series.y[k] > 0 && series.y[k + 1] <= 0) || (series.y[k] < 0 && series.y[k + 1] >= 0))
                ++crossings;
        }
        ResultRecord rec;
        rec.axis_value = th_pi;
        rec.stages = acct;
        rec.values["crossing_time_s"] = zero_crossing_time(series);
        rec.values["analytic_crossing_s"] = texture_crossing_time(theta, cfg.temperature_K, cfg.relax);
        rec.values["n_crossings"] = double(crossings);
        rec.values["minority_weight"] = cfg.relax.texture.minority_weight(theta);
        res.records.push_back(rec);

        DecaySeries thin;
        std::size_t const stride = std::max<std::size_t>(1, series.size() / 4000);
        for (std::size_t k = 0; k < series.size(); k += stride)
        {
            thin.t.push_back(series.t[k]);
            thin.y.push_back(series.y[k]);
        }
        thin.temperature_K = cfg.temperature_K;
        thin.protocol = "TEXTURE_SCAN";
        std::ostringstream name;
        name << "texture_" << th_pi << "pi";
        res.series.push_back({name.str(), std::move(thin)});
    }
    res.summary["readout_polarization"] = prep.state.polarization();
    res.summary["n_windows"] = double(n);
    return res;
}

ProtocolResult run_protocol(ProtocolConfig const& cfg)
{
    switch (cfg.kind)
    {
        case ProtocolKind::fid:
            return run_fid_protocol(cfg);
        case ProtocolKind::spinlock:
            return run_spinlock_protocol(cfg);
        case ProtocolKind::dnp_epr_scan:
            return run_dnp_epr_scan(cfg);
        case ProtocolKind::relaxometry:
            return run_relaxometry(cfg);
        case ProtocolKind::texture_scan:
            return run_texture_scan(cfg);
    }
    throw ProtocolError("setup", "unknown protocol");
}

ProtocolResult run_protocol(Config const& cfg)
{
    auto const pc = protocol_config_from(cfg);
    auto res = run_protocol(pc);
    res.config = cfg.entries();
    res.config_hash = cfg.hash();
    res.seed = pc.seed;
    return res;
}

}  // namespace fcdnp
