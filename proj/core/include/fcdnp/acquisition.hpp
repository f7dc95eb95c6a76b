// Copyright 2026 The fcdnp Authors.
// SPDX-License-Identifier: Apache-2.0
//! \file fcdnp/acquisition.hpp
//! Synthetic heterodyne windows and streaming single-bin tone extraction.
#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

namespace fcdnp {

struct AcqConfig
{
    double f_het_Hz = 20e6;
    double fs_Hz = 1e9;
    std::size_t n_samples = 5000;
    double noise_sigma = 1.0;
    std::uint64_t seed = 0;
    unsigned workers = 0;            //!< 0: one per hardware thread
    std::size_t chunk_windows = 256; //!< windows per worker task
    bool allow_simd = true;          //!< results are identical either way

    void validate() const;
    //! f_het in DFT bins of the window.
    double bin() const { return f_het_Hz * double(n_samples) / fs_Hz; }
    bool bin_aligned() const;
    //! Standard deviation of the per-window in-phase estimate.
    double window_noise_sigma() const;
};

struct ToneEstimate
{
    double amplitude = 0;
    double phase = 0;  //!< (-pi, pi], 0 for zero amplitude
};

struct WindowRecord
{
    std::uint64_t index = 0;
    double amplitude = 0;
    double phase = 0;

    bool operator==(WindowRecord const&) const = default;
};

//! Amplitude projected onto a reference phase.
double in_phase(WindowRecord const& r, double reference_phase = 0);

//! Direct O(n) evaluation of sum s[k] exp(-2 pi i f k / fs).
std::complex<double> dft_bin_oracle(std::span<double const> samples,
                                    double f_Hz,
                                    double fs_Hz);

//---------------------------------------------------------------------------//
/*!
 * Generates s[k] = A cos(2 pi f_het k / fs + phi) + sigma n[k].
 *
 * The noise n[k] is a deterministic function of (seed, window index):
 * eight interleaved xoshiro256++ lanes feed a ziggurat sampler, and the
 * vectorized and scalar kernels produce identical bits.
 */
class WindowSynthesizer
{
  public:
    explicit WindowSynthesizer(AcqConfig const& cfg);

    void synthesize(std::uint64_t window_index,
                    double amplitude,
                    double phase,
                    std::span<double> out) const;

    AcqConfig const& config() const { return cfg_; }

  private:
    AcqConfig cfg_;
    std::vector<double> cos_;
    std::vector<double> sin_;
    bool simd_ = false;
};

std::vector<double> synthesize_window(double amplitude,
                                      double phase,
                                      AcqConfig const& cfg,
                                      std::uint64_t window_index = 0);

//! Goertzel extraction at the DFT bin nearest f_het for a fixed length.
class ToneExtractor
{
  public:
    ToneExtractor(AcqConfig const& cfg, std::size_t n_samples);
    explicit ToneExtractor(AcqConfig const& cfg)
        : ToneExtractor(cfg, cfg.n_samples)
    {
    }

    //! Complex DFT bin; throws DataError on non-finite input.
    std::complex<double> bin_value(std::span<double const> samples) const;
    ToneEstimate operator()(std::span<double const> samples) const;

    std::size_t bin_index() const { return bin_; }

  private:
    std::size_t n_ = 0;
    std::size_t bin_ = 0;
    double coeff_ = 0;
    std::complex<double> step_;  // exp(-i 32 w)
    std::complex<double> last_;  // exp(-i 32 w (Q - 1))
    std::vector<std::complex<double>> lane_twiddle_;
    std::vector<std::complex<double>> tail_twiddle_;
    bool simd_ = false;
};

//! Single-bin tone estimate: amplitude 2|X|/n and arg X.
ToneEstimate extract_tone(std::span<double const> samples, AcqConfig const& cfg);

//! Random-access window source. `fill` must be safe to call concurrently
//! for distinct indices.
struct WindowSource
{
    std::uint64_t count = 0;
    std::function<void(std::uint64_t index, std::span<double> samples)> fill;
};

//! True per-window (amplitude, phase).
using WindowModel = std::function<ToneEstimate(std::uint64_t index)>;

WindowSource synthetic_source(std::uint64_t count,
                              WindowModel model,
                              AcqConfig const& cfg);

using RecordSink = std::function<void(std::span<WindowRecord const>)>;

//! Extract every window of `source`, in parallel, handing records to
//! `sink` in index order. Memory is bounded by workers * chunk_windows.
//! A source failure is rethrown as DataError naming the window.
void stream_process(WindowSource const& source,
                    AcqConfig const& cfg,
                    RecordSink const& sink);

std::vector<WindowRecord> process_all(WindowSource const& source,
                                      AcqConfig const& cfg);

//! Binary window log: "FCWR", u16 version, then (index u64, amplitude
//! f64, phase f64) records, little-endian.
inline constexpr std::uint16_t window_log_version = 1;

class WindowLogWriter
{
  public:
    explicit WindowLogWriter(std::ostream& out);
    void write(std::span<WindowRecord const> records);

  private:
    std::ostream* out_;
};

std::vector<WindowRecord> read_window_log(std::istream& in);

}  // namespace fcdnp
