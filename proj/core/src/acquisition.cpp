// Copyright 2026 The fcdnp Authors.
// SPDX-License-Identifier: Apache-2.0
#include "fcdnp/acquisition.hpp"

#include <algorithm>
#include <atomic>
#include <barrier>
#include <cmath>
#include <exception>
#include <memory>
#include <numbers>
#include <sstream>
#include <thread>

#if defined(__x86_64__)
#    include <immintrin.h>
#endif

#include "binary_io.hpp"
#include "fcdnp/error.hpp"
#include "fcdnp/noise.hpp"
#include "ziggurat.hpp"

namespace fcdnp {
namespace {

constexpr std::size_t lanes = 8;             // RNG lanes
constexpr std::size_t goertzel_lanes = 32;   // polyphase branches

struct LaneState
{
    alignas(64) std::uint64_t s[4][lanes];
};

bool cpu_has_avx512()
{
#if defined(__x86_64__)
    static bool const ok = __builtin_cpu_supports("avx512f")
                           && __builtin_cpu_supports("avx512dq");
    return ok;
#else
    return false;
#endif
}

// Phase 2 pi (m k mod n) / n, exact in the integer part.
double bin_angle(std::size_t m, std::size_t k, std::size_t n)
{
    auto const r = static_cast<std::size_t>(
        (static_cast<unsigned __int128>(m) * k) % n);
    return 2 * std::numbers::pi * double(r) / double(n);
}

void seed_lanes(std::uint64_t key, LaneState& st, Xoshiro256pp& slow)
{
    std::uint64_t sm = key;
    for (std::size_t j = 0; j < lanes; ++j)
        for (int w = 0; w < 4; ++w)
            st.s[w][j] = splitmix64(sm);
    slow = Xoshiro256pp(splitmix64(sm));
}

inline std::uint64_t rotl(std::uint64_t x, int k)
{
    return (x << k) | (x >> (64 - k));
}

inline std::uint64_t lane_next(LaneState& st, std::size_t j)
{
    std::uint64_t& s0 = st.s[0][j];
    std::uint64_t& s1 = st.s[1][j];
    std::uint64_t& s2 = st.s[2][j];
    std::uint64_t& s3 = st.s[3][j];
    std::uint64_t const r = rotl(s0 + s3, 23) + s0;
    std::uint64_t const t = s1 << 17;
    s2 ^= s0;
    s3 ^= s1;
    s1 ^= s2;
    s0 ^= s3;
    s2 ^= t;
    s3 = rotl(s3, 45);
    return r;
}

// Reference kernel; the vector kernel must match it bit for bit.
void synth_scalar(double* out,
                  std::size_t begin,
                  std::size_t end,
                  double a,
                  double b,
                  double sigma,
                  double const* c,
                  double const* s,
                  LaneState& st,
                  Xoshiro256pp& slow)
{
    auto const& zt = detail::ziggurat_tables();
    for (std::size_t k = begin; k < end; ++k)
    {
        std::uint64_t const bits = lane_next(st, k % lanes);
        int const i = int(bits & 0xff);
        double const u = detail::signed_unit(bits);
        double z = u * zt.x[i];
        if (!(std::fabs(u) < zt.ratio[i]))
            z = detail::ziggurat_slow(u, i, slow);
        out[k] = (a * c[k] + b * s[k]) + sigma * z;
    }
}

void goertzel_scalar(double const* x, std::size_t q_count, double coeff,
                     double* s1, double* s2)
{
    std::fill(s1, s1 + goertzel_lanes, 0.0);
    std::fill(s2, s2 + goertzel_lanes, 0.0);
    for (std::size_t q = 0; q < q_count; ++q)
    {
        for (std::size_t j = 0; j < goertzel_lanes; ++j)
        {
            double const s0 = (x[q * goertzel_lanes + j] + coeff * s1[j]) - s2[j];
            s2[j] = s1[j];
            s1[j] = s0;
        }
    }
}

#if defined(__x86_64__)
__attribute__((target("avx512f,avx512dq"))) void
synth_avx512(double* out,
             std::size_t blocks,
             double a,
             double b,
             double sigma,
             double const* c,
             double const* s,
             LaneState& st,
             Xoshiro256pp& slow)
{
    auto const& zt = detail::ziggurat_tables();
    __m512i s0 = _mm512_load_si512(st.s[0]);
    __m512i s1 = _mm512_load_si512(st.s[1]);
    __m512i s2 = _mm512_load_si512(st.s[2]);
    __m512i s3 = _mm512_load_si512(st.s[3]);
    __m512i const mask = _mm512_set1_epi64(0xff);
    __m512d const scale = _mm512_set1_pd(0x1.0p-52);
    __m512d const va = _mm512_set1_pd(a);
    __m512d const vb = _mm512_set1_pd(b);
    __m512d const vs = _mm512_set1_pd(sigma);
    __m512d const absmask
        = _mm512_castsi512_pd(_mm512_set1_epi64(0x7fffffffffffffffLL));

    for (std::size_t q = 0; q < blocks; ++q)
    {
        __m512i const bits
            = _mm512_add_epi64(_mm512_rol_epi64(_mm512_add_epi64(s0, s3), 23), s0);
        __m512i const t = _mm512_slli_epi64(s1, 17);
        s2 = _mm512_xor_si512(s2, s0);
        s3 = _mm512_xor_si512(s3, s1);
        s1 = _mm512_xor_si512(s1, s2);
        s0 = _mm512_xor_si512(s0, s3);
        s2 = _mm512_xor_si512(s2, t);
        s3 = _mm512_rol_epi64(s3, 45);

        __m512i const idx = _mm512_and_si512(bits, mask);
        __m512d const u
            = _mm512_mul_pd(_mm512_cvtepi64_pd(_mm512_srai_epi64(bits, 11)), scale);
        __m512d const ratio = _mm512_i64gather_pd(idx, zt.ratio, 8);
        __m512d z = _mm512_mul_pd(u, _mm512_i64gather_pd(idx, zt.x, 8));
        __mmask8 const fast
            = _mm512_cmp_pd_mask(_mm512_and_pd(u, absmask), ratio, _CMP_LT_OQ);
        if (__builtin_expect(fast != 0xff, 0))
        {
            alignas(64) double zz[lanes];
            alignas(64) double uu[lanes];
            alignas(64) std::int64_t ii[lanes];
            _mm512_store_pd(zz, z);
            _mm512_store_pd(uu, u);
            _mm512_store_si512(ii, idx);
            for (std::size_t j = 0; j < lanes; ++j)
            {
                if (!((fast >> j) & 1))
                    zz[j] = detail::ziggurat_slow(uu[j], int(ii[j]), slow);
            }
            z = _mm512_load_pd(zz);
        }
        std::size_t const k = q * lanes;
        __m512d const sig = _mm512_add_pd(_mm512_mul_pd(va, _mm512_loadu_pd(c + k)),
                                          _mm512_mul_pd(vb, _mm512_loadu_pd(s + k)));
        _mm512_storeu_pd(out + k, _mm512_add_pd(sig, _mm512_mul_pd(vs, z)));
    }
    _mm512_store_si512(st.s[0], s0);
    _mm512_store_si512(st.s[1], s1);
    _mm512_store_si512(st.s[2], s2);
    _mm512_store_si512(st.s[3], s3);
}

__attribute__((target("avx512f"))) void
goertzel_avx512(double const* x, std::size_t q_count, double coeff,
                double* s1_out, double* s2_out)
{
    // Four independent chains hide the add/multiply latency.
    __m512d s1[4];
    __m512d s2[4];
    for (int v = 0; v < 4; ++v)
        s1[v] = s2[v] = _mm512_setzero_pd();
    __m512d const vc = _mm512_set1_pd(coeff);
    for (std::size_t q = 0; q < q_count; ++q)
    {
        double const* row = x + q * goertzel_lanes;
        for (int v = 0; v < 4; ++v)
        {
            __m512d const s0 = _mm512_sub_pd(
                _mm512_add_pd(_mm512_loadu_pd(row + 8 * v), _mm512_mul_pd(vc, s1[v])),
                s2[v]);
            s2[v] = s1[v];
            s1[v] = s0;
        }
    }
    for (int v = 0; v < 4; ++v)
    {
        _mm512_storeu_pd(s1_out + 8 * v, s1[v]);
        _mm512_storeu_pd(s2_out + 8 * v, s2[v]);
    }
}
#endif

ToneEstimate to_estimate(std::complex<double> x, std::size_t n)
{
    ToneEstimate e;
    e.amplitude = 2 * std::abs(x) / double(n);
    if (e.amplitude == 0)
        return e;
    e.phase = std::arg(x);
    if (e.phase == -std::numbers::pi)
        e.phase = std::numbers::pi;
    return e;
}

}  // namespace

void AcqConfig::validate() const
{
    if (!(fs_Hz > 0 && f_het_Hz > 0 && f_het_Hz < fs_Hz / 2))
        throw ValidationError("acquisition requires 0 < f_het < fs/2");
    if (n_samples < 16)
        throw ValidationError("acquisition requires at least 16 samples per window");
    if (!(noise_sigma >= 0 && std::isfinite(noise_sigma)))
        throw ValidationError("noise sigma must be finite and non-negative");
    if (chunk_windows == 0)
        throw ValidationError("chunk_windows must be positive");
}

bool AcqConfig::bin_aligned() const
{
    double const m = bin();
    return m == std::round(m);
}

double AcqConfig::window_noise_sigma() const
{
    return noise_sigma * std::sqrt(2.0 / double(n_samples));
}

double in_phase(WindowRecord const& r, double reference_phase)
{
    return r.amplitude * std::cos(r.phase - reference_phase);
}

std::complex<double> dft_bin_oracle(std::span<double const> samples,
                                    double f_Hz,
                                    double fs_Hz)
{
    std::complex<double> x = 0;
    for (std::size_t k = 0; k < samples.size(); ++k)
    {
        double const angle = -2 * std::numbers::pi * f_Hz * double(k) / fs_Hz;
        x += samples[k] * std::complex<double>(std::cos(angle), std::sin(angle));
    }
    return x;
}

WindowSynthesizer::WindowSynthesizer(AcqConfig const& cfg)
    : cfg_(cfg), cos_(cfg.n_samples), sin_(cfg.n_samples)
{
    cfg_.validate();
    std::size_t const n = cfg_.n_samples;
    bool const aligned = cfg_.bin_aligned();
    auto const m = static_cast<std::size_t>(std::llround(cfg_.bin()));
    for (std::size_t k = 0; k < n; ++k)
    {
        double const angle
            = aligned ? bin_angle(m, k, n)
                      : 2 * std::numbers::pi
                            * std::fmod(cfg_.f_het_Hz * double(k) / cfg_.fs_Hz, 1.0);
        cos_[k] = std::cos(angle);
        sin_[k] = std::sin(angle);
    }
    simd_ = cfg_.allow_simd && cpu_has_avx512();
}

void WindowSynthesizer::synthesize(std::uint64_t window_index,
                                   double amplitude,
                                   double phase,
                                   std::span<double> out) const
{
    std::size_t const n = cfg_.n_samples;
    if (out.size() != n)
        throw ValidationError("window buffer size does not match n_samples");
    LaneState st;
    Xoshiro256pp slow;
    seed_lanes(derive_seed(cfg_.seed, window_index), st, slow);
    double const a = amplitude * std::cos(phase);
    double const b = -amplitude * std::sin(phase);
    std::size_t const blocks = n / lanes;
    std::size_t done = 0;
#if defined(__x86_64__)
    if (simd_)
    {
        synth_avx512(out.data(), blocks, a, b, cfg_.noise_sigma, cos_.data(),
                     sin_.data(), st, slow);
        done = blocks * lanes;
    }
#endif
    synth_scalar(out.data(), done, n, a, b, cfg_.noise_sigma, cos_.data(),
                 sin_.data(), st, slow);
}

std::vector<double> synthesize_window(double amplitude,
                                      double phase,
                                      AcqConfig const& cfg,
                                      std::uint64_t window_index)
{
    std::vector<double> out(cfg.n_samples);
    WindowSynthesizer(cfg).synthesize(window_index, amplitude, phase, out);
    return out;
}

ToneExtractor::ToneExtractor(AcqConfig const& cfg, std::size_t n_samples)
    : n_(n_samples)
{
    if (n_ == 0)
        throw ValidationError("tone extraction needs at least one sample");
    if (!(cfg.fs_Hz > 0 && cfg.f_het_Hz >= 0 && cfg.f_het_Hz <= cfg.fs_Hz / 2))
        throw ValidationError("tone extraction requires 0 <= f <= fs/2");
    bin_ = static_cast<std::size_t>(
        std::llround(cfg.f_het_Hz * double(n_) / cfg.fs_Hz));
    std::size_t const q_count = n_ / goertzel_lanes;
    auto twiddle = [&](std::size_t k) {
        return std::polar(1.0, -bin_angle(bin_, k, n_));
    };
    coeff_ = 2 * std::cos(bin_angle(bin_, goertzel_lanes, n_));
    step_ = twiddle(goertzel_lanes);
    last_ = q_count ? twiddle(goertzel_lanes * (q_count - 1)) : 1.0;
    for (std::size_t j = 0; j < goertzel_lanes; ++j)
        lane_twiddle_.push_back(twiddle(j));
    for (std::size_t k = q_count * goertzel_lanes; k < n_; ++k)
        tail_twiddle_.push_back(twiddle(k));
    simd_ = cfg.allow_simd && cpu_has_avx512();
}

std::complex<double> ToneExtractor::bin_value(std::span<double const> samples) const
{
    if (samples.size() != n_)
        throw ValidationError("sample count does not match the extractor length");
    std::size_t const q_count = n_ / goertzel_lanes;
    alignas(64) double s1[goertzel_lanes];
    alignas(64) double s2[goertzel_lanes];
#if defined(__x86_64__)
    if (simd_)
        goertzel_avx512(samples.data(), q_count, coeff_, s1, s2);
    else
#endif
        goertzel_scalar(samples.data(), q_count, coeff_, s1, s2);

    std::complex<double> x = 0;
    if (q_count)
    {
        for (std::size_t j = 0; j < goertzel_lanes; ++j)
            x += lane_twiddle_[j] * (s1[j] - step_ * s2[j]);
        x *= last_;
    }
    for (std::size_t r = 0; r < tail_twiddle_.size(); ++r)
        x += samples[q_count * goertzel_lanes + r] * tail_twiddle_[r];

    if (!std::isfinite(x.real()) || !std::isfinite(x.imag()))
    {
        auto const bad = std::find_if(samples.begin(), samples.end(),
                                      [](double v) { return !std::isfinite(v); });
        std::ostringstream os;
        os << "non-finite sample";
        if (bad != samples.end())
            os << " at offset " << (bad - samples.begin());
        throw DataError(os.str());
    }
    return x;
}

ToneEstimate ToneExtractor::operator()(std::span<double const> samples) const
{
    return to_estimate(bin_value(samples), n_);
}

ToneEstimate extract_tone(std::span<double const> samples, AcqConfig const& cfg)
{
    return ToneExtractor(cfg, samples.size())(samples);
}

WindowSource synthetic_source(std::uint64_t count,
                              WindowModel model,
                              AcqConfig const& cfg)
{
    auto synth = std::make_shared<WindowSynthesizer const>(cfg);
    WindowSource src;
    src.count = count;
    src.fill = [synth, model = std::move(model)](std::uint64_t index,
                                                 std::span<double> out) {
        ToneEstimate const truth = model(index);
        synth->synthesize(index, truth.amplitude, truth.phase, out);
    };
    return src;
}

void stream_process(WindowSource const& source,
                    AcqConfig const& cfg,
                    RecordSink const& sink)
{
    cfg.validate();
    if (source.count == 0)
        return;
    if (!source.fill)
        throw ValidationError("window source has no fill function");

    unsigned workers = cfg.workers ? cfg.workers : std::thread::hardware_concurrency();
    workers = std::max(1u, workers);
    std::uint64_t const chunk = cfg.chunk_windows;
    workers = unsigned(std::min<std::uint64_t>(workers, (source.count + chunk - 1) / chunk));
    ToneExtractor const extract(cfg);
    std::size_t const n = cfg.n_samples;

    std::vector<WindowRecord> records(std::size_t(workers) * chunk);
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::uint64_t> error_index(workers);
    std::uint64_t batch_begin = 0;

    auto work = [&](unsigned w, std::vector<double>& buf) {
        std::uint64_t const begin = batch_begin + w * chunk;
        std::uint64_t const end = std::min(source.count, begin + chunk);
        WindowRecord* out = records.data() + std::size_t(w) * chunk;
        for (std::uint64_t i = begin; i < end; ++i)
        {
            try
            {
                source.fill(i, buf);
                auto const est = extract(buf);
                out[i - begin] = WindowRecord{i, est.amplitude, est.phase};
            }
            catch (...)
            {
                errors[w] = std::current_exception();
                error_index[w] = i;
                return;
            }
        }
    };

    auto finish_batch = [&](std::uint64_t end) {
        for (unsigned w = 0; w < workers; ++w)
        {
            if (!errors[w])
                continue;
            try
            {
                std::rethrow_exception(errors[w]);
            }
            catch (std::exception const& e)
            {
                throw DataError("window " + std::to_string(error_index[w]) + ": "
                                + e.what());
            }
        }
        sink(std::span<WindowRecord const>(records.data(), end - batch_begin));
    };

    std::vector<double> main_buf(n);
    if (workers == 1)
    {
        for (; batch_begin < source.count; batch_begin += chunk)
        {
            work(0, main_buf);
            finish_batch(std::min(source.count, batch_begin + chunk));
        }
        return;
    }

    std::barrier start(workers);
    std::barrier done(workers);
    bool stop = false;
    std::vector<std::thread> pool;
    for (unsigned w = 1; w < workers; ++w)
    {
        pool.emplace_back([&, w] {
            std::vector<double> buf(n);
            while (true)
            {
                start.arrive_and_wait();
                if (stop)
                    return;
                work(w, buf);
                done.arrive_and_wait();
            }
        });
    }
    struct Joiner
    {
        std::barrier<>& start;
        bool& stop;
        std::vector<std::thread>& pool;
        ~Joiner()
        {
            stop = true;
            start.arrive_and_wait();
            for (auto& t : pool)
                t.join();
        }
    } joiner{start, stop, pool};

    std::uint64_t const stride = std::uint64_t(workers) * chunk;
    for (; batch_begin < source.count; batch_begin += stride)
    {
        start.arrive_and_wait();
        work(0, main_buf);
        done.arrive_and_wait();
        finish_batch(std::min(source.count, batch_begin + stride));
    }
}

std::vector<WindowRecord> process_all(WindowSource const& source,
                                      AcqConfig const& cfg)
{
    std::vector<WindowRecord> out;
    out.reserve(source.count);
    stream_process(source, cfg, [&](std::span<WindowRecord const> r) {
        out.insert(out.end(), r.begin(), r.end());
    });
    return out;
}

WindowLogWriter::WindowLogWriter(std::ostream& out) : out_(&out)
{
    detail::write_header(out, "FCWR", window_log_version);
}

void WindowLogWriter::write(std::span<WindowRecord const> records)
{
    for (auto const& r : records)
    {
        detail::put_le(*out_, r.index);
        detail::put_le(*out_, r.amplitude);
        detail::put_le(*out_, r.phase);
    }
    if (!*out_)
        throw DataError("failed writing window log");
}

std::vector<WindowRecord> read_window_log(std::istream& in)
{
    detail::read_header(in, "FCWR", window_log_version);
    std::vector<WindowRecord> out;
    WindowRecord r;
    while (detail::get_le(in, r.index))
    {
        if (!detail::get_le(in, r.amplitude) || !detail::get_le(in, r.phase))
            throw DataError("truncated window record");
        if (!out.empty() && r.index <= out.back().index)
            throw DataError("window log indices are not increasing");
        out.push_back(r);
    }
    return out;
}

}  // namespace fcdnp
