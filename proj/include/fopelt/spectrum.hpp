#pragma once

// Thin FFTW wrapper and the spectral primitives shared by estimation and
// detection: zero-padded magnitude spectra, Welch averages, single-frequency DTFT.

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

namespace fopelt {

namespace detail {

// FFTW's planner is not re-entrant; execution of distinct plans is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const noexcept { fftw_free(p); }
};

}  // namespace detail

/// Real-to-complex DFT of a fixed length. Not copyable; one per thread.
class RealFft {
 public:
  explicit RealFft(std::size_t n)
      : n_(n),
        in_(static_cast<double*>(fftw_malloc(sizeof(double) * n))),
        out_(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (n / 2 + 1)))) {
    if (n == 0) throw std::invalid_argument("RealFft: zero length");
    if (!in_ || !out_) throw std::bad_alloc();
    std::lock_guard lock(detail::fftw_planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_.get(), out_.get(), FFTW_ESTIMATE);
    if (!plan_) throw std::runtime_error("RealFft: planning failed");
  }

  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  ~RealFft() {
    std::lock_guard lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(plan_);
  }

  std::size_t size() const noexcept { return n_; }
  std::size_t bins() const noexcept { return n_ / 2 + 1; }

  /// Transforms `x` zero-padded (or truncated) to size(); bins 0..n/2.
  std::vector<std::complex<double>> operator()(std::span<const double> x) {
    const std::size_t m = std::min(x.size(), n_);
    std::copy_n(x.begin(), m, in_.get());
    std::fill(in_.get() + m, in_.get() + n_, 0.0);
    fftw_execute(plan_);
    std::vector<std::complex<double>> result(bins());
    for (std::size_t k = 0; k < bins(); ++k) result[k] = {out_.get()[k][0], out_.get()[k][1]};
    return result;
  }

 private:
  std::size_t n_;
  std::unique_ptr<double, detail::FftwFree> in_;
  std::unique_ptr<fftw_complex, detail::FftwFree> out_;
  fftw_plan plan_ = nullptr;
};

/// sum_k x[k] exp(-j 2 pi f (k + first_index) / fs). The phasor is advanced by
/// rotation and re-anchored every 512 samples.
inline std::complex<double> dtft(std::span<const double> x, double freq_hz, double sample_rate_hz,
                                 std::size_t first_index = 0) {
  const double w = 2.0 * std::numbers::pi * freq_hz / sample_rate_hz;
  const std::complex<double> step = std::polar(1.0, -w);
  std::complex<double> acc{0.0, 0.0};
  std::complex<double> phasor;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (k % 512 == 0) {
      const double phase = std::fmod(w * static_cast<double>(k + first_index),
                                     2.0 * std::numbers::pi);
      phasor = std::polar(1.0, -phase);
    }
    acc += x[k] * phasor;
    phasor *= step;
  }
  return acc;
}

struct WelchSpectrum {
  std::vector<double> psd;  // one-sided, units^2/Hz, bins 0..L/2
  double bin_hz = 0.0;
};

/// Hann-windowed Welch estimate with 50% overlap.
inline WelchSpectrum welch_psd(std::span<const double> x, double sample_rate_hz,
                               std::size_t segment_len) {
  if (segment_len < 4 || segment_len > x.size()) {
    throw std::invalid_argument("welch_psd: segment length must be in [4, N]");
  }
  std::vector<double> window(segment_len);
  double window_power = 0.0;
  for (std::size_t i = 0; i < segment_len; ++i) {
    window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                     static_cast<double>(segment_len));
    window_power += window[i] * window[i];
  }

  RealFft fft(segment_len);
  WelchSpectrum out;
  out.psd.assign(fft.bins(), 0.0);
  out.bin_hz = sample_rate_hz / static_cast<double>(segment_len);

  const std::size_t hop = segment_len / 2;
  std::vector<double> buf(segment_len);
  std::size_t segments = 0;
  for (std::size_t start = 0; start + segment_len <= x.size(); start += hop) {
    double mean = 0.0;
    for (std::size_t i = 0; i < segment_len; ++i) mean += x[start + i];
    mean /= static_cast<double>(segment_len);
    for (std::size_t i = 0; i < segment_len; ++i) buf[i] = (x[start + i] - mean) * window[i];
    const auto spec = fft(buf);
    for (std::size_t k = 0; k < spec.size(); ++k) out.psd[k] += std::norm(spec[k]);
    ++segments;
  }
  const double scale = 1.0 / (static_cast<double>(segments) * window_power * sample_rate_hz);
  for (std::size_t k = 0; k < out.psd.size(); ++k) {
    const bool edge = k == 0 || (segment_len % 2 == 0 && k + 1 == out.psd.size());
    out.psd[k] *= scale * (edge ? 1.0 : 2.0);
  }
  return out;
}

}  // namespace fopelt
