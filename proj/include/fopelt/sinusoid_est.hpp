#pragma once

// FO parameter estimation (frequency, amplitude, phase), the y_cos mean-shift
// transform, and a periodogram-based FO detector.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "fopelt/signal_model.hpp"
#include "fopelt/spectrum.hpp"

namespace fopelt {

struct FoEstimate {
  double amplitude = 0.0;  // mHz
  double frequency_hz = 0.0;
  double phase_rad = 0.0;  // (-pi, pi]
};

/// Closed frequency interval [low_hz, high_hz]; a non-positive high_hz means "up to Nyquist".
struct FrequencyBand {
  double low_hz = 0.0;
  double high_hz = 0.0;
};

/// Inter-area range used for detection and frequency search.
inline constexpr FrequencyBand kMonitoredBand{0.1, 1.0};

inline double wrap_phase(double phase) {
  double p = std::remainder(phase, 2.0 * std::numbers::pi);  // [-pi, pi]
  if (p <= -std::numbers::pi) p += 2.0 * std::numbers::pi;
  return p;
}

namespace detail {

inline double golden_section_max(auto&& f, double lo, double hi, double tol) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

// Bin range [first, last] of an n_fft-point spectrum inside `band`, excluding DC and Nyquist.
inline std::pair<std::size_t, std::size_t> band_bins(FrequencyBand band, double fs,
                                                     std::size_t n_fft) {
  const double bin_hz = fs / static_cast<double>(n_fft);
  const double hi_hz = band.high_hz > 0.0 ? std::min(band.high_hz, 0.5 * fs) : 0.5 * fs;
  const std::size_t last_allowed = (n_fft - 1) / 2;  // strictly below Nyquist
  auto first = static_cast<std::size_t>(std::ceil(std::max(band.low_hz, 0.0) / bin_hz));
  auto last = static_cast<std::size_t>(std::floor(hi_hz / bin_hz));
  first = std::max<std::size_t>(first, 1);
  last = std::min(last, last_allowed);
  if (first > last) throw std::invalid_argument("frequency band contains no DFT bins");
  return {first, last};
}

}  // namespace detail

/// Frequency of the largest |DTFT| peak inside `band`: coarse search on an
/// 8x zero-padded FFT, then golden-section refinement to `tolerance_hz`.
inline double estimate_frequency(std::span<const double> y, double sample_rate_hz,
                                 FrequencyBand band = {}, double tolerance_hz = 1e-6) {
  if (y.size() < 16) throw std::invalid_argument("estimate_frequency: need at least 16 samples");
  const std::size_t n_fft = 8 * y.size();
  RealFft fft(n_fft);
  const auto spec = fft(y);
  const auto [first, last] = detail::band_bins(band, sample_rate_hz, n_fft);

  std::size_t best = first;
  double best_mag = -1.0;
  for (std::size_t k = first; k <= last; ++k) {
    const double m = std::norm(spec[k]);
    if (m > best_mag) {
      best_mag = m;
      best = k;
    }
  }
  const double bin_hz = sample_rate_hz / static_cast<double>(n_fft);
  const double lo = std::max(static_cast<double>(best - 1) * bin_hz, 0.5 * bin_hz);
  const double hi = std::min(static_cast<double>(best + 1) * bin_hz,
                             0.5 * sample_rate_hz - 0.5 * bin_hz);
  return detail::golden_section_max(
      [&](double f) { return std::norm(dtft(y, f, sample_rate_hz)); }, lo, hi, tolerance_hz);
}

inline double estimate_frequency(const SignalRecord& y, FrequencyBand band = {}) {
  return estimate_frequency(y.view(), y.sample_rate_hz, band);
}

/// Z = (2/n) sum y[k] exp(-j 2 pi f k / fs) with k counted from `first_index`,
/// so the phase of a sub-record stays referenced to the parent record's k = 0.
inline FoEstimate estimate_amp_phase(std::span<const double> y, double sample_rate_hz,
                                     double f_hat, std::size_t first_index = 0) {
  detail::require_in_band(f_hat, sample_rate_hz, "estimate_amp_phase");
  if (y.empty()) throw std::invalid_argument("estimate_amp_phase: empty record");
  const auto z = 2.0 / static_cast<double>(y.size()) * dtft(y, f_hat, sample_rate_hz, first_index);
  return FoEstimate{std::abs(z), f_hat, wrap_phase(std::arg(z))};
}

inline FoEstimate estimate_amp_phase(const SignalRecord& y, double f_hat) {
  return estimate_amp_phase(y.view(), y.sample_rate_hz, f_hat);
}

/// Frequency then amplitude/phase over samples [first, last] of `y`.
inline FoEstimate estimate_fo(const SignalRecord& y, FrequencyBand band, std::size_t first,
                              std::size_t last) {
  if (first > last || last >= y.size()) throw std::invalid_argument("estimate_fo: bad range");
  const auto part = y.view().subspan(first, last - first + 1);
  const double f_hat = estimate_frequency(part, y.sample_rate_hz, band);
  return estimate_amp_phase(part, y.sample_rate_hz, f_hat, first);
}

inline FoEstimate estimate_fo(const SignalRecord& y, FrequencyBand band = {}) {
  return estimate_fo(y, band, 0, y.size() - 1);
}

/// u~*[k] = A cos(2 pi f k / fs + theta) over all n samples (no indicator).
inline std::vector<double> reconstruct_fo(const FoEstimate& est, std::size_t n,
                                          double sample_rate_hz) {
  std::vector<double> out(n);
  const double w = 2.0 * std::numbers::pi * est.frequency_hz / sample_rate_hz;
  for (std::size_t k = 0; k < n; ++k) {
    out[k] = est.amplitude * std::cos(w * static_cast<double>(k) + est.phase_rad);
  }
  return out;
}

/// y_cos[k] = y[k] * u~*[k]; FO-on stretches acquire a mean of about half the squared amplitude.
inline SignalRecord build_ycos(const SignalRecord& y, const FoEstimate& est) {
  detail::require_in_band(est.frequency_hz, y.sample_rate_hz, "build_ycos");
  const auto ref = reconstruct_fo(est, y.size(), y.sample_rate_hz);
  SignalRecord out;
  out.sample_rate_hz = y.sample_rate_hz;
  out.label = "ycos";
  out.samples.resize(y.size());
  for (std::size_t k = 0; k < y.size(); ++k) out.samples[k] = y.samples[k] * ref[k];
  return out;
}

struct DetectorConfig {
  FrequencyBand band = kMonitoredBand;
  double kappa = 6.0;               // peak / local-median threshold
  std::size_t max_segment = 1024;   // Welch segment length cap
  double half_window_hz = 0.03;     // span either side used for the local median
  double guard_hz = 0.006;          // span either side excluded from the median
  double min_variance = 1e-12;      // mHz^2; quieter records never trigger
};

/// Largest ratio, over Welch bins in the band, of the bin's PSD to the median
/// of its neighbours. Zero when the record's variance is at most cfg.min_variance.
inline double fo_detection_statistic(std::span<const double> y, double sample_rate_hz,
                                     const DetectorConfig& cfg = {}) {
  if (y.size() < 64) throw std::invalid_argument("detect_fo: need at least 64 samples");
  if (!(cfg.guard_hz >= 0.0 && cfg.half_window_hz > cfg.guard_hz)) {
    throw std::invalid_argument("detect_fo: need 0 <= guard_hz < half_window_hz");
  }
  double mean = 0.0, var = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  for (double v : y) var += (v - mean) * (v - mean);
  var /= static_cast<double>(y.size());
  if (!(var > cfg.min_variance)) return 0.0;
  std::size_t seg = 16;
  while (seg * 2 <= y.size() / 4 && seg * 2 <= cfg.max_segment) seg *= 2;
  const auto welch = welch_psd(y, sample_rate_hz, seg);
  const auto [first, last] = detail::band_bins(cfg.band, sample_rate_hz, seg);

  const std::size_t top = welch.psd.size() - 1;
  const double df = sample_rate_hz / static_cast<double>(seg);
  const auto guard = static_cast<std::size_t>(std::lround(cfg.guard_hz / df));
  const auto half_window =
      std::max(guard + 2, static_cast<std::size_t>(std::lround(cfg.half_window_hz / df)));
  double best = 0.0;
  std::vector<double> neigh;
  for (std::size_t k = first; k <= last; ++k) {
    neigh.clear();
    const std::size_t lo = k > half_window ? k - half_window : 1;
    const std::size_t hi = std::min(k + half_window, top);
    for (std::size_t j = lo; j <= hi; ++j) {
      const std::size_t dist = j > k ? j - k : k - j;
      if (dist > guard) neigh.push_back(welch.psd[j]);
    }
    if (neigh.empty()) continue;
    auto mid = neigh.begin() + static_cast<std::ptrdiff_t>(neigh.size() / 2);
    std::nth_element(neigh.begin(), mid, neigh.end());
    const double median = *mid;
    if (!(median > 0.0)) continue;
    best = std::max(best, welch.psd[k] / median);
  }
  return best;
}

inline bool detect_fo(std::span<const double> y, double sample_rate_hz,
                      const DetectorConfig& cfg = {}) {
  return fo_detection_statistic(y, sample_rate_hz, cfg) > cfg.kappa;
}

inline bool detect_fo(const SignalRecord& y, const DetectorConfig& cfg = {}) {
  return detect_fo(y.view(), y.sample_rate_hz, cfg);
}

}  // namespace fopelt
