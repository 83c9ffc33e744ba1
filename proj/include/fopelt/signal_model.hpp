#pragma once

// Ambient and forced-oscillation signal generation from low-order ARMA(X)
// models, plus the analytic spectral density used by the local SNR formulas.

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fopelt {

/// y = (C/A) e + (B/A) u, all polynomials in the delay operator q^-1.
/// `ar` and `ma` are monic (leading coefficient 1).
struct ArmaModel {
  std::vector<double> ar{1.0};
  std::vector<double> ma{1.0};
  std::vector<double> x{1.0};
  double noise_variance = 1.0;
  double sample_rate_hz = 1.0;
};

/// Sinusoidal input switched on for samples start_sample..end_sample inclusive.
struct ForcedOscillation {
  double amplitude = 0.0;  // mHz
  double frequency_hz = 0.0;
  double phase_rad = 0.0;
  std::size_t start_sample = 0;
  std::size_t end_sample = 0;
};

struct SignalRecord {
  std::vector<double> samples;  // mHz
  double sample_rate_hz = 1.0;
  std::string label;

  std::size_t size() const noexcept { return samples.size(); }
  std::span<const double> view() const noexcept { return samples; }
};

/// Samples discarded before an ambient record is emitted.
inline constexpr std::size_t kWarmupSamples = 2000;

namespace detail {

inline double nyquist(double sample_rate_hz) { return 0.5 * sample_rate_hz; }

inline void require_in_band(double freq_hz, double sample_rate_hz, const char* what) {
  if (!(freq_hz > 0.0 && freq_hz < nyquist(sample_rate_hz))) {
    throw std::invalid_argument(std::string(what) + ": frequency " + std::to_string(freq_hz) +
                                " Hz outside (0, " + std::to_string(nyquist(sample_rate_hz)) +
                                ") Hz");
  }
}

/// Evaluates sum_k c[k] z^-k at z = exp(j omega).
inline std::complex<double> eval_delay_poly(std::span<const double> coeffs, double omega) {
  std::complex<double> acc{0.0, 0.0};
  for (std::size_t k = 0; k < coeffs.size(); ++k) {
    acc += coeffs[k] * std::polar(1.0, -omega * static_cast<double>(k));
  }
  return acc;
}

}  // namespace detail

/// Schur-Cohn step-down recursion: true iff every root of the monic polynomial
/// 1 + a1 z^-1 + ... + an z^-n lies strictly inside the unit circle.
inline bool is_stable(std::span<const double> ar) {
  if (ar.empty() || ar[0] != 1.0) return false;
  std::vector<double> a(ar.begin(), ar.end());
  while (a.size() > 1) {
    const std::size_t n = a.size() - 1;
    const double k = a[n];
    if (!std::isfinite(k) || std::abs(k) >= 1.0) return false;
    const double denom = 1.0 - k * k;
    std::vector<double> next(n);
    for (std::size_t i = 0; i < n; ++i) next[i] = (a[i] - k * a[n - i]) / denom;
    a = std::move(next);
  }
  return true;
}

inline void validate(const ArmaModel& model) {
  if (model.ar.empty() || model.ar.front() != 1.0) {
    throw std::invalid_argument("ArmaModel: AR polynomial must be monic");
  }
  if (model.ma.empty() || model.ma.front() != 1.0) {
    throw std::invalid_argument("ArmaModel: MA polynomial must be monic");
  }
  if (model.x.empty()) throw std::invalid_argument("ArmaModel: X polynomial is empty");
  if (!(model.sample_rate_hz > 0.0)) {
    throw std::invalid_argument("ArmaModel: sample rate must be positive");
  }
  if (!(model.noise_variance >= 0.0)) {
    throw std::invalid_argument("ArmaModel: noise variance must be non-negative");
  }
  if (!is_stable(model.ar)) throw std::invalid_argument("ArmaModel: AR polynomial is unstable");
}

/// AR(2) whose pole pair is the impulse-invariant image exp(sT) of a continuous
/// mode with natural frequency `mode_freq_hz` and damping ratio `damping_ratio`.
inline ArmaModel design_resonant_arma(double mode_freq_hz, double damping_ratio,
                                      double sample_rate_hz, double noise_variance) {
  if (!(sample_rate_hz > 0.0)) throw std::invalid_argument("sample rate must be positive");
  detail::require_in_band(mode_freq_hz, sample_rate_hz, "design_resonant_arma");
  if (!(damping_ratio > 0.0 && damping_ratio < 1.0)) {
    throw std::invalid_argument("design_resonant_arma: damping ratio must lie in (0, 1)");
  }
  if (!(noise_variance >= 0.0)) throw std::invalid_argument("noise variance must be >= 0");

  const double wn = 2.0 * std::numbers::pi * mode_freq_hz;
  const double period = 1.0 / sample_rate_hz;
  const double radius = std::exp(-damping_ratio * wn * period);
  const double angle = wn * period * std::sqrt(1.0 - damping_ratio * damping_ratio);

  ArmaModel model;
  model.ar = {1.0, -2.0 * radius * std::cos(angle), radius * radius};
  model.ma = {1.0};
  model.x = {1.0};
  model.noise_variance = noise_variance;
  model.sample_rate_hz = sample_rate_hz;
  validate(model);
  return model;
}

/// Gaussian variates from mt19937_64 via the Box-Muller transform. Uniforms
/// take the top 53 bits of each draw so the stream is identical on every
/// standard library.
class GaussianNoise {
 public:
  explicit GaussianNoise(std::uint64_t seed) : engine_(seed) {}

  double operator()() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
    const double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;          // [0, 1)
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Direct-form rational filter num/den with zero initial state; den is monic.
inline std::vector<double> filter(std::span<const double> num, std::span<const double> den,
                                  std::span<const double> input) {
  std::vector<double> out(input.size(), 0.0);
  for (std::size_t k = 0; k < input.size(); ++k) {
    double acc = 0.0;
    for (std::size_t j = 0; j < num.size() && j <= k; ++j) acc += num[j] * input[k - j];
    for (std::size_t j = 1; j < den.size() && j <= k; ++j) acc -= den[j] * out[k - j];
    out[k] = acc;
  }
  return out;
}

inline SignalRecord simulate_ambient(const ArmaModel& model, std::size_t n_samples,
                                     std::uint64_t seed) {
  validate(model);
  if (n_samples < 2) throw std::invalid_argument("simulate_ambient: need at least 2 samples");

  GaussianNoise noise(seed);
  const double sigma = std::sqrt(model.noise_variance);
  std::vector<double> e(kWarmupSamples + n_samples);
  for (auto& v : e) v = sigma * noise();

  const auto full = filter(model.ma, model.ar, e);
  SignalRecord rec;
  rec.samples.assign(full.begin() + static_cast<std::ptrdiff_t>(kWarmupSamples), full.end());
  rec.sample_rate_hz = model.sample_rate_hz;
  rec.label = "ambient seed=" + std::to_string(seed);
  return rec;
}

inline SignalRecord make_fo_input(const ForcedOscillation& fo, std::size_t n_samples,
                                  double sample_rate_hz) {
  if (!(sample_rate_hz > 0.0)) throw std::invalid_argument("make_fo_input: bad sample rate");
  if (fo.start_sample > fo.end_sample || fo.end_sample >= n_samples) {
    throw std::invalid_argument("make_fo_input: FO interval outside the record");
  }
  if (!(fo.amplitude >= 0.0)) throw std::invalid_argument("make_fo_input: negative amplitude");

  SignalRecord rec;
  rec.samples.assign(n_samples, 0.0);
  rec.sample_rate_hz = sample_rate_hz;
  rec.label = "fo input";
  const double w = 2.0 * std::numbers::pi * fo.frequency_hz / sample_rate_hz;
  for (std::size_t k = fo.start_sample; k <= fo.end_sample; ++k) {
    rec.samples[k] = fo.amplitude * std::cos(w * static_cast<double>(k) + fo.phase_rad);
  }
  return rec;
}

/// s = (B/A) u: the FO as seen at the output, transients included.
inline SignalRecord simulate_fo_response(const ArmaModel& model, const ForcedOscillation& fo,
                                         std::size_t n_samples) {
  validate(model);
  auto u = make_fo_input(fo, n_samples, model.sample_rate_hz);
  SignalRecord rec;
  rec.samples = filter(model.x, model.ar, u.samples);
  rec.sample_rate_hz = model.sample_rate_hz;
  rec.label = "fo response";
  return rec;
}

/// y = x + s where x is simulate_ambient(model, n, seed).
inline SignalRecord simulate_armax(const ArmaModel& model, const ForcedOscillation& fo,
                                   std::size_t n_samples, std::uint64_t seed) {
  auto rec = simulate_ambient(model, n_samples, seed);
  const auto s = simulate_fo_response(model, fo, n_samples);
  for (std::size_t k = 0; k < n_samples; ++k) rec.samples[k] += s.samples[k];
  rec.label = "armax seed=" + std::to_string(seed);
  return rec;
}

/// B(e^jw)/A(e^jw): maps the input sinusoid to the steady-state output one.
inline std::complex<double> fo_gain(const ArmaModel& model, double freq_hz) {
  detail::require_in_band(freq_hz, model.sample_rate_hz, "fo_gain");
  const double w = 2.0 * std::numbers::pi * freq_hz / model.sample_rate_hz;
  return detail::eval_delay_poly(model.x, w) / detail::eval_delay_poly(model.ar, w);
}

/// One-sided PSD 2 (sigma^2 / fs) |C/A|^2 in mHz^2/Hz.
inline double psd_at(const ArmaModel& model, double freq_hz) {
  detail::require_in_band(freq_hz, model.sample_rate_hz, "psd_at");
  const double w = 2.0 * std::numbers::pi * freq_hz / model.sample_rate_hz;
  const auto h = detail::eval_delay_poly(model.ma, w) / detail::eval_delay_poly(model.ar, w);
  return 2.0 * model.noise_variance / model.sample_rate_hz * std::norm(h);
}

/// Local SNR in dB of an FO of amplitude `amplitude` lasting n_fo of n_total samples.
inline double local_snr_db(double amplitude, double psd, std::size_t n_fo, std::size_t n_total) {
  const double fo_power = static_cast<double>(n_fo) / static_cast<double>(n_total) *
                          amplitude * amplitude / 2.0;
  return 10.0 * std::log10(fo_power / psd);
}

/// Inverse of local_snr_db: the amplitude giving `snr_db` against the model's PSD.
inline double amplitude_for_snr(double snr_db, const ArmaModel& model, double freq_hz,
                                std::size_t n_fo, std::size_t n_total) {
  if (n_fo == 0 || n_fo > n_total) {
    throw std::invalid_argument("amplitude_for_snr: need 0 < n_fo <= n_total");
  }
  const double psd = psd_at(model, freq_hz);
  return std::sqrt(2.0 * (static_cast<double>(n_total) / static_cast<double>(n_fo)) * psd *
                   std::pow(10.0, snr_db / 10.0));
}

/// Yule-Walker AR(order) fit (Levinson-Durbin on the biased autocovariance).
/// Used to estimate the ambient PSD when no model is configured.
inline ArmaModel fit_ar(std::span<const double> x, std::size_t order, double sample_rate_hz) {
  const std::size_t n = x.size();
  if (n <= order + 1) throw std::invalid_argument("fit_ar: record too short for the order");
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);

  std::vector<double> r(order + 1, 0.0);
  for (std::size_t lag = 0; lag <= order; ++lag) {
    double acc = 0.0;
    for (std::size_t k = lag; k < n; ++k) acc += (x[k] - mean) * (x[k - lag] - mean);
    r[lag] = acc / static_cast<double>(n);
  }

  ArmaModel model;
  model.sample_rate_hz = sample_rate_hz;
  if (!(r[0] > 0.0)) {
    model.noise_variance = 0.0;
    return model;
  }
  std::vector<double> a{1.0};
  double err = r[0];
  for (std::size_t m = 1; m <= order; ++m) {
    double acc = r[m];
    for (std::size_t i = 1; i < m; ++i) acc += a[i] * r[m - i];
    const double k = -acc / err;
    std::vector<double> next(m + 1, 0.0);
    next[0] = 1.0;
    for (std::size_t i = 1; i < m; ++i) next[i] = a[i] + k * a[m - i];
    next[m] = k;
    a = std::move(next);
    err *= (1.0 - k * k);
  }
  model.ar = std::move(a);
  model.noise_variance = err;
  return model;
}

}  // namespace fopelt
