#include "catch_amalgamated.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include "fopelt/signal_model.hpp"
#include "fopelt/sinusoid_est.hpp"

using namespace fopelt;
using Catch::Approx;

namespace {

constexpr double kPi = std::numbers::pi;

SignalRecord tone(double amp, double f, double phase, std::size_t n, double fs = 3.0,
                  std::size_t first = 0, std::size_t last = SIZE_MAX) {
  SignalRecord r;
  r.sample_rate_hz = fs;
  r.samples.assign(n, 0.0);
  if (last == SIZE_MAX) last = n - 1;
  for (std::size_t k = first; k <= last; ++k) {
    r.samples[k] = amp * std::cos(2 * kPi * f * static_cast<double>(k) / fs + phase);
  }
  return r;
}

std::complex<double> naive_dtft(const std::vector<double>& x, double f, double fs,
                                std::size_t first = 0) {
  std::complex<double> acc{0, 0};
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double ph = 2 * kPi * f * static_cast<double>(k + first) / fs;
    acc += x[k] * std::complex<double>(std::cos(ph), -std::sin(ph));
  }
  return acc;
}

double mean_of(const std::vector<double>& v, std::size_t lo, std::size_t hi) {
  double s = 0.0;
  for (std::size_t k = lo; k <= hi; ++k) s += v[k];
  return s / static_cast<double>(hi - lo + 1);
}

ArmaModel reference_model() { return design_resonant_arma(0.372, 0.0467, 3.0, 0.16); }

}  // namespace

TEST_CASE("wrap_phase maps into (-pi, pi]") {
  CHECK(wrap_phase(kPi) == Approx(kPi));
  CHECK(wrap_phase(-kPi) == Approx(kPi));
  CHECK(wrap_phase(3 * kPi + 0.1) == Approx(-kPi + 0.1));
  CHECK(wrap_phase(0.5) == Approx(0.5));
  for (double p = -20.0; p < 20.0; p += 0.37) {
    const double w = wrap_phase(p);
    CHECK(w > -kPi);
    CHECK(w <= kPi);
    CHECK(std::remainder(w - p, 2 * kPi) == Approx(0.0).margin(1e-12));
  }
}

TEST_CASE("rotated-phasor DTFT matches direct summation") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  std::vector<double> x(3000);
  for (auto& v : x) v = g(rng);
  for (double f : {0.05, 0.37, 1.2}) {
    for (std::size_t first : {0u, 1535u}) {
      const auto a = dtft(x, f, 3.0, first);
      const auto b = naive_dtft(x, f, 3.0, first);
      CHECK(std::abs(a - b) < 1e-9 * std::abs(b) + 1e-9);
    }
  }
}

TEST_CASE("frequency of an exact on-band sinusoid") {
  const auto y = tone(1.0, 0.7, 0.0, 4500);
  CHECK(std::abs(estimate_frequency(y, kMonitoredBand) - 0.7) < 1e-6);
  CHECK_THROWS(estimate_frequency(std::vector<double>(10, 1.0), 3.0));
}

TEST_CASE("off-bin frequency agrees with a dense DTFT scan") {
  const auto y = tone(1.0, 0.370, 0.4, 4500);
  const double f_hat = estimate_frequency(y, kMonitoredBand);
  CHECK(std::abs(f_hat - 0.370) < 1e-5);

  double best = -1.0, best_f = 0.0;
  for (double f = 0.3695; f <= 0.3705; f += 1e-7) {
    const double m = std::norm(naive_dtft(y.samples, f, 3.0));
    if (m > best) best = m, best_f = f;
  }
  CHECK(std::abs(f_hat - best_f) < 2e-6);
}

TEST_CASE("noisy high-SNR frequency estimates concentrate at the FO") {
  const auto m = reference_model();
  const double a = amplitude_for_snr(10.0, m, 0.37, 1800, 4500);
  const ForcedOscillation fo{a / std::abs(fo_gain(m, 0.37)), 0.37, 0.0, 1535, 3334};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto y = simulate_armax(m, fo, 4500, 300 + seed);
    CHECK(std::abs(estimate_frequency(y, kMonitoredBand) - 0.37) < 5e-4);
  }
}

TEST_CASE("amplitude and phase of a pure sinusoid") {
  const auto y = tone(3.0, 0.37, 1.0, 4500);
  const auto est = estimate_amp_phase(y, 0.37);
  CHECK(est.amplitude == Approx(3.0).margin(1e-3));
  CHECK(est.phase_rad == Approx(1.0).margin(1e-3));
  CHECK(est.frequency_hz == 0.37);

  const auto zero = estimate_amp_phase(std::vector<double>(100, 0.0), 3.0, 0.37);
  CHECK(zero.amplitude == 0.0);
  CHECK_THROWS(estimate_amp_phase(y, 1.6));
}

TEST_CASE("partial-record amplitude follows the partial-sum closed form") {
  const double amp = 2.0, f = 0.37, theta = 0.6, fs = 3.0;
  const std::size_t n = 4500, e = 1535, h = 3334;
  const auto y = tone(amp, f, theta, n, fs, e, h);
  const auto est = estimate_amp_phase(y, f);

  // (2/N) sum_{k=e}^{h} A cos(wk + t) e^{-jwk} = (A/N)[L e^{jt} + e^{-jt} sum e^{-2jwk}]
  const double w = 2 * kPi * f / fs;
  const double len = static_cast<double>(h - e + 1);
  const std::complex<double> r = std::polar(1.0, -2 * w);
  const std::complex<double> geo = std::pow(r, static_cast<double>(e)) *
                                   (1.0 - std::pow(r, len)) / (1.0 - r);
  const auto z = amp / static_cast<double>(n) *
                 (len * std::polar(1.0, theta) + std::polar(1.0, -theta) * geo);
  CHECK(est.amplitude == Approx(std::abs(z)).epsilon(1e-9));
  CHECK(est.phase_rad == Approx(std::arg(z)).margin(1e-9));
  CHECK(est.amplitude == Approx(0.4 * amp).epsilon(0.01));
}

TEST_CASE("sub-record estimates keep the parent time origin") {
  const auto y = tone(1.5, 0.37, -0.8, 4500, 3.0, 1535, 3334);
  const auto est = estimate_fo(y, kMonitoredBand, 1535, 3334);
  CHECK(est.frequency_hz == Approx(0.37).margin(1e-6));
  CHECK(est.amplitude == Approx(1.5).epsilon(1e-3));
  CHECK(est.phase_rad == Approx(-0.8).margin(3e-3));
  CHECK_THROWS(estimate_fo(y, kMonitoredBand, 10, 5));
  CHECK_THROWS(estimate_fo(y, kMonitoredBand, 0, 4500));
}

TEST_CASE("phase and scale equivariance") {
  const double f = 0.37;
  const auto base = estimate_amp_phase(tone(1.2, f, 0.3, 4500), f);
  for (double delta : {0.5, 2.0, -1.3, 3.0}) {
    const auto shifted = estimate_amp_phase(tone(1.2, f, 0.3 + delta, 4500), f);
    CHECK(std::remainder(shifted.phase_rad - base.phase_rad - delta, 2 * kPi) ==
          Approx(0.0).margin(1e-9));
    CHECK(shifted.amplitude == Approx(base.amplitude).margin(1e-9));
  }
  auto y = tone(1.2, f, 0.3, 4500);
  for (double c : {0.25, 3.0, 1000.0}) {
    auto scaled = y;
    for (auto& v : scaled.samples) v *= c;
    const auto s = estimate_amp_phase(scaled, f);
    CHECK(s.amplitude == Approx(c * base.amplitude).epsilon(1e-12));
    CHECK(s.phase_rad == Approx(base.phase_rad).margin(1e-12));
  }
}

TEST_CASE("y_cos of a unit cosine has mean one half") {
  const auto y = tone(1.0, 0.37, 0.0, 4500);
  const auto yc = build_ycos(y, {1.0, 0.37, 0.0});
  CHECK(mean_of(yc.samples, 0, 4499) == Approx(0.5).margin(1e-3));
  CHECK(yc.sample_rate_hz == 3.0);
  CHECK_THROWS(build_ycos(y, {1.0, 0.0, 0.0}));
}

TEST_CASE("y_cos of ambient noise averages to zero") {
  const auto m = reference_model();
  const FoEstimate est{1.0, 0.37, 0.2};
  std::vector<double> means;
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    const auto yc = build_ycos(simulate_ambient(m, 4500, 2000 + seed), est);
    means.push_back(mean_of(yc.samples, 0, 4499));
  }
  double mu = 0.0, ss = 0.0;
  for (double v : means) mu += v;
  mu /= 300.0;
  for (double v : means) ss += (v - mu) * (v - mu);
  const double sd = std::sqrt(ss / 299.0);
  CHECK(std::abs(mu) < 4.0 * sd / std::sqrt(300.0));
  // Halving N should grow the spread by about sqrt(2).
  std::vector<double> half;
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    const auto yc = build_ycos(simulate_ambient(m, 2250, 2000 + seed), est);
    half.push_back(mean_of(yc.samples, 0, 2249));
  }
  double mu2 = 0.0, ss2 = 0.0;
  for (double v : half) mu2 += v;
  mu2 /= 300.0;
  for (double v : half) ss2 += (v - mu2) * (v - mu2);
  const double ratio = std::sqrt(ss2 / 299.0) / sd;
  CHECK(ratio > 1.1);
  CHECK(ratio < 1.8);
}

TEST_CASE("y_cos separates FO-on and FO-off means on noiseless input") {
  const double amp = 2.0, f = 0.37, theta = 0.4;
  const auto y = tone(amp, f, theta, 4500, 3.0, 1535, 3334);
  const auto yc = build_ycos(y, {amp, f, theta});
  const double on = mean_of(yc.samples, 1535, 3334);
  const double off = (mean_of(yc.samples, 0, 1534) * 1535 + mean_of(yc.samples, 3335, 4499) * 1165) / 2700;
  CHECK(std::abs(on - 0.5 * amp * amp) <= 0.02 * 0.5 * amp * amp);
  CHECK(std::abs(off) <= 0.01 * amp * amp);
  CHECK(std::abs((on - off) - 0.5 * amp * amp) <= 0.02 * 0.5 * amp * amp);
}

TEST_CASE("y_cos is linear in the record") {
  const auto m = reference_model();
  const auto y1 = simulate_ambient(m, 1000, 1);
  const auto y2 = tone(0.7, 0.37, 0.1, 1000);
  SignalRecord sum = y1;
  for (std::size_t k = 0; k < 1000; ++k) sum.samples[k] += y2.samples[k];
  const FoEstimate est{1.3, 0.37, -0.4};
  const auto a = build_ycos(sum, est), b = build_ycos(y1, est), c = build_ycos(y2, est);
  for (std::size_t k = 0; k < 1000; ++k) {
    const double expect = b.samples[k] + c.samples[k];
    CHECK(std::abs(a.samples[k] - expect) <= 4 * std::numeric_limits<double>::epsilon() *
                                                 (std::abs(b.samples[k]) + std::abs(c.samples[k])));
  }
}

TEST_CASE("Welch PSD of white noise is flat at 2 sigma^2 / fs") {
  ArmaModel white;
  white.sample_rate_hz = 3.0;
  const auto x = simulate_ambient(white, 200000, 4);
  const auto w = welch_psd(x.samples, 3.0, 256);
  double mean = 0.0;
  for (std::size_t k = 5; k < 120; ++k) mean += w.psd[k];
  mean /= 115.0;
  CHECK(mean == Approx(2.0 / 3.0).epsilon(0.02));
  CHECK(w.bin_hz == Approx(3.0 / 256));
  CHECK_THROWS(welch_psd(x.samples, 3.0, 2));
}

TEST_CASE("detector false-positive rate on ambient records") {
  const auto m = reference_model();
  int fired = 0;
  for (std::uint64_t seed = 0; seed < 300; ++seed) fired += detect_fo(simulate_ambient(m, 4500, 7000 + seed));
  CHECK(fired <= 15);
}

TEST_CASE("detector finds a full-record FO at 10 dB") {
  const auto m = reference_model();
  const double a = amplitude_for_snr(10.0, m, 0.37, 4500, 4500);
  const ForcedOscillation fo{a / std::abs(fo_gain(m, 0.37)), 0.37, 0.0, 0, 4499};
  int fired = 0;
  for (std::uint64_t seed = 0; seed < 300; ++seed) fired += detect_fo(simulate_armax(m, fo, 4500, 8000 + seed));
  CHECK(fired >= 297);
}

TEST_CASE("detector is silent on an all-zero record") {
  SignalRecord z;
  z.sample_rate_hz = 3.0;
  z.samples.assign(4500, 0.0);
  CHECK_FALSE(detect_fo(z));
  CHECK(fo_detection_statistic(z.samples, 3.0) == 0.0);
  CHECK_THROWS(detect_fo(std::vector<double>(10, 0.0), 3.0));
}
