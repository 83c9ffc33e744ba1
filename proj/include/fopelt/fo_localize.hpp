#pragma once

// FO start/stop localization. The proposed localizer runs PELT once on y_cos
// with a penalty read off the single-split profile, turns rises and falls of
// the fitted means into (start, end) pairs, and drops pairs shorter than the
// SNR-derived minimum length. The max-changes baseline is kept for comparison.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "fopelt/changepoint.hpp"
#include "fopelt/signal_model.hpp"
#include "fopelt/sinusoid_est.hpp"

namespace fopelt {

/// Inclusive sample range where the FO is on.
struct Interval {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t length() const noexcept { return end - start + 1; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

struct FoIntervals {
  std::vector<Interval> intervals;

  bool empty() const noexcept { return intervals.empty(); }
  std::size_t size() const noexcept { return intervals.size(); }
  friend bool operator==(const FoIntervals&, const FoIntervals&) = default;
};

enum class EventKind { Start, End };

struct Event {
  std::size_t index = 0;
  EventKind kind = EventKind::Start;
  friend bool operator==(const Event&, const Event&) = default;
};

/// |dY| at or below this is not a rise or a fall.
inline constexpr double kEventTolerance = 1e-12;

/// The grouped and padded event sequence. A rise at k (Y[k] > Y[k-1]) starts
/// an FO at k; a fall at k ends it at k - 1. Runs of starts keep the first,
/// runs of ends keep the last, a leading end gets a start at 0 and a trailing
/// start gets an end at N - 1, so the result alternates Start, End, ...
inline std::vector<Event> event_sequence(std::span<const double> segment_means) {
  const std::size_t n = segment_means.size();
  for (double v : segment_means) {
    if (!std::isfinite(v)) throw std::invalid_argument("cps_to_intervals: non-finite mean");
  }
  std::vector<Event> raw;
  for (std::size_t k = 1; k < n; ++k) {
    const double dy = segment_means[k] - segment_means[k - 1];
    if (dy > kEventTolerance) raw.push_back({k, EventKind::Start});
    if (dy < -kEventTolerance) raw.push_back({k - 1, EventKind::End});
  }

  std::vector<Event> grouped;
  for (const Event& e : raw) {
    if (!grouped.empty() && grouped.back().kind == e.kind) {
      if (e.kind == EventKind::End) grouped.back() = e;
      continue;
    }
    grouped.push_back(e);
  }
  if (!grouped.empty() && grouped.front().kind == EventKind::End) {
    grouped.insert(grouped.begin(), Event{0, EventKind::Start});
  }
  if (!grouped.empty() && grouped.back().kind == EventKind::Start) {
    grouped.push_back(Event{n - 1, EventKind::End});
  }
  return grouped;
}

/// Converts the per-sample fitted means of y_cos into FO-on intervals.
inline FoIntervals cps_to_intervals(std::span<const double> segment_means) {
  const auto events = event_sequence(segment_means);
  FoIntervals out;
  for (std::size_t i = 0; i + 1 < events.size(); i += 2) {
    out.intervals.push_back({events[i].index, events[i + 1].index});
  }
  return out;
}

/// Per-sample means of a segmentation over n samples.
inline std::vector<double> expand_means(const Segmentation& seg, std::size_t n) {
  if (seg.segment_means.size() != seg.changepoints.size() + 1) {
    throw std::invalid_argument("segmentation has mismatched means and changepoints");
  }
  std::vector<double> out(n);
  std::size_t start = 0;
  for (std::size_t i = 0; i <= seg.changepoints.size(); ++i) {
    const std::size_t end = i < seg.changepoints.size() ? seg.changepoints[i] : n;
    if (end <= start || end > n) throw std::invalid_argument("segmentation out of range");
    std::fill(out.begin() + static_cast<std::ptrdiff_t>(start),
              out.begin() + static_cast<std::ptrdiff_t>(end), seg.segment_means[i]);
    start = end;
  }
  return out;
}

inline FoIntervals cps_to_intervals(const Segmentation& seg, std::size_t n) {
  return cps_to_intervals(expand_means(seg, n));
}

/// Shortest FO-on stretch that can reach `snr_min_db` when the amplitude is at
/// most `a_max_mhz`: ceil(2 N 10^(SNR/10) Phi / A_max^2), floored at 1.
inline std::size_t min_segment_length(double snr_min_db, double a_max_mhz, double psd_at_f,
                                      std::size_t n_total) {
  if (!(a_max_mhz > 0.0)) throw std::invalid_argument("min_segment_length: A_max must be > 0");
  if (!(psd_at_f > 0.0)) throw std::invalid_argument("min_segment_length: PSD must be > 0");
  const double len = 2.0 * static_cast<double>(n_total) * std::pow(10.0, snr_min_db / 10.0) *
                     psd_at_f / (a_max_mhz * a_max_mhz);
  const double rounded = std::ceil(len);
  if (!(rounded >= 1.0)) return 1;
  return static_cast<std::size_t>(rounded);
}

inline FoIntervals filter_short(const FoIntervals& in, std::size_t n_min_sl) {
  FoIntervals out;
  std::copy_if(in.intervals.begin(), in.intervals.end(), std::back_inserter(out.intervals),
               [&](const Interval& iv) { return iv.length() >= n_min_sl; });
  return out;
}

/// No changepoints on y_cos: either the FO spans the whole record or the
/// detection was spurious. Subtract the reconstructed FO and re-run the
/// detector; silence means the FO was real and everywhere.
inline FoIntervals resolve_no_changepoints(const SignalRecord& y, const FoEstimate& est,
                                           const DetectorConfig& detector = {}) {
  const auto fo = reconstruct_fo(est, y.size(), y.sample_rate_hz);
  std::vector<double> residual(y.size());
  for (std::size_t k = 0; k < y.size(); ++k) residual[k] = y.samples[k] - fo[k];
  if (detect_fo(residual, y.sample_rate_hz, detector)) return {};
  return FoIntervals{{Interval{0, y.size() - 1}}};
}

struct LocalizerConfig {
  BetaStrategy beta_strategy = BetaStrategy::MeanProfile;
  double snr_min_db = -15.0;
  double a_max_mhz = 10.0;
  FrequencyBand monitored_band = kMonitoredBand;
  /// Ambient model for the PSD in the minimum-length rule. Without one, an
  /// AR(ambient_ar_order) model is fitted to y minus the estimated FO.
  std::optional<ArmaModel> ambient_model;
  std::size_t ambient_ar_order = 10;
  DetectorConfig detector{};
};

struct LocalizeResult {
  FoIntervals intervals;
  FoEstimate estimate;         // from the whole record
  double beta = 0.0;           // 0 when the profile was degenerate
  std::size_t num_changes = 0;
  std::size_t min_segment = 1;
  bool used_fallback = false;
  std::size_t pelt_calls = 0;
};

/// PSD of the ambient process at f, from the configured model or an AR fit to
/// y with the FO removed: per-interval estimates are subtracted inside `on`,
/// or the whole-record estimate everywhere when `on` is empty.
inline double ambient_psd(const SignalRecord& y, const FoEstimate& est,
                          const LocalizerConfig& config, const FoIntervals& on = {}) {
  if (config.ambient_model) return psd_at(*config.ambient_model, est.frequency_hz);
  std::vector<double> residual = y.samples;
  auto subtract = [&](const FoEstimate& e, std::size_t first, std::size_t last) {
    const auto fo = reconstruct_fo(e, y.size(), y.sample_rate_hz);
    for (std::size_t k = first; k <= last; ++k) residual[k] -= fo[k];
  };
  if (on.empty()) {
    subtract(est, 0, y.size() - 1);
  } else {
    for (const auto& iv : on.intervals) {
      const auto e = iv.length() >= 16 ? estimate_fo(y, config.monitored_band, iv.start, iv.end) : est;
      subtract(e, iv.start, iv.end);
    }
  }
  return psd_at(fit_ar(residual, config.ambient_ar_order, y.sample_rate_hz), est.frequency_hz);
}

/// Single-PELT localizer for a record already flagged by the detector.
inline LocalizeResult localize(const SignalRecord& y, const LocalizerConfig& config) {
  if (!(config.a_max_mhz > 0.0)) throw std::invalid_argument("localize: a_max_mhz must be > 0");
  LocalizeResult result;
  result.estimate = estimate_fo(y, config.monitored_band);
  const auto ycos = build_ycos(y, result.estimate);

  const auto profile = penalty_profile(ycos.samples);
  if (profile.beta_max > 0.0) {
    result.beta = choose_beta(profile, config.beta_strategy);
    const auto seg = pelt(ycos.samples, result.beta, 2);
    result.pelt_calls = 1;
    result.num_changes = seg.num_changes();
    if (seg.num_changes() > 0) {
      const auto raw = cps_to_intervals(seg, y.size());
      result.min_segment = min_segment_length(config.snr_min_db, config.a_max_mhz,
                                              ambient_psd(y, result.estimate, config, raw), y.size());
      result.intervals = filter_short(raw, result.min_segment);
      return result;
    }
  }
  result.used_fallback = true;
  result.intervals = resolve_no_changepoints(y, result.estimate, config.detector);
  return result;
}

struct BaselineConfig {
  std::size_t n_max_cp = 10;
  std::size_t n_min_sl = 360;  // 2 minutes at 3 samples/s
  double alpha = 0.7;
  FrequencyBand monitored_band = kMonitoredBand;
};

struct BaselineResult {
  FoIntervals intervals;
  FoEstimate estimate;
  Segmentation segmentation;
  std::size_t pelt_calls = 0;
  std::size_t restarts = 0;
};

/// Max-changes localizer: CROPS-driven segmentation of y_cos with a
/// shrinking change cap, then segments whose mean exceeds alpha * 0.5 A^2 are
/// classified as FO-on and adjacent on-segments merged.
inline BaselineResult baseline_localize_gm22(const SignalRecord& y, const BaselineConfig& config) {
  if (!(config.alpha > 0.0)) throw std::invalid_argument("baseline: alpha must be > 0");
  BaselineResult result;
  result.estimate = estimate_fo(y, config.monitored_band);
  const auto ycos = build_ycos(y, result.estimate);

  auto crops = crops_max_changes(ycos.samples, config.n_max_cp, config.n_min_sl);
  result.pelt_calls = crops.pelt_calls;
  result.restarts = crops.restarts;
  result.segmentation = std::move(crops.segmentation);

  const double threshold = config.alpha * 0.5 * result.estimate.amplitude *
                           result.estimate.amplitude;
  const auto& seg = result.segmentation;
  std::size_t start = 0;
  std::optional<std::size_t> open;
  for (std::size_t i = 0; i <= seg.changepoints.size(); ++i) {
    const std::size_t end = i < seg.changepoints.size() ? seg.changepoints[i] : y.size();
    const bool on = threshold > 0.0 && seg.segment_means[i] > threshold;
    if (on && !open) open = start;
    if (!on && open) {
      result.intervals.intervals.push_back({*open, start - 1});
      open.reset();
    }
    start = end;
  }
  if (open) result.intervals.intervals.push_back({*open, y.size() - 1});
  return result;
}

}  // namespace fopelt
