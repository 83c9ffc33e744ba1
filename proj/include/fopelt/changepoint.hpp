#pragma once

// Penalized mean-shift segmentation: O(1) segment costs from cumulative sums,
// PELT, an unpruned dynamic-programming reference, the single-split penalty
// profile used to pick beta, and a CROPS-driven max-changes search.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fopelt {

/// Changepoints are the first index of each new segment.
struct Segmentation {
  std::vector<std::size_t> changepoints;
  std::vector<double> segment_means;
  double total_cost = 0.0;  // sum of squared deviations, penalty excluded
  double penalty = 0.0;

  std::size_t num_changes() const noexcept { return changepoints.size(); }
  double penalized_cost() const noexcept {
    return total_cost + penalty * static_cast<double>(changepoints.size());
  }
};

struct PenaltyProfile {
  std::vector<double> beta_of_tau1;  // entry i is beta(tau1 = i + 1)
  double beta_max = 0.0;
  double beta_mean = 0.0;
};

enum class BetaStrategy { MeanProfile, HalfMax };

/// Raised when every single split leaves the cost unchanged (constant signal).
class NoPenaltyScale : public std::runtime_error {
 public:
  NoPenaltyScale() : std::runtime_error("penalty profile is identically zero") {}
};

/// Cumulative sums of y - y[0] and its square. Each prefix is accumulated in
/// long double and stored as an unevaluated double pair (hi + lo).
class CostTable {
 public:
  explicit CostTable(std::span<const double> y)
      : n_(y.size()), s1_hi_(n_ + 1), s1_lo_(n_ + 1), s2_hi_(n_ + 1), s2_lo_(n_ + 1) {
    const double shift = y.empty() ? 0.0 : y[0];
    long double a = 0.0L, b = 0.0L;
    for (std::size_t k = 0; k < n_; ++k) {
      if (!std::isfinite(y[k])) throw std::invalid_argument("CostTable: non-finite sample");
      const long double v = static_cast<long double>(y[k]) - shift;
      a += v;
      b += v * v;
      split(a, s1_hi_[k + 1], s1_lo_[k + 1]);
      split(b, s2_hi_[k + 1], s2_lo_[k + 1]);
    }
  }

  std::size_t size() const noexcept { return n_; }

  /// Sum of squared deviations from the mean over [start, end).
  double cost(std::size_t start, std::size_t end) const {
    if (!(start < end && end <= n_)) {
      throw std::out_of_range("segment [" + std::to_string(start) + ", " + std::to_string(end) +
                              ") invalid for N = " + std::to_string(n_));
    }
    return cost_unchecked(start, end);
  }

  double cost_unchecked(std::size_t start, std::size_t end) const noexcept {
    return evaluate(static_cast<double>(end - start), s1_hi_[end] - s1_hi_[start],
                    s1_lo_[end] - s1_lo_[start], s2_hi_[end] - s2_hi_[start],
                    s2_lo_[end] - s2_lo_[start]);
  }

  // Shared by every search so that PELT and the reference DP see bit-identical costs.
  static double evaluate(double len, double d1_hi, double d1_lo, double d2_hi,
                         double d2_lo) noexcept {
    const double s1 = d1_hi + d1_lo;
    const double s2 = d2_hi + d2_lo;
    const double c = s2 - s1 * s1 / len;
    return c > 0.0 ? c : 0.0;
  }

  double s1_hi(std::size_t i) const noexcept { return s1_hi_[i]; }
  double s1_lo(std::size_t i) const noexcept { return s1_lo_[i]; }
  double s2_hi(std::size_t i) const noexcept { return s2_hi_[i]; }
  double s2_lo(std::size_t i) const noexcept { return s2_lo_[i]; }

 private:
  static void split(long double v, double& hi, double& lo) noexcept {
    hi = static_cast<double>(v);
    lo = static_cast<double>(v - hi);
  }

  std::size_t n_;
  std::vector<double> s1_hi_, s1_lo_, s2_hi_, s2_lo_;
};

inline double segment_cost(std::span<const double> y, std::size_t start, std::size_t end) {
  if (!(start < end && end <= y.size())) throw std::out_of_range("segment_cost: empty segment");
  return CostTable(y.subspan(start, end - start)).cost(0, end - start);
}

namespace detail {

inline void check_search_args(std::size_t n, double beta, std::size_t min_seg_len) {
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw std::invalid_argument("penalty beta must be positive and finite");
  }
  if (min_seg_len < 1) throw std::invalid_argument("min_seg_len must be >= 1");
  if (n < 2 * min_seg_len) {
    throw std::invalid_argument("record of " + std::to_string(n) +
                                " samples is shorter than 2 * min_seg_len");
  }
}

// Among predecessors whose objective is within 1e-12 relative of the minimum,
// the smallest index wins.
inline std::size_t first_within_tie(std::span<const double> values, double best) noexcept {
  // Must agree with the inline tie band in pelt().
  const double limit = best + 1e-12 * std::abs(best);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] <= limit) return i;
  }
  return 0;
}

inline double min_value(std::span<const double> v) noexcept {
  constexpr double inf = std::numeric_limits<double>::infinity();
  double m0 = inf, m1 = inf, m2 = inf, m3 = inf;
  std::size_t i = 0;
  for (; i + 4 <= v.size(); i += 4) {
    m0 = v[i] < m0 ? v[i] : m0;
    m1 = v[i + 1] < m1 ? v[i + 1] : m1;
    m2 = v[i + 2] < m2 ? v[i + 2] : m2;
    m3 = v[i + 3] < m3 ? v[i + 3] : m3;
  }
  for (; i < v.size(); ++i) m0 = v[i] < m0 ? v[i] : m0;
  return std::min(std::min(m0, m1), std::min(m2, m3));
}

/// Backtracks `prev` from n and fills means and costs from the raw samples.
inline Segmentation finish_segmentation(std::span<const double> y,
                                        const std::vector<std::size_t>& prev, double beta) {
  Segmentation seg;
  seg.penalty = beta;
  for (std::size_t t = y.size(); t > 0;) {
    const std::size_t s = prev[t];
    if (s > 0) seg.changepoints.push_back(s);
    t = s;
  }
  std::reverse(seg.changepoints.begin(), seg.changepoints.end());

  std::size_t start = 0;
  long double total = 0.0L;
  for (std::size_t i = 0; i <= seg.changepoints.size(); ++i) {
    const std::size_t end = i < seg.changepoints.size() ? seg.changepoints[i] : y.size();
    long double sum = 0.0L;
    for (std::size_t k = start; k < end; ++k) sum += y[k];
    const long double mean = sum / static_cast<long double>(end - start);
    for (std::size_t k = start; k < end; ++k) {
      const long double d = y[k] - mean;
      total += d * d;
    }
    seg.segment_means.push_back(static_cast<double>(mean));
    start = end;
  }
  seg.total_cost = static_cast<double>(total);
  return seg;
}

}  // namespace detail

namespace detail {

// Objective of a segment [s, t) appended to the best segmentation ending at s:
// F(s) + C(s, t) + beta, written as (F(s) - S2(s)) + S2(t) - (S1(t) - S1(s))^2 / (t - s) + beta
// so that each candidate carries three numbers. PELT and the reference DP
// share this expression and therefore see bit-identical values.
inline double candidate_value(double base_minus_s2, double s1_at_s, double pos, double s2_t,
                              double s1_t, double t, double beta) noexcept {
  const double d = s1_t - s1_at_s;
  return base_minus_s2 + s2_t - d * d / (t - pos) + beta;
}

}  // namespace detail

/// Exact minimizer of cost + beta * m over segmentations whose segments all
/// have at least `min_seg_len` samples. A candidate s is discarded once
/// F(s) + C(s, t) > F(t); the removal takes effect when t itself becomes an
/// admissible predecessor (t + min_seg_len), which keeps the pruning exact
/// under the length constraint.
inline Segmentation pelt(std::span<const double> y, double beta, std::size_t min_seg_len = 2) {
  const std::size_t n = y.size();
  detail::check_search_args(n, beta, min_seg_len);
  const CostTable table(y);
  constexpr std::size_t kAlive = std::numeric_limits<std::size_t>::max();

  std::vector<std::size_t> prev(n + 1, 0);

  // Candidate set in structure-of-arrays form, ascending by index.
  std::vector<std::size_t> idx{0}, kill{kAlive};
  std::vector<double> pos{0.0}, base{-beta - table.s2_hi(0)}, s1{table.s1_hi(0)};
  std::vector<double> value;
  std::size_t next_due = kAlive;

  for (std::size_t t = min_seg_len; t <= n; ++t) {
    // Only the most recent min_seg_len - 1 candidates can be too close to t.
    std::size_t eligible = idx.size();
    while (eligible > 0 && idx[eligible - 1] + min_seg_len > t) --eligible;

    const double td = static_cast<double>(t);
    const double s1_t = table.s1_hi(t), s2_t = table.s2_hi(t);
    value.resize(eligible);
    double* const v = value.data();
    const double* const p = pos.data();
    const double* const b = base.data();
    const double* const c = s1.data();
    for (std::size_t i = 0; i < eligible; ++i) {
      v[i] = detail::candidate_value(b[i], c[i], p[i], s2_t, s1_t, td, beta);
    }
    const double best = detail::min_value(value);
    const double tie_limit = best + 1e-12 * std::abs(best);

    // Smallest index within the tie band wins; candidates that can no longer
    // win are retired once t is admissible.
    std::size_t winner = eligible;
    std::size_t* const k = kill.data();
    for (std::size_t i = 0; i < eligible; ++i) {
      if (winner == eligible && v[i] <= tie_limit) winner = i;
      if (k[i] == kAlive && v[i] - beta > best) {
        k[i] = t + min_seg_len;
        next_due = std::min(next_due, k[i]);
      }
    }
    prev[t] = idx[winner];

    if (next_due <= t + 1) {
      next_due = kAlive;
      std::size_t w = 0;
      for (std::size_t i = 0; i < idx.size(); ++i) {
        if (kill[i] <= t + 1) continue;
        next_due = std::min(next_due, kill[i]);
        idx[w] = idx[i];
        kill[w] = kill[i];
        pos[w] = pos[i];
        base[w] = base[i];
        s1[w] = s1[i];
        ++w;
      }
      idx.resize(w);
      kill.resize(w);
      pos.resize(w);
      base.resize(w);
      s1.resize(w);
    }

    if (t + min_seg_len <= n) {
      idx.push_back(t);
      kill.push_back(kAlive);
      pos.push_back(td);
      base.push_back(best - s2_t);
      s1.push_back(s1_t);
    }
  }
  return detail::finish_segmentation(y, prev, beta);
}

/// Unpruned O(N^2) dynamic program with the same objective and tie rule as
/// pelt(). Reference implementation for tests.
inline Segmentation dp_optimal_oracle(std::span<const double> y, double beta,
                                      std::size_t min_seg_len = 2) {
  const std::size_t n = y.size();
  detail::check_search_args(n, beta, min_seg_len);
  const CostTable table(y);
  std::vector<double> best_cost(n + 1, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> prev(n + 1, 0);
  best_cost[0] = -beta;

  std::vector<double> values;
  std::vector<std::size_t> preds;
  for (std::size_t t = min_seg_len; t <= n; ++t) {
    values.clear();
    preds.clear();
    for (std::size_t s = 0; s + min_seg_len <= t; ++s) {
      if (s != 0 && s < min_seg_len) continue;
      values.push_back(detail::candidate_value(
          best_cost[s] - table.s2_hi(s), table.s1_hi(s), static_cast<double>(s), table.s2_hi(t),
          table.s1_hi(t), static_cast<double>(t), beta));
      preds.push_back(s);
    }
    const double best = *std::min_element(values.begin(), values.end());
    best_cost[t] = best;
    prev[t] = preds[detail::first_within_tie(values, best)];
  }
  return detail::finish_segmentation(y, prev, beta);
}

/// beta(tau1) = J(y, []) - C(0, tau1) - C(tau1, N) for tau1 = 1..N-1: the
/// largest penalty at which splitting at tau1 still pays. Entries are rounded
/// upward so that C(0, tau1) + C(tau1, N) + beta_max >= J holds as stated.
inline PenaltyProfile penalty_profile(std::span<const double> y) {
  const std::size_t n = y.size();
  if (n < 2) throw std::invalid_argument("penalty_profile: need at least 2 samples");
  const CostTable table(y);
  const long double whole = table.cost(0, n);

  PenaltyProfile p;
  p.beta_of_tau1.resize(n - 1);
  long double sum = 0.0L;
  for (std::size_t tau = 1; tau < n; ++tau) {
    const long double gain = whole - static_cast<long double>(table.cost_unchecked(0, tau)) -
                             static_cast<long double>(table.cost_unchecked(tau, n));
    double b = 0.0;
    if (gain > 0.0L) {
      b = static_cast<double>(gain);
      if (static_cast<long double>(b) < gain) b = std::nextafter(b, std::numeric_limits<double>::infinity());
    }
    p.beta_of_tau1[tau - 1] = b;
    p.beta_max = std::max(p.beta_max, b);
    sum += b;
  }
  p.beta_mean = static_cast<double>(sum / static_cast<long double>(n - 1));
  return p;
}

inline double choose_beta(const PenaltyProfile& profile, BetaStrategy strategy) {
  if (!(profile.beta_max > 0.0)) throw NoPenaltyScale();
  switch (strategy) {
    case BetaStrategy::MeanProfile:
      return profile.beta_mean;
    case BetaStrategy::HalfMax:
      return 0.5 * profile.beta_max;
  }
  throw std::invalid_argument("choose_beta: unknown strategy");
}

struct CropsResult {
  Segmentation segmentation;
  std::size_t pelt_calls = 0;
  std::size_t max_changes_used = 0;  // the max-changes value of the accepted run
  std::size_t restarts = 0;          // reruns triggered by short segments
};

namespace detail {

inline std::size_t shortest_segment(const Segmentation& seg, std::size_t n) {
  std::size_t shortest = n, start = 0;
  for (std::size_t cp : seg.changepoints) {
    shortest = std::min(shortest, cp - start);
    start = cp;
  }
  return std::min(shortest, n - start);
}

/// One CROPS pass: the segmentation with the largest m <= max_changes on the
/// optimal path over [beta_low, beta_high]. Interior penalties follow the
/// CROPS rule beta* = (Q_high - Q_low) / (m_low - m_high), restricted to the
/// interval that brackets max_changes.
inline Segmentation crops_search(std::span<const double> y, std::size_t max_changes,
                                 double beta_low, double beta_high, std::size_t& calls) {
  constexpr std::size_t kPeltMinSeg = 2;
  auto run = [&](double beta) {
    ++calls;
    return pelt(y, beta, kPeltMinSeg);
  };
  Segmentation low = run(beta_low);
  Segmentation high = run(beta_high);
  while (high.num_changes() > max_changes) {
    beta_low = beta_high;
    low = std::move(high);
    beta_high *= 2.0;
    high = run(beta_high);
  }
  if (low.num_changes() <= max_changes) return low;

  while (low.num_changes() > high.num_changes() + 1 && high.num_changes() < max_changes) {
    const double dm = static_cast<double>(low.num_changes() - high.num_changes());
    const double beta_mid = (high.total_cost - low.total_cost) / dm;
    if (!(beta_mid > beta_low && beta_mid < beta_high)) break;
    Segmentation mid = run(beta_mid);
    if (mid.num_changes() == high.num_changes() || mid.num_changes() == low.num_changes()) break;
    if (mid.num_changes() <= max_changes) {
      high = std::move(mid);
      beta_high = beta_mid;
    } else {
      low = std::move(mid);
      beta_low = beta_mid;
    }
  }
  return high;
}

}  // namespace detail

/// Iterative max-changes segmentation in the style of CROPS-backed tools:
/// each pass searches penalties in [beta_max * 1e-4, beta_max] for the
/// segmentation with the most changes not exceeding max_num_changes; while
/// any segment is shorter than min_seg_len the cap is decremented and the
/// whole search rerun.
inline CropsResult crops_max_changes(std::span<const double> y, std::size_t max_num_changes,
                                     std::size_t min_seg_len) {
  if (max_num_changes < 1) throw std::invalid_argument("crops_max_changes: max_num_changes >= 1");
  if (y.size() < 4) throw std::invalid_argument("crops_max_changes: need at least 4 samples");
  CropsResult result;
  const auto profile = penalty_profile(y);
  if (!(profile.beta_max > 0.0)) {
    result.segmentation = detail::finish_segmentation(
        y, std::vector<std::size_t>(y.size() + 1, 0), 1.0);
    return result;
  }
  const double beta_high = profile.beta_max;
  const double beta_low = profile.beta_max * 1e-4;

  for (std::size_t cap = max_num_changes;; --cap) {
    result.max_changes_used = cap;
    if (cap == 0) {
      result.segmentation =
          detail::finish_segmentation(y, std::vector<std::size_t>(y.size() + 1, 0), beta_high);
      break;
    }
    result.segmentation = detail::crops_search(y, cap, beta_low, beta_high, result.pelt_calls);
    if (detail::shortest_segment(result.segmentation, y.size()) >= min_seg_len) break;
    ++result.restarts;
  }
  return result;
}

}  // namespace fopelt
