#pragma once

// Seeded Monte Carlo benchmark of the single-PELT localizer against the
// max-changes baseline: experiment config, per-trial records, CSV output and
// per-SNR summaries.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "fopelt/fo_localize.hpp"
#include "fopelt/record_io.hpp"

namespace fopelt {

inline constexpr int kConfigSchemaVersion = 1;

struct ModelConfig {
  double mode_freq_hz = 0.372;
  double damping_ratio = 0.0467;
  double noise_variance = 0.16;
  double sample_rate_hz = 3.0;
};

struct FoTruthConfig {
  double freq_hz = 0.370;
  double phase_rad = 0.0;
  std::size_t start_sample = 1535;
  std::size_t end_sample = 3334;
};

struct ExperimentConfig {
  ModelConfig model;
  std::size_t n_samples = 4500;
  FoTruthConfig fo;
  std::vector<double> snr_db{-15, -10, -5, 0, 5, 10};
  std::size_t trials = 300;
  std::uint64_t seed_base = 1;
  std::size_t workers = 0;  // 0: one per hardware thread
  BetaStrategy beta_strategy = BetaStrategy::MeanProfile;
  double snr_min_db = -15.0;
  double a_max_mhz = 10.0;
  bool model_psd = true;  // minimum length from the simulation model, else an AR fit
  BaselineConfig baseline;
  DetectorConfig detector;
  std::string output_dir = "bench_out";
};

inline const char* to_string(BetaStrategy s) {
  return s == BetaStrategy::HalfMax ? "half-max" : "mean";
}

inline BetaStrategy parse_beta_strategy(const std::string& s) {
  if (s == "mean") return BetaStrategy::MeanProfile;
  if (s == "half-max") return BetaStrategy::HalfMax;
  throw std::invalid_argument("beta strategy must be 'mean' or 'half-max', got '" + s + "'");
}

inline ArmaModel build_model(const ExperimentConfig& c) {
  return design_resonant_arma(c.model.mode_freq_hz, c.model.damping_ratio,
                              c.model.sample_rate_hz, c.model.noise_variance);
}

inline void validate(const ExperimentConfig& c) {
  if (c.trials < 1) throw std::invalid_argument("config: trials must be >= 1");
  if (c.snr_db.empty()) throw std::invalid_argument("config: snr_db must be non-empty");
  for (double s : c.snr_db) {
    if (!std::isfinite(s)) throw std::invalid_argument("config: snr_db entries must be finite");
  }
  if (c.fo.start_sample > c.fo.end_sample || c.fo.end_sample >= c.n_samples) {
    throw std::invalid_argument("config: FO interval outside the record");
  }
  if (c.n_samples < 64) throw std::invalid_argument("config: n_samples must be >= 64");
  if (!(c.a_max_mhz > 0.0)) throw std::invalid_argument("config: a_max_mhz must be > 0");
  if (c.baseline.n_max_cp < 1) throw std::invalid_argument("config: baseline n_max_cp >= 1");
  if (!(c.baseline.alpha > 0.0)) throw std::invalid_argument("config: baseline alpha must be > 0");
  if (!(c.detector.kappa > 0.0)) throw std::invalid_argument("config: detector kappa must be > 0");
  if (!(c.detector.guard_hz >= 0.0 && c.detector.half_window_hz > c.detector.guard_hz)) {
    throw std::invalid_argument("config: detector needs 0 <= guard_hz < half_window_hz");
  }
  build_model(c);
  detail::require_in_band(c.fo.freq_hz, c.model.sample_rate_hz, "config fo.freq_hz");
}

/// Everything that determines trial outcomes. workers and output_dir are left
/// out so that they do not change the hash.
inline nlohmann::json outcome_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["schema_version"] = kConfigSchemaVersion;
  j["model"] = {{"mode_freq_hz", c.model.mode_freq_hz},
                {"damping_ratio", c.model.damping_ratio},
                {"noise_variance", c.model.noise_variance},
                {"sample_rate_hz", c.model.sample_rate_hz}};
  j["n_samples"] = c.n_samples;
  j["fo"] = {{"freq_hz", c.fo.freq_hz},
             {"phase_rad", c.fo.phase_rad},
             {"start_sample", c.fo.start_sample},
             {"end_sample", c.fo.end_sample}};
  j["snr_db"] = c.snr_db;
  j["trials"] = c.trials;
  j["seed_base"] = c.seed_base;
  j["localizer"] = {{"beta_strategy", to_string(c.beta_strategy)},
                    {"snr_min_db", c.snr_min_db},
                    {"a_max_mhz", c.a_max_mhz},
                    {"model_psd", c.model_psd}};
  j["baseline"] = {{"n_max_cp", c.baseline.n_max_cp},
                   {"n_min_sl", c.baseline.n_min_sl},
                   {"alpha", c.baseline.alpha}};
  j["detector"] = {{"kappa", c.detector.kappa},
                   {"max_segment", c.detector.max_segment},
                   {"half_window_hz", c.detector.half_window_hz},
                   {"guard_hz", c.detector.guard_hz},
                   {"min_variance", c.detector.min_variance}};
  return j;
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
  auto j = outcome_json(c);
  j["workers"] = c.workers;
  j["output_dir"] = c.output_dir;
  return j;
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("config: top level must be an object");
  const int version = j.value("schema_version", -1);
  if (version != kConfigSchemaVersion) {
    throw std::invalid_argument("config: unsupported schema_version " + std::to_string(version));
  }
  ExperimentConfig c;
  if (j.contains("model")) {
    const auto& m = j.at("model");
    c.model.mode_freq_hz = m.value("mode_freq_hz", c.model.mode_freq_hz);
    c.model.damping_ratio = m.value("damping_ratio", c.model.damping_ratio);
    c.model.noise_variance = m.value("noise_variance", c.model.noise_variance);
    c.model.sample_rate_hz = m.value("sample_rate_hz", c.model.sample_rate_hz);
  }
  c.n_samples = j.value("n_samples", c.n_samples);
  if (j.contains("fo")) {
    const auto& f = j.at("fo");
    c.fo.freq_hz = f.value("freq_hz", c.fo.freq_hz);
    c.fo.phase_rad = f.value("phase_rad", c.fo.phase_rad);
    c.fo.start_sample = f.value("start_sample", c.fo.start_sample);
    c.fo.end_sample = f.value("end_sample", c.fo.end_sample);
  }
  if (j.contains("snr_db")) c.snr_db = j.at("snr_db").get<std::vector<double>>();
  c.trials = j.value("trials", c.trials);
  c.seed_base = j.value("seed_base", c.seed_base);
  c.workers = j.value("workers", c.workers);
  if (j.contains("localizer")) {
    const auto& l = j.at("localizer");
    c.beta_strategy = parse_beta_strategy(l.value("beta_strategy", std::string("mean")));
    c.snr_min_db = l.value("snr_min_db", c.snr_min_db);
    c.a_max_mhz = l.value("a_max_mhz", c.a_max_mhz);
    c.model_psd = l.value("model_psd", c.model_psd);
  }
  if (j.contains("baseline")) {
    const auto& b = j.at("baseline");
    c.baseline.n_max_cp = b.value("n_max_cp", c.baseline.n_max_cp);
    c.baseline.n_min_sl = b.value("n_min_sl", c.baseline.n_min_sl);
    c.baseline.alpha = b.value("alpha", c.baseline.alpha);
  }
  if (j.contains("detector")) {
    const auto& d = j.at("detector");
    c.detector.kappa = d.value("kappa", c.detector.kappa);
    c.detector.max_segment = d.value("max_segment", c.detector.max_segment);
    c.detector.half_window_hz = d.value("half_window_hz", c.detector.half_window_hz);
    c.detector.guard_hz = d.value("guard_hz", c.detector.guard_hz);
    c.detector.min_variance = d.value("min_variance", c.detector.min_variance);
  }
  c.output_dir = j.value("output_dir", c.output_dir);
  validate(c);
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("config " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

/// FNV-1a 64 of the canonical (sorted-key) JSON of outcome_json, as 16 hex digits.
inline std::string config_hash(const ExperimentConfig& c) {
  const std::string text = outcome_json(c).dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

enum class Method { Proposed, Baseline };

inline const char* to_string(Method m) { return m == Method::Proposed ? "proposed" : "baseline"; }

inline Method parse_method(const std::string& s) {
  if (s == "proposed") return Method::Proposed;
  if (s == "baseline") return Method::Baseline;
  throw std::invalid_argument("unknown method tag '" + s + "'");
}

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct TrialRecord {
  std::size_t trial_id = 0;
  std::uint64_t seed = 0;
  double snr_db = 0.0;
  Method method = Method::Proposed;
  std::string status = "ok";  // "ok" or "error: ..."
  bool detected = false;
  std::vector<Interval> intervals;
  // Longest interval and the FO estimate refined on it; NaN when there is none.
  double eps_hat = kNaN;
  double eta_hat = kNaN;
  double amp_hat = kNaN;
  double freq_hat = kNaN;
  double phase_hat = kNaN;
  double true_eps = 0.0;
  double true_eta = 0.0;
  double true_amp = 0.0;  // steady-state amplitude at the output
  double true_freq = 0.0;
  double true_phase = 0.0;
  std::size_t pelt_calls = 0;
  std::int64_t wall_ns = 0;

  bool ok() const noexcept { return status == "ok"; }
  bool located() const noexcept { return ok() && !intervals.empty(); }
};

/// Output-referred truth at a given SNR: the input amplitude is scaled by
/// 1/|B/A| so that the observed steady-state amplitude meets the SNR, and the
/// observed phase is the input phase plus arg(B/A).
struct TrialTruth {
  ForcedOscillation input;
  double observed_amplitude = 0.0;
  double observed_phase = 0.0;
};

inline TrialTruth trial_truth(const ExperimentConfig& c, const ArmaModel& model, double snr_db) {
  const std::size_t n_fo = c.fo.end_sample - c.fo.start_sample + 1;
  const double observed = amplitude_for_snr(snr_db, model, c.fo.freq_hz, n_fo, c.n_samples);
  const auto gain = fo_gain(model, c.fo.freq_hz);
  TrialTruth t;
  t.observed_amplitude = observed;
  t.observed_phase = wrap_phase(c.fo.phase_rad + std::arg(gain));
  t.input = ForcedOscillation{observed / std::abs(gain), c.fo.freq_hz, c.fo.phase_rad,
                              c.fo.start_sample, c.fo.end_sample};
  return t;
}

inline LocalizerConfig localizer_config(const ExperimentConfig& c, const ArmaModel& model) {
  LocalizerConfig lc;
  lc.beta_strategy = c.beta_strategy;
  lc.snr_min_db = c.snr_min_db;
  lc.a_max_mhz = c.a_max_mhz;
  lc.monitored_band = c.baseline.monitored_band;
  if (c.model_psd) lc.ambient_model = model;
  lc.detector = c.detector;
  return lc;
}

namespace detail {

inline void fill_refined(TrialRecord& r, const SignalRecord& y, FrequencyBand band) {
  if (r.intervals.empty()) return;
  const Interval* longest = &r.intervals.front();
  for (const auto& iv : r.intervals) {
    if (iv.length() > longest->length()) longest = &iv;
  }
  r.eps_hat = static_cast<double>(longest->start);
  r.eta_hat = static_cast<double>(longest->end);
  if (longest->length() < 16) return;
  const auto est = estimate_fo(y, band, longest->start, longest->end);
  r.amp_hat = est.amplitude;
  r.freq_hat = est.frequency_hz;
  r.phase_hat = est.phase_rad;
}

template <class F>
std::int64_t timed(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  const auto t1 = std::chrono::steady_clock::now();
  return std::max<std::int64_t>(
      1, std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count());
}

}  // namespace detail

/// One simulated record sent through both localizers. Both are always run and
/// timed; their intervals are reported only when the detector fires.
inline std::pair<TrialRecord, TrialRecord> run_trial(const ExperimentConfig& config,
                                                     double snr_db, std::uint64_t seed,
                                                     std::size_t trial_id = 0) {
  TrialRecord proposed, baseline;
  for (auto* r : {&proposed, &baseline}) {
    r->trial_id = trial_id;
    r->seed = seed;
    r->snr_db = snr_db;
    r->true_eps = static_cast<double>(config.fo.start_sample);
    r->true_eta = static_cast<double>(config.fo.end_sample);
    r->true_freq = config.fo.freq_hz;
  }
  baseline.method = Method::Baseline;

  SignalRecord y;
  try {
    const auto model = build_model(config);
    const auto truth = trial_truth(config, model, snr_db);
    for (auto* r : {&proposed, &baseline}) {
      r->true_amp = truth.observed_amplitude;
      r->true_phase = truth.observed_phase;
    }
    y = simulate_armax(model, truth.input, config.n_samples, seed);
    const bool detected = detect_fo(y, config.detector);
    proposed.detected = baseline.detected = detected;

    const auto lc = localizer_config(config, model);
    thread_local bool warmed = false;
    if (!warmed) {
      (void)localize(y, lc);
      (void)baseline_localize_gm22(y, config.baseline);
      warmed = true;
    }

    try {
      LocalizeResult res;
      proposed.wall_ns = detail::timed([&] { res = localize(y, lc); });
      proposed.pelt_calls = res.pelt_calls;
      if (detected) proposed.intervals = res.intervals.intervals;
      detail::fill_refined(proposed, y, lc.monitored_band);
    } catch (const std::exception& e) {
      proposed.status = std::string("error: ") + e.what();
    }
    try {
      BaselineResult res;
      baseline.wall_ns = detail::timed([&] { res = baseline_localize_gm22(y, config.baseline); });
      baseline.pelt_calls = res.pelt_calls;
      if (detected) baseline.intervals = res.intervals.intervals;
      detail::fill_refined(baseline, y, config.baseline.monitored_band);
    } catch (const std::exception& e) {
      baseline.status = std::string("error: ") + e.what();
    }
  } catch (const std::exception& e) {
    proposed.status = baseline.status = std::string("error: ") + e.what();
  }
  for (auto* r : {&proposed, &baseline}) {
    if (r->wall_ns <= 0) r->wall_ns = 1;
  }
  return {std::move(proposed), std::move(baseline)};
}

struct MonteCarloResult {
  std::vector<TrialRecord> records;  // sorted by (trial_id, method)
  bool interrupted = false;
  std::size_t trials_planned = 0;
};

inline std::size_t resolve_workers(std::size_t requested) {
  if (requested > 0) return requested;
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

/// Runs trials x snr grid. Trial index i = snr_index * trials + k has seed
/// seed_base + i. Setting *stop makes workers finish their current trial and
/// return what has been completed.
inline MonteCarloResult run_monte_carlo(const ExperimentConfig& config,
                                        const std::atomic<bool>* stop = nullptr,
                                        std::size_t workers = 0) {
  validate(config);
  const std::size_t total = config.trials * config.snr_db.size();
  std::vector<std::optional<std::pair<TrialRecord, TrialRecord>>> slots(total);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> interrupted{false};

  auto worker = [&] {
    for (;;) {
      if (stop && stop->load()) {
        interrupted = true;
        return;
      }
      const std::size_t i = next.fetch_add(1);
      if (i >= total) return;
      const double snr = config.snr_db[i / config.trials];
      slots[i] = run_trial(config, snr, config.seed_base + i, i);
    }
  };
  const std::size_t n_workers = std::min(resolve_workers(workers ? workers : config.workers), total);
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < n_workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  MonteCarloResult out;
  out.trials_planned = total;
  out.interrupted = interrupted.load();
  for (auto& s : slots) {
    if (!s) continue;
    out.records.push_back(std::move(s->first));
    out.records.push_back(std::move(s->second));
  }
  return out;
}

// ---- CSV -------------------------------------------------------------------

inline const char* kTrialsHeader =
    "trial_id,seed,snr_db,method,status,detected,n_intervals,eps_hat,eta_hat,amp_hat,"
    "freq_hat,phase_hat,true_eps,true_eta,true_amp,true_freq,true_phase,pelt_calls,wall_ns";

namespace detail {

inline std::string csv_safe(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_csv_double(const std::string& s) {
  if (s == "nan" || s == "-nan") return kNaN;
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::runtime_error("bad number '" + s + "'");
  return v;
}

}  // namespace detail

inline void write_trials_csv(std::ostream& out, const std::vector<TrialRecord>& records,
                             const std::string& hash) {
  out << "# config_hash=" << hash << '\n' << kTrialsHeader << '\n';
  for (const auto& r : records) {
    out << r.trial_id << ',' << r.seed << ',' << format_double(r.snr_db) << ','
        << to_string(r.method) << ',' << detail::csv_safe(r.status) << ','
        << (r.detected ? 1 : 0) << ',' << r.intervals.size() << ',' << format_double(r.eps_hat)
        << ',' << format_double(r.eta_hat) << ',' << format_double(r.amp_hat) << ','
        << format_double(r.freq_hat) << ',' << format_double(r.phase_hat) << ','
        << format_double(r.true_eps) << ',' << format_double(r.true_eta) << ','
        << format_double(r.true_amp) << ',' << format_double(r.true_freq) << ','
        << format_double(r.true_phase) << ',' << r.pelt_calls << ',' << r.wall_ns << '\n';
  }
}

/// One file per method with the rows (trial_id, interval_index, epsilon, eta).
inline void write_intervals_csv(std::ostream& out, const std::vector<TrialRecord>& records,
                                Method method, const std::string& hash) {
  out << "# config_hash=" << hash << '\n' << "trial_id,interval_index,epsilon,eta\n";
  for (const auto& r : records) {
    if (r.method != method) continue;
    for (std::size_t i = 0; i < r.intervals.size(); ++i) {
      out << r.trial_id << ',' << i << ',' << r.intervals[i].start << ',' << r.intervals[i].end
          << '\n';
    }
  }
}

struct TrialsFile {
  std::string config_hash;
  std::vector<TrialRecord> records;  // intervals are not stored in trials.csv
};

inline TrialsFile read_trials_csv(std::istream& in) {
  TrialsFile file;
  std::string line;
  bool header = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      const auto pos = line.find("config_hash=");
      if (pos != std::string::npos) file.config_hash = line.substr(pos + 12);
      continue;
    }
    if (!header) {
      if (line != kTrialsHeader) throw std::runtime_error("trials.csv: unexpected header");
      header = true;
      continue;
    }
    const auto f = detail::split_csv(line);
    if (f.size() != 19) {
      throw std::runtime_error("trials.csv: expected 19 fields at line " + std::to_string(line_no));
    }
    TrialRecord r;
    try {
      r.trial_id = std::stoull(f[0]);
      r.seed = std::stoull(f[1]);
      r.snr_db = detail::parse_csv_double(f[2]);
      r.method = parse_method(f[3]);
      r.status = f[4];
      r.detected = f[5] == "1";
      r.intervals.resize(std::stoull(f[6]));
      r.eps_hat = detail::parse_csv_double(f[7]);
      r.eta_hat = detail::parse_csv_double(f[8]);
      r.amp_hat = detail::parse_csv_double(f[9]);
      r.freq_hat = detail::parse_csv_double(f[10]);
      r.phase_hat = detail::parse_csv_double(f[11]);
      r.true_eps = detail::parse_csv_double(f[12]);
      r.true_eta = detail::parse_csv_double(f[13]);
      r.true_amp = detail::parse_csv_double(f[14]);
      r.true_freq = detail::parse_csv_double(f[15]);
      r.true_phase = detail::parse_csv_double(f[16]);
      r.pelt_calls = std::stoull(f[17]);
      r.wall_ns = std::stoll(f[18]);
    } catch (const std::exception& e) {
      throw std::runtime_error("trials.csv line " + std::to_string(line_no) + ": " + e.what());
    }
    file.records.push_back(std::move(r));
  }
  if (!header) throw std::runtime_error("trials.csv: no header");
  return file;
}

// ---- summary ---------------------------------------------------------------

struct Stat {
  std::size_t n = 0;
  double mean = kNaN;
  double std = kNaN;  // sample standard deviation; 0 when n == 1
};

/// Two-pass mean and sample standard deviation of the finite entries, in the given order.
inline Stat describe(const std::vector<double>& values) {
  Stat s;
  double sum = 0.0;
  for (double v : values) {
    if (!std::isfinite(v)) continue;
    sum += v;
    ++s.n;
  }
  if (s.n == 0) return s;
  s.mean = sum / static_cast<double>(s.n);
  if (s.n == 1) {
    s.std = 0.0;
    return s;
  }
  double ss = 0.0;
  for (double v : values) {
    if (std::isfinite(v)) ss += (v - s.mean) * (v - s.mean);
  }
  s.std = std::sqrt(ss / static_cast<double>(s.n - 1));
  return s;
}

inline const std::vector<std::string>& summary_metrics() {
  static const std::vector<std::string> names{"wall_ms", "pelt_calls", "eps_hat", "eta_hat",
                                              "amp_hat", "freq_hat",   "phase_hat"};
  return names;
}

struct SummaryRow {
  double snr_db = 0.0;
  Method method = Method::Proposed;
  std::size_t trials = 0;
  std::size_t errors = 0;
  std::size_t detected = 0;
  std::size_t located = 0;
  std::size_t single = 0;  // exactly one interval
  // Truth of the last record in the group; constant within a group.
  double true_eps = kNaN, true_eta = kNaN, true_amp = kNaN, true_freq = kNaN, true_phase = kNaN;
  std::map<std::string, Stat> stats;
};

/// Per (snr, method) statistics. Records are sorted by (trial_id, method)
/// first, so the result does not depend on input order.
inline std::vector<SummaryRow> summarize(std::vector<TrialRecord> records) {
  if (records.empty()) throw std::invalid_argument("summarize: no trial records");
  std::sort(records.begin(), records.end(), [](const TrialRecord& a, const TrialRecord& b) {
    if (a.trial_id != b.trial_id) return a.trial_id < b.trial_id;
    return a.method < b.method;
  });
  std::map<std::pair<double, Method>, std::vector<const TrialRecord*>> groups;
  for (const auto& r : records) groups[{r.snr_db, r.method}].push_back(&r);

  std::vector<SummaryRow> rows;
  for (const auto& [key, members] : groups) {
    SummaryRow row;
    row.snr_db = key.first;
    row.method = key.second;
    std::map<std::string, std::vector<double>> cols;
    for (const auto* r : members) {
      ++row.trials;
      row.true_eps = r->true_eps;
      row.true_eta = r->true_eta;
      row.true_amp = r->true_amp;
      row.true_freq = r->true_freq;
      row.true_phase = r->true_phase;
      if (!r->ok()) {
        ++row.errors;
        continue;
      }
      row.detected += r->detected;
      row.located += !r->intervals.empty();
      row.single += r->intervals.size() == 1;
      cols["wall_ms"].push_back(static_cast<double>(r->wall_ns) * 1e-6);
      cols["pelt_calls"].push_back(static_cast<double>(r->pelt_calls));
      cols["eps_hat"].push_back(r->eps_hat);
      cols["eta_hat"].push_back(r->eta_hat);
      cols["amp_hat"].push_back(r->amp_hat);
      cols["freq_hat"].push_back(r->freq_hat);
      cols["phase_hat"].push_back(r->phase_hat);
    }
    for (const auto& name : summary_metrics()) row.stats[name] = describe(cols[name]);
    rows.push_back(std::move(row));
  }
  return rows;
}

inline const char* kTimingBoundary =
    "timed region: one localize() or baseline_localize_gm22() call (FO estimate, y_cos, "
    "segmentation, interval extraction); simulation and detection excluded";

inline void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows,
                              const std::string& hash) {
  out << "# config_hash=" << hash << '\n' << "# " << kTimingBoundary << '\n';
  out << "snr_db,method,trials,errors,detected,located,single_interval,true_eps,true_eta,"
         "true_amp,true_freq,true_phase";
  for (const auto& m : summary_metrics()) out << ',' << m << "_n," << m << "_mean," << m << "_std";
  out << '\n';
  for (const auto& row : rows) {
    out << format_double(row.snr_db) << ',' << to_string(row.method) << ',' << row.trials << ','
        << row.errors << ',' << row.detected << ',' << row.located << ',' << row.single << ','
        << format_double(row.true_eps) << ',' << format_double(row.true_eta) << ','
        << format_double(row.true_amp) << ',' << format_double(row.true_freq) << ','
        << format_double(row.true_phase);
    for (const auto& m : summary_metrics()) {
      const auto& s = row.stats.at(m);
      out << ',' << s.n << ',' << format_double(s.mean) << ',' << format_double(s.std);
    }
    out << '\n';
  }
}

inline std::vector<SummaryRow> read_summary_csv(std::istream& in) {
  std::vector<SummaryRow> rows;
  std::vector<std::string> header;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto f = detail::split_csv(line);
    if (header.empty()) {
      header = f;
      continue;
    }
    if (f.size() != header.size()) throw std::runtime_error("summary.csv: ragged row");
    std::map<std::string, std::string> v;
    for (std::size_t i = 0; i < f.size(); ++i) v[header[i]] = f[i];
    auto get = [&](const std::string& k) -> const std::string& {
      const auto it = v.find(k);
      if (it == v.end()) throw std::runtime_error("summary.csv: missing column " + k);
      return it->second;
    };
    SummaryRow row;
    row.snr_db = detail::parse_csv_double(get("snr_db"));
    row.method = parse_method(get("method"));
    row.trials = std::stoull(get("trials"));
    row.errors = std::stoull(get("errors"));
    row.detected = std::stoull(get("detected"));
    row.located = std::stoull(get("located"));
    row.single = std::stoull(get("single_interval"));
    row.true_eps = detail::parse_csv_double(get("true_eps"));
    row.true_eta = detail::parse_csv_double(get("true_eta"));
    row.true_amp = detail::parse_csv_double(get("true_amp"));
    row.true_freq = detail::parse_csv_double(get("true_freq"));
    row.true_phase = detail::parse_csv_double(get("true_phase"));
    for (const auto& m : summary_metrics()) {
      row.stats[m] = Stat{std::stoull(get(m + "_n")), detail::parse_csv_double(get(m + "_mean")),
                          detail::parse_csv_double(get(m + "_std"))};
    }
    rows.push_back(std::move(row));
  }
  if (header.empty()) throw std::runtime_error("summary.csv: no header");
  return rows;
}

}  // namespace fopelt
