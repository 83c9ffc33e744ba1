#include "catch_amalgamated.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "fopelt/harness.hpp"
#include "fopelt/report.hpp"

using namespace fopelt;
using Catch::Approx;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.n_samples = 1500;
  c.fo.start_sample = 500;
  c.fo.end_sample = 1099;
  c.snr_db = {0.0, 10.0};
  c.trials = 3;
  c.seed_base = 4000;
  return c;
}

// Drops the trailing wall_ns field from every data row.
std::string without_timing(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, out;
  while (std::getline(in, line)) {
    if (!line.empty() && line.front() != '#' && line.rfind("trial_id", 0) != 0) {
      line = line.substr(0, line.rfind(','));
    }
    out += line + '\n';
  }
  return out;
}

std::string trials_text(const std::vector<TrialRecord>& r) {
  std::ostringstream out;
  write_trials_csv(out, r, "h");
  return out.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("fopelt_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

TrialRecord synthetic(std::size_t id, double snr, Method m, double eps, double wall_ms) {
  TrialRecord r;
  r.trial_id = id;
  r.seed = id;
  r.snr_db = snr;
  r.method = m;
  r.detected = true;
  r.intervals = {{static_cast<std::size_t>(eps), static_cast<std::size_t>(eps) + 100}};
  r.eps_hat = eps;
  r.eta_hat = eps + 100;
  r.amp_hat = 1.0;
  r.freq_hat = 0.37;
  r.phase_hat = 0.0;
  r.wall_ns = static_cast<std::int64_t>(wall_ms * 1e6);
  r.pelt_calls = m == Method::Proposed ? 1 : 40;
  return r;
}

}  // namespace

TEST_CASE("config JSON round trip and hash") {
  auto c = small_config();
  c.beta_strategy = BetaStrategy::HalfMax;
  c.baseline.alpha = 0.6;
  const auto back = config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
  CHECK(config_hash(back) == config_hash(c));
  CHECK(config_hash(c).size() == 16);

  auto other = c;
  other.workers = 7;
  other.output_dir = "elsewhere";
  CHECK(config_hash(other) == config_hash(c));
  other.trials = 4;
  CHECK(config_hash(other) != config_hash(c));
}

TEST_CASE("invalid configs are rejected") {
  auto j = to_json(small_config());
  j["schema_version"] = 99;
  CHECK_THROWS(config_from_json(j));
  j = to_json(small_config());
  j["trials"] = 0;
  CHECK_THROWS(config_from_json(j));
  j = to_json(small_config());
  j["snr_db"] = nlohmann::json::array();
  CHECK_THROWS(config_from_json(j));
  j = to_json(small_config());
  j["fo"]["end_sample"] = 1500;
  CHECK_THROWS(config_from_json(j));
  j = to_json(small_config());
  j["localizer"]["beta_strategy"] = "median";
  CHECK_THROWS(config_from_json(j));
  CHECK_THROWS(load_config("/nonexistent/config.json"));
}

TEST_CASE("zero-amplitude trial: no detection and no intervals") {
  const ExperimentConfig c;
  const auto [p, b] = run_trial(c, -std::numeric_limits<double>::infinity(), 11);
  CHECK(p.true_amp == 0.0);
  CHECK_FALSE(p.detected);
  CHECK_FALSE(b.detected);
  CHECK(p.intervals.empty());
  CHECK(b.intervals.empty());
  CHECK(p.ok());
  CHECK(b.ok());
  CHECK(p.wall_ns > 0);
  CHECK(b.wall_ns > 0);
  CHECK(std::isnan(p.eps_hat));
}

TEST_CASE("intervals are reported only for detected records") {
  const auto c = small_config();
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto [p, b] = run_trial(c, -std::numeric_limits<double>::infinity(), seed);
    CHECK(p.detected == b.detected);
    if (!p.detected) {
      CHECK(p.intervals.empty());
      CHECK(b.intervals.empty());
    }
  }
}

TEST_CASE("10 dB trial localizes the start for both methods") {
  ExperimentConfig c;
  const auto [p, b] = run_trial(c, 10.0, 77, 5);
  CHECK(p.method == Method::Proposed);
  CHECK(b.method == Method::Baseline);
  CHECK(p.trial_id == 5);
  CHECK(p.detected);
  CHECK(std::abs(p.eps_hat - 1535.0) < 50.0);
  CHECK(std::abs(b.eps_hat - 1535.0) < 50.0);
  CHECK(p.freq_hat == Approx(0.37).margin(0.002));
  CHECK(p.amp_hat == Approx(p.true_amp).epsilon(0.1));
  CHECK(p.pelt_calls == 1);
  CHECK(b.pelt_calls > 2);
}

TEST_CASE("same seed gives the same records apart from timing") {
  const auto c = small_config();
  const auto a = run_trial(c, 0.0, 31);
  const auto b = run_trial(c, 0.0, 31);
  CHECK(without_timing(trials_text({a.first, a.second})) ==
        without_timing(trials_text({b.first, b.second})));
  CHECK(a.first.intervals == b.first.intervals);
}

TEST_CASE("serial and parallel sweeps agree") {
  const auto c = small_config();
  const auto serial = run_monte_carlo(c, nullptr, 1);
  const auto parallel = run_monte_carlo(c, nullptr, 4);
  const auto again = run_monte_carlo(c, nullptr, 1);
  REQUIRE(serial.records.size() == 2 * c.trials * c.snr_db.size());
  CHECK_FALSE(serial.interrupted);
  CHECK(without_timing(trials_text(serial.records)) == without_timing(trials_text(parallel.records)));
  CHECK(without_timing(trials_text(serial.records)) == without_timing(trials_text(again.records)));
  for (std::size_t i = 0; i < serial.records.size(); ++i) {
    CHECK(serial.records[i].seed == c.seed_base + serial.records[i].trial_id);
    CHECK(serial.records[i].intervals == parallel.records[i].intervals);
  }
}

TEST_CASE("stop flag returns the completed prefix") {
  const auto c = small_config();
  std::atomic<bool> stop{true};
  const auto r = run_monte_carlo(c, &stop, 1);
  CHECK(r.interrupted);
  CHECK(r.records.empty());
  CHECK(r.trials_planned == c.trials * c.snr_db.size());
}

TEST_CASE("summary of a single trial has zero spread") {
  const auto rows = summarize({synthetic(0, 0.0, Method::Proposed, 1500, 8.0)});
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].stats.at("eps_hat").n == 1);
  CHECK(rows[0].stats.at("eps_hat").mean == 1500.0);
  CHECK(rows[0].stats.at("eps_hat").std == 0.0);
  CHECK(rows[0].stats.at("wall_ms").std == 0.0);
  CHECK_THROWS(summarize({}));
}

TEST_CASE("summary matches hand computation") {
  std::vector<TrialRecord> recs{
      synthetic(0, 5.0, Method::Proposed, 1530, 8.0), synthetic(0, 5.0, Method::Baseline, 1540, 360.0),
      synthetic(1, 5.0, Method::Proposed, 1540, 10.0), synthetic(1, 5.0, Method::Baseline, 1550, 366.0)};
  const auto rows = summarize(recs);
  REQUIRE(rows.size() == 2);
  const auto& p = rows[0].method == Method::Proposed ? rows[0] : rows[1];
  const auto& b = rows[0].method == Method::Proposed ? rows[1] : rows[0];
  CHECK(p.stats.at("eps_hat").mean == 1535.0);
  CHECK(p.stats.at("eps_hat").std == Approx(std::sqrt(50.0)));
  CHECK(b.stats.at("eps_hat").mean == 1545.0);
  CHECK(p.stats.at("wall_ms").mean == Approx(9.0));
  CHECK(b.stats.at("wall_ms").mean == Approx(363.0));
  CHECK(b.stats.at("pelt_calls").mean == 40.0);
  CHECK(p.single == 2);
  CHECK(p.located == 2);
}

TEST_CASE("summary agrees with a one-pass Welford oracle and ignores order") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(1535.0, 20.0), w(10.0, 2.0);
  std::vector<TrialRecord> recs;
  for (std::size_t i = 0; i < 500; ++i) {
    recs.push_back(synthetic(i, i % 2 ? 0.0 : 5.0, Method::Proposed, std::round(g(rng)), std::abs(w(rng))));
    recs.back().amp_hat = std::abs(w(rng));
  }
  const auto rows = summarize(recs);
  for (const auto& row : rows) {
    double n = 0, mean = 0, m2 = 0;
    for (const auto& r : recs) {
      if (r.snr_db != row.snr_db) continue;
      n += 1;
      const double d = r.amp_hat - mean;
      mean += d / n;
      m2 += d * (r.amp_hat - mean);
    }
    CHECK(row.stats.at("amp_hat").mean == Approx(mean).epsilon(1e-9));
    CHECK(row.stats.at("amp_hat").std == Approx(std::sqrt(m2 / (n - 1))).epsilon(1e-9));
  }
  auto shuffled = recs;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  std::ostringstream a, b;
  write_summary_csv(a, rows, "h");
  write_summary_csv(b, summarize(shuffled), "h");
  CHECK(a.str() == b.str());
}

TEST_CASE("trials CSV round trip") {
  const auto c = small_config();
  const auto r = run_monte_carlo(c, nullptr, 1);
  std::stringstream buf;
  write_trials_csv(buf, r.records, config_hash(c));
  const auto back = read_trials_csv(buf);
  CHECK(back.config_hash == config_hash(c));
  REQUIRE(back.records.size() == r.records.size());
  std::ostringstream again;
  write_trials_csv(again, back.records, config_hash(c));
  CHECK(again.str() == buf.str());
  std::ostringstream s1, s2;
  write_summary_csv(s1, summarize(r.records), "x");
  write_summary_csv(s2, summarize(back.records), "x");
  CHECK(s1.str() == s2.str());

  std::istringstream bad("trial_id,seed\n1,2\n");
  CHECK_THROWS(read_trials_csv(bad));
}

TEST_CASE("reports regenerate byte-identically from stored trials") {
  const auto c = small_config();
  const auto r = run_monte_carlo(c, nullptr, 2);
  const auto dir = temp_dir("bench");
  write_bench_outputs(r.records, config_hash(c), dir);
  for (const char* f : {"trials.csv", "intervals_proposed.csv", "intervals_baseline.csv",
                        "summary.csv", "timing.svg", "start_stop.svg", "parameters.svg"}) {
    CHECK(fs::exists(dir / f));
  }
  std::ifstream in(dir / "trials.csv");
  const auto stored = read_trials_csv(in);
  const auto regen = temp_dir("regen");
  emit_report(stored.records, stored.config_hash, regen);
  for (const char* f : {"summary.csv", "timing.svg", "start_stop.svg", "parameters.svg"}) {
    INFO(f);
    CHECK(slurp(dir / f) == slurp(regen / f));
  }
  const auto svg = slurp(dir / "timing.svg");
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(slurp(dir / "summary.csv").find("# config_hash=" + config_hash(c)) == 0);
  CHECK(slurp(dir / "intervals_proposed.csv").find("trial_id,interval_index,epsilon,eta") !=
        std::string::npos);
  fs::remove_all(dir);
  fs::remove_all(regen);
}

TEST_CASE("report errors") {
  CHECK_THROWS(emit_report({}, "h", fs::temp_directory_path()));
  const auto dir = temp_dir("blocked");
  std::ofstream(dir / "file") << "x";
  CHECK_THROWS(write_bench_outputs({synthetic(0, 0.0, Method::Proposed, 10, 1.0)}, "h",
                                   dir / "file" / "sub"));
  fs::remove_all(dir);
}

TEST_CASE("observed truth follows the SNR and the FO gain") {
  const ExperimentConfig c;
  const auto model = build_model(c);
  const auto t = trial_truth(c, model, 5.0);
  CHECK(local_snr_db(t.observed_amplitude, psd_at(model, 0.37), 1800, 4500) == Approx(5.0));
  CHECK(t.input.amplitude * std::abs(fo_gain(model, 0.37)) == Approx(t.observed_amplitude));
  CHECK(t.observed_phase == Approx(wrap_phase(std::arg(fo_gain(model, 0.37)))));
}
