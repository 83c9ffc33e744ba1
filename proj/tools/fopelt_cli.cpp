// fopelt: simulate records, localize forced oscillations, run the benchmark.

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "fopelt/harness.hpp"
#include "fopelt/record_io.hpp"
#include "fopelt/report.hpp"

namespace {

std::atomic<bool> g_stop{false};

extern "C" void on_sigint(int) { g_stop = true; }

// Output stream for a path, or stdout for "" and "-".
struct Sink {
  std::unique_ptr<std::ofstream> file;
  std::ostream* out = &std::cout;

  explicit Sink(const std::string& path) {
    if (path.empty() || path == "-") return;
    file = std::make_unique<std::ofstream>(path, std::ios::binary);
    if (!*file) throw std::runtime_error("cannot write " + path);
    out = file.get();
  }
};

fopelt::RecordFile load_record(const std::string& path) {
  if (path.empty() || path == "-") return fopelt::read_record(std::cin);
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return fopelt::read_record(in);
}

struct SimulateOpts {
  fopelt::ExperimentConfig cfg;
  std::string config_path;
  double snr_db = 0.0;
  std::optional<double> amplitude;
  bool ambient_only = false;
  std::uint64_t seed = 1;
  std::string output;
};

int run_simulate(const SimulateOpts& o) {
  auto cfg = o.config_path.empty() ? o.cfg : fopelt::load_config(o.config_path);
  if (o.ambient_only) {
    cfg.fo.start_sample = 0;
    cfg.fo.end_sample = cfg.n_samples - 1;
  }
  if (o.config_path.empty()) fopelt::validate(cfg);
  const auto model = fopelt::build_model(cfg);
  fopelt::RecordFile file;
  file.seed = o.seed;
  file.model = model;
  if (o.ambient_only) {
    file.record = fopelt::simulate_ambient(model, cfg.n_samples, o.seed);
  } else {
    auto truth = fopelt::trial_truth(cfg, model, o.snr_db);
    if (o.amplitude) {
      truth.input.amplitude = *o.amplitude / std::abs(fopelt::fo_gain(model, cfg.fo.freq_hz));
    }
    file.record = fopelt::simulate_armax(model, truth.input, cfg.n_samples, o.seed);
  }
  Sink sink(o.output);
  fopelt::write_record(*sink.out, file);
  return 0;
}

struct LocalizeOpts {
  std::string input, output;
  std::string beta_strategy = "mean";
  double snr_min_db = -15.0;
  double a_max_mhz = 10.0;
  bool baseline = false;
  bool skip_detect = false;
  fopelt::BaselineConfig base;
};

int run_localize(const LocalizeOpts& o) {
  const auto file = load_record(o.input);
  const auto& y = file.record;
  const bool detected = o.skip_detect || fopelt::detect_fo(y);
  fopelt::FoIntervals intervals;
  if (!detected) {
    std::cerr << "no FO detected; interval list is empty\n";
  } else if (o.baseline) {
    intervals = fopelt::baseline_localize_gm22(y, o.base).intervals;
  } else {
    fopelt::LocalizerConfig lc;
    lc.beta_strategy = fopelt::parse_beta_strategy(o.beta_strategy);
    lc.snr_min_db = o.snr_min_db;
    lc.a_max_mhz = o.a_max_mhz;
    lc.ambient_model = file.model;
    const auto res = fopelt::localize(y, lc);
    std::cerr << "beta=" << fopelt::format_double(res.beta) << " changes=" << res.num_changes
              << " min_segment=" << res.min_segment
              << (res.used_fallback ? " fallback=yes" : "") << '\n';
    intervals = res.intervals;
  }
  Sink sink(o.output);
  fopelt::write_intervals(*sink.out, intervals);
  return 0;
}

struct BenchOpts {
  std::string config_path;
  std::optional<std::size_t> workers;
  std::string output_dir;
};

int run_bench(const BenchOpts& o) {
  auto cfg = fopelt::load_config(o.config_path);
  if (!o.output_dir.empty()) cfg.output_dir = o.output_dir;
  const std::size_t workers = fopelt::resolve_workers(o.workers.value_or(cfg.workers));
  const auto hash = fopelt::config_hash(cfg);
  std::cerr << "bench: " << cfg.trials * cfg.snr_db.size() << " trials, " << workers
            << " worker(s), config " << hash << '\n';

  std::signal(SIGINT, on_sigint);
  const auto result = fopelt::run_monte_carlo(cfg, &g_stop, workers);
  std::signal(SIGINT, SIG_DFL);

  fopelt::write_bench_outputs(result.records, hash, cfg.output_dir);
  if (result.interrupted) {
    std::cerr << "interrupted: wrote " << result.records.size() / 2 << " of "
              << result.trials_planned << " trials to " << cfg.output_dir << '\n';
    return 130;
  }
  std::cerr << "wrote " << cfg.output_dir << '\n';
  return 0;
}

struct ProfileOpts {
  std::string input, output;
  bool raw = false;
};

int run_profile(const ProfileOpts& o) {
  const auto file = load_record(o.input);
  fopelt::SignalRecord target = file.record;
  if (!o.raw) target = fopelt::build_ycos(file.record, fopelt::estimate_fo(file.record, fopelt::kMonitoredBand));
  const auto p = fopelt::penalty_profile(target.samples);
  Sink sink(o.output);
  auto& out = *sink.out;
  out << "# signal=" << (o.raw ? "record" : "ycos") << '\n';
  out << "# beta_max=" << fopelt::format_double(p.beta_max) << '\n';
  out << "# beta_mean=" << fopelt::format_double(p.beta_mean) << '\n';
  out << "tau1,beta\n";
  for (std::size_t i = 0; i < p.beta_of_tau1.size(); ++i) {
    out << i + 1 << ',' << fopelt::format_double(p.beta_of_tau1[i]) << '\n';
  }
  return 0;
}

int run_report(const std::string& trials_path, const std::string& dir) {
  std::ifstream in(trials_path);
  if (!in) throw std::runtime_error("cannot open " + trials_path);
  const auto file = fopelt::read_trials_csv(in);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir + ": " + ec.message());
  fopelt::emit_report(file.records, file.config_hash, dir);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Forced-oscillation start/stop localization with single-call PELT"};
  app.require_subcommand(1);

  SimulateOpts sim;
  auto* simulate = app.add_subcommand("simulate", "Simulate one record and write it as CSV");
  simulate->add_option("--config", sim.config_path, "Experiment config JSON (model, N, FO truth)");
  simulate->add_option("--snr-db", sim.snr_db, "Local SNR of the FO")->capture_default_str();
  simulate->add_option("--amplitude", sim.amplitude, "Observed FO amplitude in mHz (overrides --snr-db)");
  simulate->add_flag("--ambient-only", sim.ambient_only, "No FO");
  simulate->add_option("--seed", sim.seed)->capture_default_str();
  simulate->add_option("--n", sim.cfg.n_samples, "Record length")->capture_default_str();
  simulate->add_option("--fo-start", sim.cfg.fo.start_sample)->capture_default_str();
  simulate->add_option("--fo-end", sim.cfg.fo.end_sample)->capture_default_str();
  simulate->add_option("--fo-freq", sim.cfg.fo.freq_hz, "Hz")->capture_default_str();
  simulate->add_option("--fo-phase", sim.cfg.fo.phase_rad, "rad, input side")->capture_default_str();
  simulate->add_option("--mode-freq", sim.cfg.model.mode_freq_hz, "Hz")->capture_default_str();
  simulate->add_option("--damping", sim.cfg.model.damping_ratio)->capture_default_str();
  simulate->add_option("--noise-variance", sim.cfg.model.noise_variance)->capture_default_str();
  simulate->add_option("--fs", sim.cfg.model.sample_rate_hz, "Samples per second")->capture_default_str();
  simulate->add_option("-o,--output", sim.output, "Output CSV (default stdout)");

  LocalizeOpts loc;
  auto* localize = app.add_subcommand("localize", "Record CSV in, intervals CSV out");
  localize->add_option("-i,--input", loc.input, "Record CSV (default stdin)");
  localize->add_option("-o,--output", loc.output, "Intervals CSV (default stdout)");
  localize->add_option("--beta-strategy", loc.beta_strategy, "mean or half-max")
      ->check(CLI::IsMember({"mean", "half-max"}))
      ->capture_default_str();
  localize->add_option("--snr-min-db", loc.snr_min_db)->capture_default_str();
  localize->add_option("--a-max-mhz", loc.a_max_mhz)->check(CLI::PositiveNumber)->capture_default_str();
  localize->add_flag("--baseline", loc.baseline, "Use the max-changes baseline instead");
  localize->add_option("--n-max-cp", loc.base.n_max_cp, "Baseline change cap")->capture_default_str();
  localize->add_option("--n-min-sl", loc.base.n_min_sl, "Baseline minimum segment")->capture_default_str();
  localize->add_option("--alpha", loc.base.alpha, "Baseline on/off level")->capture_default_str();
  localize->add_flag("--skip-detect", loc.skip_detect, "Localize even if the detector is silent");

  BenchOpts bench;
  auto* bench_cmd = app.add_subcommand("bench", "Monte Carlo benchmark from a config JSON");
  bench_cmd->add_option("-c,--config", bench.config_path, "Experiment config JSON")->required();
  bench_cmd->add_option("-j,--workers", bench.workers, "Worker threads (0: all cores)");
  bench_cmd->add_option("-o,--output-dir", bench.output_dir, "Overrides output_dir");

  ProfileOpts prof;
  auto* profile = app.add_subcommand("profile-beta", "Penalty profile beta(tau1) as CSV");
  profile->add_option("-i,--input", prof.input, "Record CSV (default stdin)");
  profile->add_option("-o,--output", prof.output, "Profile CSV (default stdout)");
  profile->add_flag("--raw", prof.raw, "Profile the record itself instead of its y_cos");

  std::string trials_path, report_dir;
  auto* report = app.add_subcommand("report", "Rebuild summary.csv and charts from trials.csv");
  report->add_option("-t,--trials", trials_path, "trials.csv")->required();
  report->add_option("-o,--output-dir", report_dir, "Directory for summary and charts")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*simulate) return run_simulate(sim);
    if (*localize) return run_localize(loc);
    if (*bench_cmd) return run_bench(bench);
    if (*profile) return run_profile(prof);
    if (*report) return run_report(trials_path, report_dir);
  } catch (const std::exception& e) {
    std::cerr << "fopelt: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
