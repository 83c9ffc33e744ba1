#pragma once

// Report emission: trials/intervals/summary CSVs and SVG charts of mean +/- 1
// std against SNR. Charts are rendered from the summary.csv text so they can
// be regenerated from stored files.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "fopelt/harness.hpp"

namespace fopelt {

struct ChartSeries {
  std::string name;
  std::string color;
  std::vector<double> x;
  std::vector<double> mean;
  std::vector<double> std;  // empty: plain line, no band
  bool dashed = false;
};

struct ChartPanel {
  std::string title;
  std::string y_label;
  bool log_y = false;
  std::vector<ChartSeries> series;
};

namespace detail {

inline std::string fmt(double v, const char* spec = "%.6g") {
  char buf[40];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::vector<double> nice_ticks(double lo, double hi, int target = 5) {
  if (!(hi > lo)) return {lo};
  const double raw = (hi - lo) / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    step = m * mag;
    if (step >= raw) break;
  }
  std::vector<double> ticks;
  for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * step; t += step) {
    ticks.push_back(std::abs(t) < 1e-12 * step ? 0.0 : t);
  }
  return ticks;
}

inline void render_panel(std::ostringstream& svg, const ChartPanel& panel, double ox, double oy,
                         double w, double h) {
  const double left = 70, right = 130, top = 28, bottom = 40;
  const double pw = w - left - right, ph = h - top - bottom;
  auto ty = [&](double v) { return panel.log_y ? std::log10(v) : v; };

  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  for (const auto& s : panel.series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.mean[i])) continue;
      const double sd = s.std.empty() || !std::isfinite(s.std[i]) ? 0.0 : s.std[i];
      double lo = s.mean[i] - sd, hi = s.mean[i] + sd;
      if (panel.log_y) {
        if (!(s.mean[i] > 0.0)) continue;
        if (!(lo > 0.0)) lo = s.mean[i];
      }
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, ty(lo));
      ymax = std::max(ymax, ty(hi));
    }
  }
  if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (xmax == xmin) xmin -= 1, xmax += 1;
  if (ymax == ymin) ymin -= 1, ymax += 1;
  const double pad = 0.06 * (ymax - ymin);
  ymin -= pad;
  ymax += pad;

  auto px = [&](double x) { return ox + left + (x - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) { return oy + top + (ymax - ty(y)) / (ymax - ymin) * ph; };
  auto py_raw = [&](double t) { return oy + top + (ymax - t) / (ymax - ymin) * ph; };

  svg << "<text x=\"" << fmt(ox + left + pw / 2) << "\" y=\"" << fmt(oy + 18)
      << "\" text-anchor=\"middle\" font-size=\"14\">" << xml_escape(panel.title) << "</text>\n";
  svg << "<rect x=\"" << fmt(ox + left) << "\" y=\"" << fmt(oy + top) << "\" width=\"" << fmt(pw)
      << "\" height=\"" << fmt(ph) << "\" fill=\"none\" stroke=\"#444\"/>\n";

  for (double t : nice_ticks(xmin, xmax)) {
    svg << "<line x1=\"" << fmt(px(t)) << "\" y1=\"" << fmt(oy + top + ph) << "\" x2=\""
        << fmt(px(t)) << "\" y2=\"" << fmt(oy + top + ph + 5) << "\" stroke=\"#444\"/>\n"
        << "<text x=\"" << fmt(px(t)) << "\" y=\"" << fmt(oy + top + ph + 18)
        << "\" text-anchor=\"middle\" font-size=\"11\">" << fmt(t) << "</text>\n";
  }
  if (panel.log_y) {
    for (double e = std::floor(ymin); e <= std::ceil(ymax); e += 1.0) {
      if (e < ymin || e > ymax) continue;
      svg << "<line x1=\"" << fmt(ox + left - 5) << "\" y1=\"" << fmt(py_raw(e)) << "\" x2=\""
          << fmt(ox + left) << "\" y2=\"" << fmt(py_raw(e)) << "\" stroke=\"#444\"/>\n"
          << "<text x=\"" << fmt(ox + left - 8) << "\" y=\"" << fmt(py_raw(e) + 4)
          << "\" text-anchor=\"end\" font-size=\"11\">" << fmt(std::pow(10.0, e)) << "</text>\n";
    }
  } else {
    for (double t : nice_ticks(ymin, ymax)) {
      svg << "<line x1=\"" << fmt(ox + left - 5) << "\" y1=\"" << fmt(py_raw(t)) << "\" x2=\""
          << fmt(ox + left) << "\" y2=\"" << fmt(py_raw(t)) << "\" stroke=\"#444\"/>\n"
          << "<text x=\"" << fmt(ox + left - 8) << "\" y=\"" << fmt(py_raw(t) + 4)
          << "\" text-anchor=\"end\" font-size=\"11\">" << fmt(t) << "</text>\n";
    }
  }
  svg << "<text x=\"" << fmt(ox + left + pw / 2) << "\" y=\"" << fmt(oy + h - 6)
      << "\" text-anchor=\"middle\" font-size=\"12\">SNR (dB)</text>\n";
  svg << "<text transform=\"translate(" << fmt(ox + 16) << ',' << fmt(oy + top + ph / 2)
      << ") rotate(-90)\" text-anchor=\"middle\" font-size=\"12\">" << xml_escape(panel.y_label)
      << "</text>\n";

  double legend_y = oy + top + 12;
  for (const auto& s : panel.series) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (std::isfinite(s.mean[i]) && (!panel.log_y || s.mean[i] > 0.0)) idx.push_back(i);
    }
    if (!s.std.empty() && idx.size() > 1) {
      std::string pts;
      for (std::size_t i : idx) {
        pts += fmt(px(s.x[i])) + ',' + fmt(py(s.mean[i] + s.std[i])) + ' ';
      }
      for (auto it = idx.rbegin(); it != idx.rend(); ++it) {
        double lo = s.mean[*it] - s.std[*it];
        if (panel.log_y && !(lo > 0.0)) lo = s.mean[*it];
        pts += fmt(px(s.x[*it])) + ',' + fmt(py(lo)) + ' ';
      }
      svg << "<polygon points=\"" << pts << "\" fill=\"" << s.color
          << "\" fill-opacity=\"0.18\" stroke=\"none\"/>\n";
    }
    std::string line;
    for (std::size_t i : idx) line += fmt(px(s.x[i])) + ',' + fmt(py(s.mean[i])) + ' ';
    svg << "<polyline points=\"" << line << "\" fill=\"none\" stroke=\"" << s.color
        << "\" stroke-width=\"2\"" << (s.dashed ? " stroke-dasharray=\"6,4\"" : "") << "/>\n";
    if (!s.dashed) {
      for (std::size_t i : idx) {
        svg << "<circle cx=\"" << fmt(px(s.x[i])) << "\" cy=\"" << fmt(py(s.mean[i]))
            << "\" r=\"3\" fill=\"" << s.color << "\"/>\n";
      }
    }
    const double lx = ox + left + pw + 12;
    svg << "<line x1=\"" << fmt(lx) << "\" y1=\"" << fmt(legend_y) << "\" x2=\"" << fmt(lx + 22)
        << "\" y2=\"" << fmt(legend_y) << "\" stroke=\"" << s.color << "\" stroke-width=\"2\""
        << (s.dashed ? " stroke-dasharray=\"6,4\"" : "") << "/>\n"
        << "<text x=\"" << fmt(lx + 28) << "\" y=\"" << fmt(legend_y + 4) << "\" font-size=\"11\">"
        << xml_escape(s.name) << "</text>\n";
    legend_y += 18;
  }
}

}  // namespace detail

/// Panels stacked vertically in one SVG document.
inline std::string render_chart(const std::string& title, const std::vector<ChartPanel>& panels) {
  const double w = 720, h = 260, head = 30;
  std::ostringstream svg;
  const double total_h = head + h * static_cast<double>(panels.size());
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << detail::fmt(w) << "\" height=\""
      << detail::fmt(total_h) << "\" viewBox=\"0 0 " << detail::fmt(w) << ' '
      << detail::fmt(total_h) << "\" font-family=\"sans-serif\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << detail::fmt(w / 2) << "\" y=\"20\" text-anchor=\"middle\" "
      << "font-size=\"16\" font-weight=\"bold\">" << detail::xml_escape(title) << "</text>\n";
  for (std::size_t i = 0; i < panels.size(); ++i) {
    detail::render_panel(svg, panels[i], 0, head + h * static_cast<double>(i), w, h);
  }
  svg << "</svg>\n";
  return svg.str();
}

namespace detail {

inline ChartSeries method_series(const std::vector<SummaryRow>& rows, Method m,
                                 const std::string& metric, double scale = 1.0) {
  ChartSeries s;
  s.name = to_string(m);
  s.color = m == Method::Proposed ? "#1f77b4" : "#d62728";
  for (const auto& r : rows) {
    if (r.method != m) continue;
    const auto& st = r.stats.at(metric);
    s.x.push_back(r.snr_db);
    s.mean.push_back(st.mean * scale);
    s.std.push_back(st.std * scale);
  }
  return s;
}

inline ChartSeries truth_series(const std::vector<SummaryRow>& rows,
                                const std::function<double(const SummaryRow&)>& get,
                                double scale = 1.0) {
  ChartSeries s;
  s.name = "truth";
  s.color = "#222222";
  s.dashed = true;
  for (const auto& r : rows) {
    if (r.method != Method::Proposed) continue;
    s.x.push_back(r.snr_db);
    s.mean.push_back(get(r) * scale);
  }
  return s;
}

}  // namespace detail

struct ChartFiles {
  std::string timing, start_stop, parameters;
};

inline ChartFiles render_charts(const std::vector<SummaryRow>& rows) {
  using detail::method_series;
  using detail::truth_series;
  ChartFiles out;

  ChartPanel timing{"Localization wall-clock time", "time (ms, log scale)", true, {}};
  timing.series = {method_series(rows, Method::Proposed, "wall_ms"),
                   method_series(rows, Method::Baseline, "wall_ms")};
  out.timing = render_chart("Computation time, mean +/- 1 std", {timing});

  ChartPanel eps{"Start sample", "epsilon (sample)", false, {}};
  eps.series = {method_series(rows, Method::Proposed, "eps_hat"),
                method_series(rows, Method::Baseline, "eps_hat"),
                truth_series(rows, [](const SummaryRow& r) { return r.true_eps; })};
  ChartPanel eta{"End sample", "eta (sample)", false, {}};
  eta.series = {method_series(rows, Method::Proposed, "eta_hat"),
                method_series(rows, Method::Baseline, "eta_hat"),
                truth_series(rows, [](const SummaryRow& r) { return r.true_eta; })};
  out.start_stop = render_chart("FO start and end estimates, mean +/- 1 std", {eps, eta});

  ChartPanel amp{"Amplitude", "A (mHz)", false, {}};
  amp.series = {method_series(rows, Method::Proposed, "amp_hat"),
                method_series(rows, Method::Baseline, "amp_hat"),
                truth_series(rows, [](const SummaryRow& r) { return r.true_amp; })};
  ChartPanel freq{"Frequency", "f (mHz)", false, {}};
  freq.series = {method_series(rows, Method::Proposed, "freq_hat", 1e3),
                 method_series(rows, Method::Baseline, "freq_hat", 1e3),
                 truth_series(rows, [](const SummaryRow& r) { return r.true_freq; }, 1e3)};
  ChartPanel phase{"Phase", "theta (rad)", false, {}};
  phase.series = {method_series(rows, Method::Proposed, "phase_hat"),
                  method_series(rows, Method::Baseline, "phase_hat"),
                  truth_series(rows, [](const SummaryRow& r) { return r.true_phase; })};
  out.parameters =
      render_chart("Refined FO parameters on the localized interval, mean +/- 1 std",
                   {amp, freq, phase});
  return out;
}

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace detail

/// summary.csv and the three charts from a set of trial records.
inline void emit_report(const std::vector<TrialRecord>& records, const std::string& hash,
                        const std::filesystem::path& dir) {
  if (records.empty()) throw std::invalid_argument("emit_report: no trial records");
  std::ostringstream summary;
  write_summary_csv(summary, summarize(records), hash);
  detail::write_text(dir / "summary.csv", summary.str());

  std::istringstream back(summary.str());
  const auto charts = render_charts(read_summary_csv(back));
  detail::write_text(dir / "timing.svg", charts.timing);
  detail::write_text(dir / "start_stop.svg", charts.start_stop);
  detail::write_text(dir / "parameters.svg", charts.parameters);
}

/// All bench outputs: trials.csv, per-method interval files, summary and charts.
inline void write_bench_outputs(const std::vector<TrialRecord>& records, const std::string& hash,
                                const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir.string() + ": " +
                                   ec.message());
  std::ostringstream trials, proposed, baseline;
  write_trials_csv(trials, records, hash);
  write_intervals_csv(proposed, records, Method::Proposed, hash);
  write_intervals_csv(baseline, records, Method::Baseline, hash);
  detail::write_text(dir / "trials.csv", trials.str());
  detail::write_text(dir / "intervals_proposed.csv", proposed.str());
  detail::write_text(dir / "intervals_baseline.csv", baseline.str());
  if (!records.empty()) emit_report(records, hash, dir);
}

}  // namespace fopelt
