#pragma once

// CSV form of signal records and interval lists. A record file starts with
// '#' comment lines (key=value) carrying the sample rate, the seed and the
// model coefficients, followed by a "sample_index,value_mHz" table.

#include <cstdint>
#include <cstdio>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fopelt/fo_localize.hpp"
#include "fopelt/signal_model.hpp"

namespace fopelt {

/// %.17g: enough digits to round-trip any double.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct RecordFile {
  SignalRecord record;
  std::optional<std::uint64_t> seed;
  std::optional<ArmaModel> model;
};

namespace detail {

inline std::string join_doubles(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ' ';
    out += format_double(v[i]);
  }
  return out;
}

inline std::vector<double> parse_doubles(const std::string& text, const std::string& key) {
  std::istringstream in(text);
  std::vector<double> out;
  std::string tok;
  while (in >> tok) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size()) throw std::runtime_error("record header: bad number in '" + key + "'");
    out.push_back(v);
  }
  if (out.empty()) throw std::runtime_error("record header: empty '" + key + "'");
  return out;
}

inline double parse_scalar(const std::string& text, const std::string& key) {
  const auto v = parse_doubles(text, key);
  if (v.size() != 1) throw std::runtime_error("record header: '" + key + "' takes one value");
  return v.front();
}

}  // namespace detail

inline void write_record(std::ostream& out, const RecordFile& file) {
  out << "# sample_rate_hz=" << format_double(file.record.sample_rate_hz) << '\n';
  if (file.seed) out << "# seed=" << *file.seed << '\n';
  if (file.model) {
    out << "# ar=" << detail::join_doubles(file.model->ar) << '\n';
    out << "# ma=" << detail::join_doubles(file.model->ma) << '\n';
    out << "# x=" << detail::join_doubles(file.model->x) << '\n';
    out << "# noise_variance=" << format_double(file.model->noise_variance) << '\n';
  }
  out << "sample_index,value_mHz\n";
  for (std::size_t k = 0; k < file.record.size(); ++k) {
    out << k << ',' << format_double(file.record.samples[k]) << '\n';
  }
}

/// Parses write_record output. The model is returned only when ar, ma, x and
/// noise_variance are all present.
inline RecordFile read_record(std::istream& in) {
  RecordFile file;
  std::optional<double> fs;
  std::optional<std::vector<double>> ar, ma, x;
  std::optional<double> variance;
  std::string line;
  bool in_table = false;
  std::size_t line_no = 0;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!in_table && line.front() == '#') {
      const auto body = line.substr(line.find_first_not_of("# "));
      const auto eq = body.find('=');
      if (eq == std::string::npos) continue;
      const auto key = body.substr(0, eq);
      const auto value = body.substr(eq + 1);
      if (key == "sample_rate_hz") fs = detail::parse_scalar(value, key);
      else if (key == "seed") file.seed = std::stoull(value);
      else if (key == "ar") ar = detail::parse_doubles(value, key);
      else if (key == "ma") ma = detail::parse_doubles(value, key);
      else if (key == "x") x = detail::parse_doubles(value, key);
      else if (key == "noise_variance") variance = detail::parse_scalar(value, key);
      continue;
    }
    if (!in_table) {
      if (line != "sample_index,value_mHz") {
        throw std::runtime_error("record: expected header 'sample_index,value_mHz' at line " +
                                 std::to_string(line_no));
      }
      in_table = true;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw std::runtime_error("record: missing ',' at line " + std::to_string(line_no));
    }
    const auto index = std::stoull(line.substr(0, comma));
    if (index != file.record.samples.size()) {
      throw std::runtime_error("record: sample_index out of sequence at line " +
                               std::to_string(line_no));
    }
    file.record.samples.push_back(detail::parse_scalar(line.substr(comma + 1), "value_mHz"));
  }
  if (!in_table) throw std::runtime_error("record: no data table");
  if (!fs || !(*fs > 0.0)) throw std::runtime_error("record: missing or invalid sample_rate_hz");
  file.record.sample_rate_hz = *fs;
  if (ar && ma && x && variance) {
    ArmaModel m{*ar, *ma, *x, *variance, *fs};
    validate(m);
    file.model = std::move(m);
  }
  return file;
}

inline void write_intervals(std::ostream& out, const FoIntervals& intervals,
                            std::size_t trial_id = 0) {
  out << "trial_id,interval_index,epsilon,eta\n";
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    out << trial_id << ',' << i << ',' << intervals.intervals[i].start << ','
        << intervals.intervals[i].end << '\n';
  }
}

}  // namespace fopelt
