#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ppcd/calibration.hpp"
#include "ppcd/embedding.hpp"
#include "ppcd/experiment.hpp"

namespace ppcd {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

inline std::vector<std::string> split_fields(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_double(const std::string& s, const std::string& what) {
  const std::string t = trim(s);
  double v = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc{} || res.ptr != t.data() + t.size())
    throw ConfigError(what + ": expected a number, got '" + s + "'");
  return v;
}

inline std::int64_t parse_int(const std::string& s, const std::string& what) {
  const std::string t = trim(s);
  std::int64_t v = 0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc{} || res.ptr != t.data() + t.size())
    throw ConfigError(what + ": expected an integer, got '" + s + "'");
  return v;
}

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Event CSV: header "window,x1,...,xd", one row per point. A row with the
// window id and all coordinate fields empty marks an explicitly empty window;
// ids absent from the contiguous [min,max] id range are empty windows.
// ---------------------------------------------------------------------------

inline void write_event_csv(std::ostream& os, const std::vector<PointWindow>& windows, int dim) {
  os << "window";
  for (int a = 1; a <= dim; ++a) os << ",x" << a;
  os << "\n";
  for (const PointWindow& w : windows) {
    if (w.count() == 0) {
      os << w.index;
      for (int a = 0; a < dim; ++a) os << ",";
      os << "\n";
      continue;
    }
    for (int i = 0; i < w.count(); ++i) {
      os << w.index;
      for (int a = 0; a < dim; ++a) os << "," << format_double(w.points(i, a));
      os << "\n";
    }
  }
}

inline void write_event_csv(const std::string& path, const std::vector<PointWindow>& windows,
                            int dim) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  write_event_csv(os, windows, dim);
}

struct EventStream {
  std::vector<PointWindow> windows;  // contiguous ascending ids
  int dim = 0;
  bool resorted = false;  // ids arrived out of order and were re-sorted
};

inline EventStream read_event_csv(std::istream& is, const std::string& context = "<stream>") {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error(context + ": empty event file");
  const std::vector<std::string> header = split_fields(trim(line), ',');
  if (header.size() < 2 || trim(header[0]) != "window")
    throw std::runtime_error(context + ": expected header 'window,x1,...,xd'");
  const int dim = static_cast<int>(header.size()) - 1;
  std::map<std::int64_t, std::vector<std::vector<double>>> rows;
  std::int64_t line_no = 1;
  std::int64_t prev_id = std::numeric_limits<std::int64_t>::min();
  bool resorted = false;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty()) continue;
    const std::vector<std::string> fields = split_fields(t, ',');
    if (static_cast<int>(fields.size()) != dim + 1)
      throw std::runtime_error(context + ":" + std::to_string(line_no) + ": expected " +
                               std::to_string(dim + 1) + " fields, got " +
                               std::to_string(fields.size()));
    const std::int64_t id =
        parse_int(fields[0], context + ":" + std::to_string(line_no) + ": window id");
    if (id < prev_id) resorted = true;
    prev_id = id;
    bool all_empty = true;
    for (int a = 1; a <= dim; ++a)
      if (!trim(fields[a]).empty()) all_empty = false;
    auto& bucket = rows[id];
    if (all_empty) continue;  // explicit empty-window marker
    std::vector<double> pt(dim);
    for (int a = 1; a <= dim; ++a)
      pt[a - 1] =
          parse_double(fields[a], context + ":" + std::to_string(line_no) + ": coordinate");
    bucket.push_back(std::move(pt));
  }
  EventStream out;
  out.dim = dim;
  out.resorted = resorted;
  if (rows.empty()) return out;
  const std::int64_t lo = rows.begin()->first;
  const std::int64_t hi = rows.rbegin()->first;
  for (std::int64_t id = lo; id <= hi; ++id) {
    PointWindow w;
    w.index = id;
    auto it = rows.find(id);
    const std::size_t n = it == rows.end() ? 0 : it->second.size();
    w.points.resize(static_cast<Eigen::Index>(n), dim);
    if (it != rows.end())
      for (std::size_t i = 0; i < n; ++i)
        for (int a = 0; a < dim; ++a) w.points(static_cast<Eigen::Index>(i), a) = it->second[i][a];
    out.windows.push_back(std::move(w));
  }
  return out;
}

inline EventStream read_event_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open: " + path);
  return read_event_csv(is, path);
}

// Ingestion: group rows by window id, split off the leading training
// fraction, freeze per-coordinate ranges from the training windows, and
// rescale both segments into the unit cube. assume_unit_domain skips the
// range estimation and uses the identity map with clamping.
struct IngestResult {
  std::vector<PointWindow> training;
  std::vector<PointWindow> stream;
  std::vector<CoordinateRange> ranges;
  bool resorted = false;
};

inline IngestResult ingest_events(const std::string& path, double training_fraction,
                                  bool assume_unit_domain = false) {
  if (!(training_fraction > 0.0 && training_fraction < 1.0))
    throw std::invalid_argument("ingest_events: training fraction must be in (0,1)");
  EventStream events = read_event_csv(path);
  const std::int64_t total = static_cast<std::int64_t>(events.windows.size());
  if (total < 2) throw std::runtime_error(path + ": need at least 2 windows");
  std::int64_t n_train = static_cast<std::int64_t>(training_fraction * total);
  n_train = std::clamp<std::int64_t>(n_train, 1, total - 1);
  IngestResult out;
  out.resorted = events.resorted;
  std::vector<PointWindow> training(events.windows.begin(), events.windows.begin() + n_train);
  if (assume_unit_domain)
    out.ranges.assign(events.dim, CoordinateRange{0.0, 1.0});
  else
    out.ranges = training_ranges(training);
  for (std::int64_t i = 0; i < total; ++i) {
    PointWindow w = std::move(events.windows[i]);
    if (w.count() > 0) w.points = rescale_events(w.points, out.ranges);
    (i < n_train ? out.training : out.stream).push_back(std::move(w));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Key-value config files: "[section]" headers, "key = value" entries, '#'
// comments. A top-level "version = 1" entry is required.
// ---------------------------------------------------------------------------

class Config {
 public:
  static constexpr int kVersion = 1;

  static Config parse(std::istream& is, const std::string& context) {
    Config cfg;
    cfg.context_ = context;
    std::string line;
    std::string section;
    std::int64_t line_no = 0;
    while (std::getline(is, line)) {
      ++line_no;
      std::string t = trim(line);
      const auto hash = t.find('#');
      if (hash != std::string::npos) t = trim(t.substr(0, hash));
      if (t.empty()) continue;
      if (t.front() == '[') {
        if (t.back() != ']')
          throw ConfigError(context + ":" + std::to_string(line_no) + ": unterminated section");
        section = trim(t.substr(1, t.size() - 2));
        if (section.empty())
          throw ConfigError(context + ":" + std::to_string(line_no) + ": empty section name");
        cfg.sections_[section];
        continue;
      }
      const auto eq = t.find('=');
      if (eq == std::string::npos)
        throw ConfigError(context + ":" + std::to_string(line_no) +
                          ": expected 'key = value', got '" + t + "'");
      const std::string key = trim(t.substr(0, eq));
      const std::string value = trim(t.substr(eq + 1));
      if (key.empty())
        throw ConfigError(context + ":" + std::to_string(line_no) + ": empty key");
      cfg.sections_[section][key] = value;
    }
    const std::optional<std::string> version = cfg.find("", "version");
    if (!version) throw ConfigError(context + ": missing required top-level 'version'");
    if (parse_int(*version, context + ": version") != kVersion)
      throw ConfigError(context + ": unsupported config version '" + *version +
                        "' (expected " + std::to_string(kVersion) + ")");
    return cfg;
  }

  static Config parse_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config: " + path);
    return parse(is, path);
  }

  bool has_section(const std::string& section) const { return sections_.count(section) > 0; }

  std::optional<std::string> find(const std::string& section, const std::string& key) const {
    auto sit = sections_.find(section);
    if (sit == sections_.end()) return std::nullopt;
    auto kit = sit->second.find(key);
    if (kit == sit->second.end()) return std::nullopt;
    return kit->second;
  }

  std::string require(const std::string& section, const std::string& key) const {
    auto v = find(section, key);
    if (!v)
      throw ConfigError(context_ + ": missing required key '" + key + "' in section [" + section +
                        "]");
    return *v;
  }

  std::string get(const std::string& section, const std::string& key,
                  const std::string& fallback) const {
    return find(section, key).value_or(fallback);
  }

  double get_double(const std::string& section, const std::string& key, double fallback) const {
    auto v = find(section, key);
    return v ? parse_double(*v, context_ + ": [" + section + "] " + key) : fallback;
  }

  std::int64_t get_int(const std::string& section, const std::string& key,
                       std::int64_t fallback) const {
    auto v = find(section, key);
    return v ? parse_int(*v, context_ + ": [" + section + "] " + key) : fallback;
  }

  const std::string& context() const { return context_; }

 private:
  std::string context_;
  std::map<std::string, std::map<std::string, std::string>> sections_;
};

// ---------------------------------------------------------------------------
// Calibration report document
// ---------------------------------------------------------------------------

inline std::string join_coords(const std::vector<int>& coords) {
  std::string out;
  for (std::size_t i = 0; i < coords.size(); ++i) {
    if (i) out.push_back(',');
    out += std::to_string(coords[i] + 1);  // 1-based on disk
  }
  return out;
}

inline std::vector<int> parse_coords(const std::string& s, const std::string& what) {
  std::vector<int> out;
  for (const std::string& f : split_fields(s, ','))
    out.push_back(static_cast<int>(parse_int(f, what)) - 1);
  return out;
}

inline void write_calibration(std::ostream& os, const CalibrationReport& r) {
  os << "version = 1\n";
  os << "kind = matrix\n";
  os << "gamma = " << format_double(r.gamma) << "\n";
  os << "window = " << r.window << "\n";
  os << "n_train = " << r.n_train << "\n";
  os << "dim = " << r.dim << "\n";
  os << "split_y = " << join_coords(r.split.group_y) << "\n";
  os << "split_z = " << join_coords(r.split.group_z) << "\n";
  os << "rank = " << r.rank << "\n";
  os << "basis_size = " << r.basis_size << "\n";
  os << "threshold_const = " << format_double(r.threshold_const) << "\n";
  os << "alpha = " << format_double(r.alpha) << "\n";
  os << "permutations = " << r.permutations << "\n";
  os << "seed = " << r.seed << "\n";
}

inline void write_calibration(const std::string& path, const CalibrationReport& r) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  write_calibration(os, r);
}

inline void write_calibration_1d(std::ostream& os, const CalibrationReport1d& r) {
  os << "version = 1\n";
  os << "kind = matrix_1d\n";
  os << "gamma = " << format_double(r.gamma) << "\n";
  os << "window = " << r.window << "\n";
  os << "n_train = " << r.n_train << "\n";
  os << "basis_size = " << r.basis_size << "\n";
  os << "threshold_const = " << format_double(r.threshold_const) << "\n";
  os << "alpha = " << format_double(r.alpha) << "\n";
  os << "permutations = " << r.permutations << "\n";
  os << "seed = " << r.seed << "\n";
}

inline void write_calibration_1d(const std::string& path, const CalibrationReport1d& r) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  write_calibration_1d(os, r);
}

inline std::string read_calibration_kind(const std::string& path) {
  const Config cfg = Config::parse_file(path);
  return cfg.require("", "kind");
}

inline CalibrationReport read_calibration(const std::string& path) {
  const Config cfg = Config::parse_file(path);
  if (cfg.require("", "kind") != "matrix")
    throw ConfigError(path + ": expected kind = matrix");
  CalibrationReport r;
  r.gamma = parse_double(cfg.require("", "gamma"), path);
  r.window = parse_int(cfg.require("", "window"), path);
  r.n_train = parse_int(cfg.require("", "n_train"), path);
  r.dim = static_cast<int>(parse_int(cfg.require("", "dim"), path));
  r.split.group_y = parse_coords(cfg.require("", "split_y"), path);
  r.split.group_z = parse_coords(cfg.require("", "split_z"), path);
  r.split.validate(r.dim);
  r.rank = static_cast<int>(parse_int(cfg.require("", "rank"), path));
  r.basis_size = static_cast<int>(parse_int(cfg.require("", "basis_size"), path));
  r.threshold_const = parse_double(cfg.require("", "threshold_const"), path);
  r.alpha = parse_double(cfg.require("", "alpha"), path);
  r.permutations = static_cast<int>(parse_int(cfg.require("", "permutations"), path));
  r.seed = static_cast<std::uint64_t>(parse_int(cfg.require("", "seed"), path));
  return r;
}

inline CalibrationReport1d read_calibration_1d(const std::string& path) {
  const Config cfg = Config::parse_file(path);
  if (cfg.require("", "kind") != "matrix_1d")
    throw ConfigError(path + ": expected kind = matrix_1d");
  CalibrationReport1d r;
  r.gamma = parse_double(cfg.require("", "gamma"), path);
  r.window = parse_int(cfg.require("", "window"), path);
  r.n_train = parse_int(cfg.require("", "n_train"), path);
  r.basis_size = static_cast<int>(parse_int(cfg.require("", "basis_size"), path));
  r.threshold_const = parse_double(cfg.require("", "threshold_const"), path);
  r.alpha = parse_double(cfg.require("", "alpha"), path);
  r.permutations = static_cast<int>(parse_int(cfg.require("", "permutations"), path));
  r.seed = static_cast<std::uint64_t>(parse_int(cfg.require("", "seed"), path));
  return r;
}

// ---------------------------------------------------------------------------
// Report and sweep CSVs
// ---------------------------------------------------------------------------

inline void write_report_csv(std::ostream& os, const ExperimentReport& report) {
  os << "detector,metric,value\n";
  for (const DetectorSummary& d : report.detectors) {
    os << d.name << ",false_alarm_rate," << format_double(d.false_alarm_rate) << "\n";
    os << d.name << ",correct_detection_rate," << format_double(d.correct_detection_rate) << "\n";
    os << d.name << ",no_alarm_rate," << format_double(d.no_alarm_rate) << "\n";
    os << d.name << ",add_mean," << format_double(d.add_mean) << "\n";
    os << d.name << ",add_sd," << format_double(d.add_sd) << "\n";
    for (std::size_t i = 0; i < d.alarm_times.size(); ++i)
      os << d.name << ",alarm_time_" << i << "," << d.alarm_times[i] << "\n";
  }
}

inline void write_report_csv(const std::string& path, const ExperimentReport& report) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  write_report_csv(os, report);
}

inline ExperimentReport read_report_csv(std::istream& is, const std::string& context) {
  std::string line;
  if (!std::getline(is, line) || trim(line) != "detector,metric,value")
    throw std::runtime_error(context + ": expected header 'detector,metric,value'");
  ExperimentReport report;
  std::map<std::string, std::size_t> by_name;
  while (std::getline(is, line)) {
    const std::string t = trim(line);
    if (t.empty()) continue;
    const std::vector<std::string> fields = split_fields(t, ',');
    if (fields.size() != 3) throw std::runtime_error(context + ": malformed row '" + t + "'");
    const std::string& name = fields[0];
    if (!by_name.count(name)) {
      by_name[name] = report.detectors.size();
      report.detectors.push_back(DetectorSummary{});
      report.detectors.back().name = name;
    }
    DetectorSummary& d = report.detectors[by_name[name]];
    const std::string& metric = fields[1];
    if (metric == "false_alarm_rate")
      d.false_alarm_rate = parse_double(fields[2], context);
    else if (metric == "correct_detection_rate")
      d.correct_detection_rate = parse_double(fields[2], context);
    else if (metric == "no_alarm_rate")
      d.no_alarm_rate = parse_double(fields[2], context);
    else if (metric == "add_mean")
      d.add_mean = parse_double(fields[2], context);
    else if (metric == "add_sd")
      d.add_sd = parse_double(fields[2], context);
    else if (metric.rfind("alarm_time_", 0) == 0)
      d.alarm_times.push_back(parse_int(fields[2], context));
    else
      throw std::runtime_error(context + ": unknown metric '" + metric + "'");
  }
  return report;
}

inline ExperimentReport read_report_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open: " + path);
  return read_report_csv(is, path);
}

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "detector,multiplier,fap,add\n";
  for (const SweepRow& r : rows)
    os << r.detector << "," << format_double(r.multiplier) << "," << format_double(r.fap) << ","
       << format_double(r.add) << "\n";
}

inline void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  write_sweep_csv(os, rows);
}

// Table-style human-readable summary: integer percentages, delays to two
// decimals.
inline std::string format_summary(const ExperimentReport& report) {
  std::ostringstream os;
  char buf[128];
  os << "detector          FalseAlarm  Correct  NoAlarm  ADD (SD)\n";
  for (const DetectorSummary& d : report.detectors) {
    std::snprintf(buf, sizeof(buf), "%-16s  %9.0f%%  %6.0f%%  %6.0f%%  %.2f (%.2f)\n",
                  d.name.c_str(), 100.0 * d.false_alarm_rate, 100.0 * d.correct_detection_rate,
                  100.0 * d.no_alarm_rate, d.add_mean, d.add_sd);
    os << buf;
  }
  return os.str();
}

}  // namespace ppcd
