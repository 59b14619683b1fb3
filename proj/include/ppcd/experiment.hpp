#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "ppcd/baselines.hpp"
#include "ppcd/calibration.hpp"
#include "ppcd/detector.hpp"
#include "ppcd/ppp_sim.hpp"
#include "ppcd/rng.hpp"

namespace ppcd {

struct DetectorSpec {
  enum class Kind { matrix, matrix_1d, mmd, kie };
  Kind kind = Kind::matrix;
  double gamma = 2.0;
  std::int64_t window = 100;
  int permutations = 500;
  double bandwidth = 0.0;  // mmd; <= 0 resolves the median heuristic
  int grid_res = 16;       // kie

  std::string name() const {
    switch (kind) {
      case Kind::matrix: return "matrix";
      case Kind::matrix_1d: return "matrix_1d";
      case Kind::mmd: return "mmd";
      case Kind::kie: return "kie";
    }
    return "?";
  }
};

struct ExperimentSpec {
  Scenario scenario;
  std::vector<DetectorSpec> detectors;
  int replications = 1;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  int workers = 1;
  std::string output_path;

  void validate() const {
    scenario.validate();
    if (replications < 1) throw std::invalid_argument("experiment: replications must be >= 1");
    if (!(alpha > 0.0 && alpha < 1.0))
      throw std::invalid_argument("experiment: alpha must be in (0,1)");
    if (detectors.empty()) throw std::invalid_argument("experiment: no detectors configured");
  }
};

struct DetectorSummary {
  std::string name;
  double false_alarm_rate = 0.0;
  double correct_detection_rate = 0.0;
  double no_alarm_rate = 0.0;
  double add_mean = 0.0;  // conditional on correct detection; NaN if none
  double add_sd = 0.0;
  std::vector<std::int64_t> alarm_times;  // per replication; -1 = no alarm
};

struct ExperimentReport {
  std::vector<DetectorSummary> detectors;
};

struct SweepRow {
  std::string detector;
  double multiplier = 0.0;
  double fap = 0.0;
  double add = 0.0;
};

namespace detail {

// Per-step score/threshold ratios over the post-training stream; a single
// pass serves every threshold multiplier.
inline std::vector<double> replication_ratios(const std::vector<PointWindow>& stream,
                                              std::int64_t n_train, const DetectorSpec& spec,
                                              double alpha, std::uint64_t calib_seed) {
  const std::vector<PointWindow> training(stream.begin(), stream.begin() + n_train);
  std::vector<double> ratios;
  ratios.reserve(stream.size() - n_train);
  switch (spec.kind) {
    case DetectorSpec::Kind::matrix: {
      const CalibrationReport cal =
          calibrate(training, spec.gamma, spec.window, alpha, spec.permutations, calib_seed);
      MatrixDetector det(DetectorConfig::make(cal.gamma, cal.split, cal.rank, cal.window,
                                              std::max(cal.threshold_const, 1e-300), cal.n_train));
      det.init(training);
      for (std::size_t i = n_train; i < stream.size(); ++i)
        ratios.push_back(det.probe_step(stream[i]));
      break;
    }
    case DetectorSpec::Kind::matrix_1d: {
      const CalibrationReport1d cal =
          calibrate_1d(training, spec.gamma, spec.window, alpha, spec.permutations, calib_seed);
      Detector1d det(DetectorConfig1d::make(cal.gamma, cal.window,
                                            std::max(cal.threshold_const, 1e-300), cal.n_train));
      det.init(training);
      for (std::size_t i = n_train; i < stream.size(); ++i)
        ratios.push_back(det.probe_step(stream[i]));
      break;
    }
    case DetectorSpec::Kind::mmd: {
      BaselineConfig cfg;
      cfg.kind = BaselineConfig::Kind::mmd;
      cfg.window = spec.window;
      cfg.bandwidth = spec.bandwidth;
      cfg.seed = calib_seed;
      calibrate_baseline(training, cfg, alpha, spec.permutations, calib_seed);
      MmdDetector det(cfg);
      det.init(training);
      for (std::size_t i = n_train; i < stream.size(); ++i)
        ratios.push_back(det.probe_step(stream[i]));
      break;
    }
    case DetectorSpec::Kind::kie: {
      BaselineConfig cfg;
      cfg.kind = BaselineConfig::Kind::kie;
      cfg.window = spec.window;
      cfg.grid_res = spec.grid_res;
      cfg.seed = calib_seed;
      calibrate_baseline(training, cfg, alpha, spec.permutations, calib_seed);
      KieDetector det(cfg);
      det.init(training);
      for (std::size_t i = n_train; i < stream.size(); ++i)
        ratios.push_back(det.probe_step(stream[i]));
      break;
    }
  }
  return ratios;
}

// First window index whose ratio exceeds the multiplier, or -1.
inline std::int64_t alarm_time(const std::vector<double>& ratios, std::int64_t n_train,
                               double multiplier) {
  for (std::size_t i = 0; i < ratios.size(); ++i)
    if (ratios[i] > multiplier) return n_train + static_cast<std::int64_t>(i) + 1;
  return -1;
}

// ratios[detector][replication][step]
inline std::vector<std::vector<std::vector<double>>> run_all_ratios(const ExperimentSpec& spec) {
  spec.validate();
  const int R = spec.replications;
  std::vector<std::vector<std::vector<double>>> ratios(
      spec.detectors.size(), std::vector<std::vector<double>>(R));
  std::atomic<int> next{0};
  const auto work = [&]() {
    for (int rep = next.fetch_add(1); rep < R; rep = next.fetch_add(1)) {
      Scenario scen = spec.scenario;
      scen.seed = split_seed(spec.seed, 0x5245504cULL + static_cast<std::uint64_t>(rep));
      const std::vector<PointWindow> stream = generate_stream(scen);
      for (std::size_t d = 0; d < spec.detectors.size(); ++d) {
        const std::uint64_t calib_seed =
            split_seed(scen.seed, 0xCA11B000ULL + static_cast<std::uint64_t>(d));
        ratios[d][rep] = replication_ratios(stream, scen.n_train, spec.detectors[d], spec.alpha,
                                            calib_seed);
      }
    }
  };
  const int workers = std::max(1, spec.workers);
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
  }
  return ratios;
}

}  // namespace detail

// Outcome classification per replication: false alarm at or before the change
// point (or any alarm when none is planted), correct detection strictly after
// it, no alarm otherwise. Delay statistics are conditional on correct
// detection.
inline ExperimentReport run_experiment(const ExperimentSpec& spec) {
  const auto ratios = detail::run_all_ratios(spec);
  const std::int64_t change = spec.scenario.change_at.value_or(-1);
  ExperimentReport report;
  for (std::size_t d = 0; d < spec.detectors.size(); ++d) {
    DetectorSummary out;
    out.name = spec.detectors[d].name();
    int fa = 0, correct = 0, none = 0;
    std::vector<double> delays;
    for (int rep = 0; rep < spec.replications; ++rep) {
      const std::int64_t t = detail::alarm_time(ratios[d][rep], spec.scenario.n_train, 1.0);
      out.alarm_times.push_back(t);
      if (t < 0) {
        ++none;
      } else if (change < 0 || t <= change) {
        ++fa;
      } else {
        ++correct;
        delays.push_back(static_cast<double>(t - change));
      }
    }
    const double R = static_cast<double>(spec.replications);
    out.false_alarm_rate = fa / R;
    out.correct_detection_rate = correct / R;
    out.no_alarm_rate = none / R;
    if (!delays.empty()) {
      double mean = 0.0;
      for (double v : delays) mean += v;
      mean /= static_cast<double>(delays.size());
      double var = 0.0;
      for (double v : delays) var += (v - mean) * (v - mean);
      var = delays.size() > 1 ? var / static_cast<double>(delays.size() - 1) : 0.0;
      out.add_mean = mean;
      out.add_sd = std::sqrt(var);
    } else {
      out.add_mean = std::numeric_limits<double>::quiet_NaN();
      out.add_sd = std::numeric_limits<double>::quiet_NaN();
    }
    report.detectors.push_back(std::move(out));
  }
  return report;
}

// Threshold sweep, reusing one generated stream and one calibration per
// replication. For each multiplier: FAP is the fraction of replications
// alarming at or before the change point; the per-replication delay is
// alarm - change clamped to [0, horizon], with the no-alarm convention
// delay = n_total - change.
inline std::vector<SweepRow> sweep_thresholds(const ExperimentSpec& spec,
                                              const std::vector<double>& multipliers) {
  if (!spec.scenario.change_at)
    throw std::invalid_argument("sweep: scenario must plant a change point");
  if (!std::is_sorted(multipliers.begin(), multipliers.end()))
    throw std::invalid_argument("sweep: multipliers must be sorted ascending");
  const auto ratios = detail::run_all_ratios(spec);
  const std::int64_t change = *spec.scenario.change_at;
  const double horizon = static_cast<double>(spec.scenario.n_total - change);
  std::vector<SweepRow> rows;
  for (std::size_t d = 0; d < spec.detectors.size(); ++d) {
    for (double mult : multipliers) {
      int fa = 0;
      double delay_sum = 0.0;
      for (int rep = 0; rep < spec.replications; ++rep) {
        const std::int64_t t = detail::alarm_time(ratios[d][rep], spec.scenario.n_train, mult);
        if (t >= 0 && t <= change) ++fa;
        double delay = horizon;  // no alarm by the end of the horizon
        if (t >= 0) delay = std::clamp(static_cast<double>(t - change), 0.0, horizon);
        delay_sum += delay;
      }
      SweepRow row;
      row.detector = spec.detectors[d].name();
      row.multiplier = mult;
      row.fap = fa / static_cast<double>(spec.replications);
      row.add = delay_sum / static_cast<double>(spec.replications);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

// 15 threshold multipliers spanning low to high sensitivity.
inline std::vector<double> default_sweep_multipliers() {
  std::vector<double> out;
  const double lo = 0.25, hi = 4.0;
  for (int i = 0; i < 15; ++i) out.push_back(lo * std::pow(hi / lo, i / 14.0));
  return out;
}

}  // namespace ppcd
