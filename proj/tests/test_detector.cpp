#include "ppcd/detector.hpp"

#include <cmath>
#include <optional>
#include <vector>

#include <gtest/gtest.h>

#include "ppcd/embedding.hpp"
#include "ppcd/ppp_sim.hpp"
#include "ppcd/rng.hpp"

using namespace ppcd;

namespace {

PointWindow empty_window(std::int64_t index, int dim) {
  PointWindow w;
  w.index = index;
  w.points.resize(0, dim);
  return w;
}

PointWindow center_window(std::int64_t index, int dim, int copies = 1) {
  PointWindow w;
  w.index = index;
  w.points = Eigen::MatrixXd::Constant(copies, dim, 0.5);
  return w;
}

PointWindow fixed_window(std::int64_t index) {
  PointWindow w;
  w.index = index;
  w.points.resize(2, 3);
  w.points << 0.2, 0.7, 0.4, 0.9, 0.1, 0.6;
  return w;
}

// From-scratch recomputation of every L[k], R[k], cusum matrix and score at
// time j from the raw embedding history.
struct BruteForce {
  std::vector<Eigen::MatrixXd> embeddings;  // index i-1 holds window i
  DetectorConfig cfg;

  void check(const MatrixDetector& det, std::int64_t j) const {
    const auto& L = det.prefix_sums();
    const auto& R = det.suffix_sums();
    const Eigen::MatrixXd zero =
        Eigen::MatrixXd::Zero(embeddings[0].rows(), embeddings[0].cols());
    for (std::int64_t k = 1; k <= cfg.window; ++k) {
      Eigen::MatrixXd lsum = zero;
      for (std::int64_t i = 1; i <= j - cfg.window + k - 1; ++i) lsum += embeddings[i - 1];
      Eigen::MatrixXd rsum = zero;
      for (std::int64_t i = j - cfg.window + k; i <= j; ++i) rsum += embeddings[i - 1];
      ASSERT_LE((L[k - 1] - lsum).norm(), 1e-10 * std::max(1.0, lsum.norm()))
          << "L mismatch at j=" << j << " k=" << k;
      ASSERT_LE((R[k - 1] - rsum).norm(), 1e-10 * std::max(1.0, rsum.norm()))
          << "R mismatch at j=" << j << " k=" << k;
    }
    for (const auto& entry : det.scan_details()) {
      const std::int64_t k = cfg.window - entry.n2 + 1;
      Eigen::MatrixXd lsum = zero;
      for (std::int64_t i = 1; i <= entry.n1; ++i) lsum += embeddings[i - 1];
      Eigen::MatrixXd rsum = zero;
      for (std::int64_t i = j - cfg.window + k; i <= j; ++i) rsum += embeddings[i - 1];
      const Eigen::MatrixXd cusum = lsum / static_cast<double>(entry.n1) -
                                    rsum / static_cast<double>(entry.n2);
      ASSERT_LE((entry.cusum - cusum).norm(), 1e-10 * std::max(1.0, cusum.norm()));
      const double score = restricted_svd_score(cusum, cfg.rank, entry.n2, cfg.split.p(),
                                                cfg.split.q(), cfg.gamma);
      ASSERT_NEAR(entry.score, score, 1e-10 * std::max(1.0, score));
    }
  }
};

}  // namespace

TEST(Threshold, RatioOneGivesLogJ) {
  EXPECT_NEAR(cusum_threshold(100, 7, 7, 1.7, 3, 1.0), std::log(100.0), 1e-12);
}

TEST(Threshold, HighPrecisionValue) {
  // C=1, r=2, n2=100, gamma=2, pq=2, j=100: 0.02^(1/3) * ln 100, evaluated
  // independently via cbrt
  const double expected = std::cbrt(0.02) * std::log(100.0);
  EXPECT_NEAR(cusum_threshold(100, 100, 2, 2.0, 2, 1.0), expected, 1e-12);
  EXPECT_NEAR(expected, 1.2500355080263721, 1e-12);
}

TEST(Threshold, TimeValidation) {
  EXPECT_THROW(cusum_threshold(1, 5, 1, 2.0, 2, 1.0), std::invalid_argument);
  EXPECT_THROW(cusum_threshold_1d(1, 5, 2.0, 1.0), std::invalid_argument);
}

TEST(BasisSize, Formulas) {
  EXPECT_EQ(basis_size_matrix(100, 1, 2.0, 2), 3);  // 100^(1/6) ~ 2.15
  EXPECT_EQ(basis_size_matrix(64, 1, 2.0, 2), 2);   // exact integer power
  EXPECT_EQ(basis_size_1d(243, 2.0), 3);            // 3^5 = 243
  EXPECT_EQ(basis_size_1d(100, 2.0), 3);
}

TEST(DetectorConfig, Validation) {
  const CoordinateSplit split = CoordinateSplit::leading(2, 3);
  EXPECT_THROW(DetectorConfig::make(2.0, split, 1, 1, 1.0, 10), std::invalid_argument);
  EXPECT_THROW(DetectorConfig::make(2.0, split, 0, 5, 1.0, 10), std::invalid_argument);
  EXPECT_THROW(DetectorConfig::make(2.0, split, 1, 5, 0.0, 10), std::invalid_argument);
  EXPECT_THROW(DetectorConfig::make(2.0, split, 1, 20, 1.0, 10), std::invalid_argument);
  const DetectorConfig cfg = DetectorConfig::make(2.0, split, 1, 100, 1.0, 200);
  EXPECT_EQ(cfg.basis_size, 3);
}

TEST(DetectorInit, EmptyTrainingGivesZeroPrefixSums) {
  std::vector<PointWindow> training;
  for (int i = 1; i <= 8; ++i) training.push_back(empty_window(i, 3));
  MatrixDetector det(DetectorConfig::make(2.0, CoordinateSplit::leading(2, 3), 1, 4, 1.0, 8));
  det.init(training);
  for (const auto& l : det.prefix_sums()) EXPECT_EQ(l.norm(), 0.0);
}

TEST(DetectorInit, WindowEqualsTrainingLength) {
  std::vector<PointWindow> training;
  for (int i = 1; i <= 4; ++i) training.push_back(fixed_window(i));
  MatrixDetector det(DetectorConfig::make(2.0, CoordinateSplit::leading(2, 3), 1, 4, 1.0, 4));
  det.init(training);
  // L[1] is the empty sum over i = 1..0
  EXPECT_EQ(det.prefix_sums()[0].norm(), 0.0);
}

TEST(DetectorInit, PrefixSumsOfConstantStream) {
  // N_train = 6, W = 3: L[k] = sum_{i=1}^{2+k} of the fixed embedding, so
  // L = [3E, 4E, 5E] by direct summation of the initialization formula.
  std::vector<PointWindow> training;
  for (int i = 1; i <= 6; ++i) training.push_back(fixed_window(i));
  const DetectorConfig cfg = DetectorConfig::make(2.0, CoordinateSplit::leading(2, 3), 1, 3, 1.0, 6);
  const Eigen::MatrixXd e = embed_window(training[0], cfg.split, cfg.basis_size);
  MatrixDetector det(cfg);
  det.init(training);
  EXPECT_LE((det.prefix_sums()[0] - 3.0 * e).norm(), 1e-12 * e.norm());
  EXPECT_LE((det.prefix_sums()[1] - 4.0 * e).norm(), 1e-12 * e.norm());
  EXPECT_LE((det.prefix_sums()[2] - 5.0 * e).norm(), 1e-12 * e.norm());
}

TEST(DetectorInit, Validation) {
  MatrixDetector det(DetectorConfig::make(2.0, CoordinateSplit::leading(2, 3), 1, 4, 1.0, 8));
  EXPECT_THROW(det.init({}), std::invalid_argument);
  std::vector<PointWindow> two{fixed_window(1), fixed_window(2)};
  EXPECT_THROW(det.init(two), std::invalid_argument);
  std::vector<PointWindow> gap{fixed_window(1), fixed_window(2), fixed_window(4),
                               fixed_window(5)};
  EXPECT_THROW(det.init(gap), std::invalid_argument);
}

TEST(DetectorStep, IdenticalStreamNeverAlarms) {
  std::vector<PointWindow> training;
  for (int i = 1; i <= 10; ++i) training.push_back(fixed_window(i));
  MatrixDetector det(DetectorConfig::make(2.0, CoordinateSplit::leading(2, 3), 1, 5, 0.5, 10));
  det.init(training);
  for (int i = 11; i <= 60; ++i) {
    const auto alarm = det.step(fixed_window(i));
    ASSERT_FALSE(alarm.has_value()) << "equal means must cancel exactly at i=" << i;
  }
}

TEST(DetectorStep, HugeThresholdNeverAlarms) {
  auto rng = make_engine(99);
  const auto lambda = [](const Eigen::RowVectorXd&) { return 6.0; };
  std::vector<PointWindow> training;
  for (int i = 1; i <= 12; ++i) training.push_back(sample_ppp(lambda, 6.0, 3, rng, i));
  MatrixDetector det(DetectorConfig::make(2.0, CoordinateSplit::leading(2, 3), 1, 6, 1e18, 12));
  det.init(training);
  for (int i = 13; i <= 80; ++i) {
    // intensity jumps around; the threshold surrogate still dominates
    const double level = i % 3 == 0 ? 6.0 : 25.0;
    const auto jumpy = [level](const Eigen::RowVectorXd&) { return level; };
    const PointWindow w = sample_ppp(jumpy, level, 3, rng, i);
    ASSERT_FALSE(det.step(w).has_value());
  }
}

TEST(DetectorStep, OrderingAndAlarmStateErrors) {
  std::vector<PointWindow> training;
  for (int i = 1; i <= 6; ++i) training.push_back(empty_window(i, 3));
  MatrixDetector det(DetectorConfig::make(2.0, CoordinateSplit::leading(2, 3), 1, 3, 0.01, 6));
  det.init(training);
  EXPECT_THROW(det.step(center_window(9, 3)), std::invalid_argument);
  // alarm fires quickly on a real change with a tiny constant
  std::optional<AlarmReport> alarm;
  for (int i = 7; i <= 20 && !alarm; ++i) alarm = det.step(center_window(i, 3));
  ASSERT_TRUE(alarm.has_value());
  EXPECT_THROW(det.step(center_window(alarm->time + 1, 3)), std::logic_error);
}

TEST(DetectorStep, EmptyToPointChangeAlarmsWithinWindowAndMatchesBruteForce) {
  const std::int64_t W = 10;
  const std::int64_t n_train = 30;
  const std::int64_t change = 40;
  const DetectorConfig cfg =
      DetectorConfig::make(2.0, CoordinateSplit::leading(2, 3), 1, W, 0.05, n_train);
  BruteForce brute{{}, cfg};
  std::vector<PointWindow> training;
  for (std::int64_t i = 1; i <= n_train; ++i) {
    training.push_back(empty_window(i, 3));
    brute.embeddings.push_back(embed_window(training.back(), cfg.split, cfg.basis_size));
  }
  MatrixDetector det(cfg);
  det.init(training);
  std::optional<AlarmReport> alarm;
  for (std::int64_t i = n_train + 1; i <= change + W && !alarm; ++i) {
    const PointWindow w = i <= change ? empty_window(i, 3) : center_window(i, 3);
    brute.embeddings.push_back(embed_window(w, cfg.split, cfg.basis_size));
    alarm = det.step(w);
    if (!alarm) brute.check(det, i);
  }
  ASSERT_TRUE(alarm.has_value());
  EXPECT_GT(alarm->time, change);
  EXPECT_LE(alarm->time, change + W);
  EXPECT_GT(alarm->score, alarm->threshold);

  // cross-check the alarm time against a from-scratch recomputation over the
  // observed stream (embeddings recorded up to and including the alarm time)
  std::optional<std::int64_t> brute_alarm;
  for (std::int64_t j = n_train + 1; j <= alarm->time && !brute_alarm; ++j) {
    for (std::int64_t k = 1; k <= W; ++k) {
      const std::int64_t n1 = j - W - 1 + k;
      const std::int64_t n2 = W - k + 1;
      if (n1 < 1) continue;
      Eigen::MatrixXd lsum = Eigen::MatrixXd::Zero(9, 3);
      for (std::int64_t i = 1; i <= n1; ++i) lsum += brute.embeddings[i - 1];
      Eigen::MatrixXd rsum = Eigen::MatrixXd::Zero(9, 3);
      for (std::int64_t i = j - W + k; i <= j; ++i) rsum += brute.embeddings[i - 1];
      const Eigen::MatrixXd cusum = lsum / n1 - rsum / n2;
      const double score = restricted_svd_score(cusum, cfg.rank, n2, 2, 1, cfg.gamma);
      const double tau = cusum_threshold(j, n2, cfg.rank, cfg.gamma, 2, cfg.threshold_const);
      if (score / tau > 1.0) {
        brute_alarm = j;
        break;
      }
    }
  }
  ASSERT_TRUE(brute_alarm.has_value());
  EXPECT_EQ(alarm->time, *brute_alarm);
}

TEST(DetectorStep, StreamingStateMatchesBruteForceOnSimulatedStream) {
  Scenario scen;
  scen.kind = Scenario::Kind::scenario_3d;
  scen.n_train = 20;
  scen.n_total = 70;
  scen.change_at = 45;
  scen.seed = 404;
  const std::vector<PointWindow> stream = generate_stream(scen);
  const DetectorConfig cfg =
      DetectorConfig::make(2.0, CoordinateSplit::leading(1, 3), 2, 10, 1e18, scen.n_train);
  BruteForce brute{{}, cfg};
  for (const PointWindow& w : stream)
    brute.embeddings.push_back(embed_window(w, cfg.split, cfg.basis_size));
  MatrixDetector det(cfg);
  det.init({stream.begin(), stream.begin() + scen.n_train});
  brute.check(det, scen.n_train);
  for (std::int64_t i = scen.n_train; i < scen.n_total; ++i) {
    ASSERT_FALSE(det.step(stream[i]).has_value());
    brute.check(det, i + 1);
  }
}

TEST(DetectorStep, AlarmTimeMonotoneInThresholdConstant) {
  Scenario scen;
  scen.kind = Scenario::Kind::scenario_3d;
  scen.n_train = 30;
  scen.n_total = 120;
  scen.change_at = 60;
  scen.seed = 777;
  const std::vector<PointWindow> stream = generate_stream(scen);
  std::int64_t prev_alarm = 0;
  for (double c_alpha : {0.01, 0.1, 0.5, 2.0, 10.0, 1e6}) {
    const DetectorConfig cfg =
        DetectorConfig::make(2.0, CoordinateSplit::leading(2, 3), 1, 10, c_alpha, scen.n_train);
    MatrixDetector det(cfg);
    det.init({stream.begin(), stream.begin() + scen.n_train});
    std::int64_t alarm_at = scen.n_total + 1;  // += infinity convention
    for (std::int64_t i = scen.n_train; i < scen.n_total; ++i) {
      const auto alarm = det.step(stream[i]);
      if (alarm) {
        alarm_at = alarm->time;
        break;
      }
    }
    EXPECT_GE(alarm_at, prev_alarm) << "C_alpha=" << c_alpha;
    prev_alarm = alarm_at;
  }
}

TEST(DetectorStep, Deterministic) {
  Scenario scen;
  scen.kind = Scenario::Kind::scenario_3d;
  scen.n_train = 25;
  scen.n_total = 80;
  scen.change_at = 50;
  scen.seed = 31337;
  const std::vector<PointWindow> stream = generate_stream(scen);
  std::vector<AlarmReport> reports;
  for (int run = 0; run < 2; ++run) {
    MatrixDetector det(
        DetectorConfig::make(2.0, CoordinateSplit::leading(2, 3), 1, 8, 0.2, scen.n_train));
    det.init({stream.begin(), stream.begin() + scen.n_train});
    for (std::int64_t i = scen.n_train; i < scen.n_total; ++i) {
      const auto alarm = det.step(stream[i]);
      if (alarm) {
        reports.push_back(*alarm);
        break;
      }
    }
  }
  ASSERT_EQ(reports.size(), 2u);
  EXPECT_EQ(reports[0].time, reports[1].time);
  EXPECT_EQ(reports[0].offset, reports[1].offset);
  EXPECT_EQ(reports[0].score, reports[1].score);
  EXPECT_EQ(reports[0].threshold, reports[1].threshold);
}

TEST(DetectorReset, RequiresAlarmAndEnoughWindows) {
  std::vector<PointWindow> training;
  for (int i = 1; i <= 6; ++i) training.push_back(empty_window(i, 3));
  MatrixDetector det(DetectorConfig::make(2.0, CoordinateSplit::leading(2, 3), 1, 3, 0.01, 6));
  det.init(training);
  EXPECT_THROW(det.reset_after_alarm(training), std::logic_error);
  std::optional<AlarmReport> alarm;
  for (int i = 7; i <= 30 && !alarm; ++i) alarm = det.step(center_window(i, 3));
  ASSERT_TRUE(alarm.has_value());
  std::vector<PointWindow> too_short{center_window(alarm->time + 1, 3),
                                     center_window(alarm->time + 2, 3)};
  EXPECT_THROW(det.reset_after_alarm(too_short), std::invalid_argument);
}

TEST(DetectorReset, BehavesAsFreshDetectorAndCatchesSecondChange) {
  const std::int64_t W = 5;
  const DetectorConfig cfg =
      DetectorConfig::make(2.0, CoordinateSplit::leading(2, 3), 1, W, 0.05, 12);
  // regime A: empty; regime B: one center point; regime C: three center points
  const auto window_at = [&](std::int64_t i) {
    if (i <= 40) return empty_window(i, 3);
    if (i <= 80) return center_window(i, 3, 1);
    return center_window(i, 3, 3);
  };
  MatrixDetector det(cfg);
  std::vector<PointWindow> training;
  for (std::int64_t i = 1; i <= 12; ++i) training.push_back(window_at(i));
  det.init(training);
  std::optional<AlarmReport> first;
  for (std::int64_t i = 13; i <= 100 && !first; ++i) first = det.step(window_at(i));
  ASSERT_TRUE(first.has_value());
  EXPECT_GT(first->time, 40);
  EXPECT_LE(first->time, 40 + W);

  // restart on the new regime
  std::vector<PointWindow> restart;
  for (std::int64_t i = first->time + 1; i <= first->time + 12; ++i)
    restart.push_back(window_at(i));
  det.reset_after_alarm(restart);

  // a fresh detector initialized the same way must agree step by step
  MatrixDetector fresh(cfg);
  fresh.init(restart);
  std::optional<AlarmReport> second, second_fresh;
  for (std::int64_t i = first->time + 13; i <= 120; ++i) {
    const PointWindow w = window_at(i);
    if (!second) second = det.step(w);
    if (!second_fresh) second_fresh = fresh.step(w);
    if (second && second_fresh) break;
  }
  ASSERT_TRUE(second.has_value());
  ASSERT_TRUE(second_fresh.has_value());
  EXPECT_EQ(second->time, second_fresh->time);
  EXPECT_EQ(second->score, second_fresh->score);
  EXPECT_EQ(second->threshold, second_fresh->threshold);
  EXPECT_GT(second->time, 80);
}

TEST(Detector1d, IdenticalStreamNeverAlarms) {
  std::vector<PointWindow> training;
  for (int i = 1; i <= 10; ++i) {
    PointWindow w;
    w.index = i;
    w.points = Eigen::MatrixXd::Constant(2, 1, 0.3);
    training.push_back(w);
  }
  Detector1d det(DetectorConfig1d::make(2.0, 5, 0.5, 10));
  det.init(training);
  for (int i = 11; i <= 40; ++i) {
    PointWindow w;
    w.index = i;
    w.points = Eigen::MatrixXd::Constant(2, 1, 0.3);
    ASSERT_FALSE(det.step(w).has_value());
  }
}

TEST(Detector1d, DetectsChangeAndMatchesBruteForce) {
  const std::int64_t W = 8, n_train = 20, change = 30;
  const DetectorConfig1d cfg = DetectorConfig1d::make(2.0, W, 0.05, n_train);
  std::vector<Eigen::VectorXd> embeddings;
  const auto window_at = [&](std::int64_t i) {
    PointWindow w;
    w.index = i;
    if (i <= change)
      w.points.resize(0, 1);
    else
      w.points = Eigen::MatrixXd::Constant(1, 1, 0.5);
    return w;
  };
  Detector1d det(cfg);
  std::vector<PointWindow> training;
  for (std::int64_t i = 1; i <= n_train; ++i) {
    training.push_back(window_at(i));
    embeddings.push_back(embed_window_1d(training.back(), cfg.basis_size));
  }
  det.init(training);
  std::optional<AlarmReport> alarm;
  for (std::int64_t i = n_train + 1; i <= change + 3 * W && !alarm; ++i) {
    const PointWindow w = window_at(i);
    embeddings.push_back(embed_window_1d(w, cfg.basis_size));
    alarm = det.step(w);
  }
  ASSERT_TRUE(alarm.has_value());
  EXPECT_GT(alarm->time, change);

  std::optional<std::int64_t> brute_alarm;
  for (std::int64_t j = n_train + 1; !brute_alarm && j <= change + 3 * W; ++j) {
    for (std::int64_t k = 1; k <= W; ++k) {
      const std::int64_t n1 = j - W - 1 + k;
      const std::int64_t n2 = W - k + 1;
      if (n1 < 1) continue;
      Eigen::VectorXd lsum = Eigen::VectorXd::Zero(cfg.basis_size);
      for (std::int64_t i = 1; i <= n1; ++i) lsum += embeddings[i - 1];
      Eigen::VectorXd rsum = Eigen::VectorXd::Zero(cfg.basis_size);
      for (std::int64_t i = j - W + k; i <= j; ++i) rsum += embeddings[i - 1];
      const double score = (lsum / n1 - rsum / n2).norm();
      if (score / cusum_threshold_1d(j, n2, cfg.gamma, cfg.threshold_const) > 1.0) {
        brute_alarm = j;
        break;
      }
    }
  }
  ASSERT_TRUE(brute_alarm.has_value());
  EXPECT_EQ(alarm->time, *brute_alarm);
}
