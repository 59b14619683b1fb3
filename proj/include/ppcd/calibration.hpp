#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "ppcd/detector.hpp"
#include "ppcd/embedding.hpp"
#include "ppcd/lowrank.hpp"
#include "ppcd/rng.hpp"

namespace ppcd {

// Data-driven tuning selected on the training prefix.
struct CalibrationReport {
  CoordinateSplit split;
  int rank = 1;
  double threshold_const = 0.0;
  double alpha = 0.05;
  int permutations = 500;
  std::uint64_t seed = 0;
  // context needed to reconstruct the detector in a separate process
  double gamma = 2.0;
  std::int64_t window = 2;
  std::int64_t n_train = 2;
  int basis_size = 1;
  int dim = 2;
};

// Empirical correlation matrix over all pooled training points.
inline Eigen::MatrixXd coordinate_correlations(const std::vector<PointWindow>& training) {
  std::int64_t n = 0;
  int d = 0;
  for (const PointWindow& w : training) {
    if (w.count() == 0) continue;
    if (d == 0) d = w.dim();
    n += w.count();
  }
  if (n < 2) throw std::invalid_argument("coordinate_split: need at least 2 pooled points");
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  for (const PointWindow& w : training)
    for (int i = 0; i < w.count(); ++i) mean += w.points.row(i).transpose();
  mean /= static_cast<double>(n);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  for (const PointWindow& w : training)
    for (int i = 0; i < w.count(); ++i) {
      const Eigen::VectorXd c = w.points.row(i).transpose() - mean;
      cov.noalias() += c * c.transpose();
    }
  cov /= static_cast<double>(n - 1);
  Eigen::MatrixXd corr(d, d);
  for (int a = 0; a < d; ++a) {
    if (!(cov(a, a) > 0.0))
      throw std::invalid_argument("coordinate_split: zero-variance coordinate");
    for (int b = 0; b < d; ++b) corr(a, b) = cov(a, b) / std::sqrt(cov(a, a) * cov(b, b));
  }
  return corr;
}

// Correlation-based split: minimize the mean absolute cross-group correlation
// over all nontrivial unordered bipartitions. Group A canonically contains
// coordinate 1; ties break to the lexicographically smallest sorted A.
inline CoordinateSplit coordinate_split(const std::vector<PointWindow>& training) {
  int d = 0;
  for (const PointWindow& w : training)
    if (w.count() > 0) {
      d = w.dim();
      break;
    }
  if (d < 2) throw std::invalid_argument("coordinate_split: need dimension >= 2");
  const Eigen::MatrixXd corr = coordinate_correlations(training);
  std::vector<int> best_a;
  double best_delta = std::numeric_limits<double>::infinity();
  const std::uint64_t masks = (1ULL << (d - 1));
  for (std::uint64_t mask = 0; mask + 1 < masks; ++mask) {
    std::vector<int> a{0}, b;
    for (int c = 1; c < d; ++c) {
      if (mask & (1ULL << (c - 1)))
        a.push_back(c);
      else
        b.push_back(c);
    }
    double delta = 0.0;
    for (int i : a)
      for (int j : b) delta += std::abs(corr(i, j));
    delta /= static_cast<double>(a.size() * b.size());
    if (delta < best_delta - 1e-15 ||
        (std::abs(delta - best_delta) <= 1e-15 &&
         std::lexicographical_compare(a.begin(), a.end(), best_a.begin(), best_a.end()))) {
      best_delta = delta;
      best_a = a;
    }
  }
  CoordinateSplit split;
  split.group_y = best_a;
  for (int c = 0; c < d; ++c)
    if (std::find(best_a.begin(), best_a.end(), c) == best_a.end()) split.group_z.push_back(c);
  split.validate(d);
  return split;
}

// Rank selection by sample splitting: half-sample mean intensity matrices at
// the calibration basis size, rank chosen to minimize the Frobenius distance
// between their rank-r truncations; smallest rank on ties. Odd training
// lengths drop the last window.
inline int select_rank(const std::vector<PointWindow>& training, double gamma,
                       const CoordinateSplit& split, std::int64_t window) {
  std::int64_t n = static_cast<std::int64_t>(training.size());
  if (n < 4) throw std::invalid_argument("select_rank: need at least 4 training windows");
  if (n % 2 == 1) --n;
  const int m_cal = basis_size_matrix(window, 1, gamma, split.pq_max());
  Eigen::MatrixXd w1 = Eigen::MatrixXd::Zero(ipow(m_cal, split.p()), ipow(m_cal, split.q()));
  Eigen::MatrixXd w2 = w1;
  for (std::int64_t i = 0; i < n / 2; ++i) w1 += embed_window(training[i], split, m_cal);
  for (std::int64_t i = n / 2; i < n; ++i) w2 += embed_window(training[i], split, m_cal);
  w1 *= 2.0 / static_cast<double>(n);
  w2 *= 2.0 / static_cast<double>(n);
  const int max_rank = static_cast<int>(std::min(w1.rows(), w1.cols()));
  int best_r = 1;
  double best = std::numeric_limits<double>::infinity();
  for (int r = 1; r <= max_rank; ++r) {
    const double objective = frobenius(truncated_svd(w1, r) - truncated_svd(w2, r));
    if (objective < best - 1e-15) {
      best = objective;
      best_r = r;
    }
  }
  return best_r;
}

// Permutation calibration of the threshold constant: shuffle window indices,
// form the half-vs-half CUSUM matrix, record its Frobenius norm normalized by
// (2r/N)^(gamma/(2gamma+pq_max)) * ln N, and return the ceil((1-alpha)B)-th
// order statistic. Uses the untrimmed, untruncated matrix.
inline double calibrate_threshold(const std::vector<PointWindow>& training, int rank, double gamma,
                                  const CoordinateSplit& split, int basis_size, double alpha,
                                  int permutations, std::uint64_t seed) {
  std::int64_t n = static_cast<std::int64_t>(training.size());
  if (n < 4) throw std::invalid_argument("calibrate_threshold: need at least 4 training windows");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("calibrate_threshold: alpha must be in (0,1)");
  if (permutations < 1) throw std::invalid_argument("calibrate_threshold: need B >= 1");
  if (n % 2 == 1) --n;
  std::vector<Eigen::MatrixXd> embedded;
  embedded.reserve(n);
  for (std::int64_t i = 0; i < n; ++i)
    embedded.push_back(embed_window(training[i], split, basis_size));
  const double expo = gamma / (2.0 * gamma + split.pq_max());
  const double normalizer =
      std::pow(2.0 * rank / static_cast<double>(n), expo) * std::log(static_cast<double>(n));
  std::vector<std::int64_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> stats;
  stats.reserve(permutations);
  for (int b = 0; b < permutations; ++b) {
    auto rng = make_engine(split_seed(seed, static_cast<std::uint64_t>(b)));
    std::shuffle(order.begin(), order.end(), rng);
    Eigen::MatrixXd diff = Eigen::MatrixXd::Zero(embedded[0].rows(), embedded[0].cols());
    for (std::int64_t i = 0; i < n / 2; ++i) diff += embedded[order[i]];
    for (std::int64_t i = n / 2; i < n; ++i) diff -= embedded[order[i]];
    diff *= 2.0 / static_cast<double>(n);
    stats.push_back(frobenius(diff) / normalizer);
  }
  std::sort(stats.begin(), stats.end());
  const int idx = static_cast<int>(std::ceil((1.0 - alpha) * permutations));
  return stats[std::max(idx, 1) - 1];
}

// Full pipeline: split, then rank at the calibration basis size (rank 1 in
// the basis-size formula), then the operational basis size recomputed with
// the selected rank, then the threshold constant at the operational size.
inline CalibrationReport calibrate(const std::vector<PointWindow>& training, double gamma,
                                   std::int64_t window, double alpha, int permutations,
                                   std::uint64_t seed) {
  if (window < 2 || static_cast<std::int64_t>(training.size()) < window)
    throw std::invalid_argument("calibrate: need window >= 2 and at least W training windows");
  CalibrationReport report;
  report.gamma = gamma;
  report.window = window;
  report.alpha = alpha;
  report.permutations = permutations;
  report.seed = seed;
  report.n_train = static_cast<std::int64_t>(training.size());
  report.split = coordinate_split(training);
  report.dim = report.split.dim();
  report.rank = select_rank(training, gamma, report.split, window);
  report.basis_size = basis_size_matrix(window, report.rank, gamma, report.split.pq_max());
  report.threshold_const = calibrate_threshold(training, report.rank, gamma, report.split,
                                               report.basis_size, alpha, permutations, seed);
  return report;
}

// 1D pipeline: no split or rank; the permutation statistic is the Euclidean
// norm of the half-vs-half CUSUM vector, normalized by
// (2/N)^(gamma/(2gamma+1)) * ln N.
struct CalibrationReport1d {
  double threshold_const = 0.0;
  double alpha = 0.05;
  int permutations = 500;
  std::uint64_t seed = 0;
  double gamma = 2.0;
  std::int64_t window = 2;
  std::int64_t n_train = 2;
  int basis_size = 1;
};

inline double calibrate_threshold_1d(const std::vector<PointWindow>& training, double gamma,
                                     int basis_size, double alpha, int permutations,
                                     std::uint64_t seed) {
  std::int64_t n = static_cast<std::int64_t>(training.size());
  if (n < 4) throw std::invalid_argument("calibrate_threshold_1d: need at least 4 windows");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("calibrate_threshold_1d: alpha must be in (0,1)");
  if (permutations < 1) throw std::invalid_argument("calibrate_threshold_1d: need B >= 1");
  if (n % 2 == 1) --n;
  std::vector<Eigen::VectorXd> embedded;
  embedded.reserve(n);
  for (std::int64_t i = 0; i < n; ++i) embedded.push_back(embed_window_1d(training[i], basis_size));
  const double expo = gamma / (2.0 * gamma + 1.0);
  const double normalizer =
      std::pow(2.0 / static_cast<double>(n), expo) * std::log(static_cast<double>(n));
  std::vector<std::int64_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> stats;
  stats.reserve(permutations);
  for (int b = 0; b < permutations; ++b) {
    auto rng = make_engine(split_seed(seed, static_cast<std::uint64_t>(b)));
    std::shuffle(order.begin(), order.end(), rng);
    Eigen::VectorXd diff = Eigen::VectorXd::Zero(embedded[0].size());
    for (std::int64_t i = 0; i < n / 2; ++i) diff += embedded[order[i]];
    for (std::int64_t i = n / 2; i < n; ++i) diff -= embedded[order[i]];
    diff *= 2.0 / static_cast<double>(n);
    stats.push_back(diff.norm() / normalizer);
  }
  std::sort(stats.begin(), stats.end());
  const int idx = static_cast<int>(std::ceil((1.0 - alpha) * permutations));
  return stats[std::max(idx, 1) - 1];
}

inline CalibrationReport1d calibrate_1d(const std::vector<PointWindow>& training, double gamma,
                                        std::int64_t window, double alpha, int permutations,
                                        std::uint64_t seed) {
  if (window < 2 || static_cast<std::int64_t>(training.size()) < window)
    throw std::invalid_argument("calibrate_1d: need window >= 2 and at least W training windows");
  CalibrationReport1d report;
  report.gamma = gamma;
  report.window = window;
  report.alpha = alpha;
  report.permutations = permutations;
  report.seed = seed;
  report.n_train = static_cast<std::int64_t>(training.size());
  report.basis_size = basis_size_1d(window, gamma);
  report.threshold_const =
      calibrate_threshold_1d(training, gamma, report.basis_size, alpha, permutations, seed);
  return report;
}

}  // namespace ppcd
