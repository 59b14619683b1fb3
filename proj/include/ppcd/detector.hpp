#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "ppcd/embedding.hpp"
#include "ppcd/lowrank.hpp"

namespace ppcd {

// Analytic alarm boundary: C_alpha * (r/n2)^(gamma/(2*gamma+pq_max)) * ln(j).
inline double cusum_threshold(std::int64_t j, std::int64_t n2, int r, double gamma, int pq_max,
                              double c_alpha) {
  if (j < 2) throw std::invalid_argument("cusum_threshold: time must be >= 2");
  if (n2 < 1) throw std::invalid_argument("cusum_threshold: n2 must be >= 1");
  const double expo = gamma / (2.0 * gamma + pq_max);
  return c_alpha * std::pow(static_cast<double>(r) / n2, expo) * std::log(static_cast<double>(j));
}

// 1D variant: C_alpha * n2^(-gamma/(2*gamma+1)) * ln(j).
inline double cusum_threshold_1d(std::int64_t j, std::int64_t n2, double gamma, double c_alpha) {
  if (j < 2) throw std::invalid_argument("cusum_threshold_1d: time must be >= 2");
  if (n2 < 1) throw std::invalid_argument("cusum_threshold_1d: n2 must be >= 1");
  const double expo = gamma / (2.0 * gamma + 1.0);
  return c_alpha * std::pow(static_cast<double>(n2), -expo) * std::log(static_cast<double>(j));
}

// M = ceil((W/r)^(1/(2*gamma+pq_max)))
inline int basis_size_matrix(std::int64_t window, int r, double gamma, int pq_max) {
  return adaptive_basis_cut(window, r, gamma, pq_max);
}

// M = ceil(W^(1/(2*gamma+1)))
inline int basis_size_1d(std::int64_t window, double gamma) {
  return adaptive_ceil_root(static_cast<double>(window), 1.0 / (2.0 * gamma + 1.0));
}

struct AlarmReport {
  std::int64_t time = 0;   // stream index of the alarming window
  int offset = 0;          // k in 1..W at which the exceedance occurred
  double score = 0.0;
  double threshold = 0.0;
};

struct DetectorConfig {
  double gamma = 2.0;
  CoordinateSplit split;
  int rank = 1;
  std::int64_t window = 2;
  double threshold_const = 1.0;
  std::int64_t n_train = 2;
  int basis_size = 1;  // derived

  static DetectorConfig make(double gamma, CoordinateSplit split, int rank, std::int64_t window,
                             double threshold_const, std::int64_t n_train) {
    if (!(gamma > 0.0)) throw std::invalid_argument("detector config: gamma must be > 0");
    if (rank < 1) throw std::invalid_argument("detector config: rank must be >= 1");
    if (window < 2) throw std::invalid_argument("detector config: window must be >= 2");
    if (!(threshold_const > 0.0))
      throw std::invalid_argument("detector config: threshold constant must be > 0");
    if (n_train < window)
      throw std::invalid_argument("detector config: training length must be >= window");
    DetectorConfig cfg;
    cfg.gamma = gamma;
    cfg.split = std::move(split);
    cfg.rank = rank;
    cfg.window = window;
    cfg.threshold_const = threshold_const;
    cfg.n_train = n_train;
    cfg.basis_size = basis_size_matrix(window, rank, gamma, cfg.split.pq_max());
    return cfg;
  }
};

struct DetectorConfig1d {
  double gamma = 2.0;
  std::int64_t window = 2;
  double threshold_const = 1.0;
  std::int64_t n_train = 2;
  int basis_size = 1;  // derived

  static DetectorConfig1d make(double gamma, std::int64_t window, double threshold_const,
                               std::int64_t n_train) {
    if (!(gamma > 0.0)) throw std::invalid_argument("detector config: gamma must be > 0");
    if (window < 2) throw std::invalid_argument("detector config: window must be >= 2");
    if (!(threshold_const > 0.0))
      throw std::invalid_argument("detector config: threshold constant must be > 0");
    if (n_train < window)
      throw std::invalid_argument("detector config: training length must be >= window");
    DetectorConfig1d cfg;
    cfg.gamma = gamma;
    cfg.window = window;
    cfg.threshold_const = threshold_const;
    cfg.n_train = n_train;
    cfg.basis_size = basis_size_1d(window, gamma);
    return cfg;
  }
};

// Dynamic-programming state shared by the matrix and 1D detectors.
//
// After processing window j (relative time), the lists satisfy
//   L[k] = sum of embeddings 1 .. j-W+k-1    (prefix sums)
//   R[k] = sum of embeddings j-W+k .. j      (suffix sums)
// for k = 1..W, where embedding indices are relative to the segment the
// detector was (re)initialized on. R is rebuilt each step from a ring buffer
// of the last W embeddings; the shift of L reads the pre-shift L[W].
template <class Emb>
class SlidingCusum {
 public:
  void init(std::vector<Emb> training, std::int64_t window) {
    if (window < 2) throw std::invalid_argument("cusum init: window must be >= 2");
    if (static_cast<std::int64_t>(training.size()) < window)
      throw std::invalid_argument("cusum init: need at least W training windows");
    W_ = window;
    const std::int64_t n = static_cast<std::int64_t>(training.size());
    zero_ = training[0];
    zero_.setZero();
    // L[k] = sum_{i=1}^{n-W+k-1}; prefix built incrementally.
    L_.assign(W_, zero_);
    Emb prefix = zero_;
    std::int64_t upto = 0;  // how many leading embeddings prefix currently holds
    for (std::int64_t k = 1; k <= W_; ++k) {
      const std::int64_t target = n - W_ + k - 1;
      while (upto < target) prefix += training[upto++];
      L_[k - 1] = prefix;
    }
    ring_.assign(W_, zero_);
    for (std::int64_t i = 0; i < W_; ++i) ring_[i] = training[n - W_ + i];
    head_ = 0;  // ring_[head_] is the oldest of the last W embeddings
    R_.assign(W_, zero_);
    rebuild_suffix();
    j_ = n;
  }

  // Advance to relative time j with window j's embedding. The shift reads
  // the pre-shift L[W]: new L[k] = old L[k+1] for k < W, and
  // new L[W] = old L[W] + embedding of window j-1.
  void advance(const Emb& next) {
    const Emb& prev_newest = ring_[(head_ + W_ - 1) % W_];  // window j-1
    Emb new_top = L_[W_ - 1] + prev_newest;
    for (std::int64_t k = 0; k + 1 < W_; ++k) L_[k] = std::move(L_[k + 1]);
    L_[W_ - 1] = std::move(new_top);
    ring_[head_] = next;  // overwrite window j-W with window j
    head_ = (head_ + 1) % W_;
    rebuild_suffix();
    ++j_;
  }

  std::int64_t window() const { return W_; }
  std::int64_t time() const { return j_; }
  const std::vector<Emb>& prefix_sums() const { return L_; }
  const std::vector<Emb>& suffix_sums() const { return R_; }

 private:
  void rebuild_suffix() {
    // ring_[head_..] ordered oldest..newest holds windows j-W+1 .. j.
    Emb acc = zero_;
    for (std::int64_t k = W_; k >= 1; --k) {
      acc += ring_[(head_ + k - 1) % W_];
      R_[k - 1] = acc;
    }
  }

  std::int64_t W_ = 0;
  std::int64_t j_ = 0;
  std::vector<Emb> L_, R_, ring_;
  std::int64_t head_ = 0;
  Emb zero_;
};

namespace detail {

// First exceedance over the CUSUM scan; score/threshold comparison is done as
// ratio > multiplier so experiment sweeps and plain stepping agree exactly.
struct ScanOutcome {
  bool exceeded = false;
  int offset = 0;
  double score = 0.0;
  double threshold = 0.0;
  double max_ratio = 0.0;
};

}  // namespace detail

// Streaming state machine of the multivariate detector. Strictly sequential;
// may be moved between threads between calls.
class MatrixDetector {
 public:
  explicit MatrixDetector(DetectorConfig cfg) : cfg_(std::move(cfg)) {}

  // Training windows must have consecutive ascending indices (1..N for a
  // fresh stream). Thresholds use time relative to the segment start, so a
  // reset detector behaves exactly like a fresh one.
  void init(const std::vector<PointWindow>& training) {
    if (training.empty()) throw std::invalid_argument("detector init: empty training set");
    if (static_cast<std::int64_t>(training.size()) < cfg_.window)
      throw std::invalid_argument("detector init: fewer training windows than W");
    std::vector<Eigen::MatrixXd> embedded;
    embedded.reserve(training.size());
    for (std::size_t i = 0; i + 1 < training.size(); ++i)
      if (training[i + 1].index != training[i].index + 1)
        throw std::invalid_argument("detector init: training indices must be consecutive");
    for (const PointWindow& w : training)
      embedded.push_back(embed_window(w, cfg_.split, cfg_.basis_size));
    state_.init(std::move(embedded), cfg_.window);
    next_index_ = training.back().index + 1;
    alarmed_ = false;
    report_.reset();
  }

  // Processes window j = state time + 1; returns the alarm report on the
  // first threshold exceedance.
  std::optional<AlarmReport> step(const PointWindow& w) {
    if (alarmed_) throw std::logic_error("detector step: called after alarm; reset first");
    const detail::ScanOutcome out = advance_and_scan(w, 1.0);
    if (out.exceeded) {
      alarmed_ = true;
      report_ = AlarmReport{w.index, out.offset, out.score, out.threshold};
      return report_;
    }
    return std::nullopt;
  }

  // Advances exactly like step but never alarms; returns the step's maximum
  // score/threshold ratio. Used for threshold sweeps.
  double probe_step(const PointWindow& w) {
    return advance_and_scan(w, std::numeric_limits<double>::infinity()).max_ratio;
  }

  void reset_after_alarm(const std::vector<PointWindow>& restart_training) {
    if (!alarmed_) throw std::logic_error("detector reset: no alarm pending");
    init(restart_training);
  }

  bool alarmed() const { return alarmed_; }
  const std::optional<AlarmReport>& alarm_report() const { return report_; }
  const DetectorConfig& config() const { return cfg_; }
  std::int64_t current_index() const { return next_index_ - 1; }

  struct ScanEntry {
    std::int64_t n1 = 0, n2 = 0;
    Eigen::MatrixXd cusum;
    double score = 0.0;
    double threshold = 0.0;
  };

  // Recomputes the full scan at the current time from the held state; test
  // and diagnostic hook, not on the streaming path.
  std::vector<ScanEntry> scan_details() const {
    std::vector<ScanEntry> entries;
    const std::int64_t j = state_.time();
    for (std::int64_t k = 1; k <= cfg_.window; ++k) {
      ScanEntry e;
      e.n1 = j - cfg_.window - 1 + k;
      e.n2 = cfg_.window - k + 1;
      if (e.n1 < 1) continue;
      e.cusum = state_.prefix_sums()[k - 1] / static_cast<double>(e.n1) -
                state_.suffix_sums()[k - 1] / static_cast<double>(e.n2);
      e.score = restricted_svd_score(e.cusum, cfg_.rank, e.n2, cfg_.split.p(), cfg_.split.q(),
                                     cfg_.gamma);
      e.threshold = cusum_threshold(j, e.n2, cfg_.rank, cfg_.gamma, cfg_.split.pq_max(),
                                    cfg_.threshold_const);
      entries.push_back(std::move(e));
    }
    return entries;
  }

  const std::vector<Eigen::MatrixXd>& prefix_sums() const { return state_.prefix_sums(); }
  const std::vector<Eigen::MatrixXd>& suffix_sums() const { return state_.suffix_sums(); }
  std::int64_t relative_time() const { return state_.time(); }

 private:
  detail::ScanOutcome advance_and_scan(const PointWindow& w, double multiplier) {
    if (w.index != next_index_)
      throw std::invalid_argument("detector step: out-of-order window index");
    state_.advance(embed_window(w, cfg_.split, cfg_.basis_size));
    ++next_index_;
    const std::int64_t j = state_.time();
    detail::ScanOutcome out;
    for (std::int64_t k = 1; k <= cfg_.window; ++k) {
      const std::int64_t n1 = j - cfg_.window - 1 + k;
      const std::int64_t n2 = cfg_.window - k + 1;
      if (n1 < 1) continue;
      const Eigen::MatrixXd cusum = state_.prefix_sums()[k - 1] / static_cast<double>(n1) -
                                    state_.suffix_sums()[k - 1] / static_cast<double>(n2);
      const double score = restricted_svd_score(cusum, cfg_.rank, n2, cfg_.split.p(),
                                                cfg_.split.q(), cfg_.gamma);
      const double threshold = cusum_threshold(j, n2, cfg_.rank, cfg_.gamma, cfg_.split.pq_max(),
                                               cfg_.threshold_const);
      const double ratio = score / threshold;
      out.max_ratio = std::max(out.max_ratio, ratio);
      if (!out.exceeded && ratio > multiplier) {
        out.exceeded = true;
        out.offset = static_cast<int>(k);
        out.score = score;
        out.threshold = threshold;
        break;  // first exceedance alarms
      }
    }
    return out;
  }

  DetectorConfig cfg_;
  SlidingCusum<Eigen::MatrixXd> state_;
  std::int64_t next_index_ = 1;
  bool alarmed_ = false;
  std::optional<AlarmReport> report_;
};

// 1D detector: vector embeddings, Euclidean-norm CUSUM, no restricted SVD.
class Detector1d {
 public:
  explicit Detector1d(DetectorConfig1d cfg) : cfg_(std::move(cfg)) {}

  void init(const std::vector<PointWindow>& training) {
    if (training.empty()) throw std::invalid_argument("detector init: empty training set");
    if (static_cast<std::int64_t>(training.size()) < cfg_.window)
      throw std::invalid_argument("detector init: fewer training windows than W");
    for (std::size_t i = 0; i + 1 < training.size(); ++i)
      if (training[i + 1].index != training[i].index + 1)
        throw std::invalid_argument("detector init: training indices must be consecutive");
    std::vector<Eigen::VectorXd> embedded;
    embedded.reserve(training.size());
    for (const PointWindow& w : training) embedded.push_back(embed_window_1d(w, cfg_.basis_size));
    state_.init(std::move(embedded), cfg_.window);
    next_index_ = training.back().index + 1;
    alarmed_ = false;
    report_.reset();
  }

  std::optional<AlarmReport> step(const PointWindow& w) {
    if (alarmed_) throw std::logic_error("detector step: called after alarm; reset first");
    const detail::ScanOutcome out = advance_and_scan(w, 1.0);
    if (out.exceeded) {
      alarmed_ = true;
      report_ = AlarmReport{w.index, out.offset, out.score, out.threshold};
      return report_;
    }
    return std::nullopt;
  }

  double probe_step(const PointWindow& w) {
    return advance_and_scan(w, std::numeric_limits<double>::infinity()).max_ratio;
  }

  void reset_after_alarm(const std::vector<PointWindow>& restart_training) {
    if (!alarmed_) throw std::logic_error("detector reset: no alarm pending");
    init(restart_training);
  }

  bool alarmed() const { return alarmed_; }
  const std::optional<AlarmReport>& alarm_report() const { return report_; }
  const DetectorConfig1d& config() const { return cfg_; }
  const std::vector<Eigen::VectorXd>& prefix_sums() const { return state_.prefix_sums(); }
  const std::vector<Eigen::VectorXd>& suffix_sums() const { return state_.suffix_sums(); }
  std::int64_t relative_time() const { return state_.time(); }

 private:
  detail::ScanOutcome advance_and_scan(const PointWindow& w, double multiplier) {
    if (w.index != next_index_)
      throw std::invalid_argument("detector step: out-of-order window index");
    state_.advance(embed_window_1d(w, cfg_.basis_size));
    ++next_index_;
    const std::int64_t j = state_.time();
    detail::ScanOutcome out;
    for (std::int64_t k = 1; k <= cfg_.window; ++k) {
      const std::int64_t n1 = j - cfg_.window - 1 + k;
      const std::int64_t n2 = cfg_.window - k + 1;
      if (n1 < 1) continue;
      const Eigen::VectorXd cusum = state_.prefix_sums()[k - 1] / static_cast<double>(n1) -
                                    state_.suffix_sums()[k - 1] / static_cast<double>(n2);
      const double score = cusum.norm();
      const double threshold = cusum_threshold_1d(j, n2, cfg_.gamma, cfg_.threshold_const);
      const double ratio = score / threshold;
      out.max_ratio = std::max(out.max_ratio, ratio);
      if (!out.exceeded && ratio > multiplier) {
        out.exceeded = true;
        out.offset = static_cast<int>(k);
        out.score = score;
        out.threshold = threshold;
        break;
      }
    }
    return out;
  }

  DetectorConfig1d cfg_;
  SlidingCusum<Eigen::VectorXd> state_;
  std::int64_t next_index_ = 1;
  bool alarmed_ = false;
  std::optional<AlarmReport> report_;
};

}  // namespace ppcd
