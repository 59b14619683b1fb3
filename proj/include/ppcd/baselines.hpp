#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "ppcd/detector.hpp"
#include "ppcd/embedding.hpp"
#include "ppcd/rng.hpp"

namespace ppcd {

struct BaselineConfig {
  enum class Kind { mmd, kie };
  Kind kind = Kind::mmd;
  double bandwidth = 0.0;      // mmd: <= 0 requests the median heuristic
  int grid_res = 16;           // kie lattice resolution per axis
  std::int64_t window = 2;     // block size W
  double threshold = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (window < 2) throw std::invalid_argument("baseline config: window must be >= 2");
    if (kind == Kind::kie && grid_res < 4)
      throw std::invalid_argument("baseline config: kie grid_res must be >= 4");
  }
};

inline Eigen::MatrixXd pooled_points(const std::vector<PointWindow>& windows) {
  std::int64_t n = 0;
  int d = 0;
  for (const PointWindow& w : windows) {
    n += w.count();
    if (w.count() > 0) d = w.dim();
  }
  Eigen::MatrixXd out(n, d);
  std::int64_t row = 0;
  for (const PointWindow& w : windows)
    for (int i = 0; i < w.count(); ++i) out.row(row++) = w.points.row(i);
  return out;
}

// Median pairwise distance over pooled points, subsampled past a cap so
// calibration stays cheap on large training sets.
inline double median_heuristic_bandwidth(const Eigen::MatrixXd& points, std::uint64_t seed = 0,
                                         std::int64_t cap = 2000) {
  const std::int64_t n = points.rows();
  if (n < 2) throw std::invalid_argument("median_heuristic_bandwidth: need >= 2 points");
  std::vector<std::int64_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (n > cap) {
    auto rng = make_engine(split_seed(seed, 0x6d6d64ULL));
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(cap);
  }
  std::vector<double> dists;
  dists.reserve(idx.size() * (idx.size() - 1) / 2);
  for (std::size_t i = 0; i < idx.size(); ++i)
    for (std::size_t j = i + 1; j < idx.size(); ++j)
      dists.push_back((points.row(idx[i]) - points.row(idx[j])).norm());
  auto mid = dists.begin() + dists.size() / 2;
  std::nth_element(dists.begin(), mid, dists.end());
  const double med = *mid;
  if (!(med > 0.0)) throw std::invalid_argument("median_heuristic_bandwidth: degenerate points");
  return med;
}

// Per-axis Silverman-style bandwidths: sd_a * n^(-1/(d+4)).
inline Eigen::VectorXd silverman_bandwidths(const Eigen::MatrixXd& points) {
  const std::int64_t n = points.rows();
  const int d = static_cast<int>(points.cols());
  if (n < 2) throw std::invalid_argument("silverman_bandwidths: need >= 2 points");
  Eigen::VectorXd bw(d);
  const double factor = std::pow(static_cast<double>(n), -1.0 / (d + 4.0));
  for (int a = 0; a < d; ++a) {
    const double mean = points.col(a).mean();
    const double var = (points.col(a).array() - mean).square().sum() / (n - 1);
    const double sd = std::sqrt(var);
    bw[a] = (sd > 1e-12 ? sd : 1e-12) * factor;
  }
  return bw;
}

inline double gaussian_kernel(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b,
                              double bw) {
  const double sq = (a - b).squaredNorm();
  return std::exp(-sq / (2.0 * bw * bw));
}

// Unbiased squared MMD between two point sets; blocks with fewer than two
// points give 0 (the within-block terms are undefined there).
inline double mmd_sq_unbiased(const Eigen::MatrixXd& xs, const Eigen::MatrixXd& ys, double bw) {
  const std::int64_t n = xs.rows(), m = ys.rows();
  if (n < 2 || m < 2) return 0.0;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = i + 1; j < n; ++j) sxx += gaussian_kernel(xs.row(i), xs.row(j), bw);
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t j = i + 1; j < m; ++j) syy += gaussian_kernel(ys.row(i), ys.row(j), bw);
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < m; ++j) sxy += gaussian_kernel(xs.row(i), ys.row(j), bw);
  return 2.0 * sxx / (static_cast<double>(n) * (n - 1)) +
         2.0 * syy / (static_cast<double>(m) * (m - 1)) -
         2.0 * sxy / (static_cast<double>(n) * m);
}

// Blockwise MMD detector: pools the most recent W windows against the W
// windows before them and alarms when the unbiased squared MMD exceeds the
// calibrated threshold. Window-pair kernel sums are kept in a ring table so
// the per-step cost does not grow with elapsed time.
class MmdDetector {
 public:
  explicit MmdDetector(BaselineConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    if (cfg_.kind != BaselineConfig::Kind::mmd)
      throw std::invalid_argument("MmdDetector: config kind mismatch");
  }

  // Requires at least 2W training windows (the two blocks must be full at the
  // first step) and a resolved bandwidth (calibrate_baseline resolves it).
  void init(const std::vector<PointWindow>& training) {
    const std::int64_t need = 2 * cfg_.window;
    if (static_cast<std::int64_t>(training.size()) < need)
      throw std::invalid_argument("mmd init: need at least 2W training windows");
    if (!(cfg_.bandwidth > 0.0))
      throw std::invalid_argument("mmd init: bandwidth not resolved; calibrate first");
    slots_ = need;
    windows_.assign(slots_, Eigen::MatrixXd());
    table_ = Eigen::MatrixXd::Zero(slots_, slots_);
    head_ = 0;
    filled_ = 0;
    for (std::int64_t i = training.size() - need; i < static_cast<std::int64_t>(training.size());
         ++i)
      push(training[i].points);
    next_index_ = training.back().index + 1;
    alarmed_ = false;
    report_.reset();
  }

  std::optional<AlarmReport> step(const PointWindow& w) {
    if (alarmed_) throw std::logic_error("mmd step: called after alarm");
    const double stat = advance(w);
    if (stat > cfg_.threshold) {
      alarmed_ = true;
      report_ = AlarmReport{w.index, 1, stat, cfg_.threshold};
      return report_;
    }
    return std::nullopt;
  }

  // Statistic/threshold ratio for sweeps; never alarms.
  double probe_step(const PointWindow& w) {
    const double stat = advance(w);
    return cfg_.threshold > 0.0 ? stat / cfg_.threshold
                                : (stat > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
  }

  double last_statistic() const { return last_stat_; }
  bool alarmed() const { return alarmed_; }
  const BaselineConfig& config() const { return cfg_; }

 private:
  // Pushes a window into the ring and refreshes its kernel sums against the
  // retained 2W windows.
  void push(const Eigen::MatrixXd& pts) {
    const std::int64_t slot = head_;
    windows_[slot] = pts;
    head_ = (head_ + 1) % slots_;
    filled_ = std::min(filled_ + 1, slots_);
    for (std::int64_t s = 0; s < filled_; ++s) {
      double sum = 0.0;
      const Eigen::MatrixXd& other = windows_[s];
      for (Eigen::Index i = 0; i < pts.rows(); ++i)
        for (Eigen::Index j = 0; j < other.rows(); ++j)
          sum += gaussian_kernel(pts.row(i), other.row(j), cfg_.bandwidth);
      table_(slot, s) = sum;
      table_(s, slot) = sum;
    }
  }

  double advance(const PointWindow& w) {
    if (w.index != next_index_) throw std::invalid_argument("mmd step: out-of-order window index");
    push(w.points);
    ++next_index_;
    // Ring slots oldest..newest: pre block = first W, recent block = last W.
    const std::int64_t W = cfg_.window;
    std::vector<std::int64_t> pre(W), rec(W);
    for (std::int64_t k = 0; k < W; ++k) {
      pre[k] = (head_ + k) % slots_;
      rec[k] = (head_ + W + k) % slots_;
    }
    double n_pre = 0.0, n_rec = 0.0;
    for (std::int64_t k = 0; k < W; ++k) {
      n_pre += static_cast<double>(windows_[pre[k]].rows());
      n_rec += static_cast<double>(windows_[rec[k]].rows());
    }
    double stat = 0.0;
    if (n_pre >= 2.0 && n_rec >= 2.0) {
      double sxx = 0.0, syy = 0.0, sxy = 0.0;
      for (std::int64_t a = 0; a < W; ++a)
        for (std::int64_t b = 0; b < W; ++b) {
          sxx += table_(pre[a], pre[b]);
          syy += table_(rec[a], rec[b]);
          sxy += table_(pre[a], rec[b]);
        }
      // subtract the point self-pairs (k(x,x) = 1) from the within sums
      stat = (sxx - n_pre) / (n_pre * (n_pre - 1.0)) + (syy - n_rec) / (n_rec * (n_rec - 1.0)) -
             2.0 * sxy / (n_pre * n_rec);
    }
    last_stat_ = stat;
    return stat;
  }

  BaselineConfig cfg_;
  std::vector<Eigen::MatrixXd> windows_;
  Eigen::MatrixXd table_;
  std::int64_t slots_ = 0, head_ = 0, filled_ = 0;
  std::int64_t next_index_ = 1;
  double last_stat_ = 0.0;
  bool alarmed_ = false;
  std::optional<AlarmReport> report_;
};

// Gaussian product-kernel intensity estimate of one window, evaluated on the
// tensor lattice of cell centers; separable accumulation per point.
inline Eigen::VectorXd kie_grid_sum(const Eigen::MatrixXd& pts, const Eigen::VectorXd& bw,
                                    int grid_res, int dim) {
  const std::int64_t cells = ipow(grid_res, dim);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(cells);
  if (pts.rows() == 0) return out;
  Eigen::MatrixXd axis(grid_res, dim);
  Eigen::VectorXd tensor(cells);
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    for (int a = 0; a < dim; ++a) {
      const double h = bw[a];
      const double norm = 1.0 / (h * std::sqrt(2.0 * M_PI));
      for (int g = 0; g < grid_res; ++g) {
        const double center = (g + 0.5) / grid_res;
        const double u = (center - pts(i, a)) / h;
        axis(g, a) = norm * std::exp(-0.5 * u * u);
      }
    }
    // first axis fastest, matching the basis flat ordering
    tensor.head(grid_res) = axis.col(0);
    std::int64_t len = grid_res;
    for (int a = 1; a < dim; ++a) {
      for (int g = grid_res - 1; g >= 0; --g)
        for (std::int64_t c = len - 1; c >= 0; --c) tensor[g * len + c] = tensor[c] * axis(g, a);
      len *= grid_res;
    }
    out += tensor;
  }
  return out;
}

// Kernel-intensity-estimator CUSUM: per-window grid sums are cached in a ring
// of 2W vectors; the statistic is the lattice-quadrature L2 distance between
// the pre- and recent-block intensity estimates (each block's pooled kernel
// sum divided by the block length W).
class KieDetector {
 public:
  explicit KieDetector(BaselineConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    if (cfg_.kind != BaselineConfig::Kind::kie)
      throw std::invalid_argument("KieDetector: config kind mismatch");
  }

  void set_bandwidths(Eigen::VectorXd bw) { bw_ = std::move(bw); }
  const Eigen::VectorXd& bandwidths() const { return bw_; }

  void init(const std::vector<PointWindow>& training) {
    const std::int64_t need = 2 * cfg_.window;
    if (static_cast<std::int64_t>(training.size()) < need)
      throw std::invalid_argument("kie init: need at least 2W training windows");
    dim_ = 0;
    for (const PointWindow& w : training)
      if (w.count() > 0) {
        dim_ = w.dim();
        break;
      }
    if (dim_ == 0) throw std::invalid_argument("kie init: no training points");
    if (bw_.size() != dim_) bw_ = silverman_bandwidths(pooled_points(training));
    slots_ = need;
    grids_.assign(slots_, Eigen::VectorXd());
    head_ = 0;
    for (std::int64_t i = training.size() - need; i < static_cast<std::int64_t>(training.size());
         ++i)
      push(training[i]);
    next_index_ = training.back().index + 1;
    alarmed_ = false;
    report_.reset();
  }

  std::optional<AlarmReport> step(const PointWindow& w) {
    if (alarmed_) throw std::logic_error("kie step: called after alarm");
    const double stat = advance(w);
    if (stat > cfg_.threshold) {
      alarmed_ = true;
      report_ = AlarmReport{w.index, 1, stat, cfg_.threshold};
      return report_;
    }
    return std::nullopt;
  }

  double probe_step(const PointWindow& w) {
    const double stat = advance(w);
    return cfg_.threshold > 0.0 ? stat / cfg_.threshold
                                : (stat > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
  }

  double last_statistic() const { return last_stat_; }
  bool alarmed() const { return alarmed_; }
  const BaselineConfig& config() const { return cfg_; }
  int dim() const { return dim_; }

 private:
  void push(const PointWindow& w) {
    if (w.count() > 0 && w.dim() != dim_)
      throw std::invalid_argument("kie step: point dimension mismatch");
    grids_[head_] = kie_grid_sum(w.points, bw_, cfg_.grid_res, dim_);
    head_ = (head_ + 1) % slots_;
  }

  double advance(const PointWindow& w) {
    if (w.index != next_index_) throw std::invalid_argument("kie step: out-of-order window index");
    push(w);
    ++next_index_;
    const std::int64_t W = cfg_.window;
    const std::int64_t cells = ipow(cfg_.grid_res, dim_);
    Eigen::VectorXd pre = Eigen::VectorXd::Zero(cells);
    Eigen::VectorXd rec = Eigen::VectorXd::Zero(cells);
    for (std::int64_t k = 0; k < W; ++k) {
      pre += grids_[(head_ + k) % slots_];
      rec += grids_[(head_ + W + k) % slots_];
    }
    const double cell_volume = 1.0 / static_cast<double>(cells);
    const double stat =
        std::sqrt(((pre - rec) / static_cast<double>(W)).squaredNorm() * cell_volume);
    last_stat_ = stat;
    return stat;
  }

  BaselineConfig cfg_;
  Eigen::VectorXd bw_;
  std::vector<Eigen::VectorXd> grids_;
  std::int64_t slots_ = 0, head_ = 0;
  int dim_ = 0;
  std::int64_t next_index_ = 1;
  double last_stat_ = 0.0;
  bool alarmed_ = false;
  std::optional<AlarmReport> report_;
};

// Permutation calibration shared by both baselines: shuffle the training
// windows, split into halves, evaluate the baseline's statistic between the
// halves, and return the ceil((1-alpha)B)-th order statistic. Negative MMD
// values clamp to zero so degenerate training yields a zero threshold.
// Resolves the bandwidth from training when unset and stores it in cfg.
inline double calibrate_baseline(const std::vector<PointWindow>& training, BaselineConfig& cfg,
                                 double alpha, int permutations, std::uint64_t seed) {
  cfg.validate();
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("calibrate_baseline: alpha must be in (0,1)");
  if (permutations < 1) throw std::invalid_argument("calibrate_baseline: need B >= 1");
  std::int64_t n = static_cast<std::int64_t>(training.size());
  if (n < 4) throw std::invalid_argument("calibrate_baseline: need at least 4 windows");
  if (n % 2 == 1) --n;

  std::vector<std::int64_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> stats;
  stats.reserve(permutations);

  if (cfg.kind == BaselineConfig::Kind::mmd) {
    if (!(cfg.bandwidth > 0.0))
      cfg.bandwidth = median_heuristic_bandwidth(pooled_points(training), seed);
    // window-pair kernel sums, computed once
    Eigen::MatrixXd table(n, n);
    std::vector<double> counts(n);
    for (std::int64_t a = 0; a < n; ++a) counts[a] = training[a].count();
    for (std::int64_t a = 0; a < n; ++a)
      for (std::int64_t b = a; b < n; ++b) {
        double sum = 0.0;
        const Eigen::MatrixXd& pa = training[a].points;
        const Eigen::MatrixXd& pb = training[b].points;
        for (Eigen::Index i = 0; i < pa.rows(); ++i)
          for (Eigen::Index j = 0; j < pb.rows(); ++j)
            sum += gaussian_kernel(pa.row(i), pb.row(j), cfg.bandwidth);
        table(a, b) = sum;
        table(b, a) = sum;
      }
    for (int b = 0; b < permutations; ++b) {
      auto rng = make_engine(split_seed(seed, static_cast<std::uint64_t>(b)));
      std::shuffle(order.begin(), order.end(), rng);
      double sxx = 0.0, syy = 0.0, sxy = 0.0, n1 = 0.0, n2 = 0.0;
      for (std::int64_t i = 0; i < n / 2; ++i) n1 += counts[order[i]];
      for (std::int64_t i = n / 2; i < n; ++i) n2 += counts[order[i]];
      for (std::int64_t i = 0; i < n / 2; ++i)
        for (std::int64_t j = 0; j < n / 2; ++j) sxx += table(order[i], order[j]);
      for (std::int64_t i = n / 2; i < n; ++i)
        for (std::int64_t j = n / 2; j < n; ++j) syy += table(order[i], order[j]);
      for (std::int64_t i = 0; i < n / 2; ++i)
        for (std::int64_t j = n / 2; j < n; ++j) sxy += table(order[i], order[j]);
      double stat = 0.0;
      if (n1 >= 2.0 && n2 >= 2.0)
        stat = (sxx - n1) / (n1 * (n1 - 1.0)) + (syy - n2) / (n2 * (n2 - 1.0)) -
               2.0 * sxy / (n1 * n2);
      stats.push_back(std::max(stat, 0.0));
    }
  } else {
    int dim = 0;
    for (const PointWindow& w : training)
      if (w.count() > 0) {
        dim = w.dim();
        break;
      }
    if (dim == 0) throw std::invalid_argument("calibrate_baseline: no training points");
    const Eigen::VectorXd bw = silverman_bandwidths(pooled_points(training));
    const std::int64_t cells = ipow(cfg.grid_res, dim);
    std::vector<Eigen::VectorXd> grids(n);
    for (std::int64_t i = 0; i < n; ++i)
      grids[i] = kie_grid_sum(training[i].points, bw, cfg.grid_res, dim);
    const double cell_volume = 1.0 / static_cast<double>(cells);
    for (int b = 0; b < permutations; ++b) {
      auto rng = make_engine(split_seed(seed, static_cast<std::uint64_t>(b)));
      std::shuffle(order.begin(), order.end(), rng);
      Eigen::VectorXd diff = Eigen::VectorXd::Zero(cells);
      for (std::int64_t i = 0; i < n / 2; ++i) diff += grids[order[i]];
      for (std::int64_t i = n / 2; i < n; ++i) diff -= grids[order[i]];
      diff *= 2.0 / static_cast<double>(n);
      stats.push_back(std::sqrt(diff.squaredNorm() * cell_volume));
    }
  }
  std::sort(stats.begin(), stats.end());
  const int idx = static_cast<int>(std::ceil((1.0 - alpha) * permutations));
  cfg.threshold = stats[std::max(idx, 1) - 1];
  return cfg.threshold;
}

}  // namespace ppcd
