#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "ppcd/legendre.hpp"
#include "ppcd/quadrature.hpp"

namespace ppcd {

// One time-indexed observation: a finite point set in [0,1]^d, one row per point.
struct PointWindow {
  std::int64_t index = 0;
  Eigen::MatrixXd points;  // n x d

  int count() const { return static_cast<int>(points.rows()); }
  int dim() const { return static_cast<int>(points.cols()); }
};

// Partition of the d coordinates into the row group (y) and column group (z).
struct CoordinateSplit {
  std::vector<int> group_y;  // 0-based coordinate positions
  std::vector<int> group_z;

  int p() const { return static_cast<int>(group_y.size()); }
  int q() const { return static_cast<int>(group_z.size()); }
  int dim() const { return p() + q(); }
  int pq_max() const { return std::max(p(), q()); }

  // first p coordinates vs the rest
  static CoordinateSplit leading(int p, int d) {
    CoordinateSplit s;
    for (int a = 0; a < p; ++a) s.group_y.push_back(a);
    for (int a = p; a < d; ++a) s.group_z.push_back(a);
    s.validate(d);
    return s;
  }

  void validate(int d) const {
    if (group_y.empty() || group_z.empty())
      throw std::invalid_argument("split: both coordinate groups must be nonempty");
    std::vector<char> seen(d, 0);
    for (int a : group_y) {
      if (a < 0 || a >= d || seen[a]) throw std::invalid_argument("split: bad row-group coordinate");
      seen[a] = 1;
    }
    for (int a : group_z) {
      if (a < 0 || a >= d || seen[a]) throw std::invalid_argument("split: bad column-group coordinate");
      seen[a] = 1;
    }
    for (int a = 0; a < d; ++a)
      if (!seen[a]) throw std::invalid_argument("split: coordinate missing from both groups");
  }
};

using IntensityMatrix = Eigen::MatrixXd;

// Tensor-product basis values over one coordinate group, in canonical flat
// order (first coordinate fastest). out has length M^|group|.
inline void tensor_basis_values(const Eigen::RowVectorXd& point, const std::vector<int>& group,
                                int M, Eigen::VectorXd& out) {
  const int g = static_cast<int>(group.size());
  std::vector<double> phi(M);
  out.resize(ipow(M, g));
  out[0] = 1.0;
  std::int64_t len = 1;
  for (int j = 0; j < g; ++j) {
    eval_univariate_all(M, point[group[j]], phi.data());
    for (int k = M - 1; k >= 0; --k)
      for (std::int64_t a = len - 1; a >= 0; --a) out[k * len + a] = out[a] * phi[k];
    len *= M;
  }
}

// Empirical intensity matrix of one window: entry (mu,eta) sums
// Phi_mu(y) * Psi_eta(z) over the window's points. Empty window -> zero matrix.
inline IntensityMatrix embed_window(const PointWindow& w, const CoordinateSplit& split, int M) {
  if (M < 1) throw std::invalid_argument("embed_window: basis size must be >= 1");
  const int d = split.dim();
  if (w.count() > 0 && w.dim() != d)
    throw std::invalid_argument("embed_window: point dimension does not match split");
  IntensityMatrix out = IntensityMatrix::Zero(ipow(M, split.p()), ipow(M, split.q()));
  Eigen::VectorXd phi_y, psi_z;
  for (int i = 0; i < w.count(); ++i) {
    tensor_basis_values(w.points.row(i), split.group_y, M, phi_y);
    tensor_basis_values(w.points.row(i), split.group_z, M, psi_z);
    out.noalias() += phi_y * psi_z.transpose();
  }
  return out;
}

// 1D analogue: vector of univariate basis coefficients.
inline Eigen::VectorXd embed_window_1d(const PointWindow& w, int M) {
  if (M < 1) throw std::invalid_argument("embed_window_1d: basis size must be >= 1");
  if (w.count() > 0 && w.dim() != 1)
    throw std::invalid_argument("embed_window_1d: expected 1-dimensional points");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(M);
  std::vector<double> phi(M);
  for (int i = 0; i < w.count(); ++i) {
    eval_univariate_all(M, w.points(i, 0), phi.data());
    for (int k = 0; k < M; ++k) out[k] += phi[k];
  }
  return out;
}

// Population matrix of an intensity: entry (mu,eta) is the tensor-product
// Gauss-Legendre quadrature of lambda(y,z) Phi_mu(y) Psi_eta(z) over the
// unit cube. Test/calibration oracle; never on the streaming path.
inline IntensityMatrix population_matrix(
    const std::function<double(const Eigen::RowVectorXd&)>& lambda, const CoordinateSplit& split,
    int M, int quad_order) {
  if (quad_order < 2) throw std::invalid_argument("population_matrix: quad_order must be >= 2");
  const int d = split.dim();
  const QuadratureRule rule = gauss_legendre(quad_order);
  IntensityMatrix out = IntensityMatrix::Zero(ipow(M, split.p()), ipow(M, split.q()));
  Eigen::RowVectorXd x(d);
  std::vector<int> pos(d, 0);
  Eigen::VectorXd phi_y, psi_z;
  while (true) {
    double w = 1.0;
    for (int a = 0; a < d; ++a) {
      x[a] = rule.nodes[pos[a]];
      w *= rule.weights[pos[a]];
    }
    tensor_basis_values(x, split.group_y, M, phi_y);
    tensor_basis_values(x, split.group_z, M, psi_z);
    out.noalias() += (w * lambda(x)) * (phi_y * psi_z.transpose());
    int a = 0;
    for (; a < d; ++a) {
      if (++pos[a] < quad_order) break;
      pos[a] = 0;
    }
    if (a == d) break;
  }
  return out;
}

// Per-coordinate affine rescale into [0,1], statistics frozen from training.
struct CoordinateRange {
  double lo = 0.0;
  double hi = 1.0;
};

inline std::vector<CoordinateRange> training_ranges(const std::vector<PointWindow>& training) {
  std::vector<CoordinateRange> ranges;
  for (const PointWindow& w : training) {
    if (w.count() == 0) continue;
    if (ranges.empty())
      ranges.assign(w.dim(), CoordinateRange{std::numeric_limits<double>::infinity(),
                                             -std::numeric_limits<double>::infinity()});
    for (int i = 0; i < w.count(); ++i)
      for (int a = 0; a < w.dim(); ++a) {
        ranges[a].lo = std::min(ranges[a].lo, w.points(i, a));
        ranges[a].hi = std::max(ranges[a].hi, w.points(i, a));
      }
  }
  if (ranges.empty()) throw std::invalid_argument("training_ranges: no training points");
  for (const CoordinateRange& r : ranges)
    if (!(r.hi > r.lo)) throw std::invalid_argument("training_ranges: degenerate coordinate range");
  return ranges;
}

// Values outside [0,1] after mapping are clamped.
inline Eigen::MatrixXd rescale_events(const Eigen::MatrixXd& raw,
                                      const std::vector<CoordinateRange>& ranges) {
  if (raw.cols() != static_cast<Eigen::Index>(ranges.size()))
    throw std::invalid_argument("rescale_events: dimension mismatch");
  Eigen::MatrixXd out(raw.rows(), raw.cols());
  for (Eigen::Index a = 0; a < raw.cols(); ++a) {
    const double lo = ranges[a].lo, hi = ranges[a].hi;
    if (!(hi > lo)) throw std::invalid_argument("rescale_events: degenerate range");
    for (Eigen::Index i = 0; i < raw.rows(); ++i)
      out(i, a) = std::clamp((raw(i, a) - lo) / (hi - lo), 0.0, 1.0);
  }
  return out;
}

}  // namespace ppcd
