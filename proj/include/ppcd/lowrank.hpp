#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "ppcd/legendre.hpp"

namespace ppcd {

struct SvdResult {
  Eigen::MatrixXd left;                 // columns are left singular vectors
  Eigen::MatrixXd right;                // columns are right singular vectors
  Eigen::VectorXd singular_values;      // nonincreasing, >= 0
};

inline void require_finite(const Eigen::MatrixXd& m, const char* what) {
  if (!m.allFinite()) throw std::invalid_argument(std::string(what) + ": non-finite entries");
}

inline SvdResult svd(const Eigen::MatrixXd& m) {
  require_finite(m, "svd");
  Eigen::JacobiSVD<Eigen::MatrixXd> dec(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return SvdResult{dec.matrixU(), dec.matrixV(), dec.singularValues()};
}

inline Eigen::VectorXd singular_values(const Eigen::MatrixXd& m) {
  require_finite(m, "singular_values");
  Eigen::JacobiSVD<Eigen::MatrixXd> dec(m);
  return dec.singularValues();
}

inline double frobenius(const Eigen::MatrixXd& m) {
  require_finite(m, "frobenius");
  return m.norm();
}

inline double operator_norm(const Eigen::MatrixXd& m) {
  const Eigen::VectorXd sv = singular_values(m);
  return sv.size() > 0 ? sv[0] : 0.0;
}

// Best rank-min(r, rank(D)) approximation.
inline Eigen::MatrixXd truncated_svd(const Eigen::MatrixXd& d, int r) {
  if (r < 1) throw std::invalid_argument("truncated_svd: rank must be >= 1");
  const SvdResult dec = svd(d);
  const int keep = std::min<int>(r, static_cast<int>(dec.singular_values.size()));
  return dec.left.leftCols(keep) * dec.singular_values.head(keep).asDiagonal() *
         dec.right.leftCols(keep).transpose();
}

// Frobenius mass of the rank-r truncation, sqrt(sum of the top r squared
// singular values).
inline double rank_r_frobenius(const Eigen::MatrixXd& d, int r) {
  if (r < 1) throw std::invalid_argument("rank_r_frobenius: rank must be >= 1");
  const Eigen::VectorXd sv = singular_values(d);
  const int keep = std::min<int>(r, static_cast<int>(sv.size()));
  double sum = 0.0;
  for (int k = 0; k < keep; ++k) sum += sv[k] * sv[k];
  return std::sqrt(sum);
}

// ceil(x^(1/e)) with a small slack so exact integer powers do not round up,
// e.g. 64^(1/6) must give 2, not 3.
inline int adaptive_ceil_root(double x, double inv_exponent) {
  if (!(x > 0.0)) throw std::invalid_argument("adaptive_ceil_root: argument must be positive");
  const double t = std::pow(x, inv_exponent);
  const int m = static_cast<int>(std::ceil(t - 1e-9));
  return std::max(m, 1);
}

// Adaptive basis cut of the restricted SVD: m = ceil((n2/r)^{1/(2*gamma+pq_max)}).
inline int adaptive_basis_cut(std::int64_t n2, int r, double gamma, int pq_max) {
  if (n2 < 1) throw std::invalid_argument("adaptive_basis_cut: n2 must be >= 1");
  if (r < 1) throw std::invalid_argument("adaptive_basis_cut: rank must be >= 1");
  if (!(gamma > 0.0)) throw std::invalid_argument("adaptive_basis_cut: gamma must be > 0");
  return adaptive_ceil_root(static_cast<double>(n2) / r, 1.0 / (2.0 * gamma + pq_max));
}

// Recovers M from a matrix of shape M^p x M^q.
inline int infer_basis_size(const Eigen::MatrixXd& d, int p, int q) {
  const int M = adaptive_ceil_root(static_cast<double>(d.rows()), 1.0 / p);
  if (ipow(M, p) != d.rows() || ipow(M, q) != d.cols())
    throw std::invalid_argument("infer_basis_size: matrix shape is not M^p x M^q");
  return M;
}

// Flat indices (0-based) of rows/columns whose multi-index has every entry <= m.
inline std::vector<std::int64_t> kept_flat_indices(int m, int M, int group_size) {
  std::vector<std::int64_t> kept;
  kept.reserve(ipow(m, group_size));
  std::vector<int> idx(group_size, 1);
  while (true) {
    std::int64_t flat = 0;
    std::int64_t stride = 1;
    for (int j = 0; j < group_size; ++j) {
      flat += static_cast<std::int64_t>(idx[j] - 1) * stride;
      stride *= M;
    }
    kept.push_back(flat);
    int j = 0;
    for (; j < group_size; ++j) {
      if (++idx[j] <= m) break;
      idx[j] = 1;
    }
    if (j == group_size) break;
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

// Zeroes every row/column whose multi-index has an entry beyond the cut.
inline Eigen::MatrixXd trim_to_basis(const Eigen::MatrixXd& d, int m, int p, int q) {
  const int M = infer_basis_size(d, p, q);
  if (m >= M) return d;
  if (m < 1) throw std::invalid_argument("trim_to_basis: cut must be >= 1");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(d.rows(), d.cols());
  for (std::int64_t mu : kept_flat_indices(m, M, p))
    for (std::int64_t eta : kept_flat_indices(m, M, q)) out(mu, eta) = d(mu, eta);
  return out;
}

// Restricted SVD score: adaptively trim to basis cut m (capped at M), then
// return the Frobenius mass of the rank-r truncation of the trimmed matrix.
// The trimmed matrix and its kept m^p x m^q block share nonzero singular
// values, so the score is computed on the extracted block.
inline double restricted_svd_score(const Eigen::MatrixXd& d, int r, std::int64_t n2, int p, int q,
                                   double gamma) {
  require_finite(d, "restricted_svd_score");
  if (r < 1) throw std::invalid_argument("restricted_svd_score: rank must be >= 1");
  const int M = infer_basis_size(d, p, q);
  const int m = std::min(adaptive_basis_cut(n2, r, gamma, std::max(p, q)), M);
  if (m >= M) return rank_r_frobenius(d, r);
  const std::vector<std::int64_t> rows = kept_flat_indices(m, M, p);
  const std::vector<std::int64_t> cols = kept_flat_indices(m, M, q);
  Eigen::MatrixXd block(rows.size(), cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j) block(i, j) = d(rows[i], cols[j]);
  return rank_r_frobenius(block, r);
}

}  // namespace ppcd
