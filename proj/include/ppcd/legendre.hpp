#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ppcd {

// Orthonormal shifted Legendre basis on [0,1]:
//
//   phi_k(x) = sqrt(2k-1) * P_{k-1}(2x-1),   k >= 1,
//
// where P_n is the classical Legendre polynomial, evaluated by the Bonnet
// three-term recurrence. phi_1 is the constant function, so the family
// satisfies  int_0^1 phi_k = 1{k=1}  and  int_0^1 phi_i phi_j = 1{i=j}.

inline constexpr double kDomainTol = 1e-12;

// Classical P_n on [-1,1].
inline double legendre_classical(int n, double t) {
  if (n == 0) return 1.0;
  double prev = 1.0;
  double cur = t;
  for (int l = 2; l <= n; ++l) {
    const double next = ((2.0 * l - 1.0) * t * cur - (l - 1.0) * prev) / l;
    prev = cur;
    cur = next;
  }
  return cur;
}

inline double eval_univariate(int k, double x) {
  if (k < 1) throw std::invalid_argument("legendre: basis index must be >= 1");
  if (x < -kDomainTol || x > 1.0 + kDomainTol)
    throw std::domain_error("legendre: point outside [0,1]: " + std::to_string(x));
  if (x < 0.0) x = 0.0;
  if (x > 1.0) x = 1.0;
  return std::sqrt(2.0 * k - 1.0) * legendre_classical(k - 1, 2.0 * x - 1.0);
}

// Fills out[0..M-1] with phi_1(x)..phi_M(x) in one recurrence pass.
inline void eval_univariate_all(int M, double x, double* out) {
  if (M < 1) throw std::invalid_argument("legendre: basis size must be >= 1");
  if (x < -kDomainTol || x > 1.0 + kDomainTol)
    throw std::domain_error("legendre: point outside [0,1]: " + std::to_string(x));
  if (x < 0.0) x = 0.0;
  if (x > 1.0) x = 1.0;
  const double t = 2.0 * x - 1.0;
  double prev = 1.0;
  double cur = t;
  out[0] = 1.0;
  if (M >= 2) out[1] = std::sqrt(3.0) * t;
  for (int k = 3; k <= M; ++k) {
    const int n = k - 1;  // P_n needed for phi_k
    const double next = ((2.0 * n - 1.0) * t * cur - (n - 1.0) * prev) / n;
    prev = cur;
    cur = next;
    out[k - 1] = std::sqrt(2.0 * k - 1.0) * cur;
  }
}

inline std::int64_t ipow(std::int64_t base, int exp) {
  std::int64_t out = 1;
  for (int i = 0; i < exp; ++i) out *= base;
  return out;
}

// Multi-index over one coordinate group; entries are 1-based basis indices.
struct MultiIndex {
  std::vector<int> entries;

  int group_size() const { return static_cast<int>(entries.size()); }
};

// Canonical flat ordering: lexicographic with the first coordinate fastest,
//   flat = sum_j (entries[j]-1) * M^(j-1) + 1,
// a bijection onto [1, M^group_size].
inline std::int64_t flatten(const MultiIndex& idx, int M) {
  if (M < 1) throw std::invalid_argument("flatten: basis size must be >= 1");
  std::int64_t flat = 0;
  std::int64_t stride = 1;
  for (int e : idx.entries) {
    if (e < 1 || e > M) throw std::out_of_range("flatten: index entry outside [1, M]");
    flat += static_cast<std::int64_t>(e - 1) * stride;
    stride *= M;
  }
  return flat + 1;
}

inline MultiIndex unflatten(std::int64_t flat, int M, int group_size) {
  if (M < 1 || group_size < 1) throw std::invalid_argument("unflatten: bad sizes");
  std::int64_t total = 1;
  for (int j = 0; j < group_size; ++j) total *= M;
  if (flat < 1 || flat > total) throw std::out_of_range("unflatten: flat index out of range");
  MultiIndex idx;
  idx.entries.resize(group_size);
  std::int64_t rem = flat - 1;
  for (int j = 0; j < group_size; ++j) {
    idx.entries[j] = static_cast<int>(rem % M) + 1;
    rem /= M;
  }
  return idx;
}

inline double eval_tensor(const MultiIndex& idx, const std::vector<double>& point) {
  if (idx.entries.size() != point.size())
    throw std::invalid_argument("eval_tensor: dimension mismatch");
  double prod = 1.0;
  for (std::size_t j = 0; j < point.size(); ++j) prod *= eval_univariate(idx.entries[j], point[j]);
  return prod;
}

}  // namespace ppcd
