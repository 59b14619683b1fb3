#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "ppcd/legendre.hpp"

namespace ppcd {

// Gauss-Legendre rule mapped to [0,1].
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

inline QuadratureRule gauss_legendre(int order) {
  if (order < 2) throw std::invalid_argument("gauss_legendre: order must be >= 2");
  QuadratureRule rule;
  rule.nodes.resize(order);
  rule.weights.resize(order);
  const int n = order;
  for (int i = 0; i < n; ++i) {
    // Newton iteration from the Chebyshev-based initial guess.
    double t = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      const double p = legendre_classical(n, t);
      const double pm1 = legendre_classical(n - 1, t);
      dp = n * (t * p - pm1) / (t * t - 1.0);
      const double step = p / dp;
      t -= step;
      if (std::abs(step) < 1e-15) break;
    }
    const double w = 2.0 / ((1.0 - t * t) * dp * dp);
    rule.nodes[n - 1 - i] = 0.5 * (t + 1.0);
    rule.weights[n - 1 - i] = 0.5 * w;
  }
  return rule;
}

// integral of f over [0,1]
inline double integrate_unit(const std::function<double(double)>& f, int order) {
  const QuadratureRule rule = gauss_legendre(order);
  double sum = 0.0;
  for (int i = 0; i < order; ++i) sum += rule.weights[i] * f(rule.nodes[i]);
  return sum;
}

// Tensor-product quadrature of f over [0,1]^dim.
inline double integrate_unit_cube(const std::function<double(const Eigen::RowVectorXd&)>& f,
                                  int dim, int order) {
  const QuadratureRule rule = gauss_legendre(order);
  Eigen::RowVectorXd x(dim);
  std::vector<int> pos(dim, 0);
  double sum = 0.0;
  while (true) {
    double w = 1.0;
    for (int a = 0; a < dim; ++a) {
      x[a] = rule.nodes[pos[a]];
      w *= rule.weights[pos[a]];
    }
    sum += w * f(x);
    int a = 0;
    for (; a < dim; ++a) {
      if (++pos[a] < order) break;
      pos[a] = 0;
    }
    if (a == dim) break;
  }
  return sum;
}

}  // namespace ppcd
