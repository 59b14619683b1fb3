#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ppcd/embedding.hpp"
#include "ppcd/rng.hpp"

namespace ppcd {

// Lewis-Shedler thinning on the unit cube: propose Poisson(lambda_max) many
// uniform points, keep each with probability lambda(x)/lambda_max. The caller
// guarantees lambda <= lambda_max; a violated bound is a hard error.
inline PointWindow sample_ppp(const std::function<double(const Eigen::RowVectorXd&)>& lambda,
                              double lambda_max, int dim, std::mt19937_64& rng,
                              std::int64_t index = 0) {
  PointWindow w;
  w.index = index;
  if (!(lambda_max > 0.0)) {
    w.points.resize(0, dim);
    return w;
  }
  std::poisson_distribution<int> count(lambda_max);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const int proposals = count(rng);
  std::vector<Eigen::RowVectorXd> kept;
  Eigen::RowVectorXd x(dim);
  for (int i = 0; i < proposals; ++i) {
    for (int a = 0; a < dim; ++a) x[a] = unif(rng);
    const double value = lambda(x);
    if (value > lambda_max * (1.0 + 1e-9))
      throw std::runtime_error("sample_ppp: intensity exceeds the stated bound");
    if (unif(rng) * lambda_max < value) kept.push_back(x);
  }
  w.points.resize(static_cast<Eigen::Index>(kept.size()), dim);
  for (std::size_t i = 0; i < kept.size(); ++i) w.points.row(static_cast<Eigen::Index>(i)) = kept[i];
  return w;
}

struct Scenario {
  enum class Kind { const_intensity, scenario_3d, scenario_4d, custom };

  Kind kind = Kind::const_intensity;
  std::int64_t n_train = 0;
  std::int64_t n_total = 0;
  std::optional<std::int64_t> change_at;  // windows <= change_at are pre-change
  std::map<std::string, double> params;
  std::uint64_t seed = 0;

  // custom: iid windows with the given intensities, change at change_at
  struct Custom {
    int dim = 1;
    std::function<double(const Eigen::RowVectorXd&)> pre;
    std::function<double(const Eigen::RowVectorXd&)> post;
    double pre_max = 0.0;
    double post_max = 0.0;
  };
  std::optional<Custom> custom;

  double param(const std::string& key, double fallback) const {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
  }

  void validate() const {
    if (n_total < 1 || n_train < 1 || n_train >= n_total)
      throw std::invalid_argument("scenario: need 1 <= n_train < n_total");
    if (change_at && (*change_at <= n_train || *change_at >= n_total))
      throw std::invalid_argument("scenario: change point must satisfy n_train < b < n_total");
  }
};

namespace scen3d {

inline const Eigen::Matrix2d& ar_matrix() {
  static const Eigen::Matrix2d a = (Eigen::Matrix2d() << 0.5, 0.1, 0.1, 0.5).finished();
  return a;
}

inline const Eigen::Vector2d& noise_mean() {
  static const Eigen::Vector2d m(3.0, 1.0);
  return m;
}

inline Eigen::Vector2d stationary_mean() {
  return (Eigen::Matrix2d::Identity() - ar_matrix()).lu().solve(noise_mean());
}

// Stationary covariance of the latent chain, solving S = A S A' + I.
inline Eigen::Matrix2d stationary_cov() {
  // A is symmetric with eigenvectors (1,1)/sqrt2 and (1,-1)/sqrt2.
  const double v_plus = 1.0 / (1.0 - 0.36);
  const double v_minus = 1.0 / (1.0 - 0.16);
  Eigen::Matrix2d s;
  s << 0.5 * (v_plus + v_minus), 0.5 * (v_plus - v_minus), 0.5 * (v_plus - v_minus),
      0.5 * (v_plus + v_minus);
  return s;
}

inline double pre_intensity(const Eigen::RowVectorXd& x, double z1, double z2) {
  double s = 1.0, c = 1.0;
  for (int a = 0; a < 3; ++a) {
    s *= std::sin(x[a]) + 1.0;
    c *= std::cos(x[a]) + 1.0;
  }
  return z1 * s + z2 * c;
}

inline double post_intensity(const Eigen::RowVectorXd& x, double z1, double z2) {
  double e = 1.0, p = 1.0;
  for (int a = 0; a < 3; ++a) {
    e *= std::exp(-x[a] * x[a]);
    p *= x[a];
  }
  return z1 * e + z2 * p;
}

// Valid thinning bounds on [0,1]^3: each pre-change product factor is < 2,
// each post-change factor is <= 1.
inline double pre_bound(double z1, double z2) { return 8.0 * (z1 + z2); }
inline double post_bound(double z1, double z2) { return z1 + z2; }

}  // namespace scen3d

namespace scen4d {

inline double intensity(const Eigen::RowVectorXd& x, double y) {
  double cube = 1.0, expo = 1.0;
  for (int a = 0; a < 4; ++a) {
    cube *= 2.0 * x[a] * x[a] * x[a];
    expo *= 2.0 * std::exp(-x[a]);
  }
  return y * (cube + expo);
}

// Each product term is at most 2^4 = 16 on [0,1]^4.
inline double bound(double y) { return 32.0 * y; }

}  // namespace scen4d

inline constexpr int kLatentBurnIn = 200;

// Generates the full window sequence 1..n_total. All randomness flows from
// scenario.seed through one sub-stream per window (burn-in steps occupy
// stream ids 0..199, window t uses id 199+t).
inline std::vector<PointWindow> generate_stream(const Scenario& s) {
  s.validate();
  std::vector<PointWindow> stream;
  stream.reserve(s.n_total);
  const std::int64_t change = s.change_at.value_or(s.n_total);

  switch (s.kind) {
    case Scenario::Kind::const_intensity: {
      const int dim = static_cast<int>(s.param("dim", 1));
      const double value = s.param("value", 1.0);
      if (dim < 1) throw std::invalid_argument("const_intensity: dim must be >= 1");
      const auto lambda = [value](const Eigen::RowVectorXd&) { return value; };
      for (std::int64_t t = 1; t <= s.n_total; ++t) {
        auto rng = make_engine(split_seed(s.seed, kLatentBurnIn + t - 1));
        stream.push_back(sample_ppp(lambda, value, dim, rng, t));
      }
      break;
    }
    case Scenario::Kind::scenario_3d: {
      // change_scale in (0,1] interpolates the post-change intensity toward
      // the pre-change one; 1 is the full change.
      const double scale = s.param("change_scale", 1.0);
      if (!(scale > 0.0 && scale <= 1.0))
        throw std::invalid_argument("scenario_3d: change_scale must be in (0,1]");
      Eigen::Vector2d z = Eigen::Vector2d::Zero();
      const auto step_latent = [&](std::mt19937_64& rng) {
        // fresh distribution per call: no cached draw crosses sub-streams
        std::normal_distribution<double> gauss(0.0, 1.0);
        Eigen::Vector2d eps = scen3d::noise_mean();
        eps[0] += gauss(rng);
        eps[1] += gauss(rng);
        z = scen3d::ar_matrix() * z + eps;
      };
      for (int b = 0; b < kLatentBurnIn; ++b) {
        auto rng = make_engine(split_seed(s.seed, b));
        step_latent(rng);
      }
      for (std::int64_t t = 1; t <= s.n_total; ++t) {
        auto rng = make_engine(split_seed(s.seed, kLatentBurnIn + t - 1));
        step_latent(rng);
        const double z1 = std::max(z[0], 0.0);
        const double z2 = std::max(z[1], 0.0);
        if (t <= change) {
          const auto lambda = [&](const Eigen::RowVectorXd& x) {
            return scen3d::pre_intensity(x, z1, z2);
          };
          stream.push_back(sample_ppp(lambda, scen3d::pre_bound(z1, z2), 3, rng, t));
        } else {
          const auto lambda = [&](const Eigen::RowVectorXd& x) {
            const double pre = scen3d::pre_intensity(x, z1, z2);
            return pre + scale * (scen3d::post_intensity(x, z1, z2) - pre);
          };
          const double bound =
              (1.0 - scale) * scen3d::pre_bound(z1, z2) + scale * scen3d::post_bound(z1, z2);
          stream.push_back(sample_ppp(lambda, bound, 3, rng, t));
        }
      }
      break;
    }
    case Scenario::Kind::scenario_4d: {
      // y feeds back on the realized count, so generation is strictly
      // sequential.
      double y = 0.0;
      const auto draw_normal = [](std::mt19937_64& rng) {
        std::normal_distribution<double> gauss(0.0, 1.0);
        return gauss(rng);
      };
      for (int b = 0; b < kLatentBurnIn; ++b) {
        auto rng = make_engine(split_seed(s.seed, b));
        const double yp = std::max(y, 0.0);
        const auto lambda = [&](const Eigen::RowVectorXd& x) { return scen4d::intensity(x, yp); };
        const PointWindow w = sample_ppp(lambda, scen4d::bound(yp), 4, rng, 0);
        y = 0.1 * w.count() + 8.0 + draw_normal(rng);
      }
      for (std::int64_t t = 1; t <= s.n_total; ++t) {
        auto rng = make_engine(split_seed(s.seed, kLatentBurnIn + t - 1));
        const double yp = std::max(y, 0.0);
        const auto lambda = [&](const Eigen::RowVectorXd& x) { return scen4d::intensity(x, yp); };
        stream.push_back(sample_ppp(lambda, scen4d::bound(yp), 4, rng, t));
        const double drift = t <= change ? 8.0 : 4.0;
        y = 0.1 * stream.back().count() + drift + draw_normal(rng);
      }
      break;
    }
    case Scenario::Kind::custom: {
      if (!s.custom) throw std::invalid_argument("scenario: custom spec missing");
      const Scenario::Custom& c = *s.custom;
      for (std::int64_t t = 1; t <= s.n_total; ++t) {
        auto rng = make_engine(split_seed(s.seed, kLatentBurnIn + t - 1));
        if (t <= change)
          stream.push_back(sample_ppp(c.pre, c.pre_max, c.dim, rng, t));
        else
          stream.push_back(sample_ppp(c.post, c.post_max, c.dim, rng, t));
      }
      break;
    }
  }
  return stream;
}

inline int scenario_dim(const Scenario& s) {
  switch (s.kind) {
    case Scenario::Kind::const_intensity:
      return static_cast<int>(s.param("dim", 1));
    case Scenario::Kind::scenario_3d:
      return 3;
    case Scenario::Kind::scenario_4d:
      return 4;
    case Scenario::Kind::custom:
      return s.custom ? s.custom->dim : 1;
  }
  return 1;
}

}  // namespace ppcd
