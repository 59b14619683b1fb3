#include "ppcd/embedding.hpp"

#include <cmath>

#include <gtest/gtest.h>

#include "ppcd/legendre.hpp"
#include "ppcd/ppp_sim.hpp"
#include "ppcd/quadrature.hpp"
#include "ppcd/rng.hpp"

using namespace ppcd;

namespace {

PointWindow make_window(std::int64_t index, std::initializer_list<std::initializer_list<double>> pts) {
  PointWindow w;
  w.index = index;
  const int d = pts.size() > 0 ? static_cast<int>(pts.begin()->size()) : 0;
  w.points.resize(static_cast<Eigen::Index>(pts.size()), d);
  Eigen::Index i = 0;
  for (const auto& row : pts) {
    int a = 0;
    for (double v : row) w.points(i, a++) = v;
    ++i;
  }
  return w;
}

}  // namespace

TEST(EmbedWindow, EmptyWindowIsZero) {
  PointWindow w;
  w.index = 1;
  w.points.resize(0, 3);
  const IntensityMatrix m = embed_window(w, CoordinateSplit::leading(2, 3), 2);
  EXPECT_EQ(m.rows(), 4);
  EXPECT_EQ(m.cols(), 2);
  EXPECT_EQ(m.norm(), 0.0);
}

TEST(EmbedWindow, CenterPointKillsSecondBasis) {
  const PointWindow w = make_window(1, {{0.5, 0.5, 0.5}});
  const IntensityMatrix m = embed_window(w, CoordinateSplit::leading(2, 3), 2);
  EXPECT_NEAR(m(0, 0), 1.0, 1e-14);
  // every entry with a phi_2 factor vanishes at the center point
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      if (r != 0 || c != 0) EXPECT_NEAR(m(r, c), 0.0, 1e-14);
}

TEST(EmbedWindow, AdditiveOverPoints) {
  const PointWindow one = make_window(1, {{0.3, 0.8, 0.1}});
  const PointWindow two = make_window(1, {{0.3, 0.8, 0.1}, {0.3, 0.8, 0.1}});
  const CoordinateSplit split = CoordinateSplit::leading(2, 3);
  const IntensityMatrix m1 = embed_window(one, split, 3);
  const IntensityMatrix m2 = embed_window(two, split, 3);
  EXPECT_NEAR((m2 - 2.0 * m1).norm(), 0.0, 0.0);  // exact additivity
}

TEST(EmbedWindow, DisjointUnionLinearity) {
  const PointWindow a = make_window(1, {{0.1, 0.2, 0.9}, {0.4, 0.4, 0.4}});
  const PointWindow b = make_window(1, {{0.8, 0.05, 0.6}});
  PointWindow both = make_window(1, {{0.1, 0.2, 0.9}, {0.4, 0.4, 0.4}, {0.8, 0.05, 0.6}});
  const CoordinateSplit split = CoordinateSplit::leading(1, 3);
  const IntensityMatrix sum = embed_window(a, split, 3) + embed_window(b, split, 3);
  EXPECT_EQ((embed_window(both, split, 3) - sum).norm(), 0.0);
}

TEST(EmbedWindow, DimensionMismatchThrows) {
  const PointWindow w = make_window(1, {{0.5, 0.5}});
  EXPECT_THROW(embed_window(w, CoordinateSplit::leading(2, 3), 2), std::invalid_argument);
}

TEST(EmbedWindow, MatchesTensorEvalDefinition) {
  // entry (mu, eta) = sum over points of Phi_mu(y) Psi_eta(z)
  const PointWindow w = make_window(1, {{0.12, 0.77, 0.31}, {0.9, 0.02, 0.55}});
  const CoordinateSplit split = CoordinateSplit::leading(2, 3);
  const int M = 3;
  const IntensityMatrix m = embed_window(w, split, M);
  for (std::int64_t mu = 1; mu <= 9; ++mu)
    for (std::int64_t eta = 1; eta <= 3; ++eta) {
      double expected = 0.0;
      for (int i = 0; i < w.count(); ++i) {
        const MultiIndex yidx = unflatten(mu, M, 2);
        const MultiIndex zidx = unflatten(eta, M, 1);
        expected += eval_tensor(yidx, {w.points(i, 0), w.points(i, 1)}) *
                    eval_tensor(zidx, {w.points(i, 2)});
      }
      EXPECT_NEAR(m(mu - 1, eta - 1), expected, 1e-12);
    }
}

TEST(PopulationMatrix, ConstantIntensity) {
  const auto lambda = [](const Eigen::RowVectorXd&) { return 5.0; };
  const IntensityMatrix m = population_matrix(lambda, CoordinateSplit::leading(2, 3), 3, 32);
  EXPECT_NEAR(m(0, 0), 5.0, 1e-10);
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      if (r != 0 || c != 0) EXPECT_NEAR(m(r, c), 0.0, 1e-10);
}

TEST(PopulationMatrix, SingleBasisBump) {
  // lambda = 1 + 0.5 phi_2(x1) phi_2(x2) phi_2(x3): only entries (1,1) and
  // (flatten((2,2)), 2) survive by orthonormality
  const auto lambda = [](const Eigen::RowVectorXd& x) {
    return 1.0 + 0.5 * eval_univariate(2, x[0]) * eval_univariate(2, x[1]) *
                     eval_univariate(2, x[2]);
  };
  const IntensityMatrix m = population_matrix(lambda, CoordinateSplit::leading(2, 3), 2, 32);
  EXPECT_NEAR(m(0, 0), 1.0, 1e-10);
  EXPECT_NEAR(m(3, 1), 0.5, 1e-10);  // flatten((2,2),M=2)=4, eta=2
  for (Eigen::Index r = 0; r < 4; ++r)
    for (Eigen::Index c = 0; c < 2; ++c)
      if (!(r == 0 && c == 0) && !(r == 3 && c == 1)) EXPECT_NEAR(m(r, c), 0.0, 1e-10);
}

TEST(PopulationMatrix, QuadOrderValidation) {
  EXPECT_THROW(
      population_matrix([](const Eigen::RowVectorXd&) { return 1.0; },
                        CoordinateSplit::leading(1, 2), 2, 1),
      std::invalid_argument);
}

// Monte Carlo oracle via Campbell's theorem: the entrywise mean of embedded
// PPP windows estimates the population matrix.
TEST(PopulationMatrix, MonteCarloAgreement3dPreChange) {
  const auto lambda = [](const Eigen::RowVectorXd& x) {
    return scen3d::pre_intensity(x, 1.0, 1.0);
  };
  const CoordinateSplit split = CoordinateSplit::leading(2, 3);
  const int M = 3;
  const IntensityMatrix pop = population_matrix(lambda, split, M, 32);
  const int n = 20000;
  IntensityMatrix mean = IntensityMatrix::Zero(9, 3);
  IntensityMatrix sq = IntensityMatrix::Zero(9, 3);
  auto rng = make_engine(20240511);
  for (int i = 0; i < n; ++i) {
    const PointWindow w = sample_ppp(lambda, 16.0, 3, rng, i + 1);
    const IntensityMatrix e = embed_window(w, split, M);
    mean += e;
    sq += e.cwiseProduct(e);
  }
  mean /= n;
  sq /= n;
  for (Eigen::Index r = 0; r < 9; ++r)
    for (Eigen::Index c = 0; c < 3; ++c) {
      const double sd = std::sqrt(std::max(sq(r, c) - mean(r, c) * mean(r, c), 0.0));
      const double se = sd / std::sqrt(static_cast<double>(n));
      EXPECT_NEAR(mean(r, c), pop(r, c), 4.0 * se + 1e-12) << "entry " << r << "," << c;
    }
}

TEST(PopulationMatrix, CampbellUnbiasedness2d) {
  const auto lambda = [](const Eigen::RowVectorXd& x) {
    return 2.0 + 0.5 * eval_univariate(2, x[0]);
  };
  const double bound = 2.0 + 0.5 * std::sqrt(3.0);
  const CoordinateSplit split = CoordinateSplit::leading(1, 2);
  const IntensityMatrix pop = population_matrix(lambda, split, 3, 32);
  const int n = 2000;
  IntensityMatrix mean = IntensityMatrix::Zero(3, 3);
  IntensityMatrix sq = IntensityMatrix::Zero(3, 3);
  auto rng = make_engine(7);
  for (int i = 0; i < n; ++i) {
    const auto lam2 = [&](const Eigen::RowVectorXd& x) { return lambda(x); };
    const PointWindow w = sample_ppp(lam2, bound, 2, rng, i + 1);
    const IntensityMatrix e = embed_window(w, split, 3);
    mean += e;
    sq += e.cwiseProduct(e);
  }
  mean /= n;
  sq /= n;
  for (Eigen::Index r = 0; r < 3; ++r)
    for (Eigen::Index c = 0; c < 3; ++c) {
      const double sd = std::sqrt(std::max(sq(r, c) - mean(r, c) * mean(r, c), 0.0));
      EXPECT_NEAR(mean(r, c), pop(r, c), 4.0 * sd / std::sqrt(static_cast<double>(n)) + 1e-12);
    }
}

// Truncation error of the basis expansion is nonincreasing in M for a smooth
// intensity; computed by direct quadrature of (lambda - lambda_M)^2.
TEST(PopulationMatrix, ApproximationErrorDecays) {
  const auto lambda = [](const Eigen::RowVectorXd& x) {
    double p = 1.0;
    for (int a = 0; a < 3; ++a) p *= std::sin(x[a]) + 1.0;
    return p;
  };
  const CoordinateSplit split = CoordinateSplit::leading(2, 3);
  double prev = std::numeric_limits<double>::infinity();
  for (int M = 1; M <= 6; ++M) {
    const IntensityMatrix coeff = population_matrix(lambda, split, M, 24);
    const double err_sq = integrate_unit_cube(
        [&](const Eigen::RowVectorXd& x) {
          Eigen::VectorXd phi, psi;
          tensor_basis_values(x, split.group_y, M, phi);
          tensor_basis_values(x, split.group_z, M, psi);
          const double approx = phi.dot(coeff * psi);
          const double diff = lambda(x) - approx;
          return diff * diff;
        },
        3, 24);
    const double err = std::sqrt(std::max(err_sq, 0.0));
    EXPECT_LE(err, prev + 1e-10) << "M=" << M;
    prev = err;
  }
  EXPECT_LT(prev, 1e-4);  // smooth intensity: error is tiny by M=6
}

TEST(Rescale, StatedExamples) {
  Eigen::MatrixXd raw(3, 1);
  raw << 5.0, -1.0, 0.0;
  const std::vector<CoordinateRange> ranges{{0.0, 10.0}};
  const Eigen::MatrixXd scaled = rescale_events(raw, ranges);
  EXPECT_DOUBLE_EQ(scaled(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(scaled(1, 0), 0.0);  // clamped
  EXPECT_DOUBLE_EQ(scaled(2, 0), 0.0);  // raw == min
}

TEST(Rescale, DegenerateRangeThrows) {
  Eigen::MatrixXd raw(1, 1);
  raw << 1.0;
  EXPECT_THROW(rescale_events(raw, {{2.0, 2.0}}), std::invalid_argument);
}

TEST(Rescale, TrainingRangesComeFromData) {
  std::vector<PointWindow> training{make_window(1, {{2.0, -1.0}}), make_window(2, {{4.0, 3.0}})};
  const auto ranges = training_ranges(training);
  EXPECT_DOUBLE_EQ(ranges[0].lo, 2.0);
  EXPECT_DOUBLE_EQ(ranges[0].hi, 4.0);
  EXPECT_DOUBLE_EQ(ranges[1].lo, -1.0);
  EXPECT_DOUBLE_EQ(ranges[1].hi, 3.0);
}
