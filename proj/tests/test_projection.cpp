#include <random>

#include <gtest/gtest.h>

#include "cspecon/projection.hpp"
#include "support/oracles.hpp"

using namespace cspecon;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

}  // namespace

TEST(Projection, FeasiblePointUnchanged) {
  const auto raw = vec({0.5, 1.5, 1.0, 1.0});
  EXPECT_LT((project_prices(raw, 0.01) - raw).cwiseAbs().maxCoeff(), 1e-15);
  const auto edge = vec({2.0, 0.0});
  EXPECT_LT((project_prices(edge, 0.0) - edge).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Projection, ClampsAtFloorAgainstGridOracle) {
  const auto q = project_prices(vec({3.0, 1.0}), 0.01);
  const auto ref = oracle::grid_project_2d(3.0, 1.0, 0.01);
  EXPECT_NEAR(q[0], ref[0], 1e-5);
  EXPECT_NEAR(q[1], ref[1], 1e-5);
  EXPECT_NEAR(q[0], 1.99, 1e-12);
  EXPECT_NEAR(q[1], 0.01, 1e-12);
}

TEST(Projection, RejectsInfeasibleFloor) {
  EXPECT_THROW(project_prices(vec({1, 1}), 1.0), InvalidParams);
  EXPECT_THROW(project_prices_bisection(vec({1, 1}), 1.5), InvalidParams);
}

TEST(Projection, SortAndBisectionAgree) {
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> floor(0.0, 0.5);
  std::uniform_int_distribution<int> dim(2, 60);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = dim(gen);
    const double x_m = trial % 5 == 0 ? 0.0 : floor(gen);
    const Eigen::VectorXd raw = oracle::random_matrix(gen, n, 1, 3.0).col(0);
    const auto a = project_prices(raw, x_m);
    const auto b = project_prices_bisection(raw, x_m);
    EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_TRUE(is_feasible(a, x_m));
  }
}

TEST(Projection, IsNearestFeasiblePoint) {
  // Against random feasible competitors and the variational inequality
  // (raw - q) . (y - q) <= 0 for feasible y.
  std::mt19937_64 gen(23);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + trial % 8;
    const double x_m = 0.05;
    const Eigen::VectorXd raw = oracle::random_matrix(gen, n, 1, 2.0).col(0);
    const auto q = project_prices(raw, x_m);
    const double d = (q - raw).squaredNorm();
    for (int k = 0; k < 50; ++k) {
      const auto y = oracle::random_feasible(gen, n, x_m);
      EXPECT_LE(d, (y - raw).squaredNorm() + 1e-12);
      EXPECT_LE((raw - q).dot(y - q), 1e-10);
    }
  }
}

TEST(Projection, Idempotent) {
  std::mt19937_64 gen(29);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::VectorXd raw = oracle::random_matrix(gen, 12, 1, 4.0).col(0);
    const auto q = project_prices(raw, 0.01);
    EXPECT_LT((project_prices(q, 0.01) - q).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Projection, Feasibility) {
  EXPECT_TRUE(is_feasible(vec({1, 1}), 0.01));
  EXPECT_FALSE(is_feasible(vec({1.5, 1}), 0.01));
  EXPECT_FALSE(is_feasible(vec({2.0, 0.0}), 0.01));
  EXPECT_TRUE(is_feasible(vec({1.99, 0.01}), 0.01));
}
