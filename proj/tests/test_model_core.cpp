#include <cmath>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "cspecon/economy.hpp"
#include "cspecon/rng.hpp"
#include "support/oracles.hpp"

using namespace cspecon;

namespace {

PreferenceMatrix rows(std::initializer_list<std::initializer_list<double>> r) {
  PreferenceMatrix m(static_cast<Eigen::Index>(r.size()),
                     static_cast<Eigen::Index>(r.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& row : r) {
    Eigen::Index j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

}  // namespace

TEST(Params, DefaultsAreValid) {
  ModelParams p;
  EXPECT_NO_THROW(p.validate());
  EXPECT_DOUBLE_EQ(p.alpha(), 10.0);
  EXPECT_DOUBLE_EQ(p.pref_std(), 0.1);
  p.pref_scale = 1.0;
  EXPECT_DOUBLE_EQ(p.pref_std(), 1.0);
}

TEST(Params, RejectsInvalid) {
  auto bad = [](auto mutate) {
    ModelParams p;
    mutate(p);
    EXPECT_THROW(p.validate(), InvalidParams);
  };
  bad([](ModelParams& p) { p.x_m = 1.0; });
  bad([](ModelParams& p) { p.x_m = -0.1; });
  bad([](ModelParams& p) { p.n_goods = 1; });
  bad([](ModelParams& p) { p.n_agents = 0; });
  bad([](ModelParams& p) { p.omega = 0.0; });
  bad([](ModelParams& p) { p.omega = 1.5; });
  bad([](ModelParams& p) { p.eps_d = 1.0; });
  bad([](ModelParams& p) { p.eps_p = -0.1; });
  bad([](ModelParams& p) { p.gamma = -1.0; });
  bad([](ModelParams& p) { p.n_steps = -1; });
  bad([](ModelParams& p) { p.pref_scale = 0.0; });
  bad([](ModelParams& p) { p.sigma = std::nan(""); });
}

TEST(Params, OmegaOneIsAllowed) {
  ModelParams p;
  p.omega = 1.0;
  EXPECT_NO_THROW(p.validate());
}

TEST(Rng, SplitmixKnownValue) {
  // Reference output of splitmix64 seeded with 0 (first draw).
  EXPECT_EQ(splitmix64(0), 0xE220A8397B1DCDAFull);
}

TEST(Rng, DeterministicAndRanged) {
  RngStream a(42), b(42), c(43);
  for (std::uint32_t k = 0; k < 1000; ++k) {
    const double u = a.uniform(Substream::kDemandNoise, k, k % 7, k % 13);
    EXPECT_EQ(u, b.uniform(Substream::kDemandNoise, k, k % 7, k % 13));
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    EXPECT_NE(u, c.uniform(Substream::kDemandNoise, k, k % 7, k % 13));
  }
}

TEST(Rng, SubstreamsAndCountersDiffer) {
  RngStream r(7);
  std::set<double> seen;
  for (auto s : {Substream::kInitPrefs, Substream::kInitPrices, Substream::kCosts,
                 Substream::kDemandNoise, Substream::kPriceNoise, Substream::kReplacement})
    seen.insert(r.uniform(s, 3, 4, 5));
  seen.insert(r.uniform(Substream::kCosts, 4, 4, 5));
  seen.insert(r.uniform(Substream::kCosts, 3, 5, 5));
  seen.insert(r.uniform(Substream::kCosts, 3, 4, 6));
  EXPECT_EQ(seen.size(), 9u);
}

TEST(Rng, UniformAndNormalMoments) {
  RngStream r(2024);
  const int n = 200000;
  double su = 0, su2 = 0, sn = 0, sn2 = 0;
  for (int k = 0; k < n; ++k) {
    const double u = r.uniform(Substream::kPriceNoise, 0, static_cast<std::uint32_t>(k), 0);
    const double z = r.normal(Substream::kReplacement, 0, static_cast<std::uint32_t>(k), 1);
    su += u;
    su2 += u * u;
    sn += z;
    sn2 += z * z;
  }
  EXPECT_NEAR(su / n, 0.5, 4 * std::sqrt(1.0 / 12 / n));
  EXPECT_NEAR(su2 / n - (su / n) * (su / n), 1.0 / 12, 0.002);
  EXPECT_NEAR(sn / n, 0.0, 4 / std::sqrt(n));
  EXPECT_NEAR(sn2 / n, 1.0, 0.015);
}

TEST(InitEconomy, PreferenceStatisticsUnitScale) {
  ModelParams p;
  p.seed = 12345;
  p.pref_scale = 1.0;
  const Economy e = init_economy(p);
  const double nm = static_cast<double>(p.n_goods) * p.n_agents;
  const double mean = e.xi.mean();
  const double var = (e.xi.array() - mean).square().sum() / (nm - 1);
  EXPECT_LE(std::abs(mean), 3.0 / std::sqrt(nm));
  EXPECT_NEAR(var, 1.0, 0.05);
}

TEST(InitEconomy, DefaultScaleIsOneOverSqrtN) {
  ModelParams p;
  const Economy e = init_economy(p);
  const double nm = static_cast<double>(e.xi.size());
  const double var = (e.xi.array() - e.xi.mean()).square().sum() / (nm - 1);
  EXPECT_NEAR(var, 1.0 / p.n_goods, 0.05 / p.n_goods);
}

TEST(InitEconomy, FeasiblePricesAndCostsInRange) {
  ModelParams p;
  p.gamma = 0.7;
  const Economy e = init_economy(p);
  EXPECT_TRUE(is_feasible(e.p, p.x_m));
  EXPECT_GE(e.costs.minCoeff(), 0.0);
  EXPECT_LE(e.costs.maxCoeff(), 0.7);
  EXPECT_EQ(e.ledger.pi_bar.size(), p.n_agents);
  EXPECT_EQ(e.ledger.pi_ema.squaredNorm(), 0.0);
  EXPECT_EQ(e.ledger.pi_bar.squaredNorm(), 0.0);
  for (auto b : e.ledger.birth_step) EXPECT_EQ(b, 0);
}

TEST(InitEconomy, ZeroGammaGivesZeroCosts) {
  ModelParams p;
  p.gamma = 0.0;
  EXPECT_EQ(init_economy(p).costs.cwiseAbs().maxCoeff(), 0.0);
}

TEST(InitEconomy, SameSeedSameState) {
  ModelParams p;
  p.seed = 99;
  const Economy a = init_economy(p), b = init_economy(p);
  EXPECT_EQ(a.xi, b.xi);
  EXPECT_EQ(a.p, b.p);
  EXPECT_EQ(a.costs, b.costs);
  p.seed = 100;
  EXPECT_NE(init_economy(p).xi, a.xi);
}

TEST(InitEconomy, RejectsInfeasibleFloor) {
  ModelParams p;
  p.x_m = 1.0;
  EXPECT_THROW(init_economy(p), InvalidParams);
}

TEST(Gap, Examples) {
  EXPECT_DOUBLE_EQ(gap(Eigen::RowVectorXd::Zero(3), Eigen::VectorXd::Ones(3), -0.5), 0.5);
  EXPECT_DOUBLE_EQ(gap(vec({1, -1}).transpose(), vec({1.25, 0.75}), 0.5), 0.0);
  EXPECT_DOUBLE_EQ(gap(vec({1, -1}).transpose(), vec({1, 1}), 0.5), -0.5);
}

TEST(Gap, DimensionMismatchThrows) {
  EXPECT_THROW(gap(vec({1, 2, 3}).transpose(), vec({1, 1}), 0.0), std::invalid_argument);
  EXPECT_THROW(gaps(rows({{1, 2, 3}}), vec({1, 1}), 0.0), std::invalid_argument);
}

TEST(Gap, Linearity) {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::RowVectorXd x = oracle::random_matrix(gen, 1, 6).row(0);
    const Eigen::VectorXd p = oracle::random_matrix(gen, 6, 1).col(0);
    const Eigen::VectorXd q = oracle::random_matrix(gen, 6, 1).col(0);
    const double a = nd(gen), b = nd(gen);
    EXPECT_NEAR(gap(x, a * p + b * q, 0.0), a * gap(x, p, 0.0) + b * gap(x, q, 0.0), 1e-12);
  }
}

TEST(Hamiltonian, Examples) {
  EXPECT_EQ(hamiltonian(rows({{1, 0}, {0, 1}}), vec({1, 1}), -0.1), 0.0);
  EXPECT_DOUBLE_EQ(hamiltonian(rows({{1, -1}}), vec({1, 1}), 0.5), 0.125);
  EXPECT_DOUBLE_EQ(hamiltonian(rows({{1, -1}, {-1, 1}}), vec({1, 1}), 0.5), 0.25);
}

TEST(Hamiltonian, ZeroGapContributesNothing) {
  EXPECT_EQ(hamiltonian(rows({{1, -1}}), vec({1.25, 0.75}), 0.5), 0.0);
  const Eigen::VectorXd h = vec({0.0, 0.3});
  EXPECT_EQ(hamiltonian_gradient(rows({{1, -1}, {2, 2}}), h).squaredNorm(), 0.0);
}

TEST(Hamiltonian, MatchesReferenceAndIsNonNegative) {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> sig(-1.0, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    const auto xi = oracle::random_matrix(gen, 7, 4);
    const auto p = oracle::random_matrix(gen, 4, 1).col(0).eval();
    const double s = sig(gen);
    const double h = hamiltonian(xi, p, s);
    EXPECT_GE(h, 0.0);
    EXPECT_NEAR(h, oracle::hamiltonian(xi, p, s), 1e-12 * (1 + h));
    const bool all_ok = (gaps(xi, p, s).array() >= 0.0).all();
    EXPECT_EQ(h == 0.0, all_ok);
  }
}

TEST(Hamiltonian, Convexity) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    const auto xi = oracle::random_matrix(gen, 8, 5);
    const double s = 2 * u(gen) - 1;
    const Eigen::VectorXd p = oracle::random_matrix(gen, 5, 1, 2.0).col(0);
    const Eigen::VectorXd q = oracle::random_matrix(gen, 5, 1, 2.0).col(0);
    const double l = u(gen);
    EXPECT_LE(hamiltonian(xi, l * p + (1 - l) * q, s),
              l * hamiltonian(xi, p, s) + (1 - l) * hamiltonian(xi, q, s) + 1e-9);
  }
}

TEST(Hamiltonian, ViolatedFraction) {
  EXPECT_DOUBLE_EQ(violated_fraction(vec({-1, 0, 2, -0.5})), 0.5);
  EXPECT_EQ(violated_fraction(Eigen::VectorXd()), 0.0);
}
