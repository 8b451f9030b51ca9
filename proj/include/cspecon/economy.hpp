#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "params.hpp"
#include "projection.hpp"
#include "rng.hpp"

namespace cspecon {

// xi(mu, i): quantity of good i agent mu wants to trade; > 0 sells, < 0 buys.
using PreferenceMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
// Per-good production costs gamma_i, drawn once and never resampled.
using GoodCosts = Eigen::VectorXd;

struct AgentLedger {
  Eigen::VectorXd pi_bar;  // realized profit of the last step
  Eigen::VectorXd pi_ema;  // smoothed profit
  std::vector<std::int64_t> birth_step;
  std::vector<std::int64_t> lifetimes;  // completed lifespans, in removal order
  std::vector<std::int64_t> death_step;  // step of each entry in `lifetimes`

  explicit AgentLedger(int n_agents = 0)
      : pi_bar(Eigen::VectorXd::Zero(n_agents)),
        pi_ema(Eigen::VectorXd::Zero(n_agents)),
        birth_step(static_cast<std::size_t>(n_agents), 0) {}
};

struct Economy {
  PreferenceMatrix xi;
  PriceVector p;
  GoodCosts costs;
  AgentLedger ledger;
};

namespace detail {

inline void check_dims(Eigen::Index a, Eigen::Index b) {
  if (a != b) throw std::invalid_argument("dimension mismatch");
}

}  // namespace detail

// Fresh economy: xi ~ N(0, pref_std^2) iid, prices ~ U[0,2] then projected onto the
// feasible set, gamma_i ~ U[0, gamma], zero profits.
inline Economy init_economy(const ModelParams& params) {
  params.validate();
  const RngStream rng(params.seed);
  const int n = params.n_goods;
  const int m = params.n_agents;

  Economy e;
  const double scale = params.pref_std();
  e.xi.resize(m, n);
  for (int mu = 0; mu < m; ++mu)
    for (int i = 0; i < n; ++i)
      e.xi(mu, i) = scale * rng.normal(Substream::kInitPrefs, 0, static_cast<std::uint32_t>(mu),
                               static_cast<std::uint32_t>(i));

  Eigen::VectorXd raw(n);
  for (int i = 0; i < n; ++i)
    raw[i] = 2.0 * rng.uniform(Substream::kInitPrices, 0, 0, static_cast<std::uint32_t>(i));
  e.p = project_prices(raw, params.x_m);

  e.costs.resize(n);
  for (int i = 0; i < n; ++i)
    e.costs[i] = params.gamma * rng.uniform(Substream::kCosts, 0, 0, static_cast<std::uint32_t>(i));

  e.ledger = AgentLedger(m);
  return e;
}

// h = xi . p - sigma; negative means the budget constraint is violated.
inline double gap(const Eigen::Ref<const Eigen::RowVectorXd>& xi_row,
                  const Eigen::Ref<const Eigen::VectorXd>& p, double sigma) {
  detail::check_dims(xi_row.size(), p.size());
  return xi_row.dot(p.transpose()) - sigma;
}

inline Eigen::VectorXd gaps(const PreferenceMatrix& xi, const Eigen::Ref<const Eigen::VectorXd>& p,
                            double sigma) {
  detail::check_dims(xi.cols(), p.size());
  return (xi * p).array() - sigma;
}

// H = 1/2 sum_mu h_mu^2 over strictly negative gaps.
inline double hamiltonian_from_gaps(const Eigen::Ref<const Eigen::VectorXd>& h) {
  return 0.5 * h.array().min(0.0).square().sum();
}

inline double hamiltonian(const PreferenceMatrix& xi, const Eigen::Ref<const Eigen::VectorXd>& p,
                          double sigma) {
  return hamiltonian_from_gaps(gaps(xi, p, sigma));
}

// grad H = sum_{h_mu < 0} h_mu xi_mu. At h = 0 the subgradient 0 is used.
inline Eigen::VectorXd hamiltonian_gradient(const PreferenceMatrix& xi,
                                            const Eigen::Ref<const Eigen::VectorXd>& h) {
  const Eigen::VectorXd r = h.array().min(0.0);
  return xi.transpose() * r;
}

// Fraction of agents with a strictly negative gap.
inline double violated_fraction(const Eigen::Ref<const Eigen::VectorXd>& h) {
  if (h.size() == 0) return 0.0;
  return static_cast<double>((h.array() < 0.0).count()) / static_cast<double>(h.size());
}

}  // namespace cspecon
