#pragma once

// One time step of the economy and the simulation loop around it.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "economy.hpp"
#include "findex.hpp"
#include "params.hpp"
#include "rng.hpp"
#include "solver.hpp"

namespace cspecon {

// Per-good market totals. Demand is stored signed (<= 0).
struct Aggregates {
  Eigen::VectorXd supply;
  Eigen::VectorXd demand;

  // A good has a rationing ratio only when somebody wants to buy it.
  bool has_ratio(Eigen::Index i) const { return demand[i] < 0.0; }
  // zeta_i = S_i / |D_i|
  std::optional<double> ratio(Eigen::Index i) const {
    if (!has_ratio(i)) return std::nullopt;
    return supply[i] / -demand[i];
  }
};

inline Aggregates compute_aggregates(const PreferenceMatrix& xi) {
  return {xi.cwiseMax(0.0).colwise().sum().transpose(),
          xi.cwiseMin(0.0).colwise().sum().transpose()};
}

// Rationed trades. The long side of each market is scaled down so that the
// column clears; a good without buyers or without sellers does not trade.
inline PreferenceMatrix execute_transactions(const PreferenceMatrix& xi, const Aggregates& agg) {
  PreferenceMatrix bar(xi.rows(), xi.cols());
  for (Eigen::Index i = 0; i < xi.cols(); ++i) {
    auto col = bar.col(i);
    const double s = agg.supply[i];
    const double d = -agg.demand[i];
    if (!(s > 0.0) || !(d > 0.0)) {
      col.setZero();
      continue;
    }
    const double zeta = s / d;
    col = xi.col(i);
    if (zeta > 1.0) {
      for (Eigen::Index mu = 0; mu < xi.rows(); ++mu)
        if (col[mu] > 0.0) col[mu] /= zeta;
    } else if (zeta < 1.0) {
      for (Eigen::Index mu = 0; mu < xi.rows(); ++mu)
        if (col[mu] < 0.0) col[mu] *= zeta;
    }
  }
  return bar;
}

struct Wages {
  double total_cost = 0.0;  // W
  double wage = 0.0;        // w = W / M
};

// Production cost is charged on intended supply, not on what was sold.
inline Wages compute_wages(const PreferenceMatrix& xi, const GoodCosts& costs, int n_agents) {
  const double total = (xi.cwiseMax(0.0) * costs).sum();
  return {total, total / n_agents};
}

inline Eigen::VectorXd compute_profits(const PreferenceMatrix& xi, const PreferenceMatrix& xi_bar,
                                       const PriceVector& p, const GoodCosts& costs, double wage) {
  Eigen::VectorXd pi = xi_bar * p;
  pi.noalias() -= xi.cwiseMax(0.0) * costs;
  pi.array() += wage;
  return pi;
}

inline Eigen::VectorXd update_ema(const Eigen::VectorXd& prev, const Eigen::VectorXd& pi_bar,
                                  double omega) {
  return omega * pi_bar + (1.0 - omega) * prev;
}

// Replaces every agent whose smoothed profit is strictly below sigma. The
// newcomer gets a fresh N(0, pref_std^2) preference row and starts from the mean
// realized profit of the agents that survive this step. Returns the removed
// agents in increasing order.
inline std::vector<int> cull_and_replace(AgentLedger& ledger, PreferenceMatrix& xi, double sigma,
                                         const RngStream& rng, std::int64_t step,
                                         double pref_std = 1.0) {
  const auto m = static_cast<int>(xi.rows());
  std::vector<int> removed;
  double survivor_sum = 0.0;
  for (int mu = 0; mu < m; ++mu) {
    if (ledger.pi_ema[mu] < sigma)
      removed.push_back(mu);
    else
      survivor_sum += ledger.pi_bar[mu];
  }
  if (removed.empty()) return removed;

  const auto n_survivors = m - static_cast<int>(removed.size());
  const double newcomer_ema = n_survivors > 0 ? survivor_sum / n_survivors : 0.0;
  for (int mu : removed) {
    for (Eigen::Index i = 0; i < xi.cols(); ++i)
      xi(mu, i) = pref_std * rng.normal(Substream::kReplacement, static_cast<std::uint64_t>(step),
                             static_cast<std::uint32_t>(mu), static_cast<std::uint32_t>(i));
    ledger.pi_ema[mu] = newcomer_ema;
    ledger.lifetimes.push_back(step - ledger.birth_step[mu]);
    ledger.death_step.push_back(step);
    ledger.birth_step[mu] = step;
  }
  return removed;
}

// Source of the u ~ U[0,1] factors in the behavioural update; called as
// u(substream, agent, good).
template <typename Uniform>
concept UniformSource = requires(const Uniform& u, Substream s, int mu, Eigen::Index i) {
  { u(s, mu, i) } -> std::convertible_to<double>;
};

// Behavioural rule. Sellers shrink (grow) when supply exceeds (falls short
// of) the demand magnitude; buyers shrink (grow) when the price is above
// (below) the mean price 1. Ties leave the entry unchanged. Rows flagged in
// `frozen` are skipped.
template <UniformSource Uniform>
void update_preferences(PreferenceMatrix& xi, const Aggregates& agg, const PriceVector& p,
                        double eps_d, double eps_p, const Uniform& u,
                        const std::vector<char>* frozen = nullptr) {
  const auto n = xi.cols();
  for (Eigen::Index mu = 0; mu < xi.rows(); ++mu) {
    if (frozen != nullptr && (*frozen)[static_cast<std::size_t>(mu)]) continue;
    for (Eigen::Index i = 0; i < n; ++i) {
      double& x = xi(mu, i);
      if (x > 0.0) {
        const double s = agg.supply[i];
        const double d = -agg.demand[i];
        if (s > d)
          x *= 1.0 - eps_d * u(Substream::kDemandNoise, static_cast<int>(mu), i);
        else if (s < d)
          x *= 1.0 + eps_d * u(Substream::kDemandNoise, static_cast<int>(mu), i);
      } else if (x < 0.0) {
        if (p[i] > 1.0)
          x *= 1.0 - eps_p * u(Substream::kPriceNoise, static_cast<int>(mu), i);
        else if (p[i] < 1.0)
          x *= 1.0 + eps_p * u(Substream::kPriceNoise, static_cast<int>(mu), i);
      }
    }
  }
}

inline void update_preferences(PreferenceMatrix& xi, const Aggregates& agg, const PriceVector& p,
                               double eps_d, double eps_p, const RngStream& rng,
                               std::int64_t step, const std::vector<char>* frozen = nullptr) {
  const auto key = static_cast<std::uint64_t>(step);
  update_preferences(
      xi, agg, p, eps_d, eps_p,
      [&](Substream s, int mu, Eigen::Index i) {
        return rng.uniform(s, key, static_cast<std::uint32_t>(mu), static_cast<std::uint32_t>(i));
      },
      frozen);
}

// Observables of one step.
struct StepRecord {
  std::int64_t step = 0;
  double z = 0.0;       // fraction with a negative instantaneous gap
  double z_ema = 0.0;   // fraction removed this step
  std::vector<int> removed;
  double total_cost = 0.0;  // W
  double wage = 0.0;        // w
  double hamiltonian = 0.0;
  SolveReport solver;
  PriceVector p;
  Eigen::VectorXd supply;
  Eigen::VectorXd demand;
  FIndex f;
  // Conservation diagnostics: sum of realized profits and the largest
  // per-good imbalance of realized trades.
  double money_residual = 0.0;
  double clearing_residual = 0.0;
  // Post-removal smoothed profits; only filled when requested.
  Eigen::VectorXd pi_ema;
};

struct DynamicsOptions {
  // Alternative reading of the step order: apply the behavioural update
  // first and trade with the updated preferences.
  bool update_before_trade = false;
  bool record_pi_ema = false;
};

class Simulation {
 public:
  explicit Simulation(const ModelParams& params, const SolverConfig& solver = {},
                      DynamicsOptions options = {})
      : params_(params), solver_(solver), options_(options), rng_(params.seed),
        economy_(init_economy(params)) {
    solver_.validate();
  }

  const ModelParams& params() const { return params_; }
  const Economy& economy() const { return economy_; }
  Economy& economy() { return economy_; }
  std::int64_t steps_done() const { return t_; }

  StepRecord step() {
    const std::int64_t t = ++t_;
    auto& xi = economy_.xi;
    auto& ledger = economy_.ledger;
    const int m = params_.n_agents;

    StepRecord rec;
    rec.step = t;

    auto solved = solve_prices(xi, params_.sigma, economy_.p, params_.x_m, solver_);
    economy_.p = std::move(solved.p);
    rec.solver = solved.report;
    rec.hamiltonian = solved.report.objective;
    const PriceVector& p = economy_.p;

    rec.z = violated_fraction(gaps(xi, p, params_.sigma));

    Aggregates agg = compute_aggregates(xi);
    rec.supply = agg.supply;
    rec.demand = agg.demand;

    if (options_.update_before_trade) {
      update_preferences(xi, agg, p, params_.eps_d, params_.eps_p, rng_, t);
      agg = compute_aggregates(xi);
    }

    const PreferenceMatrix xi_bar = execute_transactions(xi, agg);
    const Wages wages = compute_wages(xi, economy_.costs, m);
    rec.total_cost = wages.total_cost;
    rec.wage = wages.wage;
    ledger.pi_bar = compute_profits(xi, xi_bar, p, economy_.costs, wages.wage);
    ledger.pi_ema = update_ema(ledger.pi_ema, ledger.pi_bar, params_.omega);
    rec.money_residual = ledger.pi_bar.sum();
    rec.clearing_residual = xi_bar.colwise().sum().cwiseAbs().maxCoeff();

    std::vector<int> doomed;
    for (int mu = 0; mu < m; ++mu)
      if (ledger.pi_ema[mu] < params_.sigma) doomed.push_back(mu);
    rec.f = f_index(xi, doomed);

    rec.removed = cull_and_replace(ledger, xi, params_.sigma, rng_, t, params_.pref_std());
    rec.z_ema = static_cast<double>(rec.removed.size()) / m;

    if (!options_.update_before_trade) {
      std::vector<char> frozen(static_cast<std::size_t>(m), 0);
      for (int mu : rec.removed) frozen[static_cast<std::size_t>(mu)] = 1;
      update_preferences(xi, agg, p, params_.eps_d, params_.eps_p, rng_, t, &frozen);
    }

    rec.p = p;
    if (options_.record_pi_ema) rec.pi_ema = ledger.pi_ema;
    return rec;
  }

 private:
  ModelParams params_;
  SolverConfig solver_;
  DynamicsOptions options_;
  RngStream rng_;
  Economy economy_;
  std::int64_t t_ = 0;
};

}  // namespace cspecon
