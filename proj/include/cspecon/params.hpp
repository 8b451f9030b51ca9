#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace cspecon {

// Thrown for any parameter set that violates the model's invariants.
class InvalidParams : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Scalar knobs of the economy. Defaults are the reference configuration
// (N=100 goods, M=1000 agents).
struct ModelParams {
  int n_goods = 100;
  int n_agents = 1000;
  double sigma = -0.75;  // budget threshold, money units
  double eps_d = 0.05;   // supply-demand adjustment speed
  double eps_p = 0.05;   // price adjustment speed
  double gamma = 1.0;    // upper bound of per-good production cost
  double omega = 0.2;    // profit EMA weight
  double x_m = 0.01;     // price floor
  std::int64_t n_steps = 2000;
  std::uint64_t seed = 1;
  // Standard deviation of freshly drawn preferences. Unset means
  // 1/sqrt(n_goods), which puts the gaps xi . p on the same O(1) scale as
  // sigma, as in the usual perceptron normalization.
  std::optional<double> pref_scale;

  double alpha() const { return static_cast<double>(n_agents) / n_goods; }
  double pref_std() const { return pref_scale.value_or(1.0 / std::sqrt(static_cast<double>(n_goods))); }

  void validate() const {
    auto fail = [](const std::string& what) { throw InvalidParams(what); };
    if (n_goods < 2) fail("n_goods must be >= 2");
    if (n_agents < 1) fail("n_agents must be >= 1");
    if (!std::isfinite(sigma)) fail("sigma must be finite");
    if (!(omega > 0.0 && omega <= 1.0)) fail("omega must lie in (0, 1]");
    // eps * u < 1 keeps every preference on its side of zero.
    if (!(eps_d >= 0.0 && eps_d < 1.0)) fail("eps_d must lie in [0, 1)");
    if (!(eps_p >= 0.0 && eps_p < 1.0)) fail("eps_p must lie in [0, 1)");
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) fail("gamma must be >= 0");
    if (!(x_m >= 0.0)) fail("x_m must be >= 0");
    if (!(x_m < 1.0)) fail("x_m must be < 1: unit-mean prices are infeasible otherwise");
    if (n_steps < 0) fail("n_steps must be >= 0");
    if (pref_scale && !(*pref_scale > 0.0 && std::isfinite(*pref_scale)))
      fail("pref_scale must be positive");
  }
};

// Projected-gradient solver knobs.
struct SolverConfig {
  int max_iters = 10000;
  // Stop when ||p - P(p - grad H)|| < grad_tol * sqrt(N).
  double grad_tol = 1e-8;
  // Stop when (H_prev - H) / max(H_prev, tiny) < obj_tol.
  double obj_tol = 1e-12;
  double init_step = 1.0;
  double shrink = 0.5;
  double sufficient_decrease = 1e-4;
  // Try a Newton step on the current face before the first gradient step
  // and after each one.
  bool face_newton = true;

  void validate() const {
    if (max_iters < 1) throw InvalidParams("solver max_iters must be >= 1");
    if (!(grad_tol > 0.0) || !(obj_tol > 0.0) || !(init_step > 0.0))
      throw InvalidParams("solver tolerances must be positive");
    if (!(shrink > 0.0 && shrink < 1.0)) throw InvalidParams("solver shrink must lie in (0, 1)");
    if (!(sufficient_decrease > 0.0 && sufficient_decrease < 1.0))
      throw InvalidParams("solver sufficient_decrease must lie in (0, 1)");
  }
};

}  // namespace cspecon
