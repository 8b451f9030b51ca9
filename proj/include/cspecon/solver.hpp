#pragma once

// Price formation: minimize H(p) = 1/2 sum_mu min(0, xi_mu . p - sigma)^2
// over { mean(p) = 1, p >= x_m } by projected gradient descent with an
// Armijo backtracking line search. The objective is convex piecewise
// quadratic, so any stationary point is a global minimizer.
//
// Before the first gradient step and after every one, the solver optionally
// tries a Newton step on the current face (violated agents fixed, floored prices fixed). The step is
// only kept if it lowers H, so the iteration stays monotone and the
// gradient steps alone guarantee convergence.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "economy.hpp"
#include "params.hpp"
#include "projection.hpp"

namespace cspecon {

struct SolveReport {
  int iterations = 0;
  double objective = 0.0;
  double grad_mapping_norm = 0.0;
  bool converged = false;
};

struct SolveResult {
  PriceVector p;
  SolveReport report;
};

// Norm of p - P(p - g), the unit-step projected-gradient mapping. Zero iff p
// is stationary for the constrained problem.
inline double gradient_mapping_norm(const Eigen::Ref<const Eigen::VectorXd>& p,
                                    const Eigen::Ref<const Eigen::VectorXd>& g, double x_m) {
  return (p - project_prices(p - g, x_m)).norm();
}

namespace detail {

// Minimum-norm minimizer d of 1/2 ||A_F d + h_A||^2 subject to sum(d) = 0,
// with d supported on the free prices F. Rows of A are the violated agents.
inline Eigen::VectorXd face_newton_direction(const PreferenceMatrix& xi,
                                             const Eigen::VectorXd& h, const PriceVector& p,
                                             double x_m) {
  const auto n = p.size();
  std::vector<Eigen::Index> active;
  std::vector<Eigen::Index> free;
  for (Eigen::Index mu = 0; mu < h.size(); ++mu)
    if (h[mu] < 0.0) active.push_back(mu);
  for (Eigen::Index i = 0; i < n; ++i)
    if (p[i] > x_m) free.push_back(i);
  Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
  if (active.empty() || free.size() < 2) return d;

  const auto na = static_cast<Eigen::Index>(active.size());
  const auto nf = static_cast<Eigen::Index>(free.size());
  // B = A_F (I - 11^T / nf) keeps the step inside sum(d) = 0.
  Eigen::MatrixXd b(na, nf);
  Eigen::VectorXd rhs(na);
  for (Eigen::Index r = 0; r < na; ++r) {
    double mean = 0.0;
    for (Eigen::Index c = 0; c < nf; ++c) {
      b(r, c) = xi(active[r], free[c]);
      mean += b(r, c);
    }
    b.row(r).array() -= mean / nf;
    rhs[r] = -h[active[r]];
  }
  Eigen::VectorXd y = b.completeOrthogonalDecomposition().solve(rhs);
  y.array() -= y.mean();
  for (Eigen::Index c = 0; c < nf; ++c) d[free[c]] = y[c];
  return d;
}

}  // namespace detail

inline SolveResult solve_prices(const PreferenceMatrix& xi, double sigma, const PriceVector& warm,
                                double x_m, const SolverConfig& cfg = {}) {
  detail::check_dims(xi.cols(), warm.size());
  const auto n = warm.size();
  const double gm_tol = cfg.grad_tol * std::sqrt(static_cast<double>(n));

  SolveResult out;
  out.p = is_feasible(warm, x_m) ? warm : project_prices(warm, x_m);
  PriceVector& p = out.p;
  SolveReport& rep = out.report;

  Eigen::VectorXd h = gaps(xi, p, sigma);
  double obj = hamiltonian_from_gaps(h);
  if (obj == 0.0) {
    rep.converged = true;
    return out;
  }
  Eigen::VectorXd g = hamiltonian_gradient(xi, h);

  PriceVector trial(n);
  Eigen::VectorXd h_trial(xi.rows());
  auto evaluate = [&](const PriceVector& q) {
    h_trial.noalias() = xi * q;
    h_trial.array() -= sigma;
    return hamiltonian_from_gaps(h_trial);
  };

  // Minimum-norm Newton step on the current face; kept only if it lowers H.
  auto newton_step = [&] {
    const Eigen::VectorXd d = detail::face_newton_direction(xi, h, p, x_m);
    for (double t = 1.0; t > 1e-3; t *= cfg.shrink) {
      trial = project_prices(p + t * d, x_m);
      const double obj_trial = evaluate(trial);
      if (obj_trial < obj) {
        p = trial;
        h = h_trial;
        g = hamiltonian_gradient(xi, h);
        obj = obj_trial;
        return;
      }
    }
  };

  if (cfg.face_newton) {
    newton_step();
    if (obj == 0.0) {
      rep.grad_mapping_norm = gradient_mapping_norm(p, g, x_m);
      rep.converged = true;
      return out;
    }
  }

  double step = cfg.init_step;
  for (int it = 0; it < cfg.max_iters; ++it) {
    rep.grad_mapping_norm = gradient_mapping_norm(p, g, x_m);
    if (rep.grad_mapping_norm < gm_tol) {
      rep.converged = true;
      break;
    }

    double obj_trial = 0.0;
    bool accepted = false;
    for (;;) {
      trial = project_prices(p - step * g, x_m);
      obj_trial = evaluate(trial);
      if (obj_trial <= obj + cfg.sufficient_decrease * g.dot(trial - p)) {
        accepted = true;
        break;
      }
      step *= cfg.shrink;
      if (step < 1e-20) break;
    }
    if (!accepted) {
      // Line search stalled at round-off level; p is optimal to precision.
      rep.converged = true;
      break;
    }

    ++rep.iterations;
    const Eigen::VectorXd dp = trial - p;
    Eigen::VectorXd g_trial = hamiltonian_gradient(xi, h_trial);
    const Eigen::VectorXd dg = g_trial - g;
    const double prev = obj;
    p = trial;
    h = h_trial;
    g = g_trial;
    obj = obj_trial;

    if (cfg.face_newton && obj > 0.0) newton_step();

    if (obj == 0.0 || (prev - obj) <= cfg.obj_tol * prev) {
      rep.grad_mapping_norm = gradient_mapping_norm(p, g, x_m);
      rep.converged = true;
      break;
    }

    // Barzilai-Borwein guess for the next trial step.
    const double curv = dp.dot(dg);
    step = curv > 0.0 ? std::clamp(dp.squaredNorm() / curv, 1e-12, 1e12) : step / cfg.shrink;
  }
  if (!rep.converged) rep.grad_mapping_norm = gradient_mapping_norm(p, g, x_m);
  rep.objective = obj;
  return out;
}

}  // namespace cspecon
