#pragma once

// Euclidean projection onto the feasible price set
//   { q : mean(q) = 1, q_i >= x_m }.
// The minimizer has the form q_i = max(x_m, raw_i - lambda) for a scalar
// shift lambda fixed by the mean constraint.

#include <Eigen/Dense>

#include <algorithm>
#include <functional>
#include <vector>

#include "params.hpp"

namespace cspecon {

using PriceVector = Eigen::VectorXd;

namespace detail {

inline void check_floor(double x_m) {
  if (!(x_m >= 0.0 && x_m < 1.0)) throw InvalidParams("price floor must lie in [0, 1)");
}

}  // namespace detail

// Exact O(N log N) projection: sort descending and find the number k of
// coordinates left above the floor.
inline PriceVector project_prices(const Eigen::Ref<const Eigen::VectorXd>& raw, double x_m) {
  detail::check_floor(x_m);
  const auto n = raw.size();
  std::vector<double> sorted(raw.data(), raw.data() + n);
  std::sort(sorted.begin(), sorted.end(), std::greater<>());

  // With the top k coordinates free: sum_{j<k}(s_j - lambda) + (n-k) x_m = n.
  double lambda = 0.0;
  double prefix = 0.0;
  for (Eigen::Index k = 1; k <= n; ++k) {
    prefix += sorted[k - 1];
    lambda = (prefix - static_cast<double>(n) + static_cast<double>(n - k) * x_m) / k;
    // The k-th largest stays free and the (k+1)-th is clamped.
    if (k == n || sorted[k] - lambda <= x_m) break;
  }

  PriceVector q(n);
  for (Eigen::Index i = 0; i < n; ++i) q[i] = std::max(x_m, raw[i] - lambda);
  return q;
}

// Reference projection by bisection on lambda. Slower; kept as a
// cross-check for the sort-based routine.
inline PriceVector project_prices_bisection(const Eigen::Ref<const Eigen::VectorXd>& raw,
                                            double x_m, double tol = 1e-12) {
  detail::check_floor(x_m);
  const auto n = raw.size();
  auto mass = [&](double lambda) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) s += std::max(x_m, raw[i] - lambda);
    return s;
  };
  // mass is non-increasing in lambda; bracket the root of mass = n.
  double lo = raw.minCoeff() - 1.0 - x_m;
  double hi = raw.maxCoeff();
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (mass(mid) > static_cast<double>(n))
      lo = mid;
    else
      hi = mid;
  }
  const double lambda = 0.5 * (lo + hi);
  PriceVector q(n);
  for (Eigen::Index i = 0; i < n; ++i) q[i] = std::max(x_m, raw[i] - lambda);
  return q;
}

inline bool is_feasible(const Eigen::Ref<const Eigen::VectorXd>& p, double x_m,
                        double mean_tol = 1e-9, double floor_tol = 1e-12) {
  return std::abs(p.mean() - 1.0) <= mean_tol && p.minCoeff() >= x_m - floor_tol;
}

}  // namespace cspecon
