#pragma once

#include <Eigen/Dense>

#include <span>

#include "economy.hpp"

namespace cspecon {

// Positions of the agents about to go bankrupt, split by side.
struct FIndex {
  Eigen::VectorXd sellers;  // sum of doomed positive positions per good
  Eigen::VectorXd buyers;   // sum of |doomed negative positions| per good
};

// `xi` must be the pre-replacement matrix of the step in which `doomed`
// were flagged.
inline FIndex f_index(const PreferenceMatrix& xi, std::span<const int> doomed) {
  FIndex f{Eigen::VectorXd::Zero(xi.cols()), Eigen::VectorXd::Zero(xi.cols())};
  for (int mu : doomed) {
    const auto row = xi.row(mu);
    f.sellers += row.transpose().cwiseMax(0.0);
    f.buyers -= row.transpose().cwiseMin(0.0);
  }
  return f;
}

}  // namespace cspecon
