#pragma once
/// @file simulate.hpp
/// @brief Exact Gaussian simulation of tangential vector fields through
///        Cholesky factorization of the dense covariance.

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "tmm/covariance.hpp"
#include "tmm/sphere.hpp"

namespace tmm {

struct SimulationSpec {
  std::vector<Location> locations;
  CovarianceModel model;
  std::size_t n_reps = 1;
  std::uint64_t seed = 0;
  /// Relative diagonal jitter attempts after a failed factorization.
  std::vector<double> jitter_policy = {1e-12, 1e-10, 1e-8};
  int threads = 0;
};

/// Draws n_reps independent fields; row r holds replicate r interleaved as
/// (u_1, v_1, ..., u_n, v_n). Deviates are indexed location-major and
/// component-minor from the counter generator, so equal seeds reuse the
/// same deviates across models and replicate r never depends on the thread
/// count. Throws a numerical error naming the smallest eigenvalue when the
/// jitter policy is exhausted.
Eigen::MatrixXd simulate(const SimulationSpec& spec);

}  // namespace tmm
