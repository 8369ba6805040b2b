/// @file simulate.cpp
/// @brief Cholesky-based sampler with a relative jitter retry ladder.

#include "tmm/simulate.hpp"

#include <sstream>

#include "tmm/errors.hpp"
#include "tmm/parallel.hpp"
#include "tmm/rng.hpp"

namespace tmm {

Eigen::MatrixXd simulate(const SimulationSpec& spec) {
  validate_model(spec.model);
  if (spec.locations.empty()) fail_validation("simulate needs >= 1 location");
  if (spec.n_reps < 1) fail_validation("simulate needs n_reps >= 1");

  const Eigen::MatrixXd sigma =
      cov_matrix(spec.locations, spec.model, spec.threads);
  const double mean_diag = sigma.diagonal().mean();

  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) {
    for (double eps : spec.jitter_policy) {
      Eigen::MatrixXd repaired = sigma;
      repaired.diagonal().array() += eps * mean_diag;
      llt.compute(repaired);
      if (llt.info() == Eigen::Success) break;
    }
  }
  if (llt.info() != Eigen::Success) {
    const double min_eig =
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sigma).eigenvalues().minCoeff();
    std::ostringstream msg;
    msg << "covariance factorization failed after jitter policy; smallest "
           "eigenvalue "
        << min_eig;
    fail_numerical(msg.str());
  }

  const Eigen::MatrixXd l = llt.matrixL();
  const auto dim = static_cast<std::size_t>(sigma.rows());
  Eigen::MatrixXd samples(static_cast<Eigen::Index>(spec.n_reps),
                          static_cast<Eigen::Index>(dim));
  const CounterRng rng(spec.seed, 0);
  parallel_for(spec.n_reps, spec.threads, [&](std::size_t r) {
    Eigen::VectorXd z(static_cast<Eigen::Index>(dim));
    for (std::size_t k = 0; k < dim; ++k) {
      z(static_cast<Eigen::Index>(k)) = rng.normal(r * dim + k);
    }
    samples.row(static_cast<Eigen::Index>(r)) = (l * z).transpose();
  });
  return samples;
}

}  // namespace tmm
