#pragma once
/// @file predict.hpp
/// @brief Simple-kriging (cokriging) prediction of the latent tangential
///        field with proper scoring rules.

#include <Eigen/Dense>
#include <array>
#include <vector>

#include "tmm/covariance.hpp"
#include "tmm/sphere.hpp"

namespace tmm {

/// Predictive law of the latent (nugget-free) signal at target locations.
/// mean holds one row per training replicate, interleaved (u, v) per
/// target; sd is replicate independent. joint_cov is the full 2t x 2t
/// predictive covariance when requested, else empty.
struct Prediction {
  std::vector<Location> targets;
  Eigen::MatrixXd mean;
  Eigen::VectorXd sd;
  Eigen::MatrixXd joint_cov;

  std::size_t n_targets() const { return targets.size(); }
  std::size_t n_reps() const { return static_cast<std::size_t>(mean.rows()); }
};

/// Zero-mean conditional law: mean Sigma21 Sigma11^{-1} y and covariance
/// Sigma22 - Sigma21 Sigma11^{-1} Sigma12. Training covariance includes the
/// nugget; target covariance is signal only, so a tau = 0 model
/// interpolates training values exactly. An empty training set returns the
/// prior (zero mean, collocated signal variance).
Prediction cokrige(const ObservationSet& train, const CovarianceModel& m,
                   const std::vector<Location>& targets,
                   bool with_joint_cov = false, int threads = 0);

/// Closed-form Gaussian CRPS sigma [z (2 Phi(z) - 1) + 2 phi(z) - 1/sqrt(pi)]
/// with z = (y - mu)/sigma; requires sigma > 0.
double crps_gaussian(double y, double mu, double sigma);

struct ScoreSet {
  double mspe = 0.0;
  double mae = 0.0;
  double logs = 0.0;
  double crps = 0.0;
};

struct PredictionScores {
  ScoreSet u, v, pooled;
};

/// Scores predictions against held-out truth (same replicate-by-target
/// layout as Prediction::mean). Predictive scale per entry is
/// sqrt(sd^2 + obs_noise_sd^2) for its component, so passing the fitted
/// nuggets scores in observation space. LogS is the mean negative log
/// marginal Gaussian density; a zero-scale entry contributes +infinity on
/// mismatch and 0 on exact match, and its CRPS degenerates to |y - mu|.
PredictionScores scores(const Prediction& pred, const Eigen::MatrixXd& truth,
                        std::array<double, 2> obs_noise_sd = {0.0, 0.0});

}  // namespace tmm
