#pragma once
/// @file likelihood.hpp
/// @brief Negative log-likelihood evaluation: dense Cholesky for arbitrary
///        locations and the block-circulant DFT path for full-longitude
///        regular grids.

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "tmm/covariance.hpp"
#include "tmm/sphere.hpp"

namespace tmm {

/// Replicated observations on one full-longitude regular grid. Row r of
/// values holds replicate r, interleaved (u, v) per grid location in
/// latitude-major order (index i_lat * n_lon + j_lon).
struct GridObservationSet {
  RegularGrid grid;
  Eigen::MatrixXd values;

  std::size_t n_locations() const { return grid.size(); }
  std::size_t n_reps() const { return static_cast<std::size_t>(values.rows()); }
};

ObservationSet to_observation_set(const GridObservationSet& gobs);

/// Optional mean structure profiled out of the likelihood by generalized
/// least squares: per component an intercept plus linear and quadratic
/// colatitude terms.
struct MeanModel {
  bool quadratic_colatitude = false;
};

/// Per-frequency covariance blocks of the longitude DFT: lambda[m] is the
/// 2 n_lat x 2 n_lat Hermitian covariance of the unitary DFT coefficients
/// at frequency m, rows ordered component-major (u rows then v rows).
struct SpectralBlocks {
  std::size_t n_lat = 0, n_lon = 0;
  std::vector<Eigen::MatrixXcd> lambda;
};

/// 1/2 log|Sigma| + 1/2 y' Sigma^{-1} y summed over replicates (additive
/// constant dropped). Non-positive-definite covariance raises a numerical
/// error; the likelihood never jitters.
double nll_dense(const ObservationSet& obs, const CovarianceModel& m,
                 int threads = 0);
double nll_dense(const ObservationSet& obs, const CovarianceModel& m,
                 const MeanModel& mean, int threads = 0);

/// Assembles the per-frequency blocks from circulant first columns: for
/// each ordered latitude pair the canonical 2x2 block is evaluated at every
/// longitude lag (4 n_lat^2 n_lon kernel evaluations) and FFT'd along the
/// lag; nugget variances add to every diagonal.
SpectralBlocks build_spectral(const RegularGrid& grid,
                              const CovarianceModel& m, int threads = 0);

/// Equals nll_dense on the same data to high relative accuracy, computed as
/// sum_m [R log det(Lambda_m) + sum_r y~' Lambda_m^{-1} y~] / 2.
double nll_dft(const GridObservationSet& obs, const CovarianceModel& m,
               int threads = 0);
double nll_dft(const GridObservationSet& obs, const CovarianceModel& m,
               const MeanModel& mean, int threads = 0);

/// Dense-likelihood context: caches pair geometry and the design matrix so
/// repeated evaluations at new parameters only redo radial factors,
/// assembly, and factorization.
class DenseLikelihood {
 public:
  explicit DenseLikelihood(ObservationSet obs, MeanModel mean = {},
                           int threads = 0);

  double operator()(const CovarianceModel& m) const;

  /// GLS mean coefficients profiled at the given parameters (6-vector:
  /// intercept/linear/quadratic for u then v). Requires a mean model.
  Eigen::VectorXd gls_mean_coefficients(const CovarianceModel& m) const;

  const ObservationSet& observations() const { return obs_; }

 private:
  Eigen::MatrixXd assemble(const CovarianceModel& m) const;

  ObservationSet obs_;
  MeanModel mean_;
  int threads_;
  std::vector<detail::PairGeom> geoms_;  // pairs (i, j), j < i
  double r_lo_ = 0.0, r_hi_ = 0.0;
  Eigen::MatrixXd x_;  // 2n x 6 design matrix, or empty
};

/// Spectral-likelihood context: caches the DFT-transformed observations
/// (parameter independent) and the ring-pair geometry.
class SpectralLikelihood {
 public:
  explicit SpectralLikelihood(GridObservationSet obs, MeanModel mean = {},
                              int threads = 0);

  double operator()(const CovarianceModel& m) const;

  /// Transformed observations per frequency (2 n_lat x n_reps each).
  const std::vector<Eigen::MatrixXcd>& transformed() const { return ytilde_; }

  const GridObservationSet& observations() const { return obs_; }

 private:
  std::vector<Eigen::MatrixXcd> assemble(const CovarianceModel& m) const;

  GridObservationSet obs_;
  MeanModel mean_;
  int threads_;
  std::vector<detail::PairGeom> geoms_;  // (i * n_lat + j) * n_lon + lag
  double r_lo_ = 0.0, r_hi_ = 0.0;
  std::vector<Eigen::MatrixXcd> ytilde_;
  Eigen::MatrixXd x0_;  // frequency-zero design matrix, or empty
};

namespace detail {

/// Unnormalized forward DFT, negative exponent: X_m = sum_d x_d w^{-md}.
Eigen::VectorXcd dft_forward(const Eigen::VectorXcd& x);

}  // namespace detail

}  // namespace tmm
