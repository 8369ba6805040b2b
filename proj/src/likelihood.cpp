/// @file likelihood.cpp
/// @brief Dense and block-circulant DFT likelihood paths.

#include "tmm/likelihood.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <limits>

#include "tmm/errors.hpp"
#include "tmm/parallel.hpp"

namespace tmm {

namespace {

// Design matrix for the profiled mean: intercept, colatitude, and squared
// colatitude per component. Rows follow the interleaved (u, v) ordering.
Eigen::MatrixXd design_matrix(const std::vector<Location>& locs) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(2 * locs.size(), 6);
  for (std::size_t i = 0; i < locs.size(); ++i) {
    const double th = locs[i].theta;
    const auto r = static_cast<Eigen::Index>(2 * i);
    x(r, 0) = 1.0;
    x(r, 1) = th;
    x(r, 2) = th * th;
    x(r + 1, 3) = 1.0;
    x(r + 1, 4) = th;
    x(r + 1, 5) = th * th;
  }
  return x;
}

double log_det_from_llt(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

// Smallest/largest positive pair separations, for radial-table domains.
void radius_range(const std::vector<detail::PairGeom>& geoms, double* lo,
                  double* hi) {
  *lo = std::numeric_limits<double>::infinity();
  *hi = 0.0;
  for (const auto& g : geoms) {
    if (g.r > 0.0) {
      *lo = std::min(*lo, g.r);
      *hi = std::max(*hi, g.r);
    }
  }
  if (!(*hi > 0.0)) {
    *lo = 0.0;
    *hi = 0.0;
  }
}

}  // namespace

ObservationSet to_observation_set(const GridObservationSet& gobs) {
  ObservationSet obs;
  obs.locations = gobs.grid.locations();
  obs.values = gobs.values;
  return obs;
}

namespace detail {

Eigen::VectorXcd dft_forward(const Eigen::VectorXcd& x) {
  Eigen::FFT<double> fft;
  Eigen::VectorXcd out(x.size());
  fft.fwd(out, x);
  return out;
}

}  // namespace detail

DenseLikelihood::DenseLikelihood(ObservationSet obs, MeanModel mean,
                                 int threads)
    : obs_(std::move(obs)), mean_(mean), threads_(threads) {
  validate_observations(obs_);
  const std::size_t n = obs_.locations.size();
  geoms_.resize(n * (n - 1) / 2);
  parallel_for(n, threads_, [&](std::size_t i) {
    for (std::size_t j = 0; j < i; ++j) {
      geoms_[i * (i - 1) / 2 + j] =
          detail::make_pair_geom(obs_.locations[i], obs_.locations[j]);
    }
  });
  radius_range(geoms_, &r_lo_, &r_hi_);
  if (mean_.quadratic_colatitude) x_ = design_matrix(obs_.locations);
}

Eigen::MatrixXd DenseLikelihood::assemble(const CovarianceModel& m) const {
  const detail::BlockEvaluator ev =
      r_hi_ > 0.0 ? detail::BlockEvaluator(m, r_lo_, r_hi_)
                  : detail::BlockEvaluator(m);
  const std::size_t n = obs_.locations.size();
  Eigen::MatrixXd sigma(2 * n, 2 * n);
  const auto tau = ev.tau();
  Eigen::Matrix2d diag = ev.collocated();
  diag(0, 0) += tau[0] * tau[0];
  diag(1, 1) += tau[1] * tau[1];
  parallel_for(n, threads_, [&](std::size_t i) {
    const auto ii = static_cast<Eigen::Index>(2 * i);
    sigma.block<2, 2>(ii, ii) = diag;
    for (std::size_t j = 0; j < i; ++j) {
      const auto jj = static_cast<Eigen::Index>(2 * j);
      const Eigen::Matrix2d b =
          ev.block_from_geom(geoms_[i * (i - 1) / 2 + j]);
      sigma.block<2, 2>(ii, jj) = b;
      sigma.block<2, 2>(jj, ii) = b.transpose();
    }
  });
  return sigma;
}

double DenseLikelihood::operator()(const CovarianceModel& m) const {
  validate_model(m);
  const Eigen::MatrixXd sigma = assemble(m);
  const Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) {
    fail_numerical("dense covariance is not positive definite");
  }
  const double log_det = log_det_from_llt(llt);
  const auto big_r = static_cast<double>(obs_.n_reps());
  // Whitened observations: rows of values are replicates.
  const Eigen::MatrixXd z =
      llt.matrixL().solve(obs_.values.transpose());
  double quad = z.squaredNorm();
  if (x_.size() > 0) {
    const Eigen::MatrixXd lx = llt.matrixL().solve(x_);
    const Eigen::VectorXd ybar = obs_.values.colwise().mean();
    const Eigen::VectorXd zbar = llt.matrixL().solve(ybar);
    const Eigen::MatrixXd a = lx.transpose() * lx;
    const Eigen::VectorXd b = lx.transpose() * zbar;
    quad -= big_r * b.dot(a.ldlt().solve(b));
  }
  return 0.5 * (big_r * log_det + quad);
}

Eigen::VectorXd DenseLikelihood::gls_mean_coefficients(
    const CovarianceModel& m) const {
  if (x_.size() == 0) {
    fail_validation("gls_mean_coefficients requires a mean model");
  }
  const Eigen::LLT<Eigen::MatrixXd> llt(assemble(m));
  if (llt.info() != Eigen::Success) {
    fail_numerical("dense covariance is not positive definite");
  }
  const Eigen::MatrixXd lx = llt.matrixL().solve(x_);
  const Eigen::VectorXd ybar = obs_.values.colwise().mean();
  const Eigen::VectorXd zbar = llt.matrixL().solve(ybar);
  const Eigen::MatrixXd a = lx.transpose() * lx;
  return a.ldlt().solve(lx.transpose() * zbar);
}

double nll_dense(const ObservationSet& obs, const CovarianceModel& m,
                 int threads) {
  return DenseLikelihood(obs, MeanModel{}, threads)(m);
}

double nll_dense(const ObservationSet& obs, const CovarianceModel& m,
                 const MeanModel& mean, int threads) {
  return DenseLikelihood(obs, mean, threads)(m);
}

namespace {

std::vector<detail::PairGeom> grid_geoms(const RegularGrid& grid) {
  const std::size_t nl = grid.n_lat;
  const std::size_t nn = grid.n_lon;
  std::vector<detail::PairGeom> geoms(nl * nl * nn);
  std::vector<Location> ref;  // longitude zero, one per latitude
  ref.reserve(nl);
  for (std::size_t j = 0; j < nl; ++j) {
    ref.push_back(location_from_angles(grid.theta_values[j], 0.0));
  }
  for (std::size_t i = 0; i < nl; ++i) {
    for (std::size_t d = 0; d < nn; ++d) {
      const Location s =
          location_from_angles(grid.theta_values[i], grid.phi_values[d]);
      for (std::size_t j = 0; j < nl; ++j) {
        geoms[(i * nl + j) * nn + d] = detail::make_pair_geom(s, ref[j]);
      }
    }
  }
  return geoms;
}

/// Circulant first columns -> per-frequency Hermitian blocks, plus nugget.
std::vector<Eigen::MatrixXcd> assemble_lambda(
    const RegularGrid& grid, const detail::BlockEvaluator& ev,
    const std::vector<detail::PairGeom>& geoms, int threads) {
  const std::size_t nl = grid.n_lat;
  const std::size_t nn = grid.n_lon;
  std::vector<Eigen::MatrixXcd> lambda(
      nn, Eigen::MatrixXcd::Zero(2 * nl, 2 * nl));
  // One latitude row per task: scattered writes stay in disjoint rows.
  parallel_for(nl, threads, [&](std::size_t i) {
    Eigen::FFT<double> fft;
    Eigen::VectorXcd seq(static_cast<Eigen::Index>(nn));
    Eigen::VectorXcd freq(static_cast<Eigen::Index>(nn));
    std::vector<Eigen::Matrix2d> blocks(nn);
    for (std::size_t j = 0; j < nl; ++j) {
      for (std::size_t d = 0; d < nn; ++d) {
        blocks[d] = ev.block_from_geom(geoms[(i * nl + j) * nn + d]);
      }
      for (int alpha = 0; alpha < 2; ++alpha) {
        for (int beta = 0; beta < 2; ++beta) {
          for (std::size_t d = 0; d < nn; ++d) {
            seq(static_cast<Eigen::Index>(d)) = blocks[d](alpha, beta);
          }
          fft.fwd(freq, seq);
          const auto row = static_cast<Eigen::Index>(alpha * nl + i);
          const auto col = static_cast<Eigen::Index>(beta * nl + j);
          for (std::size_t m = 0; m < nn; ++m) {
            lambda[m](row, col) = freq(static_cast<Eigen::Index>(m));
          }
        }
      }
    }
  });
  const auto tau = ev.tau();
  for (auto& lm : lambda) {
    // Symmetrize away FFT roundoff, then add the flat noise spectrum.
    lm = 0.5 * (lm + lm.adjoint()).eval();
    for (std::size_t i = 0; i < nl; ++i) {
      lm(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) +=
          tau[0] * tau[0];
      lm(static_cast<Eigen::Index>(nl + i), static_cast<Eigen::Index>(nl + i)) +=
          tau[1] * tau[1];
    }
  }
  return lambda;
}

}  // namespace

SpectralBlocks build_spectral(const RegularGrid& grid,
                              const CovarianceModel& m, int threads) {
  validate_model(m);
  const auto geoms = grid_geoms(grid);
  double r_lo, r_hi;
  radius_range(geoms, &r_lo, &r_hi);
  const detail::BlockEvaluator ev =
      r_hi > 0.0 ? detail::BlockEvaluator(m, r_lo, r_hi)
                 : detail::BlockEvaluator(m);
  SpectralBlocks out;
  out.n_lat = grid.n_lat;
  out.n_lon = grid.n_lon;
  out.lambda = assemble_lambda(grid, ev, geoms, threads);
  return out;
}

SpectralLikelihood::SpectralLikelihood(GridObservationSet obs, MeanModel mean,
                                       int threads)
    : obs_(std::move(obs)), mean_(mean), threads_(threads) {
  const std::size_t nl = obs_.grid.n_lat;
  const std::size_t nn = obs_.grid.n_lon;
  if (static_cast<std::size_t>(obs_.values.cols()) != 2 * nl * nn) {
    fail_validation("grid observation values must have 2 n_lat n_lon columns");
  }
  if (obs_.values.rows() < 1) fail_validation("no replicates");
  if (!obs_.values.allFinite()) fail_validation("observation values must be finite");

  geoms_ = grid_geoms(obs_.grid);
  radius_range(geoms_, &r_lo_, &r_hi_);

  // Unitary longitude DFT of each replicate, latitude by latitude;
  // parameter independent, computed once.
  const auto reps = static_cast<std::size_t>(obs_.values.rows());
  ytilde_.assign(nn, Eigen::MatrixXcd::Zero(2 * nl, reps));
  const double scale = 1.0 / std::sqrt(static_cast<double>(nn));
  Eigen::FFT<double> fft;
  Eigen::VectorXcd seq(static_cast<Eigen::Index>(nn));
  Eigen::VectorXcd freq(static_cast<Eigen::Index>(nn));
  for (std::size_t r = 0; r < reps; ++r) {
    for (std::size_t i = 0; i < nl; ++i) {
      for (int alpha = 0; alpha < 2; ++alpha) {
        for (std::size_t k = 0; k < nn; ++k) {
          seq(static_cast<Eigen::Index>(k)) = obs_.values(
              static_cast<Eigen::Index>(r),
              static_cast<Eigen::Index>(2 * (i * nn + k) + alpha));
        }
        fft.fwd(freq, seq);
        const auto row = static_cast<Eigen::Index>(alpha * nl + i);
        for (std::size_t m = 0; m < nn; ++m) {
          ytilde_[m](row, static_cast<Eigen::Index>(r)) =
              scale * freq(static_cast<Eigen::Index>(m));
        }
      }
    }
  }

  if (mean_.quadratic_colatitude) {
    // Longitude-constant covariates transform onto frequency zero only.
    x0_ = Eigen::MatrixXd::Zero(2 * nl, 6);
    const double root_n = std::sqrt(static_cast<double>(nn));
    for (std::size_t i = 0; i < nl; ++i) {
      const double th = obs_.grid.theta_values[i];
      x0_(static_cast<Eigen::Index>(i), 0) = root_n;
      x0_(static_cast<Eigen::Index>(i), 1) = root_n * th;
      x0_(static_cast<Eigen::Index>(i), 2) = root_n * th * th;
      x0_(static_cast<Eigen::Index>(nl + i), 3) = root_n;
      x0_(static_cast<Eigen::Index>(nl + i), 4) = root_n * th;
      x0_(static_cast<Eigen::Index>(nl + i), 5) = root_n * th * th;
    }
  }
}

std::vector<Eigen::MatrixXcd> SpectralLikelihood::assemble(
    const CovarianceModel& m) const {
  const detail::BlockEvaluator ev =
      r_hi_ > 0.0 ? detail::BlockEvaluator(m, r_lo_, r_hi_)
                  : detail::BlockEvaluator(m);
  return assemble_lambda(obs_.grid, ev, geoms_, threads_);
}

double SpectralLikelihood::operator()(const CovarianceModel& m) const {
  validate_model(m);
  const std::vector<Eigen::MatrixXcd> lambda = assemble(m);
  const std::size_t nn = obs_.grid.n_lon;
  const auto big_r = static_cast<double>(obs_.values.rows());
  std::vector<double> log_dets(nn), quads(nn);
  std::vector<int> failed(nn, 0);
  std::vector<Eigen::LLT<Eigen::MatrixXcd>> llts(nn);
  parallel_for(nn, threads_, [&](std::size_t m_idx) {
    llts[m_idx].compute(lambda[m_idx]);
    if (llts[m_idx].info() != Eigen::Success) {
      failed[m_idx] = 1;
      return;
    }
    log_dets[m_idx] =
        2.0 * llts[m_idx].matrixLLT().diagonal().real().array().log().sum();
    quads[m_idx] = llts[m_idx].matrixL().solve(ytilde_[m_idx]).squaredNorm();
  });
  for (std::size_t m_idx = 0; m_idx < nn; ++m_idx) {
    if (failed[m_idx]) {
      fail_numerical("spectral block at frequency " + std::to_string(m_idx) +
                     " is not positive definite");
    }
  }
  double log_det = 0.0, quad = 0.0;
  for (std::size_t m_idx = 0; m_idx < nn; ++m_idx) {
    log_det += log_dets[m_idx];
    quad += quads[m_idx];
  }
  if (x0_.size() > 0) {
    // The profiled mean lives entirely in the frequency-zero block.
    const Eigen::MatrixXcd lx = llts[0].matrixL().solve(
        x0_.cast<std::complex<double>>());
    const Eigen::VectorXcd ybar0 = ytilde_[0].rowwise().mean();
    const Eigen::VectorXcd zbar = llts[0].matrixL().solve(ybar0);
    const Eigen::MatrixXd a = (lx.adjoint() * lx).real();
    const Eigen::VectorXd b = (lx.adjoint() * zbar).real();
    quad -= big_r * b.dot(a.ldlt().solve(b));
  }
  return 0.5 * (big_r * log_det + quad);
}

double nll_dft(const GridObservationSet& obs, const CovarianceModel& m,
               int threads) {
  return SpectralLikelihood(obs, MeanModel{}, threads)(m);
}

double nll_dft(const GridObservationSet& obs, const CovarianceModel& m,
               const MeanModel& mean, int threads) {
  return SpectralLikelihood(obs, mean, threads)(m);
}

}  // namespace tmm
