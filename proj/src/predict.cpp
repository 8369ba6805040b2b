/// @file predict.cpp
/// @brief Cokriging via one shared Cholesky factorization and Gaussian
///        scoring rules.

#include "tmm/predict.hpp"

#include <cmath>
#include <limits>

#include "tmm/errors.hpp"
#include "tmm/parallel.hpp"

namespace tmm {

namespace {

constexpr double kInvSqrtPi = 0.5641895835477562869;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;
constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kTwoPi = 6.2831853071795864769;

double normal_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }
double normal_cdf(double z) { return 0.5 * std::erfc(-z * kInvSqrt2); }

}  // namespace

Prediction cokrige(const ObservationSet& train, const CovarianceModel& m,
                   const std::vector<Location>& targets,
                   bool with_joint_cov, int threads) {
  validate_model(m);
  if (targets.empty()) fail_validation("no prediction targets");
  const auto t = targets.size();
  const detail::BlockEvaluator prior(m);

  Prediction out;
  out.targets = targets;

  if (train.n_locations() == 0) {
    const auto reps = std::max<std::size_t>(train.n_reps(), 1);
    out.mean = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(reps),
                                     static_cast<Eigen::Index>(2 * t));
    out.sd.resize(static_cast<Eigen::Index>(2 * t));
    for (std::size_t i = 0; i < t; ++i) {
      out.sd(static_cast<Eigen::Index>(2 * i)) =
          std::sqrt(prior.collocated()(0, 0));
      out.sd(static_cast<Eigen::Index>(2 * i + 1)) =
          std::sqrt(prior.collocated()(1, 1));
    }
    if (with_joint_cov) {
      out.joint_cov = cov_cross_matrix(targets, targets, m, threads);
    }
    return out;
  }

  validate_observations(train);
  const Eigen::MatrixXd sigma11 = cov_matrix(train.locations, m, threads);
  const Eigen::LLT<Eigen::MatrixXd> llt(sigma11);
  if (llt.info() != Eigen::Success) {
    fail_numerical("training covariance is singular or not positive definite");
  }
  const Eigen::MatrixXd sigma21 =
      cov_cross_matrix(targets, train.locations, m, threads);

  // Conditional means for every replicate share the factorization.
  const Eigen::MatrixXd w = llt.solve(train.values.transpose());
  out.mean = (sigma21 * w).transpose();

  // Half-solve for the Schur correction: columns of v are L^{-1} times the
  // cross-covariance of one target component.
  const Eigen::MatrixXd v = llt.matrixL().solve(sigma21.transpose());
  out.sd.resize(static_cast<Eigen::Index>(2 * t));
  for (std::size_t i = 0; i < t; ++i) {
    for (int c = 0; c < 2; ++c) {
      const auto k = static_cast<Eigen::Index>(2 * i + c);
      const double var =
          prior.collocated()(c, c) - v.col(k).squaredNorm();
      out.sd(k) = std::sqrt(std::max(var, 0.0));
    }
  }
  if (with_joint_cov) {
    Eigen::MatrixXd cov =
        cov_cross_matrix(targets, targets, m, threads) - v.transpose() * v;
    out.joint_cov = 0.5 * (cov + cov.transpose());
  }
  return out;
}

double crps_gaussian(double y, double mu, double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    fail_validation("crps_gaussian requires sigma > 0");
  }
  const double z = (y - mu) / sigma;
  return sigma * (z * (2.0 * normal_cdf(z) - 1.0) + 2.0 * normal_pdf(z) -
                  kInvSqrtPi);
}

namespace {

struct ScoreAccumulator {
  double se = 0.0, ae = 0.0, logs = 0.0, crps = 0.0;
  std::size_t n = 0;

  void add(double y, double mu, double scale) {
    const double e = y - mu;
    se += e * e;
    ae += std::abs(e);
    if (scale > 0.0) {
      logs += 0.5 * std::log(kTwoPi * scale * scale) +
              0.5 * e * e / (scale * scale);
      crps += crps_gaussian(y, mu, scale);
    } else {
      // Degenerate point mass: infinite penalty on mismatch, CRPS limit.
      if (e != 0.0) logs = std::numeric_limits<double>::infinity();
      crps += std::abs(e);
    }
    ++n;
  }

  ScoreSet finish() const {
    ScoreSet s;
    const auto d = static_cast<double>(n);
    s.mspe = se / d;
    s.mae = ae / d;
    s.logs = logs / d;
    s.crps = crps / d;
    return s;
  }
};

}  // namespace

PredictionScores scores(const Prediction& pred, const Eigen::MatrixXd& truth,
                        std::array<double, 2> obs_noise_sd) {
  if (truth.rows() != pred.mean.rows() || truth.cols() != pred.mean.cols()) {
    fail_validation("truth shape must match the prediction layout");
  }
  if (!(obs_noise_sd[0] >= 0.0) || !(obs_noise_sd[1] >= 0.0)) {
    fail_validation("observation noise sds must be nonnegative");
  }
  const auto t = pred.n_targets();
  ScoreAccumulator acc[2];
  for (Eigen::Index r = 0; r < pred.mean.rows(); ++r) {
    for (std::size_t i = 0; i < t; ++i) {
      for (int c = 0; c < 2; ++c) {
        const auto k = static_cast<Eigen::Index>(2 * i + c);
        const double scale = std::hypot(pred.sd(k), obs_noise_sd[c]);
        acc[c].add(truth(r, k), pred.mean(r, k), scale);
      }
    }
  }
  PredictionScores out;
  out.u = acc[0].finish();
  out.v = acc[1].finish();
  ScoreAccumulator pooled;
  pooled.se = acc[0].se + acc[1].se;
  pooled.ae = acc[0].ae + acc[1].ae;
  pooled.logs = acc[0].logs + acc[1].logs;
  pooled.crps = acc[0].crps + acc[1].crps;
  pooled.n = acc[0].n + acc[1].n;
  out.pooled = pooled.finish();
  return out;
}

}  // namespace tmm
