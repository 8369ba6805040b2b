/// @file test_predict.cpp
/// @brief Cokriging identities (interpolation, prior, Schur contraction,
///        tower consistency, calibration) and scoring-rule oracles.

#include "tmm/predict.hpp"

#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "tmm/errors.hpp"
#include "tmm/rng.hpp"
#include "tmm/simulate.hpp"
#include "tmm/sphere.hpp"

using namespace tmm;

namespace {

TmmParams noise_free_params() {
  TmmParams p;
  p.bm = {1.0, 1.0, 0.5, 3.0, 4.0, 2.0};
  return p;
}

std::vector<Location> scatter(int n, std::uint64_t seed) {
  const CounterRng rng(seed, 0);
  std::vector<Location> locs;
  for (int i = 0; i < n; ++i) {
    const double lat = -80.0 + 160.0 * rng.uniform(2 * i);
    const double lon = 360.0 * rng.uniform(2 * i + 1);
    locs.push_back(from_latlon(lat, lon));
  }
  return locs;
}

/// CRPS by Simpson quadrature of the integral definition
/// int (F(x) - 1{x >= y})^2 dx, split at the step discontinuity so each
/// piece is smooth.
double crps_quadrature(double y, double mu, double sigma) {
  const auto cdf = [&](double x) {
    return 0.5 * std::erfc(-(x - mu) / sigma / std::sqrt(2.0));
  };
  const auto simpson = [](auto f, double lo, double hi) {
    const int n = 20000;  // even
    const double h = (hi - lo) / n;
    double sum = f(lo) + f(hi);
    for (int i = 1; i < n; ++i) sum += f(lo + i * h) * (i % 2 ? 4.0 : 2.0);
    return sum * h / 3.0;
  };
  const double lo = std::min(mu - 14.0 * sigma, y - 1.0);
  const double hi = std::max(mu + 14.0 * sigma, y + 1.0);
  const auto left = [&](double x) { return cdf(x) * cdf(x); };
  const auto right = [&](double x) {
    return (1.0 - cdf(x)) * (1.0 - cdf(x));
  };
  return simpson(left, lo, y) + simpson(right, y, hi);
}

}  // namespace

TEST_CASE("noise-free cokriging interpolates training values exactly") {
  const TmmParams p = noise_free_params();
  const std::vector<Location> train_locs = scatter(14, 5);
  SimulationSpec spec;
  spec.locations = train_locs;
  spec.model = p;
  spec.seed = 42;
  const ObservationSet train{train_locs, simulate(spec)};

  const std::vector<Location> targets = {train_locs[3], train_locs[9]};
  const Prediction pred = cokrige(train, p, targets);
  REQUIRE(pred.mean.rows() == 1);
  REQUIRE(pred.mean.cols() == 4);
  CHECK(std::abs(pred.mean(0, 0) - train.values(0, 6)) < 1e-10);
  CHECK(std::abs(pred.mean(0, 1) - train.values(0, 7)) < 1e-10);
  CHECK(std::abs(pred.mean(0, 2) - train.values(0, 18)) < 1e-10);
  CHECK(std::abs(pred.mean(0, 3) - train.values(0, 19)) < 1e-10);
  for (int k = 0; k < 4; ++k) CHECK(pred.sd(k) < 1e-5);
  for (int k = 0; k < 4; ++k) CHECK(pred.sd(k) * pred.sd(k) < 1e-10);
}

TEST_CASE("empty training set returns the prior") {
  const TmmParams p = noise_free_params();
  ObservationSet empty;
  const std::vector<Location> targets = scatter(5, 9);
  const Prediction pred = cokrige(empty, p, targets, true);
  CHECK(pred.mean.cwiseAbs().maxCoeff() == 0.0);
  for (Eigen::Index k = 0; k < pred.sd.size(); ++k) {
    CHECK(pred.sd(k) == doctest::Approx(std::sqrt(5.0 / 3.0)).epsilon(1e-12));
  }
  REQUIRE(pred.joint_cov.rows() == 10);
  CHECK(pred.joint_cov(0, 0) == doctest::Approx(5.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("predictive variance never exceeds the prior variance") {
  TmmParams p = noise_free_params();
  p.tau1 = 0.15;
  p.tau2 = 0.05;
  const std::vector<Location> train_locs = scatter(30, 77);
  SimulationSpec spec;
  spec.locations = train_locs;
  spec.model = p;
  spec.seed = 4;
  const ObservationSet train{train_locs, simulate(spec)};
  const std::vector<Location> targets = scatter(40, 78);

  const Prediction pred = cokrige(train, p, targets);
  const double prior_sd = std::sqrt(5.0 / 3.0);
  for (Eigen::Index k = 0; k < pred.sd.size(); ++k) {
    CHECK(pred.sd(k) <= prior_sd + 1e-10);
    CHECK(pred.sd(k) >= 0.0);
  }
  // Information strictly helps somewhere.
  CHECK(pred.sd.minCoeff() < prior_sd - 1e-3);
}

TEST_CASE("batch cokriging equals sequential conditioning") {
  // Condition on A then on B given A; compare with conditioning on A and B
  // jointly. Noise free so observations are the signal itself.
  const TmmParams p = noise_free_params();
  const std::vector<Location> all = scatter(16, 321);
  const std::vector<Location> a_locs(all.begin(), all.begin() + 6);
  const std::vector<Location> b_locs(all.begin() + 6, all.begin() + 10);
  const std::vector<Location> targets(all.begin() + 10, all.end());

  SimulationSpec spec;
  spec.locations = all;
  spec.model = p;
  spec.seed = 10;
  const Eigen::MatrixXd y = simulate(spec);
  const Eigen::MatrixXd y_a = y.leftCols(12);
  const Eigen::MatrixXd y_b = y.middleCols(12, 8);

  // Batch: condition on A and B together.
  std::vector<Location> ab = a_locs;
  ab.insert(ab.end(), b_locs.begin(), b_locs.end());
  const Prediction batch =
      cokrige(ObservationSet{ab, y.leftCols(20)}, p, targets, true);

  // Sequential: joint predictive at (targets, B) given A, then condition.
  std::vector<Location> tb = targets;
  tb.insert(tb.end(), b_locs.begin(), b_locs.end());
  const Prediction stage =
      cokrige(ObservationSet{a_locs, y_a}, p, tb, true);
  const Eigen::Index nt = 2 * 6, nb = 2 * 4;
  const Eigen::VectorXd mu_t = stage.mean.row(0).head(nt);
  const Eigen::VectorXd mu_b = stage.mean.row(0).tail(nb);
  const Eigen::MatrixXd c_tt = stage.joint_cov.topLeftCorner(nt, nt);
  const Eigen::MatrixXd c_tb = stage.joint_cov.topRightCorner(nt, nb);
  const Eigen::MatrixXd c_bb = stage.joint_cov.bottomRightCorner(nb, nb);
  const Eigen::LLT<Eigen::MatrixXd> llt(c_bb);
  REQUIRE(llt.info() == Eigen::Success);
  const Eigen::VectorXd resid = y_b.row(0).transpose() - mu_b;
  const Eigen::VectorXd mu_seq = mu_t + c_tb * llt.solve(resid);
  const Eigen::MatrixXd cov_seq = c_tt - c_tb * llt.solve(c_tb.transpose());

  CHECK((mu_seq - batch.mean.row(0).transpose()).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((cov_seq - batch.joint_cov).cwiseAbs().maxCoeff() < 1e-8);
  for (Eigen::Index k = 0; k < nt; ++k) {
    CHECK(std::abs(std::sqrt(std::max(cov_seq(k, k), 0.0)) - batch.sd(k)) <
          1e-8);
  }
}

TEST_CASE("standardized prediction errors are calibrated") {
  TmmParams p = noise_free_params();
  p.tau1 = p.tau2 = 0.1;
  const std::vector<Location> train_locs = scatter(40, 1001);
  const std::vector<Location> targets = scatter(70, 1002);
  std::vector<Location> all = train_locs;
  all.insert(all.end(), targets.begin(), targets.end());

  SimulationSpec spec;
  spec.locations = all;
  spec.model = p;
  spec.n_reps = 15;
  spec.seed = 2718;
  const Eigen::MatrixXd y = simulate(spec);

  const ObservationSet train{train_locs, y.leftCols(80)};
  const Prediction pred = cokrige(train, p, targets);

  double sum_sq = 0.0;
  std::size_t n = 0;
  for (Eigen::Index r = 0; r < 15; ++r) {
    for (Eigen::Index k = 0; k < pred.sd.size(); ++k) {
      const double tau = (k % 2 == 0) ? p.tau1 : p.tau2;
      const double scale = std::hypot(pred.sd(k), tau);
      const double z = (y(r, 80 + k) - pred.mean(r, k)) / scale;
      sum_sq += z * z;
      ++n;
    }
  }
  const double var = sum_sq / static_cast<double>(n);
  CHECK(n == 2100);
  CHECK(var > 0.9);
  CHECK(var < 1.1);
}

TEST_CASE("duplicate noise-free training locations are singular") {
  const TmmParams p = noise_free_params();
  const Location s = from_latlon(12.0, 34.0);
  ObservationSet train;
  train.locations = {s, s};
  train.values = Eigen::MatrixXd::Zero(1, 4);
  try {
    (void)cokrige(train, p, scatter(2, 3));
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::numerical);
  }
}

TEST_CASE("crps closed form matches quadrature and pinned values") {
  CHECK(crps_gaussian(0.0, 0.0, 1.0) ==
        doctest::Approx(0.23369497725510547).epsilon(1e-12));

  const CounterRng rng(8, 1);
  for (int k = 0; k < 100; ++k) {
    const double y = 6.0 * rng.uniform(3 * k) - 3.0;
    const double mu = 6.0 * rng.uniform(3 * k + 1) - 3.0;
    const double sigma = 0.1 + 1.9 * rng.uniform(3 * k + 2);
    const double closed = crps_gaussian(y, mu, sigma);
    CHECK(closed == doctest::Approx(crps_quadrature(y, mu, sigma))
                        .epsilon(1e-6));
    CHECK(closed >= 0.0);
  }

  // Scale equivariance and the large-error asymptote.
  for (int k = 0; k < 20; ++k) {
    const double y = 2.0 * rng.uniform(900 + 3 * k) - 1.0;
    const double mu = 2.0 * rng.uniform(901 + 3 * k) - 1.0;
    const double sigma = 0.2 + rng.uniform(902 + 3 * k);
    const double c = 0.5 + 4.0 * rng.uniform(903 + 3 * k);
    CHECK(crps_gaussian(c * y, c * mu, c * sigma) ==
          doctest::Approx(c * crps_gaussian(y, mu, sigma)).epsilon(1e-12));
  }
  CHECK(crps_gaussian(50.0, 0.0, 1.0) == doctest::Approx(49.0).epsilon(0.01));

  CHECK_THROWS_AS((void)crps_gaussian(0.0, 0.0, 0.0), Error);
  CHECK_THROWS_AS((void)crps_gaussian(0.0, 0.0, -1.0), Error);
}

TEST_CASE("scores reproduce closed-form values on constructed predictions") {
  Prediction pred;
  pred.targets = {from_latlon(0.0, 0.0), from_latlon(10.0, 10.0)};
  pred.mean = Eigen::MatrixXd::Zero(1, 4);
  pred.mean << 1.0, -2.0, 0.5, 3.0;
  pred.sd = Eigen::VectorXd::Ones(4);

  // Perfect mean: MSPE = MAE = 0, LogS = log(2 pi)/2, CRPS at z = 0.
  const PredictionScores perfect = scores(pred, pred.mean);
  CHECK(perfect.pooled.mspe == 0.0);
  CHECK(perfect.pooled.mae == 0.0);
  CHECK(perfect.pooled.logs ==
        doctest::Approx(0.5 * std::log(2.0 * 3.14159265358979323846))
            .epsilon(1e-12));
  CHECK(perfect.pooled.crps ==
        doctest::Approx(0.23369497725510547).epsilon(1e-12));
  CHECK(perfect.u.logs == doctest::Approx(perfect.v.logs).epsilon(1e-14));

  // Known errors: u entries off by 1 and -1, v entries exact.
  Eigen::MatrixXd truth = pred.mean;
  truth(0, 0) += 1.0;
  truth(0, 2) -= 1.0;
  const PredictionScores off = scores(pred, truth);
  CHECK(off.u.mspe == doctest::Approx(1.0));
  CHECK(off.u.mae == doctest::Approx(1.0));
  CHECK(off.v.mspe == 0.0);
  CHECK(off.pooled.mspe == doctest::Approx(0.5));

  // Observation noise enters the predictive scale in quadrature.
  const PredictionScores noisy = scores(pred, truth, {1.0, 2.0});
  const double su = std::sqrt(2.0);
  CHECK(noisy.u.logs ==
        doctest::Approx(0.5 * std::log(2.0 * 3.14159265358979323846 * 2.0) +
                        0.5 / 2.0)
            .epsilon(1e-12));
  CHECK(noisy.u.crps == doctest::Approx(crps_gaussian(1.0, 0.0, su)));

  // Zero-variance mismatch reports an infinite LogS; exact match scores 0.
  pred.sd.setZero();
  const PredictionScores degenerate = scores(pred, truth);
  CHECK(std::isinf(degenerate.u.logs));
  CHECK(degenerate.u.crps == doctest::Approx(1.0));
  CHECK(degenerate.v.logs == 0.0);

  // Shape mismatches are rejected.
  CHECK_THROWS_AS((void)scores(pred, truth.leftCols(2)), Error);
}

TEST_CASE("prior-only prediction scores MSPE as mean squared truth") {
  const TmmParams p = noise_free_params();
  ObservationSet empty;
  const std::vector<Location> targets = scatter(6, 2);
  const Prediction pred = cokrige(empty, p, targets);
  Eigen::MatrixXd truth(1, 12);
  const CounterRng rng(77, 0);
  for (int k = 0; k < 12; ++k) truth(0, k) = rng.normal(k);
  const PredictionScores s = scores(pred, truth);
  CHECK(s.pooled.mspe ==
        doctest::Approx(truth.row(0).squaredNorm() / 12.0).epsilon(1e-12));
}

TEST_CASE("cokriging validates inputs") {
  const TmmParams p = noise_free_params();
  ObservationSet train;
  train.locations = scatter(3, 1);
  train.values = Eigen::MatrixXd::Zero(1, 6);
  CHECK_THROWS_AS((void)cokrige(train, p, {}), Error);
  TmmParams bad = p;
  bad.bm.rho12 = 2.0;
  CHECK_THROWS_AS((void)cokrige(train, bad, scatter(2, 2)), Error);
}
