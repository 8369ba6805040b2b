/// @file test_simulate.cpp
/// @brief Sampler determinism, marginal variances, cross-covariance
///        fidelity, shared-deviate comparisons, and jitter repair.

#include "tmm/simulate.hpp"

#include <cmath>
#include <vector>

#include "doctest.h"
#include "tmm/errors.hpp"
#include "tmm/rng.hpp"

using tmm::CovarianceModel;
using tmm::Location;
using tmm::SimulationSpec;
using tmm::TmmParams;

namespace {

TmmParams reference_tmm() {
  TmmParams p;
  p.bm.sigma1 = 1.0;
  p.bm.sigma2 = 1.0;
  p.bm.rho12 = 0.5;
  p.bm.nu1 = 3.0;
  p.bm.nu2 = 4.0;
  p.bm.a = 2.0;
  p.tau1 = 0.0;
  p.tau2 = 0.0;
  return p;
}

std::vector<Location> scatter(std::uint64_t seed, std::size_t n) {
  tmm::CounterRng rng(seed, 0);
  std::vector<Location> locs;
  locs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    locs.push_back(tmm::from_latlon(-80.0 + 160.0 * rng.uniform(2 * i),
                                    360.0 * rng.uniform(2 * i + 1)));
  }
  return locs;
}

}  // namespace

TEST_CASE("single-location variance matches the collocated closed form") {
  SimulationSpec spec;
  spec.locations = {tmm::from_latlon(12.0, 34.0)};
  spec.model = reference_tmm();
  spec.n_reps = 100000;
  spec.seed = 20260814;
  const Eigen::MatrixXd y = tmm::simulate(spec);
  REQUIRE(y.rows() == 100000);
  REQUIRE(y.cols() == 2);
  const double want = 5.0 / 3.0;
  for (int c = 0; c < 2; ++c) {
    const double var = y.col(c).squaredNorm() / static_cast<double>(y.rows());
    CHECK(std::fabs(var - want) / want < 0.02);
  }
}

TEST_CASE("identical seeds reproduce bit-identical samples") {
  SimulationSpec spec;
  spec.locations = scatter(7, 12);
  spec.model = reference_tmm();
  spec.n_reps = 5;
  spec.seed = 42;
  const Eigen::MatrixXd a = tmm::simulate(spec);
  const Eigen::MatrixXd b = tmm::simulate(spec);
  CHECK((a.array() == b.array()).all());

  spec.seed = 43;
  const Eigen::MatrixXd c = tmm::simulate(spec);
  CHECK_FALSE((a.array() == c.array()).all());

  SimulationSpec threaded = spec;
  threaded.seed = 42;
  threaded.threads = 4;
  spec.seed = 42;
  spec.threads = 1;
  CHECK((tmm::simulate(spec).array() == tmm::simulate(threaded).array()).all());
}

TEST_CASE("sample cross-covariance matches the analytic matrix") {
  SimulationSpec spec;
  spec.locations = scatter(11, 10);
  TmmParams p = reference_tmm();
  p.tau1 = 0.1;
  p.tau2 = 0.1;
  spec.model = p;
  spec.n_reps = 20000;
  spec.seed = 99;
  const Eigen::MatrixXd y = tmm::simulate(spec);
  const Eigen::MatrixXd sigma = tmm::cov_matrix(spec.locations, spec.model);
  const Eigen::MatrixXd sample =
      (y.transpose() * y) / static_cast<double>(y.rows());
  const double big_r = static_cast<double>(y.rows());
  for (Eigen::Index i = 0; i < sigma.rows(); ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      // Var of a Gaussian cross moment: (S_ii S_jj + S_ij^2) / R.
      const double se = std::sqrt(
          (sigma(i, i) * sigma(j, j) + sigma(i, j) * sigma(i, j)) / big_r);
      CHECK(std::fabs(sample(i, j) - sigma(i, j)) < 5.0 * se);
    }
  }
}

TEST_CASE("smoothness ordering shows in nearest-neighbor increments") {
  const std::vector<Location> grid = tmm::fibonacci_grid(768);
  // Shared deviates: same seed and locations, two smoothness levels.
  SimulationSpec rough;
  rough.locations = grid;
  rough.model = tmm::DivFreeParams{1.0, {2.0, 3.0}, 0.0, 0.0};
  rough.n_reps = 4;
  rough.seed = 5;
  SimulationSpec smooth = rough;
  smooth.model = tmm::DivFreeParams{1.0, {3.0, 3.0}, 0.0, 0.0};

  const Eigen::MatrixXd yr = tmm::simulate(rough);
  const Eigen::MatrixXd ys = tmm::simulate(smooth);

  // Nearest neighbor of each point by chordal distance.
  std::vector<std::size_t> nn(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double best = 1e9;
    for (std::size_t j = 0; j < grid.size(); ++j) {
      if (j == i) continue;
      const double d = tmm::chordal_distance(grid[i], grid[j]);
      if (d < best) {
        best = d;
        nn[i] = j;
      }
    }
  }
  // Variance-normalized mean-square increment: larger means rougher.
  const auto increment = [&](const Eigen::MatrixXd& y, double variance) {
    double acc = 0.0;
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto a = static_cast<Eigen::Index>(2 * i);
        const auto b = static_cast<Eigen::Index>(2 * nn[i]);
        const double du = y(r, a) - y(r, b);
        const double dv = y(r, a + 1) - y(r, b + 1);
        acc += du * du + dv * dv;
      }
    }
    return acc / (static_cast<double>(y.rows()) *
                  static_cast<double>(grid.size()) * variance);
  };
  // Collocated variance of a div-free field is -sigma^2 F(0) per component.
  const double var_rough = 9.0 / 2.0;
  const double var_smooth = 9.0 / 4.0;
  CHECK(increment(yr, var_rough) > 1.15 * increment(ys, var_smooth));
}

TEST_CASE("curl-free and div-free fields share magnitude statistics") {
  const std::vector<Location> locs = scatter(21, 30);
  SimulationSpec curl;
  curl.locations = locs;
  curl.model = tmm::CurlFreeParams{1.0, {2.5, 2.0}, 0.0, 0.0};
  curl.n_reps = 2000;
  curl.seed = 77;
  SimulationSpec divf = curl;
  divf.model = tmm::DivFreeParams{1.0, {2.5, 2.0}, 0.0, 0.0};

  const Eigen::MatrixXd yc = tmm::simulate(curl);
  const Eigen::MatrixXd yd = tmm::simulate(divf);
  const double mc = yc.array().square().mean();
  const double md = yd.array().square().mean();
  CHECK(std::fabs(mc - md) / md < 0.05);
}

TEST_CASE("duplicate locations are repaired by the jitter ladder") {
  const Location s = tmm::from_latlon(5.0, 5.0);
  SimulationSpec spec;
  spec.locations = {s, s, tmm::from_latlon(-40.0, 200.0)};
  spec.model = reference_tmm();  // tau = 0: exactly singular covariance
  spec.n_reps = 3;
  spec.seed = 1;
  const Eigen::MatrixXd y = tmm::simulate(spec);
  // The duplicated signal coincides up to the tiny jitter scale.
  CHECK((y.col(0) - y.col(2)).cwiseAbs().maxCoeff() < 1e-3);
  CHECK((y.col(1) - y.col(3)).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("spec validation") {
  SimulationSpec spec;
  spec.model = reference_tmm();
  CHECK_THROWS_AS(tmm::simulate(spec), tmm::Error);  // no locations
  spec.locations = scatter(3, 2);
  spec.n_reps = 0;
  CHECK_THROWS_AS(tmm::simulate(spec), tmm::Error);
}
