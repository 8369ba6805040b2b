/// @file test_covariance.cpp
/// @brief Cross-covariance blocks: closed forms, symmetries, consistency of
///        assembly paths, positive semidefiniteness, and the fast evaluator.

#include "tmm/covariance.hpp"

#include <cmath>
#include <vector>

#include "doctest.h"
#include "tmm/errors.hpp"
#include "tmm/kernels.hpp"
#include "tmm/rng.hpp"

using tmm::CovarianceModel;
using tmm::Location;
using tmm::MaternParams;
using tmm::ParsBivariateMaternParams;
using tmm::TmmParams;

namespace {

Location random_location(tmm::CounterRng& rng, std::uint64_t i) {
  const double lat = -85.0 + 170.0 * rng.uniform(2 * i);
  const double lon = 360.0 * rng.uniform(2 * i + 1);
  return tmm::from_latlon(lat, lon);
}

TmmParams random_tmm(tmm::CounterRng& rng, std::uint64_t i) {
  TmmParams p;
  p.bm.sigma1 = 0.2 + 2.0 * rng.uniform(8 * i);
  p.bm.sigma2 = 0.2 + 2.0 * rng.uniform(8 * i + 1);
  p.bm.nu1 = 1.1 + 3.5 * rng.uniform(8 * i + 2);
  p.bm.nu2 = 1.1 + 3.5 * rng.uniform(8 * i + 3);
  p.bm.a = 0.3 + 8.0 * rng.uniform(8 * i + 4);
  p.bm.rho12 = (2.0 * rng.uniform(8 * i + 5) - 1.0) * 0.95 *
               tmm::rho_bound(p.bm.nu1, p.bm.nu2);
  p.tau1 = 0.2 * rng.uniform(8 * i + 6);
  p.tau2 = 0.2 * rng.uniform(8 * i + 7);
  return p;
}

Eigen::Matrix3d fd_hessian(const Eigen::Vector3d& h, const MaternParams& p,
                           double step) {
  Eigen::Matrix3d out;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      Eigen::Vector3d ei = Eigen::Vector3d::Zero();
      Eigen::Vector3d ej = Eigen::Vector3d::Zero();
      ei(i) = step;
      ej(j) = step;
      out(i, j) = (tmm::matern((h + ei + ej).norm(), p) -
                   tmm::matern((h + ei - ej).norm(), p) -
                   tmm::matern((h - ei + ej).norm(), p) +
                   tmm::matern((h - ei - ej).norm(), p)) /
                  (4.0 * step * step);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("cov_curl closed forms and symmetries") {
  const MaternParams p{3.0, 2.0};
  const Location pole = tmm::location_from_angles(0.0, 0.0);

  // At the pole with F(0) = -1 the projector P = diag(1,1,0) survives.
  Eigen::Matrix3d want = Eigen::Matrix3d::Zero();
  want(0, 0) = 1.0;
  want(1, 1) = 1.0;
  CHECK(tmm::cov_curl(pole, pole, 1.0, p).isApprox(want, 1e-14));

  tmm::CounterRng rng(911, 0);
  for (std::uint64_t i = 0; i < 8; ++i) {
    const Location s = random_location(rng, 2 * i);
    const Location t = random_location(rng, 2 * i + 1);
    const Eigen::Matrix3d c_st = tmm::cov_curl(s, t, 1.3, p);
    const Eigen::Matrix3d c_ts = tmm::cov_curl(t, s, 1.3, p);
    CHECK((c_st - c_ts.transpose()).cwiseAbs().maxCoeff() < 1e-13);

    const Eigen::Matrix3d fd = -1.3 * 1.3 * tmm::projector_tangent(s) *
                               fd_hessian(s.xyz - t.xyz, p, 1e-4) *
                               tmm::projector_tangent(t).transpose();
    CHECK((c_st - fd).cwiseAbs().maxCoeff() < 1e-5);
  }
}

TEST_CASE("cov_div mirrors cov_curl through the rotated projector") {
  const MaternParams p{2.5, 1.5};
  tmm::CounterRng rng(912, 0);
  const Location s = random_location(rng, 0);
  const Location t = random_location(rng, 1);

  // Equal traces at zero separation: both reduce to -2 sigma^2 F(0).
  const double tr_curl = tmm::cov_curl(s, s, 0.8, p).trace();
  const double tr_div = tmm::cov_div(s, s, 0.8, p).trace();
  CHECK(tr_curl == doctest::Approx(tr_div).epsilon(1e-14));
  CHECK(tr_curl ==
        doctest::Approx(-2.0 * 0.64 * tmm::f_radial(0.0, p)).epsilon(1e-14));

  const Eigen::Matrix3d c_st = tmm::cov_div(s, t, 0.8, p);
  CHECK((c_st - tmm::cov_div(t, s, 0.8, p).transpose()).cwiseAbs().maxCoeff() <
        1e-13);
  const Eigen::Matrix3d fd = -0.64 * tmm::projector_curl(s) *
                             fd_hessian(s.xyz - t.xyz, p, 1e-4) *
                             tmm::projector_curl(t).transpose();
  CHECK((c_st - fd).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("cov_tan decomposes into curl and div parts") {
  tmm::CounterRng rng(913, 0);
  const Location s = random_location(rng, 0);
  const Location t = random_location(rng, 1);

  ParsBivariateMaternParams p;
  p.sigma1 = 1.2;
  p.sigma2 = 0.7;
  p.nu1 = 3.0;
  p.nu2 = 4.0;
  p.a = 2.0;

  SUBCASE("rho12 = 0 sums the independent components") {
    p.rho12 = 0.0;
    const Eigen::Matrix3d want =
        tmm::cov_curl(s, t, p.sigma1, {p.nu1, p.a}) +
        tmm::cov_div(s, t, p.sigma2, {p.nu2, p.a});
    CHECK(tmm::cov_tan(s, t, p).isApprox(want, 1e-13));
  }
  SUBCASE("vanishing second field leaves the curl-free part") {
    // sigma2 must stay positive for validation; the limit is approached.
    p.rho12 = 0.0;
    p.sigma2 = 1e-8;
    const Eigen::Matrix3d want = tmm::cov_curl(s, t, p.sigma1, {p.nu1, p.a});
    CHECK((tmm::cov_tan(s, t, p) - want).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("invalid rho12 is rejected citing the bound") {
    p.rho12 = 0.999;  // above rho_bound(3, 4) ~ 0.9863
    CHECK_THROWS_WITH_AS(tmm::cov_tan(s, t, p),
                         doctest::Contains("rho_bound"), tmm::Error);
  }
}

TEST_CASE("cov_canonical collocated closed form") {
  TmmParams p;
  p.bm.sigma1 = 1.0;
  p.bm.sigma2 = 1.0;
  p.bm.rho12 = 0.5;
  p.bm.nu1 = 3.0;
  p.bm.nu2 = 4.0;
  p.bm.a = 2.0;
  const CovarianceModel m = p;

  tmm::CounterRng rng(914, 0);
  for (std::uint64_t i = 0; i < 20; ++i) {
    const Location s = random_location(rng, i);
    const Eigen::Matrix2d b = tmm::cov_canonical(s, s, m);
    CHECK(b(0, 0) == doctest::Approx(5.0 / 3.0).epsilon(1e-13));
    CHECK(b(1, 1) == doctest::Approx(5.0 / 3.0).epsilon(1e-13));
    CHECK(b(0, 1) == 0.0);  // exactly zero, not approximately
    CHECK(b(1, 0) == 0.0);
  }

  // Nugget adds tau^2 on the diagonal only at coincident locations.
  TmmParams pn = p;
  pn.tau1 = 0.1;
  pn.tau2 = 0.1;
  const Location s = random_location(rng, 100);
  const Eigen::Matrix2d bn = tmm::cov_canonical(s, s, CovarianceModel{pn});
  CHECK(bn(0, 0) == doctest::Approx(5.0 / 3.0 + 0.01).epsilon(1e-13));
  CHECK(bn(1, 1) == doctest::Approx(5.0 / 3.0 + 0.01).epsilon(1e-13));
  const Location t = random_location(rng, 101);
  CHECK(tmm::cov_canonical(s, t, CovarianceModel{pn})
            .isApprox(tmm::cov_canonical(s, t, m), 1e-14));
}

TEST_CASE("cov_canonical agrees with the Cartesian assembly path") {
  tmm::CounterRng rng(915, 0);
  for (std::uint64_t i = 0; i < 12; ++i) {
    TmmParams p = random_tmm(rng, i + 50);
    p.tau1 = p.tau2 = 0.0;
    const Location s = random_location(rng, 1000 + 2 * i);
    const Location t = random_location(rng, 1000 + 2 * i + 1);
    const Eigen::Matrix2d direct = tmm::cov_canonical(s, t, CovarianceModel{p});
    const Eigen::Matrix2d via_tan = tmm::canonical_transform(s) *
                                    tmm::cov_tan(s, t, p.bm) *
                                    tmm::canonical_transform(t).transpose();
    CHECK((direct - via_tan).cwiseAbs().maxCoeff() < 1e-13);
  }
}

TEST_CASE("axial symmetry: common longitude shifts leave blocks unchanged") {
  tmm::CounterRng rng(916, 0);
  const TmmParams tp = random_tmm(rng, 7);
  std::vector<CovarianceModel> models;
  models.emplace_back(tp);
  models.emplace_back(tmm::CurlFreeParams{1.1, {2.5, 1.5}, 0.0, 0.0});
  models.emplace_back(tmm::DivFreeParams{0.9, {3.5, 2.5}, 0.0, 0.0});
  models.emplace_back(tmm::ParsBmDirectParams{tp.bm, 0.0, 0.0});

  for (const auto& m : models) {
    for (std::uint64_t i = 0; i < 6; ++i) {
      const double th_s = 0.2 + 2.7 * rng.uniform(900 + 4 * i);
      const double th_t = 0.2 + 2.7 * rng.uniform(900 + 4 * i + 1);
      const double ph_s = 6.28 * rng.uniform(900 + 4 * i + 2);
      const double ph_t = 6.28 * rng.uniform(900 + 4 * i + 3);
      const double shift = 2.0;
      const Eigen::Matrix2d base =
          tmm::cov_canonical(tmm::location_from_angles(th_s, ph_s),
                             tmm::location_from_angles(th_t, ph_t), m);
      const Eigen::Matrix2d moved =
          tmm::cov_canonical(tmm::location_from_angles(th_s, ph_s + shift),
                             tmm::location_from_angles(th_t, ph_t + shift), m);
      CHECK((base - moved).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("cov_parsbm_direct entries") {
  ParsBivariateMaternParams p;
  p.sigma1 = 1.5;
  p.sigma2 = 0.8;
  p.rho12 = 0.4;
  p.nu1 = 2.0;
  p.nu2 = 3.0;
  p.a = 1.2;
  const Location s = tmm::from_latlon(10.0, 20.0);
  const Location t = tmm::from_latlon(-30.0, 100.0);

  const Eigen::Matrix2d at0 = tmm::cov_parsbm_direct(s, s, p);
  CHECK(at0(0, 0) == doctest::Approx(1.5 * 1.5));
  CHECK(at0(1, 1) == doctest::Approx(0.8 * 0.8));
  CHECK(at0(0, 1) == doctest::Approx(0.4 * 1.5 * 0.8));

  const double r = tmm::chordal_distance(s, t);
  const Eigen::Matrix2d b = tmm::cov_parsbm_direct(s, t, p);
  CHECK(b(0, 0) == doctest::Approx(2.25 * tmm::matern(r, {2.0, 1.2})));
  CHECK(b(1, 1) == doctest::Approx(0.64 * tmm::matern(r, {3.0, 1.2})));
  CHECK(b(0, 1) == doctest::Approx(0.48 * tmm::matern(r, {2.5, 1.2})));
  CHECK(b(0, 1) == b(1, 0));

  p.rho12 = 0.0;
  CHECK(tmm::cov_parsbm_direct(s, t, p)(0, 1) == 0.0);
}

TEST_CASE("cov_matrix shape, symmetry, and single-location block") {
  tmm::CounterRng rng(917, 0);
  const TmmParams p = random_tmm(rng, 3);
  const CovarianceModel m = p;

  const Location s = random_location(rng, 31);
  const Eigen::MatrixXd one = tmm::cov_matrix({s}, m);
  CHECK(one.rows() == 2);
  CHECK(one.isApprox(tmm::cov_canonical(s, s, m), 1e-15));

  std::vector<Location> locs;
  for (std::uint64_t i = 0; i < 17; ++i) locs.push_back(random_location(rng, 40 + i));
  const Eigen::MatrixXd sigma = tmm::cov_matrix(locs, m);
  CHECK(sigma.rows() == 34);
  CHECK(sigma == sigma.transpose());  // exact symmetry by construction
  for (std::size_t i = 0; i < locs.size(); ++i) {
    for (std::size_t j = 0; j < locs.size(); ++j) {
      const Eigen::Matrix2d want = tmm::cov_canonical(locs[i], locs[j], m);
      CHECK((sigma.block<2, 2>(2 * i, 2 * j) - want).cwiseAbs().maxCoeff() <
            1e-14);
    }
  }
}

TEST_CASE("cov_matrix is positive semidefinite for random valid models") {
  tmm::CounterRng rng(918, 0);
  for (std::uint64_t set = 0; set < 20; ++set) {
    const std::size_t n = 5 + rng.below(9000 + set, 26);
    std::vector<Location> locs;
    for (std::uint64_t i = 0; i < n; ++i) {
      locs.push_back(random_location(rng, 10000 + 100 * set + i));
    }
    const TmmParams p = random_tmm(rng, 200 + set);
    const Eigen::MatrixXd sigma = tmm::cov_matrix(locs, CovarianceModel{p});
    const Eigen::VectorXd eigs =
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sigma).eigenvalues();
    CHECK(eigs.minCoeff() >= -1e-8 * sigma.diagonal().maxCoeff());
  }
}

TEST_CASE("duplicate locations stay positive definite with a nugget") {
  tmm::CounterRng rng(919, 0);
  TmmParams p = random_tmm(rng, 5);
  p.tau1 = 0.1;
  p.tau2 = 0.1;
  const Location s = random_location(rng, 0);
  const std::vector<Location> locs = {s, s, random_location(rng, 1)};
  const Eigen::MatrixXd sigma = tmm::cov_matrix(locs, CovarianceModel{p});
  CHECK(Eigen::LLT<Eigen::MatrixXd>(sigma).info() == Eigen::Success);
  // Signal block between the duplicates carries no nugget.
  CHECK(sigma(0, 2) == doctest::Approx(sigma(0, 0) - 0.01).epsilon(1e-12));
}

TEST_CASE("cov_cross_matrix is the nugget-free rectangle") {
  tmm::CounterRng rng(920, 0);
  TmmParams p = random_tmm(rng, 9);
  p.tau1 = 0.2;
  p.tau2 = 0.3;
  const CovarianceModel m = p;
  std::vector<Location> a, b;
  for (std::uint64_t i = 0; i < 4; ++i) a.push_back(random_location(rng, i));
  for (std::uint64_t i = 0; i < 3; ++i) b.push_back(random_location(rng, 50 + i));
  b[0] = a[1];  // coincident pair: still signal-only
  const Eigen::MatrixXd cross = tmm::cov_cross_matrix(a, b, m);
  CHECK(cross.rows() == 8);
  CHECK(cross.cols() == 6);
  TmmParams p0 = p;
  p0.tau1 = p0.tau2 = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      const Eigen::Matrix2d want =
          tmm::cov_canonical(a[i], b[j], CovarianceModel{p0});
      CHECK((cross.block<2, 2>(2 * i, 2 * j) - want).cwiseAbs().maxCoeff() <
            1e-15);
    }
  }
}

TEST_CASE("fast table-backed evaluator matches the exact path") {
  tmm::CounterRng rng(921, 0);
  for (std::uint64_t trial = 0; trial < 4; ++trial) {
    const TmmParams p = random_tmm(rng, 300 + trial);
    const CovarianceModel m = p;
    const tmm::detail::BlockEvaluator exact(m);
    const tmm::detail::BlockEvaluator fast(m, 0.01, 2.0);
    CHECK(fast.using_tables());
    double worst = 0.0;
    for (std::uint64_t i = 0; i < 60; ++i) {
      const Location s = random_location(rng, 5000 + 2 * i);
      const Location t = random_location(rng, 5000 + 2 * i + 1);
      const Eigen::Matrix2d be = exact.block(s, t);
      const Eigen::Matrix2d bf = fast.block(s, t);
      worst = std::max(worst, (be - bf).cwiseAbs().maxCoeff());
    }
    CHECK(worst < 1e-9);
  }
  // Baseline model also supports the table path.
  const tmm::ParsBmDirectParams pb{random_tmm(rng, 400).bm, 0.0, 0.0};
  const tmm::detail::BlockEvaluator exact(CovarianceModel{pb});
  const tmm::detail::BlockEvaluator fast(CovarianceModel{pb}, 0.01, 2.0);
  CHECK(fast.using_tables());
  const Location s = random_location(rng, 6000);
  const Location t = random_location(rng, 6001);
  CHECK((exact.block(s, t) - fast.block(s, t)).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("covariance evaluation counter counts four entries per block") {
  tmm::CounterRng rng(922, 0);
  const TmmParams p = random_tmm(rng, 11);
  const tmm::detail::BlockEvaluator ev(CovarianceModel{p});
  const Location s = random_location(rng, 0);
  const Location t = random_location(rng, 1);
  tmm::covariance_eval_reset();
  (void)ev.block(s, t);
  CHECK(tmm::covariance_eval_count() == 4);
  (void)ev.block(s, s);  // collocated blocks count as well
  CHECK(tmm::covariance_eval_count() == 8);
  std::vector<Location> locs;
  for (std::uint64_t i = 0; i < 6; ++i) locs.push_back(random_location(rng, 10 + i));
  tmm::covariance_eval_reset();
  (void)tmm::cov_matrix(locs, CovarianceModel{p});
  CHECK(tmm::covariance_eval_count() == 4 * (6 * 7) / 2);
}

TEST_CASE("model helpers and validation") {
  tmm::CounterRng rng(923, 0);
  TmmParams p = random_tmm(rng, 13);
  CHECK(tmm::model_name(CovarianceModel{p}) == "tmm");
  CHECK(tmm::model_name(CovarianceModel{tmm::CurlFreeParams{}}) == "curl_free");
  CHECK(tmm::model_name(CovarianceModel{tmm::DivFreeParams{}}) == "div_free");
  CHECK(tmm::model_name(CovarianceModel{tmm::ParsBmDirectParams{}}) ==
        "parsbm_direct");
  p.tau1 = 0.25;
  CHECK(tmm::model_tau(CovarianceModel{p})[0] == 0.25);

  TmmParams bad = p;
  bad.bm.rho12 = 1.5;
  CHECK_THROWS_WITH_AS(tmm::validate_model(CovarianceModel{bad}),
                       doctest::Contains("rho_bound"), tmm::Error);
  bad = p;
  bad.bm.nu1 = 1.0;
  CHECK_THROWS_AS(tmm::validate_model(CovarianceModel{bad}), tmm::Error);
  bad = p;
  bad.tau2 = -0.1;
  CHECK_THROWS_AS(tmm::validate_model(CovarianceModel{bad}), tmm::Error);

  tmm::ObservationSet obs;
  obs.locations = {tmm::from_latlon(0.0, 0.0)};
  obs.values = Eigen::MatrixXd::Zero(2, 2);
  CHECK_NOTHROW(tmm::validate_observations(obs));
  obs.values = Eigen::MatrixXd::Zero(2, 3);
  CHECK_THROWS_AS(tmm::validate_observations(obs), tmm::Error);
}
