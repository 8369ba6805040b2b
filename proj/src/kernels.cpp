/// @file kernels.cpp
/// @brief Matern radial functions computed in log space on top of GSL's
///        log-scale modified Bessel K.

#include "tmm/kernels.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_sf_bessel.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "tmm/errors.hpp"

namespace tmm {

namespace {

constexpr double kLog2 = 0.6931471805599453094172321;
// exp(-x) underflows past x ~ 745; beyond this cutoff every radial factor
// is zero to double precision regardless of the polynomial prefactor.
constexpr double kArCutoff = 705.0;

// GSL must not abort the process; statuses are handled at the call site.
[[maybe_unused]] const gsl_error_handler_t* const kPreviousHandler =
    gsl_set_error_handler_off();

void check_matern_params(const MaternParams& p, bool needs_derivatives) {
  if (!(p.nu > 0.0) || !std::isfinite(p.nu)) {
    fail_validation("matern smoothness nu must be positive, got " +
                    std::to_string(p.nu));
  }
  if (!(p.a > 0.0) || !std::isfinite(p.a)) {
    fail_validation("matern scale a must be positive, got " +
                    std::to_string(p.a));
  }
  if (needs_derivatives && !(p.nu > 1.0)) {
    fail_validation("differentiated matern requires nu > 1, got nu = " +
                    std::to_string(p.nu));
  }
}

void check_radius(double r) {
  if (!(r >= 0.0) || !std::isfinite(r)) {
    fail_validation("matern radius must be finite and nonnegative, got " +
                    std::to_string(r));
  }
}

// log of 2^(1-nu)/Gamma(nu), the shared Matern normalisation.
double log_norm(double nu) { return (1.0 - nu) * kLog2 - std::lgamma(nu); }

}  // namespace

double log_bessel_k(double nu, double x) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    fail_validation("log_bessel_k requires x > 0, got " + std::to_string(x));
  }
  gsl_sf_result res;
  // K is even in its order.
  const int status = gsl_sf_bessel_lnKnu_e(std::fabs(nu), x, &res);
  if (status != GSL_SUCCESS) {
    fail_numerical("log_bessel_k(nu=" + std::to_string(nu) +
                   ", x=" + std::to_string(x) +
                   ") failed: " + gsl_strerror(status));
  }
  return res.val;
}

double matern(double r, const MaternParams& p) {
  check_matern_params(p, false);
  check_radius(r);
  if (r == 0.0) return 1.0;
  const double ar = p.a * r;
  if (ar > kArCutoff) return 0.0;
  return std::exp(log_norm(p.nu) + p.nu * std::log(ar) +
                  log_bessel_k(p.nu, ar));
}

double f_radial(double r, const MaternParams& p) {
  check_matern_params(p, true);
  check_radius(r);
  if (r == 0.0) return -p.a * p.a / (2.0 * (p.nu - 1.0));
  const double ar = p.a * r;
  if (ar > kArCutoff) return 0.0;
  return -std::exp(log_norm(p.nu) + 2.0 * std::log(p.a) +
                   (p.nu - 1.0) * std::log(ar) + log_bessel_k(p.nu - 1.0, ar));
}

double g_radial(double r, const MaternParams& p) {
  check_matern_params(p, true);
  check_radius(r);
  if (r == 0.0) {
    fail_validation("g_radial is defined for r > 0 only");
  }
  const double ar = p.a * r;
  if (ar > kArCutoff) return 0.0;
  return std::exp(log_norm(p.nu) + 4.0 * std::log(p.a) +
                  (p.nu - 2.0) * std::log(ar) + log_bessel_k(p.nu - 2.0, ar));
}

Eigen::Matrix3d hessian_k(const Eigen::Vector3d& h, const MaternParams& p) {
  check_matern_params(p, true);
  const double r = h.norm();
  if (r < 1e-9) {
    return f_radial(0.0, p) * Eigen::Matrix3d::Identity();
  }
  Eigen::Matrix3d out = f_radial(r, p) * Eigen::Matrix3d::Identity();
  out.noalias() += g_radial(r, p) * (h * h.transpose());
  return out;
}

double rho_bound(double nu1, double nu2) {
  if (!(nu1 > 0.0) || !(nu2 > 0.0)) {
    fail_validation("rho_bound requires positive smoothness parameters");
  }
  if (nu1 == nu2) return 1.0;
  const double nu12 = 0.5 * (nu1 + nu2);
  const double log_b = 0.5 * (std::lgamma(nu1 + 1.5) - std::lgamma(nu1)) +
                       0.5 * (std::lgamma(nu2 + 1.5) - std::lgamma(nu2)) +
                       std::lgamma(nu12) - std::lgamma(nu12 + 1.5);
  return std::exp(log_b);
}

namespace {

// log of the spectral-density ratio whose infimum over t >= 0 enters the
// full bivariate Matern validity bound (d = 3).
double log_density_ratio(double t, const FullBivariateMaternParams& p) {
  const double t2 = t * t;
  return (2.0 * p.nu12 + 3.0) * std::log(p.a12 * p.a12 + t2) -
         (p.nu1 + 1.5) * std::log(p.a1 * p.a1 + t2) -
         (p.nu2 + 1.5) * std::log(p.a2 * p.a2 + t2);
}

double golden_min(double lo, double hi, const FullBivariateMaternParams& p) {
  constexpr double kInvPhi = 0.6180339887498948482;
  double x1 = hi - kInvPhi * (hi - lo);
  double x2 = lo + kInvPhi * (hi - lo);
  double f1 = log_density_ratio(x1, p);
  double f2 = log_density_ratio(x2, p);
  for (int it = 0; it < 200 && hi - lo > 1e-13 * (1.0 + hi); ++it) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - kInvPhi * (hi - lo);
      f1 = log_density_ratio(x1, p);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + kInvPhi * (hi - lo);
      f2 = log_density_ratio(x2, p);
    }
  }
  return std::min(f1, f2);
}

}  // namespace

bool full_bm_valid(const FullBivariateMaternParams& p) {
  if (!(p.sigma1 > 0.0) || !(p.sigma2 > 0.0)) {
    fail_validation("full_bm_valid requires positive marginal sigmas");
  }
  if (!(p.nu1 > 0.0) || !(p.nu2 > 0.0) || !(p.nu12 > 0.0)) {
    fail_validation("full_bm_valid requires positive smoothness parameters");
  }
  if (!(p.a1 > 0.0) || !(p.a2 > 0.0) || !(p.a12 > 0.0)) {
    fail_validation("full_bm_valid requires positive scale parameters");
  }
  if (!std::isfinite(p.rho12) || std::fabs(p.rho12) > 1.0) {
    return false;
  }
  if (p.rho12 == 0.0) return true;

  const double nu_mean = 0.5 * (p.nu1 + p.nu2);
  if (p.nu12 < nu_mean - 1e-14) {
    // Cross smoothness below the marginal mean admits no correlation.
    return false;
  }

  // Infimum of the density ratio over a log-spaced grid, refined by
  // golden-section around the grid minimum. When the total tail exponent
  // vanishes the infimum may sit at t -> infinity with limit value 0.
  std::vector<double> ts;
  ts.reserve(514);
  ts.push_back(0.0);
  const double lo = 1e-4, hi = 1e4;
  const int n = 512;
  for (int i = 0; i < n; ++i) {
    ts.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1)));
  }
  std::size_t best = 0;
  double best_val = log_density_ratio(ts[0], p);
  for (std::size_t i = 1; i < ts.size(); ++i) {
    const double v = log_density_ratio(ts[i], p);
    if (v < best_val) {
      best_val = v;
      best = i;
    }
  }
  const double blo = best > 0 ? ts[best - 1] : 0.0;
  const double bhi = best + 1 < ts.size() ? ts[best + 1] : 10.0 * ts.back();
  double log_inf = std::min(best_val, golden_min(blo, bhi, p));
  const double tail_exponent = 2.0 * p.nu12 - p.nu1 - p.nu2;
  if (tail_exponent <= 1e-14) {
    // Balanced tails: the ratio tends to 1, i.e. log value 0.
    log_inf = std::min(log_inf, 0.0);
  }

  const double log_bound2 =
      std::lgamma(p.nu1 + 1.5) - std::lgamma(p.nu1) + std::lgamma(p.nu2 + 1.5) -
      std::lgamma(p.nu2) + 2.0 * (std::lgamma(p.nu12) - std::lgamma(p.nu12 + 1.5)) +
      2.0 * p.nu1 * std::log(p.a1) + 2.0 * p.nu2 * std::log(p.a2) -
      4.0 * p.nu12 * std::log(p.a12) + log_inf;
  return 2.0 * std::log(std::fabs(p.rho12)) <= log_bound2 + 1e-12;
}

}  // namespace tmm
