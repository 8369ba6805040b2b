#pragma once
/// @file kernels.hpp
/// @brief Scalar Matern kernel, the radial factors F and G of its Hessian,
///        the 3x3 Hessian kernel, and bivariate-Matern validity checks.

#include <Eigen/Dense>

namespace tmm {

struct MaternParams {
  double nu = 1.5;  ///< smoothness; > 1 wherever the kernel is differentiated
  double a = 1.0;   ///< spatial scale; 1/a is the range-like quantity
};

/// Parsimonious bivariate Matern: shared scale, cross smoothness
/// (nu1 + nu2) / 2, co-located cross-correlation rho12.
struct ParsBivariateMaternParams {
  double sigma1 = 1.0, sigma2 = 1.0;
  double rho12 = 0.0;
  double nu1 = 2.0, nu2 = 2.0;
  double a = 1.0;
};

/// Full bivariate Matern with distinct scales and free cross smoothness.
struct FullBivariateMaternParams {
  double sigma1 = 1.0, sigma2 = 1.0, rho12 = 0.0;
  double nu1 = 2.0, nu2 = 2.0, nu12 = 2.0;
  double a1 = 1.0, a2 = 1.0, a12 = 1.0;
};

/// ln K_nu(x) for x > 0; even in the order nu.
double log_bessel_k(double nu, double x);

/// Matern correlation M(r) = 2^(1-nu)/Gamma(nu) (ar)^nu K_nu(ar); M(0) = 1,
/// strictly positive and decreasing; returns 0 beyond the a*r > 705
/// underflow cutoff.
double matern(double r, const MaternParams& p);

/// Radial factor F of the Hessian of M; F(0) = -a^2 / (2 (nu - 1)).
/// Requires nu > 1.
double f_radial(double r, const MaternParams& p);

/// Radial factor G of the Hessian of M; defined for r > 0 only.
/// Requires nu > 1.
double g_radial(double r, const MaternParams& p);

/// Hessian of M(|h|): F(|h|) I3 + G(|h|) h h^T for h != 0, with the
/// continuous limit F(0) I3 taken when |h| < 1e-9.
Eigen::Matrix3d hessian_k(const Eigen::Vector3d& h, const MaternParams& p);

/// Tight upper bound for |rho12| in the parsimonious bivariate Matern on
/// R^3; symmetric, in (0, 1], exactly 1 when nu1 == nu2.
double rho_bound(double nu1, double nu2);

/// Validity of the full bivariate Matern on R^3: rho12^2 is checked against
/// the infimum-based bound (d = 3). The infimum is evaluated on a log-spaced
/// grid with golden-section refinement, with the analytic short-circuit that
/// nu12 < (nu1 + nu2)/2 forces rho12 = 0.
bool full_bm_valid(const FullBivariateMaternParams& p);

}  // namespace tmm
