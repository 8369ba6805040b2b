#pragma once
/// @file inference.hpp
/// @brief Maximum-likelihood fitting: smooth reparameterization onto an
///        unconstrained space, Latin-hypercube multi-start, quasi-Newton
///        optimization with parallel finite-difference gradients, and
///        parametric-bootstrap standard errors.

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "tmm/covariance.hpp"
#include "tmm/likelihood.hpp"
#include "tmm/sphere.hpp"

namespace tmm {

/// Families that share the 8-parameter layout
/// (sigma1, sigma2, rho12, nu1, nu2, 1/a, tau1, tau2).
enum class ModelFamily { kTmm, kParsBmDirect };

inline constexpr std::array<const char*, 8> kParamNames = {
    "sigma1", "sigma2", "rho12", "nu1", "nu2", "inv_a", "tau1", "tau2"};

/// Fitting options. Smoothness is constrained to (nu_lo, nu_hi); sigma,
/// 1/a, and tau are positive, with optional finite upper bounds (log
/// reparameterization when unbounded, scaled logistic when bounded);
/// rho12 is kept inside rho_bound(nu1, nu2) by construction. The *_box
/// fields bound the finite Latin-hypercube sampling box only and must sit
/// inside the hard bounds.
struct FitConfig {
  double nu_lo = 1.0, nu_hi = 5.0;
  double sigma_hi = std::numeric_limits<double>::infinity();
  double inv_a_hi = std::numeric_limits<double>::infinity();
  double tau_hi = std::numeric_limits<double>::infinity();

  double sigma_box_lo = 0.05, sigma_box_hi = 5.0;
  double inv_a_box_lo = 0.1, inv_a_box_hi = 10.0;
  double tau_box_lo = 0.005, tau_box_hi = 0.5;

  int n_lhs = 100;
  /// Initial inverse spatial scale fixed across candidates (the remaining
  /// coordinates vary); 5 suits unit-variance synthetic work, 10 data work.
  double fixed_init_inverse_scale = 5.0;
  /// Initial nugget standard deviations fixed across candidates.
  std::array<double, 2> init_taus = {0.05, 0.05};

  int max_iters = 200;
  double grad_tol = 1e-5;  ///< sup-norm gradient test, relative to 1 + |nll|
  double f_tol = 1e-10;    ///< relative objective-change test

  /// Profile a per-component quadratic-in-colatitude mean by GLS.
  bool profile_mean = false;
  bool keep_trace = false;
  int threads = 0;
};

void validate_fit_config(const FitConfig& cfg);

struct TraceEntry {
  Eigen::VectorXd theta;  ///< natural parameters, kParamNames order
  double nll = 0.0;
};

struct FitResult {
  ModelFamily family = ModelFamily::kTmm;
  TmmParams theta_hat;  ///< ParsBmDirect fits share the field layout
  double nll = 0.0;
  int iterations = 0;
  bool converged = false;
  int lhs_candidates_evaluated = 0;
  FitConfig config;  ///< as used; bootstrap_se refits with the same options
  std::vector<TraceEntry> trace;  ///< accepted iterates when keep_trace
};

/// Natural 8-vector <-> structured parameters (inv_a = 1/a).
Eigen::VectorXd params_to_vector(const TmmParams& p);
TmmParams vector_to_params(const Eigen::VectorXd& theta);

/// Covariance model for a family from the shared parameter layout.
CovarianceModel to_model(ModelFamily family, const TmmParams& p);

/// Unconstrained coordinates: log (or scaled logistic, when an upper bound
/// is finite) for sigma, inverse scale, and tau; scaled-logistic nu in
/// (nu_lo, nu_hi); rho12 = rho_bound(nu1, nu2) tanh(eta). Round trips with
/// to_natural to 1e-12.
Eigen::VectorXd to_unconstrained(const Eigen::VectorXd& natural,
                                 const FitConfig& cfg);
Eigen::VectorXd to_natural(const Eigen::VectorXd& unconstrained,
                           const FitConfig& cfg);

/// Stratified Latin-hypercube candidates in natural space: every coordinate
/// hits each of n_lhs equal strata of its sampling box exactly once
/// (uniformly jittered within the stratum). The rho12 coordinate is
/// stratified on (-1, 1) and scaled by the candidate's own
/// rho_bound(nu1, nu2), so every candidate is valid by construction.
std::vector<Eigen::VectorXd> lhs_candidates(const FitConfig& cfg,
                                            std::uint64_t seed);

/// Maximum-likelihood fit. Candidates start from the Latin hypercube with
/// the inverse scale pinned at fixed_init_inverse_scale and nuggets at
/// init_taus; the best candidate seeds a BFGS run with backtracking line
/// search and parallel central-difference gradients. Non-positive-definite
/// or otherwise invalid iterates score +infinity. Non-convergence yields a
/// flagged result, not an exception; all candidates failing is an error.
FitResult fit_mle(const ObservationSet& obs, ModelFamily family,
                  const FitConfig& cfg, std::uint64_t seed);

/// Spectral-path variant for full-longitude grid data.
FitResult fit_mle(const GridObservationSet& obs, ModelFamily family,
                  const FitConfig& cfg, std::uint64_t seed);

/// Shape of the data a fit consumed, for bootstrap resimulation: the
/// spectral path is used when grid is set, else the dense path.
struct DataShape {
  std::size_t n_reps = 1;
  std::optional<RegularGrid> grid;
  std::vector<Location> locations;  ///< used when grid is unset
};

struct BootstrapResult {
  Eigen::VectorXd se;  ///< componentwise sd of refit estimates, 8-vector
  std::vector<Eigen::VectorXd> estimates;  ///< delivered refit estimates
  int n_failed = 0;        ///< refits that raised an error
  int n_nonconverged = 0;  ///< delivered but flagged refits
};

/// Parametric bootstrap: simulates B datasets at theta_hat, refits each
/// with the original options, and returns componentwise standard errors.
/// Refits that raise errors are recorded and skipped; more than 20%
/// failing is a non-convergence error. Flagged (non-converged) refits
/// still contribute their estimates and are counted separately.
BootstrapResult bootstrap_se(const FitResult& fitted, const DataShape& shape,
                             int n_bootstrap, std::uint64_t seed);

namespace detail {

/// Componentwise sample standard deviation (ddof = 1) of equal-length
/// vectors; requires at least two.
Eigen::VectorXd componentwise_sd(const std::vector<Eigen::VectorXd>& xs);

}  // namespace detail

}  // namespace tmm
