/// @file inference.cpp
/// @brief MLE driver: reparameterization, LHS multi-start, BFGS with
///        backtracking line search, and the parametric bootstrap.

#include "tmm/inference.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <utility>

#include "tmm/errors.hpp"
#include "tmm/kernels.hpp"
#include "tmm/parallel.hpp"
#include "tmm/rng.hpp"
#include "tmm/simulate.hpp"

namespace tmm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void check_positive_box(double lo, double hi, double cap, const char* name) {
  if (!(lo > 0.0) || !(hi > lo) || !std::isfinite(hi)) {
    fail_validation(std::string(name) +
                    " sampling box needs 0 < lo < hi < infinity");
  }
  if (!(cap > 0.0)) {
    fail_validation(std::string(name) + " upper bound must be positive");
  }
  if (hi > cap) {
    fail_validation(std::string(name) +
                    " sampling box exceeds the parameter upper bound");
  }
}

/// Positive coordinate map: pure log when the upper bound is infinite,
/// logistic scaled to (0, hi) otherwise.
double positive_forward(double x, double hi) {
  if (std::isinf(hi)) return std::exp(x);
  return hi * stable_sigmoid(x);
}

double positive_backward(double v, double hi, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    fail_validation(std::string(name) + " must be positive");
  }
  if (std::isinf(hi)) return std::log(v);
  if (!(v < hi)) {
    fail_validation(std::string(name) +
                    " must lie strictly below its upper bound");
  }
  return std::log(v / (hi - v));
}

}  // namespace

void validate_fit_config(const FitConfig& cfg) {
  if (!(cfg.nu_lo >= 0.0) || !(cfg.nu_hi > cfg.nu_lo) ||
      !std::isfinite(cfg.nu_hi)) {
    fail_validation("smoothness bounds need 0 <= nu_lo < nu_hi < infinity");
  }
  check_positive_box(cfg.sigma_box_lo, cfg.sigma_box_hi, cfg.sigma_hi,
                     "sigma");
  check_positive_box(cfg.inv_a_box_lo, cfg.inv_a_box_hi, cfg.inv_a_hi,
                     "inverse scale");
  check_positive_box(cfg.tau_box_lo, cfg.tau_box_hi, cfg.tau_hi, "tau");
  if (cfg.n_lhs < 1) fail_validation("n_lhs must be at least 1");
  if (!(cfg.fixed_init_inverse_scale > 0.0) ||
      cfg.fixed_init_inverse_scale >= cfg.inv_a_hi) {
    fail_validation(
        "fixed_init_inverse_scale must be positive and below inv_a_hi");
  }
  if (!(cfg.init_taus[0] > 0.0) || !(cfg.init_taus[1] > 0.0) ||
      cfg.init_taus[0] >= cfg.tau_hi || cfg.init_taus[1] >= cfg.tau_hi) {
    fail_validation("init_taus must be positive and below tau_hi");
  }
  if (cfg.max_iters < 0) fail_validation("max_iters must be nonnegative");
  if (!(cfg.grad_tol > 0.0) || !(cfg.f_tol > 0.0)) {
    fail_validation("convergence tolerances must be positive");
  }
}

Eigen::VectorXd params_to_vector(const TmmParams& p) {
  Eigen::VectorXd th(8);
  th << p.bm.sigma1, p.bm.sigma2, p.bm.rho12, p.bm.nu1, p.bm.nu2,
      1.0 / p.bm.a, p.tau1, p.tau2;
  return th;
}

TmmParams vector_to_params(const Eigen::VectorXd& theta) {
  if (theta.size() != 8) fail_validation("parameter vector must have size 8");
  TmmParams p;
  p.bm.sigma1 = theta(0);
  p.bm.sigma2 = theta(1);
  p.bm.rho12 = theta(2);
  p.bm.nu1 = theta(3);
  p.bm.nu2 = theta(4);
  p.bm.a = 1.0 / theta(5);
  p.tau1 = theta(6);
  p.tau2 = theta(7);
  return p;
}

CovarianceModel to_model(ModelFamily family, const TmmParams& p) {
  if (family == ModelFamily::kTmm) return p;
  ParsBmDirectParams bp;
  bp.bm = p.bm;
  bp.tau1 = p.tau1;
  bp.tau2 = p.tau2;
  return bp;
}

Eigen::VectorXd to_unconstrained(const Eigen::VectorXd& natural,
                                 const FitConfig& cfg) {
  if (natural.size() != 8) fail_validation("parameter vector must have size 8");
  for (int i : {3, 4}) {
    if (!(natural(i) > cfg.nu_lo) || !(natural(i) < cfg.nu_hi)) {
      fail_validation(std::string(kParamNames[i]) +
                      " must lie strictly inside the smoothness bounds");
    }
  }
  const double bound = rho_bound(natural(3), natural(4));
  const double t = natural(2) / bound;
  if (!(std::abs(t) < 1.0)) {
    fail_validation("rho12 must lie strictly inside rho_bound(nu1, nu2)");
  }
  Eigen::VectorXd x(8);
  x(0) = positive_backward(natural(0), cfg.sigma_hi, kParamNames[0]);
  x(1) = positive_backward(natural(1), cfg.sigma_hi, kParamNames[1]);
  x(2) = std::atanh(t);
  x(3) = std::log((natural(3) - cfg.nu_lo) / (cfg.nu_hi - natural(3)));
  x(4) = std::log((natural(4) - cfg.nu_lo) / (cfg.nu_hi - natural(4)));
  x(5) = positive_backward(natural(5), cfg.inv_a_hi, kParamNames[5]);
  x(6) = positive_backward(natural(6), cfg.tau_hi, kParamNames[6]);
  x(7) = positive_backward(natural(7), cfg.tau_hi, kParamNames[7]);
  return x;
}

Eigen::VectorXd to_natural(const Eigen::VectorXd& x, const FitConfig& cfg) {
  if (x.size() != 8) fail_validation("parameter vector must have size 8");
  const double span = cfg.nu_hi - cfg.nu_lo;
  Eigen::VectorXd th(8);
  th(0) = positive_forward(x(0), cfg.sigma_hi);
  th(1) = positive_forward(x(1), cfg.sigma_hi);
  th(3) = cfg.nu_lo + span * stable_sigmoid(x(3));
  th(4) = cfg.nu_lo + span * stable_sigmoid(x(4));
  th(2) = rho_bound(th(3), th(4)) * std::tanh(x(2));
  th(5) = positive_forward(x(5), cfg.inv_a_hi);
  th(6) = positive_forward(x(6), cfg.tau_hi);
  th(7) = positive_forward(x(7), cfg.tau_hi);
  return th;
}

std::vector<Eigen::VectorXd> lhs_candidates(const FitConfig& cfg,
                                            std::uint64_t seed) {
  validate_fit_config(cfg);
  const int n = cfg.n_lhs;
  const std::array<std::pair<double, double>, 8> box = {{
      {cfg.sigma_box_lo, cfg.sigma_box_hi},
      {cfg.sigma_box_lo, cfg.sigma_box_hi},
      {-1.0, 1.0},  // rho12 fraction, scaled by the candidate's bound
      {cfg.nu_lo, cfg.nu_hi},
      {cfg.nu_lo, cfg.nu_hi},
      {cfg.inv_a_box_lo, cfg.inv_a_box_hi},
      {cfg.tau_box_lo, cfg.tau_box_hi},
      {cfg.tau_box_lo, cfg.tau_box_hi},
  }};
  const std::uint64_t child =
      CounterRng::derive(seed, CounterRng::tag("lhs"), 0);
  const CounterRng perm_rng(child, 0);
  const CounterRng jitter_rng(child, 1);

  std::vector<Eigen::VectorXd> out(n, Eigen::VectorXd(8));
  for (int c = 0; c < 8; ++c) {
    std::vector<int> strata(n);
    for (int i = 0; i < n; ++i) strata[i] = i;
    const auto base = static_cast<std::uint64_t>(c) *
                      static_cast<std::uint64_t>(n);
    for (int i = n - 1; i > 0; --i) {
      const auto j = static_cast<int>(perm_rng.below(
          base + static_cast<std::uint64_t>(i),
          static_cast<std::uint64_t>(i) + 1));
      std::swap(strata[i], strata[j]);
    }
    const double width = (box[c].second - box[c].first) / n;
    for (int i = 0; i < n; ++i) {
      const double u =
          jitter_rng.uniform(base + static_cast<std::uint64_t>(i));
      out[i](c) = box[c].first + (strata[i] + u) * width;
    }
  }
  for (auto& cand : out) {
    cand(2) *= rho_bound(cand(3), cand(4));
  }
  return out;
}

namespace {

/// nll as a function of unconstrained coordinates; invalid or
/// non-positive-definite models score +infinity.
class Objective {
 public:
  Objective(std::function<double(const CovarianceModel&)> nll,
            ModelFamily family, const FitConfig& cfg)
      : nll_(std::move(nll)), family_(family), cfg_(&cfg) {}

  double operator()(const Eigen::VectorXd& x) const {
    if (!x.allFinite()) return kInf;
    try {
      const Eigen::VectorXd th = to_natural(x, *cfg_);
      const double v = nll_(to_model(family_, vector_to_params(th)));
      return std::isfinite(v) ? v : kInf;
    } catch (const Error&) {
      return kInf;
    }
  }

 private:
  std::function<double(const CovarianceModel&)> nll_;
  ModelFamily family_;
  const FitConfig* cfg_;
};

/// Central-difference gradient with one-sided fallback at infinite
/// evaluations; the 16 component evaluations run in parallel.
Eigen::VectorXd fd_gradient(const Objective& obj, const Eigen::VectorXd& x,
                            double f0, int threads) {
  const Eigen::Index n = x.size();
  Eigen::VectorXd h(n), fp(n), fm(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    h(i) = 1e-5 * std::max(1.0, std::abs(x(i)));
  }
  parallel_for(static_cast<std::size_t>(2 * n), threads, [&](std::size_t k) {
    const auto i = static_cast<Eigen::Index>(k / 2);
    Eigen::VectorXd xt = x;
    if (k % 2 == 0) {
      xt(i) += h(i);
      fp(i) = obj(xt);
    } else {
      xt(i) -= h(i);
      fm(i) = obj(xt);
    }
  });
  Eigen::VectorXd g(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool pf = std::isfinite(fp(i)), mf = std::isfinite(fm(i));
    if (pf && mf) {
      g(i) = (fp(i) - fm(i)) / (2.0 * h(i));
    } else if (pf) {
      g(i) = (fp(i) - f0) / h(i);
    } else if (mf) {
      g(i) = (f0 - fm(i)) / h(i);
    } else {
      g(i) = 0.0;
    }
  }
  return g;
}

struct DriverOutcome {
  Eigen::VectorXd x;
  double f = kInf;
  int iterations = 0;
  bool converged = false;
};

/// BFGS with Armijo backtracking; curvature-guarded inverse-Hessian
/// updates keep the approximation positive definite.
DriverOutcome minimize(const Objective& obj, Eigen::VectorXd x,
                       const FitConfig& cfg, std::vector<TraceEntry>* trace) {
  constexpr double kArmijo = 1e-4;
  const int threads = cfg.threads;
  DriverOutcome out;
  double f = obj(x);
  if (!std::isfinite(f)) {
    fail_numerical("initial point has non-finite objective");
  }
  if (trace) trace->push_back({to_natural(x, cfg), f});
  Eigen::VectorXd g = fd_gradient(obj, x, f, threads);
  Eigen::MatrixXd h_inv = Eigen::MatrixXd::Identity(x.size(), x.size());
  bool scaled = false;

  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    if (g.cwiseAbs().maxCoeff() <= cfg.grad_tol * (1.0 + std::abs(f))) {
      out.converged = true;
      break;
    }
    Eigen::VectorXd d = -(h_inv * g);
    double slope = g.dot(d);
    if (!(slope < 0.0)) {
      // Curvature noise broke descent; restart from steepest descent.
      h_inv.setIdentity();
      scaled = false;
      d = -g;
      slope = g.dot(d);
    }
    double alpha = 1.0;
    double f_new = kInf;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      f_new = obj(x + alpha * d);
      if (f_new <= f + kArmijo * alpha * slope) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      // No resolvable decrease left; accept as converged only when the
      // gradient is already near the finite-difference noise floor.
      out.converged =
          g.cwiseAbs().maxCoeff() <=
          std::sqrt(cfg.grad_tol) * (1.0 + std::abs(f));
      break;
    }
    const Eigen::VectorXd s = alpha * d;
    x += s;
    const double f_old = f;
    f = f_new;
    out.iterations = iter + 1;
    if (trace) trace->push_back({to_natural(x, cfg), f});
    const Eigen::VectorXd g_new = fd_gradient(obj, x, f, threads);
    const Eigen::VectorXd y = g_new - g;
    g = g_new;
    if (std::abs(f_old - f) <= cfg.f_tol * (1.0 + std::abs(f))) {
      out.converged = true;
      break;
    }
    const double sy = s.dot(y);
    if (sy > 1e-10 * s.norm() * y.norm()) {
      if (!scaled) {
        h_inv *= sy / y.squaredNorm();
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Eigen::VectorXd hy = h_inv * y;
      h_inv += (rho * rho * (y.dot(hy) + sy)) * (s * s.transpose()) -
               rho * (hy * s.transpose() + s * hy.transpose());
    }
  }
  if (g.cwiseAbs().maxCoeff() <= cfg.grad_tol * (1.0 + std::abs(f))) {
    out.converged = true;
  }
  out.x = std::move(x);
  out.f = f;
  return out;
}

FitResult run_fit(const std::function<double(const CovarianceModel&)>& nll,
                  ModelFamily family, const FitConfig& cfg,
                  std::uint64_t seed) {
  validate_fit_config(cfg);
  const Objective obj(nll, family, cfg);

  std::vector<Eigen::VectorXd> cands = lhs_candidates(cfg, seed);
  for (auto& c : cands) {
    c(5) = cfg.fixed_init_inverse_scale;
    c(6) = cfg.init_taus[0];
    c(7) = cfg.init_taus[1];
  }
  std::vector<double> vals(cands.size(), kInf);
  parallel_for(cands.size(), cfg.threads, [&](std::size_t i) {
    vals[i] = obj(to_unconstrained(cands[i], cfg));
  });
  std::size_t best = cands.size();
  for (std::size_t i = 0; i < cands.size(); ++i) {
    if (std::isfinite(vals[i]) && (best == cands.size() || vals[i] < vals[best])) {
      best = i;
    }
  }
  if (best == cands.size()) {
    fail_numerical(
        "all initialization candidates were invalid or non-positive-definite");
  }

  FitResult result;
  result.family = family;
  result.config = cfg;
  result.lhs_candidates_evaluated = static_cast<int>(cands.size());
  std::vector<TraceEntry> trace;
  const DriverOutcome run =
      minimize(obj, to_unconstrained(cands[best], cfg), cfg,
               cfg.keep_trace ? &trace : nullptr);
  result.theta_hat = vector_to_params(to_natural(run.x, cfg));
  result.nll = run.f;
  result.iterations = run.iterations;
  result.converged = run.converged;
  result.trace = std::move(trace);
  return result;
}

}  // namespace

FitResult fit_mle(const ObservationSet& obs, ModelFamily family,
                  const FitConfig& cfg, std::uint64_t seed) {
  const DenseLikelihood ctx(obs, MeanModel{cfg.profile_mean}, 1);
  return run_fit([&ctx](const CovarianceModel& m) { return ctx(m); }, family,
                 cfg, seed);
}

FitResult fit_mle(const GridObservationSet& obs, ModelFamily family,
                  const FitConfig& cfg, std::uint64_t seed) {
  const SpectralLikelihood ctx(obs, MeanModel{cfg.profile_mean}, 1);
  return run_fit([&ctx](const CovarianceModel& m) { return ctx(m); }, family,
                 cfg, seed);
}

BootstrapResult bootstrap_se(const FitResult& fitted, const DataShape& shape,
                             int n_bootstrap, std::uint64_t seed) {
  if (n_bootstrap < 2) fail_validation("bootstrap needs at least 2 replicates");
  if (shape.n_reps < 1) fail_validation("data shape needs n_reps >= 1");
  if (!shape.grid && shape.locations.empty()) {
    fail_validation("data shape needs a grid or a location list");
  }
  FitConfig cfg = fitted.config;
  cfg.keep_trace = false;

  SimulationSpec spec;
  spec.locations = shape.grid ? shape.grid->locations() : shape.locations;
  spec.model = to_model(fitted.family, fitted.theta_hat);
  spec.n_reps = shape.n_reps;
  spec.threads = cfg.threads;

  BootstrapResult out;
  for (int b = 0; b < n_bootstrap; ++b) {
    spec.seed = CounterRng::derive(
        seed, CounterRng::tag("bootstrap_sim"), static_cast<std::uint64_t>(b));
    const std::uint64_t fit_seed = CounterRng::derive(
        seed, CounterRng::tag("bootstrap_fit"), static_cast<std::uint64_t>(b));
    try {
      const Eigen::MatrixXd y = simulate(spec);
      FitResult refit;
      if (shape.grid) {
        refit = fit_mle(GridObservationSet{*shape.grid, y}, fitted.family,
                        cfg, fit_seed);
      } else {
        refit = fit_mle(ObservationSet{spec.locations, y}, fitted.family, cfg,
                        fit_seed);
      }
      if (!refit.converged) ++out.n_nonconverged;
      out.estimates.push_back(params_to_vector(refit.theta_hat));
    } catch (const Error&) {
      ++out.n_failed;
    }
  }
  if (5 * out.n_failed > n_bootstrap) {
    fail_nonconvergence("bootstrap refits failed for " +
                        std::to_string(out.n_failed) + " of " +
                        std::to_string(n_bootstrap) + " replicates");
  }
  out.se = detail::componentwise_sd(out.estimates);
  return out;
}

namespace detail {

Eigen::VectorXd componentwise_sd(const std::vector<Eigen::VectorXd>& xs) {
  if (xs.size() < 2) {
    fail_validation("standard deviation needs at least two estimates");
  }
  const Eigen::Index n = xs.front().size();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(n);
  for (const auto& x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  Eigen::VectorXd ss = Eigen::VectorXd::Zero(n);
  for (const auto& x : xs) ss += (x - mean).cwiseAbs2();
  return (ss / static_cast<double>(xs.size() - 1)).cwiseSqrt();
}

}  // namespace detail

}  // namespace tmm
