/// @file covariance.cpp
/// @brief Block assembly for the tangential and baseline covariance models.

#include "tmm/covariance.hpp"

#include <atomic>
#include <cmath>
#include <sstream>

#include "tmm/errors.hpp"
#include "tmm/parallel.hpp"

namespace tmm {

namespace {

constexpr double kLog2 = 0.6931471805599453094172321;
constexpr double kArCutoff = 705.0;
// Below this separation the Hessian kernel switches to its r = 0 branch.
constexpr double kTinyRadius = 1e-9;

std::atomic<std::uint64_t> g_eval_count{0};

double log_norm(double nu) { return (1.0 - nu) * kLog2 - std::lgamma(nu); }

void check_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    fail_validation(std::string(name) + " must be positive and finite, got " +
                    std::to_string(v));
  }
}

void check_nugget(double tau1, double tau2) {
  if (!(tau1 >= 0.0) || !std::isfinite(tau1) || !(tau2 >= 0.0) ||
      !std::isfinite(tau2)) {
    fail_validation("nugget standard deviations must be finite and >= 0");
  }
}

void check_bivariate(const ParsBivariateMaternParams& p, double min_nu) {
  check_positive(p.sigma1, "sigma1");
  check_positive(p.sigma2, "sigma2");
  check_positive(p.a, "a");
  if (!(p.nu1 > min_nu) || !std::isfinite(p.nu1) || !(p.nu2 > min_nu) ||
      !std::isfinite(p.nu2)) {
    fail_validation("smoothness parameters must exceed " +
                    std::to_string(min_nu) + ", got nu1 = " +
                    std::to_string(p.nu1) + ", nu2 = " + std::to_string(p.nu2));
  }
  if (!std::isfinite(p.rho12)) fail_validation("rho12 must be finite");
  const double bound = rho_bound(p.nu1, p.nu2);
  if (std::fabs(p.rho12) > bound) {
    std::ostringstream msg;
    msg << "rho12 = " << p.rho12 << " violates |rho12| <= rho_bound(nu1, nu2) = "
        << bound << " at nu1 = " << p.nu1 << ", nu2 = " << p.nu2;
    fail_validation(msg.str());
  }
}

}  // namespace

void validate_model(const CovarianceModel& m) {
  std::visit(
      [](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, TmmParams>) {
          check_bivariate(p.bm, 1.0);
        } else if constexpr (std::is_same_v<T, ParsBmDirectParams>) {
          check_bivariate(p.bm, 0.0);
        } else {
          check_positive(p.sigma, "sigma");
          check_positive(p.matern.a, "a");
          if (!(p.matern.nu > 1.0) || !std::isfinite(p.matern.nu)) {
            fail_validation("smoothness nu must exceed 1, got " +
                            std::to_string(p.matern.nu));
          }
        }
        check_nugget(p.tau1, p.tau2);
      },
      m);
}

void validate_observations(const ObservationSet& obs) {
  if (obs.locations.empty()) fail_validation("observation set has no locations");
  if (static_cast<std::size_t>(obs.values.cols()) !=
      2 * obs.locations.size()) {
    fail_validation("observation values must have 2 * n_locations columns");
  }
  if (obs.values.rows() < 1) fail_validation("observation set has no replicates");
  if (!obs.values.allFinite()) fail_validation("observation values must be finite");
}

std::string model_name(const CovarianceModel& m) {
  struct Visitor {
    std::string operator()(const TmmParams&) const { return "tmm"; }
    std::string operator()(const CurlFreeParams&) const { return "curl_free"; }
    std::string operator()(const DivFreeParams&) const { return "div_free"; }
    std::string operator()(const ParsBmDirectParams&) const {
      return "parsbm_direct";
    }
  };
  return std::visit(Visitor{}, m);
}

std::array<double, 2> model_tau(const CovarianceModel& m) {
  return std::visit(
      [](const auto& p) { return std::array<double, 2>{p.tau1, p.tau2}; }, m);
}

std::uint64_t covariance_eval_count() {
  return g_eval_count.load(std::memory_order_relaxed);
}

void covariance_eval_reset() {
  g_eval_count.store(0, std::memory_order_relaxed);
}

Eigen::Matrix3d cov_curl(const Location& s, const Location& t, double sigma,
                         const MaternParams& p) {
  check_positive(sigma, "sigma");
  const Eigen::Matrix3d k = hessian_k(s.xyz - t.xyz, p);
  return -(sigma * sigma) * projector_tangent(s) * k *
         projector_tangent(t).transpose();
}

Eigen::Matrix3d cov_div(const Location& s, const Location& t, double sigma,
                        const MaternParams& p) {
  check_positive(sigma, "sigma");
  const Eigen::Matrix3d k = hessian_k(s.xyz - t.xyz, p);
  return -(sigma * sigma) * projector_curl(s) * k *
         projector_curl(t).transpose();
}

Eigen::Matrix3d cov_tan(const Location& s, const Location& t,
                        const ParsBivariateMaternParams& p) {
  check_bivariate(p, 1.0);
  const Eigen::Vector3d h = s.xyz - t.xyz;
  const Eigen::Matrix3d ps = projector_tangent(s);
  const Eigen::Matrix3d pt = projector_tangent(t);
  const Eigen::Matrix3d qs = projector_curl(s);
  const Eigen::Matrix3d qt = projector_curl(t);
  const Eigen::Matrix3d k1 = hessian_k(h, {p.nu1, p.a});
  const Eigen::Matrix3d k2 = hessian_k(h, {p.nu2, p.a});
  const Eigen::Matrix3d k12 = hessian_k(h, {0.5 * (p.nu1 + p.nu2), p.a});
  Eigen::Matrix3d c = (p.sigma1 * p.sigma1) * ps * k1 * pt.transpose();
  c.noalias() += (p.rho12 * p.sigma1 * p.sigma2) *
                 (ps * k12 * qt.transpose() + qs * k12 * pt.transpose());
  c.noalias() += (p.sigma2 * p.sigma2) * qs * k2 * qt.transpose();
  return -c;
}

Eigen::Matrix2d cov_parsbm_direct(const Location& s, const Location& t,
                                  const ParsBivariateMaternParams& p) {
  check_bivariate(p, 0.0);
  const double r = chordal_distance(s, t);
  Eigen::Matrix2d b;
  const double cross =
      p.rho12 * p.sigma1 * p.sigma2 * matern(r, {0.5 * (p.nu1 + p.nu2), p.a});
  b(0, 0) = p.sigma1 * p.sigma1 * matern(r, {p.nu1, p.a});
  b(1, 1) = p.sigma2 * p.sigma2 * matern(r, {p.nu2, p.a});
  b(0, 1) = cross;
  b(1, 0) = cross;
  return b;
}

namespace detail {

PairGeom make_pair_geom(const Location& s, const Location& t) {
  PairGeom g;
  const Eigen::Matrix<double, 2, 3> ts = canonical_transform(s);
  const Eigen::Matrix<double, 2, 3> tt = canonical_transform(t);
  const Eigen::Matrix<double, 2, 3> ws = ts * projector_curl(s);
  const Eigen::Matrix<double, 2, 3> wt = tt * projector_curl(t);
  const Eigen::Vector3d h = s.xyz - t.xyz;
  g.m_uu.noalias() = ts * tt.transpose();
  g.m_uw.noalias() = ts * wt.transpose();
  g.m_wu.noalias() = ws * tt.transpose();
  g.m_ww.noalias() = ws * wt.transpose();
  g.u_s.noalias() = ts * h;
  g.u_t.noalias() = tt * h;
  g.w_s.noalias() = ws * h;
  g.w_t.noalias() = wt * h;
  g.r = h.norm();
  g.log_r = g.r > 0.0 ? std::log(g.r) : 0.0;
  return g;
}

/// Chebyshev interpolant of u -> ln K_mu(exp(u)) on [u_lo, u_hi].
class RadialTable {
 public:
  RadialTable(double mu, double u_lo, double u_hi, int nodes = 81)
      : lo_(u_lo), hi_(u_hi), coef_(static_cast<std::size_t>(nodes), 0.0) {
    const int n = nodes;
    std::vector<double> fx(static_cast<std::size_t>(n));
    const double mid = 0.5 * (lo_ + hi_);
    const double half = 0.5 * (hi_ - lo_);
    for (int k = 0; k < n; ++k) {
      const double u = mid + half * std::cos(M_PI * (k + 0.5) / n);
      fx[static_cast<std::size_t>(k)] = log_bessel_k(mu, std::exp(u));
    }
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int k = 0; k < n; ++k) {
        acc += fx[static_cast<std::size_t>(k)] *
               std::cos(M_PI * j * (k + 0.5) / n);
      }
      coef_[static_cast<std::size_t>(j)] = 2.0 * acc / n;
    }
    // Self-check at off-node points; failures flip the exact fallback.
    max_err_ = 0.0;
    for (int k = 0; k < 33; ++k) {
      const double u = lo_ + (hi_ - lo_) * (k + 0.37) / 33.0;
      const double err = std::fabs((*this)(u)-log_bessel_k(mu, std::exp(u)));
      max_err_ = std::max(max_err_, err);
    }
  }

  bool reliable() const { return max_err_ < 1e-9; }
  bool covers(double u) const { return u >= lo_ && u <= hi_; }

  double operator()(double u) const {
    const double x = (2.0 * u - (lo_ + hi_)) / (hi_ - lo_);
    const double x2 = 2.0 * x;
    double b1 = 0.0, b2 = 0.0;
    for (std::size_t j = coef_.size(); j-- > 1;) {
      const double b0 = coef_[j] + x2 * b1 - b2;
      b2 = b1;
      b1 = b0;
    }
    return 0.5 * coef_[0] + x * b1 - b2;
  }

 private:
  double lo_, hi_;
  double max_err_ = 0.0;
  std::vector<double> coef_;
};

BlockEvaluator::BlockEvaluator(const CovarianceModel& m) { init(m); }

BlockEvaluator::BlockEvaluator(const CovarianceModel& m, double r_lo,
                               double r_hi) {
  init(m);
  build_tables(r_lo, r_hi);
}

BlockEvaluator::~BlockEvaluator() = default;
BlockEvaluator::BlockEvaluator(BlockEvaluator&&) noexcept = default;
BlockEvaluator& BlockEvaluator::operator=(BlockEvaluator&&) noexcept = default;

void BlockEvaluator::init(const CovarianceModel& m) {
  validate_model(m);
  const auto add_term = [this](double weight, double nu) {
    Term t;
    t.weight = weight;
    t.nu = nu;
    t.log_norm_f = log_norm(nu) + 2.0 * log_a_;
    t.log_norm_g = log_norm(nu) + 4.0 * log_a_;
    t.f0 = -a_ * a_ / (2.0 * (nu - 1.0));
    terms_.push_back(std::move(t));
  };
  if (const auto* p = std::get_if<TmmParams>(&m)) {
    kind_ = Kind::kTmm;
    a_ = p->bm.a;
    log_a_ = std::log(a_);
    tau_ = {p->tau1, p->tau2};
    add_term(p->bm.sigma1 * p->bm.sigma1, p->bm.nu1);
    add_term(p->bm.rho12 * p->bm.sigma1 * p->bm.sigma2,
             0.5 * (p->bm.nu1 + p->bm.nu2));
    add_term(p->bm.sigma2 * p->bm.sigma2, p->bm.nu2);
    collocated_ = -(terms_[0].weight * terms_[0].f0 +
                    terms_[2].weight * terms_[2].f0) *
                  Eigen::Matrix2d::Identity();
  } else if (const auto* c = std::get_if<CurlFreeParams>(&m)) {
    kind_ = Kind::kCurlFree;
    a_ = c->matern.a;
    log_a_ = std::log(a_);
    tau_ = {c->tau1, c->tau2};
    add_term(c->sigma * c->sigma, c->matern.nu);
    collocated_ =
        -(terms_[0].weight * terms_[0].f0) * Eigen::Matrix2d::Identity();
  } else if (const auto* d = std::get_if<DivFreeParams>(&m)) {
    kind_ = Kind::kDivFree;
    a_ = d->matern.a;
    log_a_ = std::log(a_);
    tau_ = {d->tau1, d->tau2};
    add_term(d->sigma * d->sigma, d->matern.nu);
    collocated_ =
        -(terms_[0].weight * terms_[0].f0) * Eigen::Matrix2d::Identity();
  } else {
    const auto& p = std::get<ParsBmDirectParams>(m);
    kind_ = Kind::kParsBm;
    a_ = p.bm.a;
    log_a_ = std::log(a_);
    tau_ = {p.tau1, p.tau2};
    add_term(p.bm.sigma1 * p.bm.sigma1, p.bm.nu1);
    add_term(p.bm.rho12 * p.bm.sigma1 * p.bm.sigma2,
             0.5 * (p.bm.nu1 + p.bm.nu2));
    add_term(p.bm.sigma2 * p.bm.sigma2, p.bm.nu2);
    for (auto& t : terms_) {
      t.log_norm_f = log_norm(t.nu);  // plain Matern correlation
      t.f0 = 1.0;
    }
    collocated_ << terms_[0].weight, terms_[1].weight, terms_[1].weight,
        terms_[2].weight;
  }
  // The leading minus and F(0) < 0 must yield positive variances.
  if (collocated_(0, 0) <= 0.0 || collocated_(1, 1) <= 0.0) {
    fail_numerical("collocated variance is not positive");
  }
}

void BlockEvaluator::build_tables(double r_lo, double r_hi) {
  const double u_lo = std::log(a_ * std::max(r_lo, 1e-12));
  const double u_hi = std::min(std::log(a_ * r_hi), std::log(710.0));
  if (!(u_hi > u_lo + 1e-9)) return;
  for (auto& t : terms_) {
    if (kind_ == Kind::kParsBm) {
      t.table_f = std::make_unique<RadialTable>(t.nu, u_lo, u_hi);
      if (!t.table_f->reliable()) t.table_f.reset();
    } else {
      t.table_f = std::make_unique<RadialTable>(std::fabs(t.nu - 1.0), u_lo, u_hi);
      t.table_g = std::make_unique<RadialTable>(std::fabs(t.nu - 2.0), u_lo, u_hi);
      if (!t.table_f->reliable() || !t.table_g->reliable()) {
        t.table_f.reset();
        t.table_g.reset();
      }
    }
  }
}

bool BlockEvaluator::using_tables() const {
  for (const auto& t : terms_) {
    if (t.table_f) return true;
  }
  return false;
}

void BlockEvaluator::radial_terms(double r, double log_r, double* f,
                                  double* g) const {
  const double u = log_a_ + log_r;  // log(a r)
  const double ar = a_ * r;
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    const Term& t = terms_[i];
    if (ar > kArCutoff) {
      f[i] = 0.0;
      g[i] = 0.0;
      continue;
    }
    if (kind_ == Kind::kParsBm) {
      const double lnk = (t.table_f && t.table_f->covers(u))
                             ? (*t.table_f)(u)
                             : log_bessel_k(t.nu, ar);
      f[i] = std::exp(t.log_norm_f + t.nu * u + lnk);
      g[i] = 0.0;
      continue;
    }
    const double lnk_f = (t.table_f && t.table_f->covers(u))
                             ? (*t.table_f)(u)
                             : log_bessel_k(t.nu - 1.0, ar);
    const double lnk_g = (t.table_g && t.table_g->covers(u))
                             ? (*t.table_g)(u)
                             : log_bessel_k(t.nu - 2.0, ar);
    f[i] = -std::exp(t.log_norm_f + (t.nu - 1.0) * u + lnk_f);
    g[i] = std::exp(t.log_norm_g + (t.nu - 2.0) * u + lnk_g);
  }
}

Eigen::Matrix2d BlockEvaluator::block(const Location& s,
                                      const Location& t) const {
  if (s.xyz.cwiseEqual(t.xyz).all()) {
    g_eval_count.fetch_add(4, std::memory_order_relaxed);
    return collocated_;
  }
  return block_from_geom(make_pair_geom(s, t));
}

Eigen::Matrix2d BlockEvaluator::block_from_geom(const PairGeom& geom) const {
  g_eval_count.fetch_add(4, std::memory_order_relaxed);
  if (geom.r == 0.0) return collocated_;
  Eigen::Matrix2d b;
  if (kind_ == Kind::kParsBm) {
    double m[3], unused[3];
    radial_terms(geom.r, geom.log_r, m, unused);
    b(0, 0) = terms_[0].weight * m[0];
    b(0, 1) = terms_[1].weight * m[1];
    b(1, 0) = b(0, 1);
    b(1, 1) = terms_[2].weight * m[2];
    return b;
  }
  if (geom.r < kTinyRadius) {
    // Continuity branch: G terms vanish with r, F terms take their limits.
    switch (kind_) {
      case Kind::kTmm:
        b = terms_[0].weight * terms_[0].f0 * geom.m_uu +
            terms_[1].weight * terms_[1].f0 * (geom.m_uw + geom.m_wu) +
            terms_[2].weight * terms_[2].f0 * geom.m_ww;
        break;
      case Kind::kCurlFree:
        b = terms_[0].weight * terms_[0].f0 * geom.m_uu;
        break;
      default:
        b = terms_[0].weight * terms_[0].f0 * geom.m_ww;
        break;
    }
    return -b;
  }
  double f[3], g[3];
  radial_terms(geom.r, geom.log_r, f, g);
  switch (kind_) {
    case Kind::kTmm:
      b = terms_[0].weight *
          (f[0] * geom.m_uu + g[0] * (geom.u_s * geom.u_t.transpose()));
      b.noalias() += terms_[1].weight *
                     (f[1] * (geom.m_uw + geom.m_wu) +
                      g[1] * (geom.u_s * geom.w_t.transpose() +
                              geom.w_s * geom.u_t.transpose()));
      b.noalias() += terms_[2].weight *
                     (f[2] * geom.m_ww + g[2] * (geom.w_s * geom.w_t.transpose()));
      break;
    case Kind::kCurlFree:
      b = terms_[0].weight *
          (f[0] * geom.m_uu + g[0] * (geom.u_s * geom.u_t.transpose()));
      break;
    default:
      b = terms_[0].weight *
          (f[0] * geom.m_ww + g[0] * (geom.w_s * geom.w_t.transpose()));
      break;
  }
  return -b;
}

}  // namespace detail

Eigen::Matrix2d cov_canonical(const Location& s, const Location& t,
                              const CovarianceModel& m) {
  const detail::BlockEvaluator ev(m);
  Eigen::Matrix2d b = ev.block(s, t);
  if (s.xyz.cwiseEqual(t.xyz).all()) {
    b(0, 0) += ev.tau()[0] * ev.tau()[0];
    b(1, 1) += ev.tau()[1] * ev.tau()[1];
  }
  return b;
}

Eigen::MatrixXd cov_matrix(const std::vector<Location>& locations,
                           const CovarianceModel& m, int threads) {
  if (locations.empty()) fail_validation("cov_matrix needs >= 1 location");
  const detail::BlockEvaluator ev(m);
  const std::size_t n = locations.size();
  Eigen::MatrixXd sigma(2 * n, 2 * n);
  const double tau1_sq = ev.tau()[0] * ev.tau()[0];
  const double tau2_sq = ev.tau()[1] * ev.tau()[1];
  parallel_for(n, threads, [&](std::size_t i) {
    const auto ii = static_cast<Eigen::Index>(2 * i);
    Eigen::Matrix2d diag = ev.block(locations[i], locations[i]);
    diag(0, 0) += tau1_sq;
    diag(1, 1) += tau2_sq;
    sigma.block<2, 2>(ii, ii) = diag;
    for (std::size_t j = 0; j < i; ++j) {
      const auto jj = static_cast<Eigen::Index>(2 * j);
      const Eigen::Matrix2d b = ev.block(locations[i], locations[j]);
      sigma.block<2, 2>(ii, jj) = b;
      sigma.block<2, 2>(jj, ii) = b.transpose();
    }
  });
  return sigma;
}

Eigen::MatrixXd cov_cross_matrix(const std::vector<Location>& row_locations,
                                 const std::vector<Location>& col_locations,
                                 const CovarianceModel& m, int threads) {
  if (row_locations.empty() || col_locations.empty()) {
    fail_validation("cov_cross_matrix needs nonempty location lists");
  }
  const detail::BlockEvaluator ev(m);
  const std::size_t nr = row_locations.size();
  const std::size_t nc = col_locations.size();
  Eigen::MatrixXd out(2 * nr, 2 * nc);
  parallel_for(nr, threads, [&](std::size_t i) {
    for (std::size_t j = 0; j < nc; ++j) {
      out.block<2, 2>(static_cast<Eigen::Index>(2 * i),
                      static_cast<Eigen::Index>(2 * j)) =
          ev.block(row_locations[i], col_locations[j]);
    }
  });
  return out;
}

}  // namespace tmm
