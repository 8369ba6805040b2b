#pragma once
/// @file covariance.hpp
/// @brief Cross-covariance functions and dense covariance matrices for
///        curl-free, divergence-free, combined tangential, and direct
///        bivariate-Matern models on the sphere.

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "tmm/kernels.hpp"
#include "tmm/sphere.hpp"

namespace tmm {

/// Tangent Matern model: curl-free plus divergence-free potentials with a
/// parsimonious bivariate Matern prior, plus per-component nugget noise.
struct TmmParams {
  ParsBivariateMaternParams bm;
  double tau1 = 0.0;  ///< east-component nugget standard deviation
  double tau2 = 0.0;  ///< north-component nugget standard deviation
};

struct CurlFreeParams {
  double sigma = 1.0;
  MaternParams matern{2.0, 1.0};
  double tau1 = 0.0, tau2 = 0.0;
};

struct DivFreeParams {
  double sigma = 1.0;
  MaternParams matern{2.0, 1.0};
  double tau1 = 0.0, tau2 = 0.0;
};

/// Baseline that applies the bivariate Matern directly to (u, v) with
/// chordal distance, ignoring the tangential geometry.
struct ParsBmDirectParams {
  ParsBivariateMaternParams bm;
  double tau1 = 0.0, tau2 = 0.0;
};

using CovarianceModel =
    std::variant<TmmParams, CurlFreeParams, DivFreeParams, ParsBmDirectParams>;

/// Observed (u, v) fields: independent replicates sharing one location list.
/// Row r of values holds replicate r, interleaved (u_i, v_i) per location.
struct ObservationSet {
  std::vector<Location> locations;
  Eigen::MatrixXd values;

  std::size_t n_locations() const { return locations.size(); }
  std::size_t n_reps() const { return static_cast<std::size_t>(values.rows()); }
};

/// Throws a validation error unless all parameter constraints hold,
/// including |rho12| <= rho_bound(nu1, nu2).
void validate_model(const CovarianceModel& m);

/// Throws a validation error unless replicate shape and finiteness hold.
void validate_observations(const ObservationSet& obs);

std::string model_name(const CovarianceModel& m);
std::array<double, 2> model_tau(const CovarianceModel& m);

/// Curl-free cross-covariance -sigma^2 P_s K(s - t) P_t^T.
Eigen::Matrix3d cov_curl(const Location& s, const Location& t, double sigma,
                         const MaternParams& p);

/// Divergence-free cross-covariance -sigma^2 Q_s K(s - t) Q_t^T.
Eigen::Matrix3d cov_div(const Location& s, const Location& t, double sigma,
                        const MaternParams& p);

/// Combined tangential cross-covariance in Cartesian coordinates: the
/// curl-free, divergence-free, and mixed blocks with smoothness nu1, nu2,
/// and (nu1 + nu2)/2.
Eigen::Matrix3d cov_tan(const Location& s, const Location& t,
                        const ParsBivariateMaternParams& p);

/// 2x2 covariance of the canonical (east, north) components between s and
/// t, plus diag(tau1^2, tau2^2) when s and t are exactly equal.
Eigen::Matrix2d cov_canonical(const Location& s, const Location& t,
                              const CovarianceModel& m);

/// Baseline bivariate Matern applied directly to (u, v) at chordal
/// distance; no nugget.
Eigen::Matrix2d cov_parsbm_direct(const Location& s, const Location& t,
                                  const ParsBivariateMaternParams& p);

/// Dense 2n x 2n covariance, interleaved (u, v) per location, nugget on the
/// diagonal. Exactly symmetric.
Eigen::MatrixXd cov_matrix(const std::vector<Location>& locations,
                           const CovarianceModel& m, int threads = 0);

/// Signal-only cross covariance (2|rows| x 2|cols|), no nugget anywhere.
Eigen::MatrixXd cov_cross_matrix(const std::vector<Location>& row_locations,
                                 const std::vector<Location>& col_locations,
                                 const CovarianceModel& m, int threads = 0);

/// Count of scalar covariance entries evaluated by block assembly (4 per
/// 2x2 block); used to assert the spectral path's complexity.
std::uint64_t covariance_eval_count();
void covariance_eval_reset();

namespace detail {

/// Geometry shared by every radial term of a pair: the 2x2 frame products
/// and projected separation vectors, with U_s = T_s and W_s = T_s Q_s.
struct PairGeom {
  Eigen::Matrix2d m_uu, m_uw, m_wu, m_ww;
  Eigen::Vector2d u_s, u_t, w_s, w_t;
  double r = 0.0, log_r = 0.0;
};

PairGeom make_pair_geom(const Location& s, const Location& t);

class RadialTable;

/// Evaluates canonical 2x2 signal blocks of one model. Exact GSL Bessel
/// evaluation by default; the radius-range constructor builds Chebyshev
/// tables of ln K over [r_lo, r_hi] for bulk assembly, self-checked against
/// the exact path (falls back to exact when the check fails or a radius
/// leaves the table domain).
class BlockEvaluator {
 public:
  explicit BlockEvaluator(const CovarianceModel& m);
  BlockEvaluator(const CovarianceModel& m, double r_lo, double r_hi);
  ~BlockEvaluator();
  BlockEvaluator(BlockEvaluator&&) noexcept;
  BlockEvaluator& operator=(BlockEvaluator&&) noexcept;

  /// Signal block between s and t; exact collocated closed form when the
  /// coordinates are exactly equal.
  Eigen::Matrix2d block(const Location& s, const Location& t) const;

  /// Signal block from cached geometry: r == 0 returns the collocated
  /// closed form, r < 1e-9 uses the continuity branch.
  Eigen::Matrix2d block_from_geom(const PairGeom& g) const;

  /// Closed-form collocated signal block (location independent).
  const Eigen::Matrix2d& collocated() const { return collocated_; }

  const std::array<double, 2>& tau() const { return tau_; }
  bool using_tables() const;

 private:
  enum class Kind { kTmm, kCurlFree, kDivFree, kParsBm };

  struct Term {
    double weight = 0.0;      // sigma products including rho
    double log_norm_f = 0.0;  // log prefactor for F (or M for ParsBm)
    double log_norm_g = 0.0;  // log prefactor for G
    double nu = 0.0;
    double f0 = 0.0;  // F at r = 0 (or 1 for ParsBm)
    std::unique_ptr<RadialTable> table_f, table_g;
  };

  void init(const CovarianceModel& m);
  void build_tables(double r_lo, double r_hi);
  void radial_terms(double r, double log_r, double* f, double* g) const;

  Kind kind_ = Kind::kTmm;
  double a_ = 1.0, log_a_ = 0.0;
  std::array<double, 2> tau_{0.0, 0.0};
  std::vector<Term> terms_;  // TMM: [11, 12, 22]; single-field: [11]
  Eigen::Matrix2d collocated_;
};

}  // namespace detail

}  // namespace tmm
