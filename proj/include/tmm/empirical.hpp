#pragma once
/// @file empirical.hpp
/// @brief Nonparametric diagnostics: distance-binned empirical
///        covariances, axial covariance curves on grids, co-located
///        cross-correlations, and VEOF/SVD detrending.

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

#include "tmm/covariance.hpp"
#include "tmm/likelihood.hpp"
#include "tmm/sphere.hpp"

namespace tmm {

/// Binned empirical covariance for one component pair. Pair products are
/// averaged over replicates first; counts are unordered location pairs
/// (self pairs included), so they sum to n(n+1)/2. Empty bins carry NaN
/// mean and median (missing, not zero).
struct BinnedCovariance {
  Eigen::VectorXd bin_lo, bin_hi;  ///< great-circle distance edges, radians
  std::vector<std::size_t> counts;
  Eigen::VectorXd mean, median;
};

struct EmpiricalCovariances {
  BinnedCovariance uu, vv, uv;
};

/// Bins replicate-averaged products y_a(s_i) y_b(s_j) by great-circle
/// distance. The uv product is symmetrized over the unordered pair. Edges
/// must be ascending; distances outside the edge range are dropped (the
/// top edge is inclusive).
EmpiricalCovariances empirical_cov_gcd(const ObservationSet& obs,
                                       const Eigen::VectorXd& bin_edges,
                                       int threads = 0);

/// Default binning: 40 equal-width bins over the observed distance range.
EmpiricalCovariances empirical_cov_gcd(const ObservationSet& obs,
                                       int threads = 0);

/// Axial covariance curves between two latitude rings of a grid: entry d
/// of each curve averages products at longitude lag delta_phi = 2 pi d / n
/// (the s ring leads by d) over all longitude origins and replicates.
/// Cross curves are not symmetric in the lag; every curve is 2 pi periodic
/// by construction.
struct AxialCurves {
  Eigen::VectorXd delta_phi;        ///< lags in [0, 2 pi)
  Eigen::VectorXd uu, vv, uv, vu;  ///< uv pairs u on the s ring with v on t
};

AxialCurves empirical_cov_axial(const GridObservationSet& obs, double theta_s,
                                double theta_t);

/// Per-location Pearson correlation of u and v across replicates, with
/// tricube local-linear profiles against latitude and longitude for
/// display. Locations with a constant component carry NaN (missing).
struct ColocatedCrossCorr {
  std::vector<Location> locations;
  Eigen::VectorXd corr;
  Eigen::VectorXd lat_grid, lat_smooth;  ///< degrees; NaN where undefined
  Eigen::VectorXd lon_grid, lon_smooth;
};

ColocatedCrossCorr colocated_crosscorr(const ObservationSet& obs);

/// Centered SVD of a T x 2N field (u columns then v columns).
struct VeofDecomposition {
  Eigen::VectorXd singular_values;  ///< descending, length min(T, 2N)
  Eigen::MatrixXd temporal_modes;   ///< T x min(T, 2N), orthonormal columns
  Eigen::MatrixXd spatial_modes;    ///< 2N x min(T, 2N), orthonormal columns
  Eigen::RowVectorXd column_means;
  int k = 0;                  ///< retained mode count
  Eigen::VectorXd explained;  ///< variance fractions, non-increasing
};

struct VeofResult {
  Eigen::MatrixXd residual;  ///< centered data minus the rank-k part
  VeofDecomposition decomposition;
};

/// Removes the leading k modes of the centered field; k may be 0 and at
/// most min(T, 2N).
VeofResult veof_detrend(const Eigen::MatrixXd& field, int k);

/// Selects the smallest k whose cumulative explained variance reaches
/// target_fraction in (0, 1].
VeofResult veof_detrend(const Eigen::MatrixXd& field, double target_fraction);

namespace detail {

/// Tricube-weighted local linear fit through (x, y) evaluated at x0,
/// using the span fraction of nearest points; NaN inputs are skipped.
double local_linear_smooth(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                           double x0, double span);

}  // namespace detail

}  // namespace tmm
