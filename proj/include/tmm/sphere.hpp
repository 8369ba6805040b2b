#pragma once
/// @file sphere.hpp
/// @brief Spherical geometry: locations on the unit sphere, tangent-space
///        projectors and canonical frames, distances, and sampling grids.

#include <Eigen/Dense>
#include <vector>

namespace tmm {

/// Point on the unit sphere with both Cartesian and angular views.
/// Invariants: |xyz| = 1 and xyz = (sin t cos p, sin t sin p, cos t).
struct Location {
  Eigen::Vector3d xyz{0.0, 0.0, 1.0};
  double theta = 0.0;  ///< co-latitude in [0, pi]
  double phi = 0.0;    ///< longitude in [0, 2*pi)
};

/// Builds a Location from angles; phi is normalized into [0, 2*pi).
Location location_from_angles(double theta, double phi);

/// Builds a Location from geographic degrees. Poles are representable as raw
/// Locations; canonical-frame consumers reject them.
Location from_latlon(double lat_deg, double lon_deg);

double latitude_deg(const Location& s);
double longitude_deg(const Location& s);

/// True within tol of either pole (where the canonical frame degenerates).
bool is_pole(const Location& s, double tol = 1e-12);

/// Tangent-plane projector P_s = I3 - s s^T; symmetric, idempotent, rank 2.
Eigen::Matrix3d projector_tangent(const Location& s);

/// Cross-product matrix Q_s = [s]_x; antisymmetric, Q_s v = s x v.
Eigen::Matrix3d projector_curl(const Location& s);

/// Canonical-frame transform T_s with orthonormal rows (east, north).
/// Throws: canonical frame undefined at poles.
Eigen::Matrix<double, 2, 3> canonical_transform(const Location& s);

/// Euclidean distance in R^3; range [0, 2] on the unit sphere.
double chordal_distance(const Location& s, const Location& t);

/// Great-circle angle gamma in [0, pi]; chord = 2 sin(gamma / 2).
double great_circle_angle(const Location& s, const Location& t);

/// Full-longitude-circle regular grid. Latitudes equally spaced between
/// inclusive bounds, stored as ascending co-latitudes; longitudes are
/// 2*pi*j/n_lon from 0. Location index is i_lat * n_lon + j_lon.
struct RegularGrid {
  int n_lat = 0;
  int n_lon = 0;
  std::vector<double> theta_values;
  std::vector<double> phi_values;

  [[nodiscard]] int size() const { return n_lat * n_lon; }
  [[nodiscard]] Location location(int i_lat, int j_lon) const;
  [[nodiscard]] std::vector<Location> locations() const;
};

RegularGrid regular_grid(int n_lat, int n_lon, double lat_min_deg,
                         double lat_max_deg);

/// Deterministic Fibonacci lattice of n points, approximately equal-area,
/// excluding the exact poles.
std::vector<Location> fibonacci_grid(int n);

}  // namespace tmm
