#include "tmm/sphere.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tmm/errors.hpp"

namespace tmm {

namespace {

constexpr double kPi = 3.14159265358979323846;

double normalize_longitude(double phi) {
  double p = std::fmod(phi, 2.0 * kPi);
  if (p < 0.0) p += 2.0 * kPi;
  if (p >= 2.0 * kPi) p = 0.0;
  return p;
}

}  // namespace

Location location_from_angles(double theta, double phi) {
  if (!(theta >= 0.0 && theta <= kPi)) {
    fail_validation("co-latitude must lie in [0, pi], got " + std::to_string(theta));
  }
  Location s;
  s.theta = theta;
  s.phi = normalize_longitude(phi);
  const double st = std::sin(s.theta);
  s.xyz = Eigen::Vector3d(st * std::cos(s.phi), st * std::sin(s.phi), std::cos(s.theta));
  return s;
}

Location from_latlon(double lat_deg, double lon_deg) {
  if (!(lat_deg >= -90.0 && lat_deg <= 90.0)) {
    fail_validation("latitude must lie in [-90, 90], got " + std::to_string(lat_deg));
  }
  const double theta = (90.0 - lat_deg) * kPi / 180.0;
  const double phi = lon_deg * kPi / 180.0;
  return location_from_angles(std::clamp(theta, 0.0, kPi), phi);
}

double latitude_deg(const Location& s) { return 90.0 - s.theta * 180.0 / kPi; }

double longitude_deg(const Location& s) { return s.phi * 180.0 / kPi; }

bool is_pole(const Location& s, double tol) {
  return s.theta <= tol || kPi - s.theta <= tol;
}

Eigen::Matrix3d projector_tangent(const Location& s) {
  return Eigen::Matrix3d::Identity() - s.xyz * s.xyz.transpose();
}

Eigen::Matrix3d projector_curl(const Location& s) {
  const Eigen::Vector3d& r = s.xyz;
  Eigen::Matrix3d q;
  q << 0.0, -r.z(), r.y(),
       r.z(), 0.0, -r.x(),
      -r.y(), r.x(), 0.0;
  return q;
}

Eigen::Matrix<double, 2, 3> canonical_transform(const Location& s) {
  if (is_pole(s)) {
    fail_validation("canonical frame undefined at poles");
  }
  const double st = std::sin(s.theta), ct = std::cos(s.theta);
  const double sp = std::sin(s.phi), cp = std::cos(s.phi);
  Eigen::Matrix<double, 2, 3> t;
  // Rows are (east, north) = (phi_hat, -theta_hat).
  t << -sp, cp, 0.0,
       -ct * cp, -ct * sp, st;
  return t;
}

double chordal_distance(const Location& s, const Location& t) {
  return (s.xyz - t.xyz).norm();
}

double great_circle_angle(const Location& s, const Location& t) {
  const double half = 0.5 * chordal_distance(s, t);
  return 2.0 * std::asin(std::clamp(half, 0.0, 1.0));
}

Location RegularGrid::location(int i_lat, int j_lon) const {
  return location_from_angles(theta_values[static_cast<std::size_t>(i_lat)],
                              phi_values[static_cast<std::size_t>(j_lon)]);
}

std::vector<Location> RegularGrid::locations() const {
  std::vector<Location> out;
  out.reserve(static_cast<std::size_t>(size()));
  for (int i = 0; i < n_lat; ++i) {
    for (int j = 0; j < n_lon; ++j) {
      out.push_back(location(i, j));
    }
  }
  return out;
}

RegularGrid regular_grid(int n_lat, int n_lon, double lat_min_deg,
                         double lat_max_deg) {
  if (n_lat < 2 || n_lon < 2) {
    fail_validation("regular grid needs n_lat >= 2 and n_lon >= 2");
  }
  if (!(lat_min_deg < lat_max_deg)) {
    fail_validation("regular grid needs lat_min < lat_max");
  }
  if (!(lat_min_deg > -90.0) || !(lat_max_deg < 90.0)) {
    fail_validation("regular grid latitudes must stay strictly inside (-90, 90)");
  }
  RegularGrid g;
  g.n_lat = n_lat;
  g.n_lon = n_lon;
  g.theta_values.resize(static_cast<std::size_t>(n_lat));
  const double step = (lat_max_deg - lat_min_deg) / (n_lat - 1);
  for (int i = 0; i < n_lat; ++i) {
    // Descending latitude gives ascending co-latitude.
    const double lat = lat_max_deg - i * step;
    g.theta_values[static_cast<std::size_t>(i)] = (90.0 - lat) * kPi / 180.0;
  }
  g.phi_values.resize(static_cast<std::size_t>(n_lon));
  for (int j = 0; j < n_lon; ++j) {
    g.phi_values[static_cast<std::size_t>(j)] = 2.0 * kPi * j / n_lon;
  }
  return g;
}

std::vector<Location> fibonacci_grid(int n) {
  if (n < 1) fail_validation("fibonacci grid needs n >= 1");
  // Golden-angle increment; midpoint z offsets keep both poles excluded.
  const double golden_angle = kPi * (3.0 - std::sqrt(5.0));
  std::vector<Location> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    const double z = 1.0 - (2.0 * k + 1.0) / n;
    const double theta = std::acos(std::clamp(z, -1.0, 1.0));
    const double phi = std::fmod(golden_angle * k, 2.0 * kPi);
    out.push_back(location_from_angles(theta, phi));
  }
  return out;
}

}  // namespace tmm
