/// @file empirical.cpp
/// @brief Distance-binned empirical covariances, axial curves, co-located
///        cross-correlations, and VEOF detrending.

#include "tmm/empirical.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <vector>

#include "tmm/errors.hpp"
#include "tmm/parallel.hpp"

namespace tmm {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double median_of(std::vector<double>& v) {
  if (v.empty()) return kNaN;
  const std::size_t n = v.size();
  const std::size_t mid = n / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid),
                   v.end());
  const double hi = v[mid];
  if (n % 2 == 1) return hi;
  const double lo = *std::max_element(
      v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

void validate_bin_edges(const Eigen::VectorXd& edges) {
  if (edges.size() < 2) fail_validation("binning needs at least 2 edges");
  for (Eigen::Index k = 0; k < edges.size(); ++k) {
    if (!std::isfinite(edges(k))) fail_validation("bin edges must be finite");
    if (k > 0 && !(edges(k) > edges(k - 1))) {
      fail_validation("bin edges must be strictly ascending");
    }
  }
}

/// Bin index for distance d, or -1 when d falls outside the edges. The top
/// edge is inclusive so the maximum observed distance is never dropped.
int bin_index(const Eigen::VectorXd& edges, double d) {
  const Eigen::Index n_bins = edges.size() - 1;
  if (d < edges(0) || d > edges(n_bins)) return -1;
  if (d == edges(n_bins)) return static_cast<int>(n_bins - 1);
  const auto it = std::upper_bound(edges.data(), edges.data() + edges.size(), d);
  return static_cast<int>(it - edges.data()) - 1;
}

BinnedCovariance make_binned(const Eigen::VectorXd& edges,
                             std::vector<std::vector<double>>& per_bin) {
  const Eigen::Index n_bins = edges.size() - 1;
  BinnedCovariance out;
  out.bin_lo = edges.head(n_bins);
  out.bin_hi = edges.tail(n_bins);
  out.counts.resize(static_cast<std::size_t>(n_bins));
  out.mean = Eigen::VectorXd::Constant(n_bins, kNaN);
  out.median = Eigen::VectorXd::Constant(n_bins, kNaN);
  for (Eigen::Index b = 0; b < n_bins; ++b) {
    auto& vals = per_bin[static_cast<std::size_t>(b)];
    out.counts[static_cast<std::size_t>(b)] = vals.size();
    if (vals.empty()) continue;
    double s = 0.0;
    for (double v : vals) s += v;
    out.mean(b) = s / static_cast<double>(vals.size());
    out.median(b) = median_of(vals);
  }
  return out;
}

int find_ring(const RegularGrid& grid, double theta, const char* which) {
  for (std::size_t i = 0; i < grid.theta_values.size(); ++i) {
    if (std::abs(grid.theta_values[i] - theta) < 1e-9) {
      return static_cast<int>(i);
    }
  }
  fail_validation(std::string("requested ") + which +
                  " latitude is not a ring of the grid");
}

void validate_grid_values(const GridObservationSet& gobs) {
  const auto n = static_cast<Eigen::Index>(gobs.grid.size());
  if (gobs.values.rows() < 1 || gobs.values.cols() != 2 * n) {
    fail_validation("grid observation values must have 2 n_lat n_lon columns");
  }
  if (!gobs.values.allFinite()) {
    fail_validation("grid observation values must be finite");
  }
}

/// Pearson correlation across rows of two equal-length series; NaN when
/// either series is constant.
double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Eigen::VectorXd da = a.array() - a.mean();
  const Eigen::VectorXd db = b.array() - b.mean();
  const double sa = da.squaredNorm(), sb = db.squaredNorm();
  if (sa <= 0.0 || sb <= 0.0) return kNaN;
  return da.dot(db) / std::sqrt(sa * sb);
}

Eigen::VectorXd smooth_profile(const Eigen::VectorXd& x,
                               const Eigen::VectorXd& y,
                               const Eigen::VectorXd& grid) {
  Eigen::VectorXd out(grid.size());
  for (Eigen::Index k = 0; k < grid.size(); ++k) {
    out(k) = detail::local_linear_smooth(x, y, grid(k), 0.5);
  }
  return out;
}

struct CenteredSvd {
  Eigen::MatrixXd centered;
  VeofDecomposition dec;  ///< k left at 0
};

CenteredSvd centered_svd(const Eigen::MatrixXd& field) {
  if (field.rows() < 2) fail_validation("veof needs at least 2 time steps");
  if (field.cols() < 2 || field.cols() % 2 != 0) {
    fail_validation("veof field needs an even number of columns, u block "
                    "then v block");
  }
  if (!field.allFinite()) fail_validation("veof field must be finite");

  CenteredSvd out;
  out.dec.column_means = field.colwise().mean();
  out.centered = field.rowwise() - out.dec.column_means;

  Eigen::BDCSVD<Eigen::MatrixXd> svd(out.centered,
                                     Eigen::ComputeThinU | Eigen::ComputeThinV);
  out.dec.singular_values = svd.singularValues();
  out.dec.temporal_modes = svd.matrixU();
  out.dec.spatial_modes = svd.matrixV();

  const double total = out.dec.singular_values.squaredNorm();
  out.dec.explained = Eigen::VectorXd::Zero(out.dec.singular_values.size());
  if (total > 0.0) {
    out.dec.explained =
        (out.dec.singular_values.array().square() / total).matrix();
  }
  return out;
}

VeofResult detrend_from(CenteredSvd&& cs, int k) {
  const auto n_modes = cs.dec.singular_values.size();
  if (k < 0 || k > n_modes) {
    fail_validation("veof mode count k must lie between 0 and min(T, 2N)");
  }
  cs.dec.k = k;
  VeofResult out;
  out.residual = cs.centered;
  if (k > 0) {
    out.residual.noalias() -=
        cs.dec.temporal_modes.leftCols(k) *
        cs.dec.singular_values.head(k).asDiagonal() *
        cs.dec.spatial_modes.leftCols(k).transpose();
  }
  out.decomposition = std::move(cs.dec);
  return out;
}

}  // namespace

EmpiricalCovariances empirical_cov_gcd(const ObservationSet& obs,
                                       const Eigen::VectorXd& bin_edges,
                                       int threads) {
  validate_observations(obs);
  validate_bin_edges(bin_edges);
  const auto n = static_cast<Eigen::Index>(obs.n_locations());
  const double inv_reps = 1.0 / static_cast<double>(obs.n_reps());
  const std::size_t n_pairs = static_cast<std::size_t>(n) * (n + 1) / 2;

  // One slot per unordered pair (j <= i at i(i+1)/2 + j): products are
  // replicate averages, bins are resolved afterwards so the aggregation
  // order never depends on the thread count.
  std::vector<double> puu(n_pairs), pvv(n_pairs), puv(n_pairs);
  std::vector<int> pbin(n_pairs);
  parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t ii) {
    const auto i = static_cast<Eigen::Index>(ii);
    const std::size_t base = ii * (ii + 1) / 2;
    for (Eigen::Index j = 0; j <= i; ++j) {
      const std::size_t p = base + static_cast<std::size_t>(j);
      const auto ui = obs.values.col(2 * i), vi = obs.values.col(2 * i + 1);
      const auto uj = obs.values.col(2 * j), vj = obs.values.col(2 * j + 1);
      puu[p] = ui.dot(uj) * inv_reps;
      pvv[p] = vi.dot(vj) * inv_reps;
      puv[p] = 0.5 * (ui.dot(vj) + uj.dot(vi)) * inv_reps;
      pbin[p] = bin_index(
          bin_edges, great_circle_angle(obs.locations[static_cast<std::size_t>(
                                            i)],
                                        obs.locations[static_cast<std::size_t>(
                                            j)]));
    }
  });

  const auto n_bins = static_cast<std::size_t>(bin_edges.size() - 1);
  std::vector<std::vector<double>> buu(n_bins), bvv(n_bins), buv(n_bins);
  for (std::size_t p = 0; p < n_pairs; ++p) {
    if (pbin[p] < 0) continue;
    const auto b = static_cast<std::size_t>(pbin[p]);
    buu[b].push_back(puu[p]);
    bvv[b].push_back(pvv[p]);
    buv[b].push_back(puv[p]);
  }

  EmpiricalCovariances out;
  out.uu = make_binned(bin_edges, buu);
  out.vv = make_binned(bin_edges, bvv);
  out.uv = make_binned(bin_edges, buv);
  return out;
}

EmpiricalCovariances empirical_cov_gcd(const ObservationSet& obs,
                                       int threads) {
  validate_observations(obs);
  double d_max = 0.0;
  const auto n = obs.n_locations();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      d_max = std::max(d_max,
                       great_circle_angle(obs.locations[i], obs.locations[j]));
    }
  }
  if (d_max <= 0.0) d_max = 1.0;
  return empirical_cov_gcd(obs, Eigen::VectorXd::LinSpaced(41, 0.0, d_max),
                           threads);
}

AxialCurves empirical_cov_axial(const GridObservationSet& gobs, double theta_s,
                                double theta_t) {
  validate_grid_values(gobs);
  const int is = find_ring(gobs.grid, theta_s, "source");
  const int it = find_ring(gobs.grid, theta_t, "target");
  const int n = gobs.grid.n_lon;
  const auto reps = static_cast<Eigen::Index>(gobs.n_reps());
  const double scale = 1.0 / (static_cast<double>(n) * static_cast<double>(reps));

  auto col = [&](int ring, int lon, int comp) {
    return gobs.values.col(2 * (ring * n + lon) + comp);
  };

  AxialCurves out;
  out.delta_phi = Eigen::VectorXd::LinSpaced(n, 0.0, 2.0 * std::numbers::pi *
                                                        (n - 1) / n);
  out.uu = Eigen::VectorXd::Zero(n);
  out.vv = Eigen::VectorXd::Zero(n);
  out.uv = Eigen::VectorXd::Zero(n);
  out.vu = Eigen::VectorXd::Zero(n);
  for (int d = 0; d < n; ++d) {
    for (int k = 0; k < n; ++k) {
      const int ks = (k + d) % n;
      out.uu(d) += col(is, ks, 0).dot(col(it, k, 0));
      out.vv(d) += col(is, ks, 1).dot(col(it, k, 1));
      out.uv(d) += col(is, ks, 0).dot(col(it, k, 1));
      out.vu(d) += col(is, ks, 1).dot(col(it, k, 0));
    }
  }
  out.uu *= scale;
  out.vv *= scale;
  out.uv *= scale;
  out.vu *= scale;
  return out;
}

ColocatedCrossCorr colocated_crosscorr(const ObservationSet& obs) {
  validate_observations(obs);
  if (obs.n_reps() < 3) {
    fail_validation("co-located cross-correlation needs at least 3 replicates");
  }
  const auto n = static_cast<Eigen::Index>(obs.n_locations());

  ColocatedCrossCorr out;
  out.locations = obs.locations;
  out.corr.resize(n);
  Eigen::VectorXd lat(n), lon(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.corr(i) = pearson(obs.values.col(2 * i), obs.values.col(2 * i + 1));
    lat(i) = latitude_deg(obs.locations[static_cast<std::size_t>(i)]);
    lon(i) = longitude_deg(obs.locations[static_cast<std::size_t>(i)]);
  }

  constexpr Eigen::Index kProfilePoints = 61;
  out.lat_grid = Eigen::VectorXd::LinSpaced(kProfilePoints, lat.minCoeff(),
                                            lat.maxCoeff());
  out.lon_grid = Eigen::VectorXd::LinSpaced(kProfilePoints, lon.minCoeff(),
                                            lon.maxCoeff());
  out.lat_smooth = smooth_profile(lat, out.corr, out.lat_grid);
  out.lon_smooth = smooth_profile(lon, out.corr, out.lon_grid);
  return out;
}

VeofResult veof_detrend(const Eigen::MatrixXd& field, int k) {
  return detrend_from(centered_svd(field), k);
}

VeofResult veof_detrend(const Eigen::MatrixXd& field, double target_fraction) {
  if (!std::isfinite(target_fraction) || target_fraction <= 0.0 ||
      target_fraction > 1.0) {
    fail_validation("veof target fraction must lie in (0, 1]");
  }
  CenteredSvd cs = centered_svd(field);
  const Eigen::VectorXd& frac = cs.dec.explained;
  int k = 0;
  double cum = 0.0;
  // Nudge the threshold so target 1.0 stops at the last nonzero mode.
  const double goal = target_fraction * (1.0 - 1e-12);
  while (k < frac.size() && cum < goal) {
    cum += frac(k);
    ++k;
  }
  return detrend_from(std::move(cs), k);
}

namespace detail {

double local_linear_smooth(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                           double x0, double span) {
  if (x.size() != y.size()) {
    fail_validation("smoother inputs must have equal length");
  }
  if (!(span > 0.0 && span <= 1.0)) {
    fail_validation("smoother span must lie in (0, 1]");
  }
  std::vector<double> xs, ys;
  xs.reserve(static_cast<std::size_t>(x.size()));
  ys.reserve(static_cast<std::size_t>(y.size()));
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (std::isfinite(x(i)) && std::isfinite(y(i))) {
      xs.push_back(x(i));
      ys.push_back(y(i));
    }
  }
  if (xs.empty()) return kNaN;

  const std::size_t n = xs.size();
  const auto m = std::min(
      n, std::max<std::size_t>(
             2, static_cast<std::size_t>(std::ceil(span * static_cast<double>(n)))));
  std::vector<double> dist(n);
  for (std::size_t i = 0; i < n; ++i) dist[i] = std::abs(xs[i] - x0);
  std::vector<double> ranked = dist;
  std::nth_element(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(m - 1),
                   ranked.end());
  const double d_max = ranked[m - 1];

  double s0 = 0.0, s1 = 0.0, s2 = 0.0, t0 = 0.0, t1 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double w;
    if (d_max <= 0.0) {
      w = dist[i] <= 0.0 ? 1.0 : 0.0;
    } else {
      if (dist[i] > d_max) continue;
      const double u = dist[i] / d_max;
      w = std::pow(1.0 - u * u * u, 3);
    }
    if (w <= 0.0) continue;
    const double dx = xs[i] - x0;
    s0 += w;
    s1 += w * dx;
    s2 += w * dx * dx;
    t0 += w * ys[i];
    t1 += w * dx * ys[i];
  }
  if (s0 <= 0.0) return kNaN;
  const double det = s0 * s2 - s1 * s1;
  if (det <= 1e-12 * s0 * s2 || s2 <= 0.0) return t0 / s0;
  return (s2 * t0 - s1 * t1) / det;
}

}  // namespace detail

}  // namespace tmm
