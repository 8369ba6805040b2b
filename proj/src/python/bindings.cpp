/// @file bindings.cpp
/// @brief Python module exposing the core operations: grids, kernels,
///        covariance assembly, simulation, likelihoods, fitting, cokriging,
///        scoring, and the empirical diagnostics. Locations cross the
///        boundary as (n, 2) latitude/longitude arrays in degrees; field
///        values as (n_reps, 2n) interleaved (u, v) matrices.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tmm/covariance.hpp"
#include "tmm/empirical.hpp"
#include "tmm/errors.hpp"
#include "tmm/inference.hpp"
#include "tmm/io.hpp"
#include "tmm/kernels.hpp"
#include "tmm/likelihood.hpp"
#include "tmm/predict.hpp"
#include "tmm/simulate.hpp"
#include "tmm/sphere.hpp"

namespace py = pybind11;

namespace {

std::vector<tmm::Location> to_locations(const Eigen::MatrixXd& latlon) {
  if (latlon.cols() != 2) {
    throw py::value_error("locations must be an (n, 2) lat/lon array");
  }
  std::vector<tmm::Location> out;
  out.reserve(static_cast<std::size_t>(latlon.rows()));
  for (Eigen::Index i = 0; i < latlon.rows(); ++i) {
    out.push_back(tmm::from_latlon(latlon(i, 0), latlon(i, 1)));
  }
  return out;
}

Eigen::MatrixXd to_latlon(const std::vector<tmm::Location>& locations) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(locations.size()), 2);
  for (std::size_t i = 0; i < locations.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    out(r, 0) = tmm::latitude_deg(locations[i]);
    out(r, 1) = tmm::longitude_deg(locations[i]);
  }
  return out;
}

tmm::TmmParams to_shared_params(const py::dict& params) {
  tmm::TmmParams p;
  p.bm.sigma1 = 1.0;
  p.bm.sigma2 = 1.0;
  p.bm.rho12 = 0.0;
  p.bm.nu1 = 3.0;
  p.bm.nu2 = 4.0;
  p.bm.a = 2.0;
  p.tau1 = 0.0;
  p.tau2 = 0.0;
  for (const auto& item : params) {
    const auto key = item.first.cast<std::string>();
    const auto value = item.second.cast<double>();
    if (key == "sigma1") {
      p.bm.sigma1 = value;
    } else if (key == "sigma2") {
      p.bm.sigma2 = value;
    } else if (key == "rho12") {
      p.bm.rho12 = value;
    } else if (key == "nu1") {
      p.bm.nu1 = value;
    } else if (key == "nu2") {
      p.bm.nu2 = value;
    } else if (key == "inv_a") {
      if (value <= 0.0) throw py::value_error("inv_a must be positive");
      p.bm.a = 1.0 / value;
    } else if (key == "tau1") {
      p.tau1 = value;
    } else if (key == "tau2") {
      p.tau2 = value;
    } else {
      throw py::value_error("unknown parameter '" + key + "'");
    }
  }
  return p;
}

py::dict from_shared_params(const tmm::TmmParams& p) {
  py::dict out;
  out["sigma1"] = p.bm.sigma1;
  out["sigma2"] = p.bm.sigma2;
  out["rho12"] = p.bm.rho12;
  out["nu1"] = p.bm.nu1;
  out["nu2"] = p.bm.nu2;
  out["inv_a"] = 1.0 / p.bm.a;
  out["tau1"] = p.tau1;
  out["tau2"] = p.tau2;
  return out;
}

tmm::CovarianceModel to_model_checked(const std::string& family,
                                      const py::dict& params) {
  const tmm::TmmParams p = to_shared_params(params);
  tmm::CovarianceModel model;
  if (family == "tmm") {
    model = p;
  } else if (family == "curlfree") {
    model = tmm::CurlFreeParams{p.bm.sigma1, {p.bm.nu1, p.bm.a}, p.tau1,
                                p.tau2};
  } else if (family == "divfree") {
    model = tmm::DivFreeParams{p.bm.sigma1, {p.bm.nu1, p.bm.a}, p.tau1,
                               p.tau2};
  } else if (family == "parsbm" || family == "parsbm_direct") {
    model = tmm::ParsBmDirectParams{p.bm, p.tau1, p.tau2};
  } else {
    throw py::value_error("unknown family '" + family + "'");
  }
  tmm::validate_model(model);
  return model;
}

tmm::ModelFamily fit_family(const std::string& family) {
  if (family == "tmm") return tmm::ModelFamily::kTmm;
  if (family == "parsbm_direct" || family == "parsbm") {
    return tmm::ModelFamily::kParsBmDirect;
  }
  throw py::value_error("unknown fit family '" + family +
                        "' (expected tmm or parsbm_direct)");
}

tmm::ObservationSet to_observations(const Eigen::MatrixXd& latlon,
                                    const Eigen::MatrixXd& values) {
  tmm::ObservationSet obs{to_locations(latlon), values};
  tmm::validate_observations(obs);
  return obs;
}

std::optional<tmm::GridObservationSet> maybe_grid(
    const tmm::ObservationSet& obs, const std::string& method) {
  if (method == "dense") return std::nullopt;
  auto grid = tmm::as_grid(obs);
  if (!grid && method == "spectral") {
    throw py::value_error(
        "spectral likelihood requires a full-longitude regular grid");
  }
  return grid;
}

py::dict score_dict(const tmm::ScoreSet& s) {
  py::dict out;
  out["mspe"] = s.mspe;
  out["mae"] = s.mae;
  out["logs"] = s.logs;
  out["crps"] = s.crps;
  return out;
}

}  // namespace

PYBIND11_MODULE(_tmm, m) {
  m.doc() =
      "Gaussian tangential vector fields on the sphere: covariance "
      "construction, simulation, likelihood fitting, and cokriging";

  py::register_exception<tmm::Error>(m, "TmmError");

  m.def(
      "regular_grid_latlon",
      [](int n_lat, int n_lon, double lat_min_deg, double lat_max_deg) {
        return to_latlon(
            tmm::regular_grid(n_lat, n_lon, lat_min_deg, lat_max_deg)
                .locations());
      },
      py::arg("n_lat"), py::arg("n_lon"), py::arg("lat_min_deg") = -80.0,
      py::arg("lat_max_deg") = 80.0,
      "Latitude/longitude array of an equiangular grid, latitude-major");

  m.def(
      "fibonacci_latlon",
      [](int n) { return to_latlon(tmm::fibonacci_grid(n)); }, py::arg("n"),
      "Latitude/longitude array of a Fibonacci point set");

  m.def(
      "matern",
      [](double r, double nu, double a) {
        return tmm::matern(r, tmm::MaternParams{nu, a});
      },
      py::arg("r"), py::arg("nu"), py::arg("a"),
      "Matern correlation, unit variance");

  m.def("rho_bound", &tmm::rho_bound, py::arg("nu1"), py::arg("nu2"),
        "Tight co-located cross-correlation bound of the parsimonious "
        "bivariate Matern");

  m.def("crps_gaussian", &tmm::crps_gaussian, py::arg("y"), py::arg("mu"),
        py::arg("sigma"), "Closed-form Gaussian CRPS");

  m.def(
      "cov_matrix",
      [](const py::dict& params, const Eigen::MatrixXd& latlon,
         const std::string& family, int threads) {
        return tmm::cov_matrix(to_locations(latlon),
                               to_model_checked(family, params), threads);
      },
      py::arg("params"), py::arg("latlon"), py::arg("family") = "tmm",
      py::arg("threads") = 0,
      "Dense 2n x 2n covariance, interleaved (u, v), nugget on the diagonal");

  m.def(
      "cross_cov_matrix",
      [](const py::dict& params, const Eigen::MatrixXd& latlon_rows,
         const Eigen::MatrixXd& latlon_cols, const std::string& family,
         int threads) {
        return tmm::cov_cross_matrix(to_locations(latlon_rows),
                                     to_locations(latlon_cols),
                                     to_model_checked(family, params),
                                     threads);
      },
      py::arg("params"), py::arg("latlon_rows"), py::arg("latlon_cols"),
      py::arg("family") = "tmm", py::arg("threads") = 0,
      "Signal-only cross covariance between two location sets");

  m.def(
      "simulate",
      [](const py::dict& params, const Eigen::MatrixXd& latlon,
         std::size_t n_reps, std::uint64_t seed, const std::string& family,
         int threads) {
        tmm::SimulationSpec spec;
        spec.locations = to_locations(latlon);
        spec.model = to_model_checked(family, params);
        spec.n_reps = n_reps;
        spec.seed = seed;
        spec.threads = threads;
        return tmm::simulate(spec);
      },
      py::arg("params"), py::arg("latlon"), py::arg("n_reps") = 1,
      py::arg("seed") = 0, py::arg("family") = "tmm", py::arg("threads") = 0,
      "Exact Gaussian draws; row r is replicate r, interleaved (u, v)");

  m.def(
      "nll",
      [](const py::dict& params, const Eigen::MatrixXd& latlon,
         const Eigen::MatrixXd& values, const std::string& family,
         const std::string& method, int threads) {
        const auto obs = to_observations(latlon, values);
        const auto model = to_model_checked(family, params);
        if (method != "auto" && method != "dense" && method != "spectral") {
          throw py::value_error("method must be auto, dense, or spectral");
        }
        const auto grid = maybe_grid(obs, method);
        if (grid) return tmm::nll_dft(*grid, model, {}, threads);
        return tmm::nll_dense(obs, model, {}, threads);
      },
      py::arg("params"), py::arg("latlon"), py::arg("values"),
      py::arg("family") = "tmm", py::arg("method") = "auto",
      py::arg("threads") = 0,
      "Negative log likelihood; the spectral path is used when the "
      "locations form a full-longitude regular grid");

  m.def(
      "fit",
      [](const Eigen::MatrixXd& latlon, const Eigen::MatrixXd& values,
         const std::string& family, std::uint64_t seed,
         const std::string& method, int n_lhs, int max_iters, double nu_lo,
         double nu_hi, double fixed_init_inverse_scale, bool profile_mean,
         int threads) {
        const auto obs = to_observations(latlon, values);
        tmm::FitConfig cfg;
        cfg.n_lhs = n_lhs;
        cfg.max_iters = max_iters;
        cfg.nu_lo = nu_lo;
        cfg.nu_hi = nu_hi;
        cfg.fixed_init_inverse_scale = fixed_init_inverse_scale;
        cfg.profile_mean = profile_mean;
        cfg.threads = threads;
        const auto fam = fit_family(family);
        const auto grid = maybe_grid(obs, method);
        const auto result = grid ? tmm::fit_mle(*grid, fam, cfg, seed)
                                 : tmm::fit_mle(obs, fam, cfg, seed);
        py::dict out;
        out["family"] = family == "parsbm" ? std::string("parsbm_direct")
                                           : family;
        out["params"] = from_shared_params(result.theta_hat);
        out["nll"] = result.nll;
        out["iterations"] = result.iterations;
        out["converged"] = result.converged;
        out["lhs_candidates_evaluated"] = result.lhs_candidates_evaluated;
        return out;
      },
      py::arg("latlon"), py::arg("values"), py::arg("family") = "tmm",
      py::arg("seed") = 0, py::arg("method") = "auto", py::arg("n_lhs") = 100,
      py::arg("max_iters") = 200, py::arg("nu_lo") = 1.0,
      py::arg("nu_hi") = 5.0, py::arg("fixed_init_inverse_scale") = 5.0,
      py::arg("profile_mean") = false, py::arg("threads") = 0,
      "Maximum-likelihood fit; returns the estimate and diagnostics");

  m.def(
      "cokrige",
      [](const py::dict& params, const Eigen::MatrixXd& latlon_train,
         const Eigen::MatrixXd& values_train,
         const Eigen::MatrixXd& latlon_targets, const std::string& family,
         bool with_joint_cov, int threads) {
        const auto obs = to_observations(latlon_train, values_train);
        const auto model = to_model_checked(family, params);
        const auto pred = tmm::cokrige(obs, model, to_locations(latlon_targets),
                                       with_joint_cov, threads);
        py::dict out;
        out["mean"] = pred.mean;
        out["sd"] = pred.sd;
        if (with_joint_cov) out["joint_cov"] = pred.joint_cov;
        return out;
      },
      py::arg("params"), py::arg("latlon_train"), py::arg("values_train"),
      py::arg("latlon_targets"), py::arg("family") = "tmm",
      py::arg("with_joint_cov") = false, py::arg("threads") = 0,
      "Cokriging of the latent field: per-replicate means, shared sd");

  m.def(
      "score_predictions",
      [](const Eigen::MatrixXd& mean, const Eigen::VectorXd& sd,
         const Eigen::MatrixXd& truth, double tau1, double tau2) {
        tmm::Prediction pred;
        pred.targets.resize(static_cast<std::size_t>(sd.size()) / 2);
        pred.mean = mean;
        pred.sd = sd;
        const auto s = tmm::scores(pred, truth, {tau1, tau2});
        py::dict out;
        out["u"] = score_dict(s.u);
        out["v"] = score_dict(s.v);
        out["pooled"] = score_dict(s.pooled);
        return out;
      },
      py::arg("mean"), py::arg("sd"), py::arg("truth"), py::arg("tau1") = 0.0,
      py::arg("tau2") = 0.0,
      "MSPE, MAE, log score, and CRPS of Gaussian predictions");

  m.def(
      "empirical_cov",
      [](const Eigen::MatrixXd& latlon, const Eigen::MatrixXd& values,
         int n_bins, int threads) {
        const auto obs = to_observations(latlon, values);
        if (n_bins < 1) throw py::value_error("n_bins must be positive");
        double d_max = 0.0;
        for (std::size_t i = 0; i < obs.locations.size(); ++i) {
          for (std::size_t j = 0; j < i; ++j) {
            d_max = std::max(d_max, tmm::great_circle_angle(
                                        obs.locations[i], obs.locations[j]));
          }
        }
        const Eigen::VectorXd edges =
            Eigen::VectorXd::LinSpaced(n_bins + 1, 0.0, d_max);
        const auto emp = tmm::empirical_cov_gcd(obs, edges, threads);
        auto pack = [](const tmm::BinnedCovariance& b) {
          py::dict out;
          out["bin_lo"] = b.bin_lo;
          out["bin_hi"] = b.bin_hi;
          Eigen::VectorXd counts(static_cast<Eigen::Index>(b.counts.size()));
          for (std::size_t k = 0; k < b.counts.size(); ++k) {
            counts(static_cast<Eigen::Index>(k)) =
                static_cast<double>(b.counts[k]);
          }
          out["count"] = counts;
          out["mean"] = b.mean;
          out["median"] = b.median;
          return out;
        };
        py::dict out;
        out["uu"] = pack(emp.uu);
        out["vv"] = pack(emp.vv);
        out["uv"] = pack(emp.uv);
        return out;
      },
      py::arg("latlon"), py::arg("values"), py::arg("n_bins") = 40,
      py::arg("threads") = 0,
      "Binned empirical covariances against great-circle distance");

  m.def(
      "veof",
      [](const Eigen::MatrixXd& stacked, int k, double target_fraction) {
        const auto res = k >= 0 ? tmm::veof_detrend(stacked, k)
                                : tmm::veof_detrend(stacked, target_fraction);
        py::dict out;
        out["residual"] = res.residual;
        out["k"] = res.decomposition.k;
        out["singular_values"] = res.decomposition.singular_values;
        out["explained"] = res.decomposition.explained;
        out["temporal_modes"] = res.decomposition.temporal_modes;
        out["spatial_modes"] = res.decomposition.spatial_modes;
        out["column_means"] = res.decomposition.column_means;
        return out;
      },
      py::arg("values"), py::arg("k") = -1,
      py::arg("target_fraction") = 0.95,
      "SVD detrending of a replicated field matrix (rows = times)");
}
