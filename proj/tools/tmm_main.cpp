/// @file tmm_main.cpp
/// @brief Command-line front end: simulate | fit | bootstrap | predict |
///        empirical | veof.
///
/// Configuration model: every option has a dotted long name (section.key).
/// A file passed with --config holds `section.key = value` lines that are
/// spliced in before the user's flags, so explicit flags win. Each run
/// echoes its fully resolved configuration to <out>/config.echo in the
/// same format; re-running with the echoed file reproduces the outputs
/// bit for bit. All randomness derives from the single --seed value.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "tmm/covariance.hpp"
#include "tmm/empirical.hpp"
#include "tmm/errors.hpp"
#include "tmm/inference.hpp"
#include "tmm/io.hpp"
#include "tmm/likelihood.hpp"
#include "tmm/predict.hpp"
#include "tmm/rng.hpp"
#include "tmm/simulate.hpp"
#include "tmm/sphere.hpp"

namespace fs = std::filesystem;
using tmm::fail_validation;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::string render(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}
std::string render(int v) { return std::to_string(v); }
std::string render(std::uint64_t v) { return std::to_string(v); }
std::string render(bool v) { return v ? "true" : "false"; }
std::string render(const std::string& v) { return v; }

/// Registers options on one subcommand and remembers how to echo them.
class OptionSink {
 public:
  explicit OptionSink(CLI::App* sub) : sub_(sub) {}

  template <typename T>
  void add(const std::string& key, T& ref, const std::string& desc) {
    sub_->add_option("--" + key, ref, desc)
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    echo_.emplace_back(key, [&ref] { return render(ref); });
  }

  std::string echo(const std::string& command) const {
    std::string s = "# tmm " + command + "\n";
    for (const auto& [key, fn] : echo_) s += key + " = " + fn() + "\n";
    return s;
  }

 private:
  CLI::App* sub_;
  std::vector<std::pair<std::string, std::function<std::string()>>> echo_;
};

struct CommonOpts {
  std::string out;
  std::uint64_t seed = 0;
  int threads = 0;

  void add_to(OptionSink& sink) {
    sink.add("out.dir", out, "output directory (required)");
    sink.add("run.seed", seed, "top-level seed; all randomness derives from it");
    sink.add("run.threads", threads,
             "worker threads (0 = TMM_THREADS env or 1)");
  }
  void validate() const {
    if (out.empty()) fail_validation("out.dir is required");
  }
};

struct ModelOpts {
  std::string family = "tmm";
  double sigma1 = 1.0, sigma2 = 1.0, rho12 = 0.0;
  double nu1 = 3.0, nu2 = 4.0, inv_a = 0.5;
  double tau1 = 0.0, tau2 = 0.0;

  void add_to(OptionSink& sink, bool fit_families_only) {
    sink.add("model.family", family,
             fit_families_only ? "tmm | parsbm"
                               : "tmm | curlfree | divfree | parsbm");
    sink.add("model.sigma1", sigma1, "curl-free potential sd (single-field "
                                     "families use sigma1/nu1)");
    sink.add("model.sigma2", sigma2, "divergence-free potential sd");
    sink.add("model.rho12", rho12, "potential cross-correlation");
    sink.add("model.nu1", nu1, "smoothness of the first potential");
    sink.add("model.nu2", nu2, "smoothness of the second potential");
    sink.add("model.inv_a", inv_a, "inverse spatial scale 1/a");
    sink.add("model.tau1", tau1, "u-component nugget sd");
    sink.add("model.tau2", tau2, "v-component nugget sd");
  }

  tmm::TmmParams shared_params() const {
    if (!(inv_a > 0.0)) fail_validation("model.inv_a must be positive");
    tmm::TmmParams p;
    p.bm = {sigma1, sigma2, rho12, nu1, nu2, 1.0 / inv_a};
    p.tau1 = tau1;
    p.tau2 = tau2;
    return p;
  }

  tmm::CovarianceModel model() const {
    const tmm::TmmParams p = shared_params();
    tmm::CovarianceModel m;
    if (family == "tmm") {
      m = p;
    } else if (family == "curlfree") {
      m = tmm::CurlFreeParams{sigma1, {nu1, p.bm.a}, tau1, tau2};
    } else if (family == "divfree") {
      m = tmm::DivFreeParams{sigma1, {nu1, p.bm.a}, tau1, tau2};
    } else if (family == "parsbm" || family == "parsbm_direct") {
      m = tmm::ParsBmDirectParams{p.bm, tau1, tau2};
    } else {
      fail_validation("unknown model.family '" + family + "'");
    }
    tmm::validate_model(m);
    return m;
  }
};

struct FitOpts {
  std::string data;
  std::string likelihood = "auto";
  double nu_lo = 1.0, nu_hi = 5.0;
  double sigma_hi = 0.0, inv_a_hi = 0.0, tau_hi = 0.0;  // 0 = unbounded
  int n_lhs = 100;
  double fixed_init_inverse_scale = 5.0;
  double init_tau = 0.05;
  int max_iters = 200;
  double grad_tol = 1e-5, f_tol = 1e-10;
  bool profile_mean = false;
  bool keep_trace = false;

  void add_to(OptionSink& sink) {
    sink.add("data.file", data, "observed field CSV (required)");
    sink.add("fit.likelihood", likelihood,
             "auto | dense | spectral (auto = spectral on full grids)");
    sink.add("fit.nu_lo", nu_lo, "lower smoothness bound");
    sink.add("fit.nu_hi", nu_hi, "upper smoothness bound");
    sink.add("fit.sigma_hi", sigma_hi, "sd upper bound (0 = none)");
    sink.add("fit.inv_a_hi", inv_a_hi, "inverse-scale upper bound (0 = none)");
    sink.add("fit.tau_hi", tau_hi, "nugget upper bound (0 = none)");
    sink.add("fit.n_lhs", n_lhs, "Latin-hypercube start candidates");
    sink.add("fit.fixed_init_inverse_scale", fixed_init_inverse_scale,
             "initial 1/a shared by all candidates");
    sink.add("fit.init_tau", init_tau, "initial nugget sd for both components");
    sink.add("fit.max_iters", max_iters, "iteration budget");
    sink.add("fit.grad_tol", grad_tol, "gradient tolerance");
    sink.add("fit.f_tol", f_tol, "objective-change tolerance");
    sink.add("fit.profile_mean", profile_mean,
             "profile a quadratic-in-colatitude mean by GLS");
    sink.add("fit.keep_trace", keep_trace, "write accepted iterates");
  }

  tmm::FitConfig config(int threads) const {
    tmm::FitConfig cfg;
    cfg.nu_lo = nu_lo;
    cfg.nu_hi = nu_hi;
    const double inf = std::numeric_limits<double>::infinity();
    cfg.sigma_hi = sigma_hi > 0.0 ? sigma_hi : inf;
    cfg.inv_a_hi = inv_a_hi > 0.0 ? inv_a_hi : inf;
    cfg.tau_hi = tau_hi > 0.0 ? tau_hi : inf;
    cfg.n_lhs = n_lhs;
    cfg.fixed_init_inverse_scale = fixed_init_inverse_scale;
    cfg.init_taus = {init_tau, init_tau};
    cfg.max_iters = max_iters;
    cfg.grad_tol = grad_tol;
    cfg.f_tol = f_tol;
    cfg.profile_mean = profile_mean;
    cfg.keep_trace = keep_trace;
    cfg.threads = threads;
    return cfg;
  }
};

std::vector<tmm::Location> resolve_locations(const std::string& file,
                                             int fibonacci_n, int n_lat,
                                             int n_lon, double lat_min,
                                             double lat_max) {
  if (!file.empty()) return tmm::read_locations_csv(file);
  if (fibonacci_n > 0) return tmm::fibonacci_grid(fibonacci_n);
  const auto grid = tmm::regular_grid(n_lat, n_lon, lat_min, lat_max);
  return grid.locations();
}

void write_echo(const CommonOpts& common, const OptionSink& sink,
                const std::string& command) {
  fs::create_directories(common.out);
  tmm::atomic_write(fs::path(common.out) / "config.echo", sink.echo(command));
}

/// Picks the likelihood path and runs the fit.
tmm::FitResult run_fit(const tmm::ObservationSet& obs,
                       const std::string& likelihood, tmm::ModelFamily family,
                       const tmm::FitConfig& cfg, std::uint64_t seed,
                       std::optional<tmm::RegularGrid>* grid_out) {
  if (likelihood != "auto" && likelihood != "dense" &&
      likelihood != "spectral") {
    fail_validation("fit.likelihood must be auto, dense, or spectral");
  }
  if (likelihood != "dense") {
    const auto gobs = tmm::as_grid(obs);
    if (gobs.has_value()) {
      if (grid_out != nullptr) *grid_out = gobs->grid;
      return tmm::fit_mle(*gobs, family, cfg, seed);
    }
    if (likelihood == "spectral") {
      fail_validation(
          "spectral likelihood requires a full-longitude regular grid");
    }
  }
  return tmm::fit_mle(obs, family, cfg, seed);
}

void write_trace(const fs::path& path, const tmm::FitResult& fit) {
  std::string s = "iteration";
  for (const char* name : tmm::kParamNames) s += std::string(",") + name;
  s += ",nll\n";
  for (std::size_t k = 0; k < fit.trace.size(); ++k) {
    s += std::to_string(k);
    for (Eigen::Index j = 0; j < fit.trace[k].theta.size(); ++j) {
      s += "," + render(fit.trace[k].theta(j));
    }
    s += "," + render(fit.trace[k].nll) + "\n";
  }
  tmm::atomic_write(path, s);
}

// ---------------------------------------------------------------- simulate

int cmd_simulate(const CommonOpts& common, const ModelOpts& model,
                 const std::string& loc_file, int fibonacci_n, int n_lat,
                 int n_lon, double lat_min, double lat_max, int n_reps,
                 const OptionSink& sink) {
  const auto m = model.model();
  tmm::SimulationSpec spec;
  spec.locations = resolve_locations(loc_file, fibonacci_n, n_lat, n_lon,
                                     lat_min, lat_max);
  spec.model = m;
  spec.n_reps = static_cast<std::size_t>(std::max(1, n_reps));
  spec.seed = tmm::CounterRng::derive(common.seed,
                                      tmm::CounterRng::tag("simulate"), 0);
  spec.threads = common.threads;
  const tmm::ObservationSet obs{spec.locations, tmm::simulate(spec)};
  write_echo(common, sink, "simulate");
  tmm::write_samples_csv(fs::path(common.out) / "samples.csv", obs);
  return 0;
}

// --------------------------------------------------------------- fit

int cmd_fit(const CommonOpts& common, const FitOpts& fit_opts,
            const std::string& family_name, const OptionSink& sink) {
  if (fit_opts.data.empty()) fail_validation("data.file is required");
  const auto family = tmm::family_from_name(family_name);
  const auto field = tmm::read_field_csv(fit_opts.data);
  const auto cfg = fit_opts.config(common.threads);
  const auto seed =
      tmm::CounterRng::derive(common.seed, tmm::CounterRng::tag("fit"), 0);

  const auto fit = run_fit(field.obs, fit_opts.likelihood, family, cfg, seed,
                           nullptr);
  write_echo(common, sink, "fit");
  tmm::write_fit_result(fs::path(common.out) / "fit.txt", fit);
  if (cfg.keep_trace) {
    write_trace(fs::path(common.out) / "trace.csv", fit);
  }
  if (!fit.converged) {
    std::cerr << "warning: fit did not converge within " << cfg.max_iters
              << " iterations\n";
    return 3;
  }
  return 0;
}

// --------------------------------------------------------------- bootstrap

int cmd_bootstrap(const CommonOpts& common, const FitOpts& fit_opts,
                  const std::string& family_name, int n_bootstrap,
                  const OptionSink& sink) {
  if (fit_opts.data.empty()) fail_validation("data.file is required");
  const auto family = tmm::family_from_name(family_name);
  const auto field = tmm::read_field_csv(fit_opts.data);
  const auto cfg = fit_opts.config(common.threads);

  std::optional<tmm::RegularGrid> grid;
  const auto fit = run_fit(
      field.obs, fit_opts.likelihood, family, cfg,
      tmm::CounterRng::derive(common.seed, tmm::CounterRng::tag("fit"), 0),
      &grid);

  tmm::DataShape shape;
  shape.n_reps = field.obs.n_reps();
  shape.grid = grid;
  shape.locations = field.obs.locations;
  const auto boot = tmm::bootstrap_se(
      fit, shape, n_bootstrap,
      tmm::CounterRng::derive(common.seed, tmm::CounterRng::tag("bootstrap"),
                              0));

  write_echo(common, sink, "bootstrap");
  tmm::write_fit_result(fs::path(common.out) / "fit.txt", fit);

  const Eigen::VectorXd estimate = tmm::params_to_vector(fit.theta_hat);
  std::string table = "parameter,estimate,se\n";
  for (int k = 0; k < estimate.size(); ++k) {
    table += std::string(tmm::kParamNames[static_cast<std::size_t>(k)]) + "," +
             render(estimate(k)) + "," + render(boot.se(k)) + "\n";
  }
  tmm::atomic_write(fs::path(common.out) / "bootstrap.csv", table);

  std::string meta = "b = " + std::to_string(n_bootstrap) + "\n";
  meta += "n_failed = " + std::to_string(boot.n_failed) + "\n";
  meta += "n_nonconverged = " + std::to_string(boot.n_nonconverged) + "\n";
  tmm::atomic_write(fs::path(common.out) / "bootstrap_meta.txt", meta);
  return 0;
}

// --------------------------------------------------------------- predict

struct Holdout {
  std::vector<int> train, test;
};

/// Training locations are a random fraction of those outside a randomly
/// placed longitudinal band; everything else (including the whole band) is
/// held out, covering both short- and long-range prediction.
Holdout split_holdout(const std::vector<tmm::Location>& locations,
                      double band_width_deg, double train_fraction,
                      std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    fail_validation("holdout.train_fraction must lie in (0, 1)");
  }
  if (!(band_width_deg >= 0.0 && band_width_deg < 360.0)) {
    fail_validation("holdout.band_width_deg must lie in [0, 360)");
  }
  const tmm::CounterRng rng(seed, 0);
  const double band_lo = kTwoPi * rng.uniform(0);
  const double band_width = band_width_deg * std::numbers::pi / 180.0;

  Holdout out;
  for (std::size_t i = 0; i < locations.size(); ++i) {
    const double rel =
        std::fmod(locations[i].phi - band_lo + kTwoPi, kTwoPi);
    const bool in_band = rel < band_width;
    const bool train =
        !in_band && rng.uniform(1 + static_cast<std::uint64_t>(i)) <
                        train_fraction;
    (train ? out.train : out.test).push_back(static_cast<int>(i));
  }
  if (out.train.empty()) fail_validation("hold-out left no training data");
  if (out.test.empty()) fail_validation("hold-out left no test data");
  return out;
}

tmm::ObservationSet subset(const tmm::ObservationSet& obs,
                           const std::vector<int>& idx) {
  tmm::ObservationSet out;
  out.values.resize(obs.values.rows(), 2 * static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) {
    out.locations.push_back(obs.locations[static_cast<std::size_t>(idx[k])]);
    out.values.col(2 * static_cast<Eigen::Index>(k)) =
        obs.values.col(2 * idx[k]);
    out.values.col(2 * static_cast<Eigen::Index>(k) + 1) =
        obs.values.col(2 * idx[k] + 1);
  }
  return out;
}

int cmd_predict(const CommonOpts& common, const ModelOpts& model,
                const std::string& data_file, const std::string& fit_file,
                double band_width_deg, double train_fraction,
                const OptionSink& sink) {
  if (data_file.empty()) fail_validation("data.file is required");
  const auto field = tmm::read_field_csv(data_file);

  tmm::CovarianceModel m;
  if (!fit_file.empty()) {
    const auto rec = tmm::read_fit_record(fit_file);
    m = tmm::to_model(rec.family, rec.theta);
  } else {
    m = model.model();
  }
  const auto taus = tmm::model_tau(m);

  const auto holdout = split_holdout(
      field.obs.locations, band_width_deg, train_fraction,
      tmm::CounterRng::derive(common.seed, tmm::CounterRng::tag("predict"), 0));
  const auto train = subset(field.obs, holdout.train);
  const auto test = subset(field.obs, holdout.test);

  const auto pred = tmm::cokrige(train, m, test.locations, false,
                                 common.threads);

  // Per-replicate scores against the held-out observations (nugget noise
  // included in the predictive scale), then mean and sd over replicates.
  const auto reps = static_cast<Eigen::Index>(field.obs.n_reps());
  Eigen::MatrixXd by_rep(reps, 12);
  for (Eigen::Index r = 0; r < reps; ++r) {
    tmm::Prediction one;
    one.targets = pred.targets;
    one.mean = pred.mean.row(r);
    one.sd = pred.sd;
    const auto s =
        tmm::scores(one, test.values.row(r), {taus[0], taus[1]});
    by_rep.row(r) << s.u.mspe, s.u.mae, s.u.logs, s.u.crps, s.v.mspe, s.v.mae,
        s.v.logs, s.v.crps, s.pooled.mspe, s.pooled.mae, s.pooled.logs,
        s.pooled.crps;
  }
  const Eigen::RowVectorXd mean = by_rep.colwise().mean();
  Eigen::RowVectorXd sd = Eigen::RowVectorXd::Zero(12);
  if (reps > 1) {
    sd = ((by_rep.rowwise() - mean).array().square().colwise().sum() /
          static_cast<double>(reps - 1))
             .sqrt()
             .matrix();
  }

  write_echo(common, sink, "predict");
  const std::string model_label = tmm::model_name(m);
  std::string table =
      "model,variable,mspe_mean,mspe_sd,mae_mean,mae_sd,logs_mean,logs_sd,"
      "crps_mean,crps_sd\n";
  const char* vars[3] = {"u", "v", "pooled"};
  for (int b = 0; b < 3; ++b) {
    table += model_label;
    table += ",";
    table += vars[b];
    for (int s = 0; s < 4; ++s) {
      table += "," + render(mean(4 * b + s)) + "," + render(sd(4 * b + s));
    }
    table += "\n";
  }
  tmm::atomic_write(fs::path(common.out) / "scores.csv", table);

  tmm::write_predictions_csv(fs::path(common.out) / "predictions.csv",
                             pred.targets, pred.mean.row(0).transpose(),
                             pred.sd);
  tmm::write_locations_csv(fs::path(common.out) / "train_locations.csv",
                           train.locations);
  tmm::write_locations_csv(fs::path(common.out) / "test_locations.csv",
                           test.locations);
  return 0;
}

// --------------------------------------------------------------- empirical

int cmd_empirical(const CommonOpts& common, const std::string& data_file,
                  int n_bins, const OptionSink& sink) {
  if (data_file.empty()) fail_validation("data.file is required");
  if (n_bins < 1) fail_validation("empirical.n_bins must be positive");
  const auto field = tmm::read_field_csv(data_file);

  double d_max = 0.0;
  const auto& locs = field.obs.locations;
  for (std::size_t i = 0; i < locs.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      d_max = std::max(d_max, tmm::great_circle_angle(locs[i], locs[j]));
    }
  }
  if (d_max <= 0.0) d_max = 1.0;
  const Eigen::VectorXd edges =
      Eigen::VectorXd::LinSpaced(n_bins + 1, 0.0, d_max);
  const auto cov = tmm::empirical_cov_gcd(field.obs, edges, common.threads);

  write_echo(common, sink, "empirical");
  const fs::path out(common.out);
  tmm::write_bins_csv(out / "empirical_uu.csv", cov.uu);
  tmm::write_bins_csv(out / "empirical_vv.csv", cov.vv);
  tmm::write_bins_csv(out / "empirical_uv.csv", cov.uv);

  if (field.obs.n_reps() >= 3) {
    const auto cc = tmm::colocated_crosscorr(field.obs);
    std::string s = "lat_deg,lon_deg,corr\n";
    for (std::size_t i = 0; i < cc.locations.size(); ++i) {
      s += render(tmm::latitude_deg(cc.locations[i])) + "," +
           render(tmm::longitude_deg(cc.locations[i])) + ",";
      if (!std::isnan(cc.corr(static_cast<Eigen::Index>(i)))) {
        s += render(cc.corr(static_cast<Eigen::Index>(i)));
      }
      s += "\n";
    }
    tmm::atomic_write(out / "colocated_corr.csv", s);

    const auto profile = [&](const Eigen::VectorXd& grid,
                             const Eigen::VectorXd& smooth,
                             const char* coord_name) {
      std::string p = std::string(coord_name) + ",corr_smooth\n";
      for (Eigen::Index k = 0; k < grid.size(); ++k) {
        p += render(grid(k)) + ",";
        if (!std::isnan(smooth(k))) p += render(smooth(k));
        p += "\n";
      }
      return p;
    };
    tmm::atomic_write(out / "colocated_profile_lat.csv",
                      profile(cc.lat_grid, cc.lat_smooth, "lat_deg"));
    tmm::atomic_write(out / "colocated_profile_lon.csv",
                      profile(cc.lon_grid, cc.lon_smooth, "lon_deg"));
  }
  return 0;
}

// --------------------------------------------------------------- veof

int cmd_veof(const CommonOpts& common, const std::string& data_file, int k,
             double target_fraction, const OptionSink& sink) {
  if (data_file.empty()) fail_validation("data.file is required");
  const auto field = tmm::read_field_csv(data_file);
  const auto n = static_cast<Eigen::Index>(field.obs.n_locations());
  const auto reps = static_cast<Eigen::Index>(field.obs.n_reps());

  // T x 2N, u columns then v columns.
  Eigen::MatrixXd stacked(reps, 2 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    stacked.col(i) = field.obs.values.col(2 * i);
    stacked.col(n + i) = field.obs.values.col(2 * i + 1);
  }

  const auto res = k >= 0 ? tmm::veof_detrend(stacked, k)
                          : tmm::veof_detrend(stacked, target_fraction);

  tmm::ObservationSet residual;
  residual.locations = field.obs.locations;
  residual.values.resize(reps, 2 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    residual.values.col(2 * i) = res.residual.col(i);
    residual.values.col(2 * i + 1) = res.residual.col(n + i);
  }

  write_echo(common, sink, "veof");
  const fs::path out(common.out);
  tmm::write_field_csv(out / "veof_residual.csv", residual, field.labels);
  tmm::write_matrix_csv(out / "veof_temporal_modes.csv",
                        res.decomposition.temporal_modes, "mode");
  tmm::write_matrix_csv(out / "veof_spatial_modes.csv",
                        res.decomposition.spatial_modes, "mode");

  std::string sv = "mode,singular_value,explained_fraction\n";
  for (Eigen::Index i = 0; i < res.decomposition.singular_values.size(); ++i) {
    sv += std::to_string(i + 1) + "," +
          render(res.decomposition.singular_values(i)) + "," +
          render(res.decomposition.explained(i)) + "\n";
  }
  tmm::atomic_write(out / "veof_singular_values.csv", sv);

  std::string summary = "k = " + std::to_string(res.decomposition.k) + "\n";
  summary += "n_modes = " +
             std::to_string(res.decomposition.singular_values.size()) + "\n";
  summary +=
      "selection = " + std::string(k >= 0 ? "fixed_k" : "target_fraction") +
      "\n";
  tmm::atomic_write(out / "veof_summary.txt", summary);
  return 0;
}

// --------------------------------------------------------------- config file

/// Expands `section.key = value` lines into --section.key=value tokens.
std::vector<std::string> config_tokens(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail_validation("cannot open config file " + path);
  std::vector<std::string> tokens;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail_validation("config file " + path + " line " +
                      std::to_string(line_no) + ": expected key = value");
    }
    auto strip = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      if (b == std::string::npos) return std::string();
      const auto e = s.find_last_not_of(" \t");
      return s.substr(b, e - b + 1);
    };
    const std::string key = strip(line.substr(0, eq));
    const std::string val = strip(line.substr(eq + 1));
    if (key.empty()) {
      fail_validation("config file " + path + " line " +
                      std::to_string(line_no) + ": empty key");
    }
    // An empty value means "leave at default": CLI11 would otherwise treat
    // --key= as valueless and swallow the next token.
    if (!val.empty()) tokens.push_back("--" + key + "=" + val);
  }
  return tokens;
}

/// Splices config-file tokens right after the subcommand so later
/// command-line flags override them.
std::vector<std::string> splice_config(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::string config_path;
  std::vector<std::string> kept;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) fail_validation("--config needs a file path");
      config_path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
    } else {
      kept.push_back(args[i]);
    }
  }
  if (config_path.empty()) return kept;
  const auto extra = config_tokens(config_path);
  std::vector<std::string> out;
  std::size_t insert_after = kept.empty() ? 0 : 1;  // after the subcommand
  out.insert(out.end(), kept.begin(),
             kept.begin() + static_cast<std::ptrdiff_t>(insert_after));
  out.insert(out.end(), extra.begin(), extra.end());
  out.insert(out.end(), kept.begin() + static_cast<std::ptrdiff_t>(insert_after),
             kept.end());
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    CLI::App app{"Gaussian tangential vector fields on the sphere: "
                 "simulation, likelihood fitting, cokriging, diagnostics"};
    app.require_subcommand(1);

    // simulate
    auto* sim = app.add_subcommand("simulate", "draw Gaussian field samples");
    OptionSink sim_sink(sim);
    CommonOpts sim_common;
    ModelOpts sim_model;
    std::string sim_loc_file;
    int sim_fibonacci = 0, sim_n_lat = 10, sim_n_lon = 20, sim_reps = 1;
    double sim_lat_min = -80.0, sim_lat_max = 80.0;
    sim_common.add_to(sim_sink);
    sim_model.add_to(sim_sink, false);
    sim_sink.add("locations.file", sim_loc_file,
                 "lat_deg,lon_deg CSV (overrides grid options)");
    sim_sink.add("grid.fibonacci_n", sim_fibonacci,
                 "Fibonacci lattice size (overrides the regular grid)");
    sim_sink.add("grid.n_lat", sim_n_lat, "latitude ring count");
    sim_sink.add("grid.n_lon", sim_n_lon, "longitudes per ring");
    sim_sink.add("grid.lat_min_deg", sim_lat_min, "southernmost ring");
    sim_sink.add("grid.lat_max_deg", sim_lat_max, "northernmost ring");
    sim_sink.add("sim.n_reps", sim_reps, "independent replicates");

    // fit
    auto* fit = app.add_subcommand("fit", "maximum-likelihood estimation");
    OptionSink fit_sink(fit);
    CommonOpts fit_common;
    FitOpts fit_opts;
    std::string fit_family = "tmm";
    fit_common.add_to(fit_sink);
    fit_sink.add("model.family", fit_family, "tmm | parsbm");
    fit_opts.add_to(fit_sink);

    // bootstrap
    auto* boot = app.add_subcommand("bootstrap",
                                    "parametric bootstrap standard errors");
    OptionSink boot_sink(boot);
    CommonOpts boot_common;
    FitOpts boot_opts;
    std::string boot_family = "tmm";
    int boot_b = 30;
    boot_common.add_to(boot_sink);
    boot_sink.add("model.family", boot_family, "tmm | parsbm");
    boot_opts.add_to(boot_sink);
    boot_sink.add("bootstrap.b", boot_b, "bootstrap replicates");

    // predict
    auto* pred = app.add_subcommand("predict",
                                    "hold-out cokriging and scoring");
    OptionSink pred_sink(pred);
    CommonOpts pred_common;
    ModelOpts pred_model;
    std::string pred_data, pred_fit_file;
    double pred_band = 30.0, pred_fraction = 0.5;
    pred_common.add_to(pred_sink);
    pred_model.add_to(pred_sink, false);
    pred_sink.add("data.file", pred_data, "observed field CSV (required)");
    pred_sink.add("predict.fit_file", pred_fit_file,
                  "fit result file; overrides model.* parameters");
    pred_sink.add("holdout.band_width_deg", pred_band,
                  "width of the held-out longitudinal band");
    pred_sink.add("holdout.train_fraction", pred_fraction,
                  "training fraction outside the band");

    // empirical
    auto* emp = app.add_subcommand("empirical",
                                   "binned covariances and co-located "
                                   "correlations");
    OptionSink emp_sink(emp);
    CommonOpts emp_common;
    std::string emp_data;
    int emp_bins = 40;
    emp_common.add_to(emp_sink);
    emp_sink.add("data.file", emp_data, "observed field CSV (required)");
    emp_sink.add("empirical.n_bins", emp_bins, "equal-width distance bins");

    // veof
    auto* veof = app.add_subcommand("veof", "SVD detrending of a field");
    OptionSink veof_sink(veof);
    CommonOpts veof_common;
    std::string veof_data;
    int veof_k = -1;
    double veof_fraction = 0.95;
    veof_common.add_to(veof_sink);
    veof_sink.add("data.file", veof_data, "observed field CSV (required)");
    veof_sink.add("veof.k", veof_k, "retained modes (-1 = use the fraction)");
    veof_sink.add("veof.target_fraction", veof_fraction,
                  "smallest k explaining this variance fraction");

    const auto args = splice_config(argc, argv);
    try {
      std::vector<const char*> cargs{argv[0]};
      for (const auto& a : args) cargs.push_back(a.c_str());
      app.parse(static_cast<int>(cargs.size()), cargs.data());
    } catch (const CLI::CallForHelp& e) {
      return app.exit(e);
    } catch (const CLI::ParseError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 1;
    }

    if (sim->parsed()) {
      sim_common.validate();
      return cmd_simulate(sim_common, sim_model, sim_loc_file, sim_fibonacci,
                          sim_n_lat, sim_n_lon, sim_lat_min, sim_lat_max,
                          sim_reps, sim_sink);
    }
    if (fit->parsed()) {
      fit_common.validate();
      return cmd_fit(fit_common, fit_opts, fit_family, fit_sink);
    }
    if (boot->parsed()) {
      boot_common.validate();
      return cmd_bootstrap(boot_common, boot_opts, boot_family, boot_b,
                           boot_sink);
    }
    if (pred->parsed()) {
      pred_common.validate();
      return cmd_predict(pred_common, pred_model, pred_data, pred_fit_file,
                         pred_band, pred_fraction, pred_sink);
    }
    if (emp->parsed()) {
      emp_common.validate();
      return cmd_empirical(emp_common, emp_data, emp_bins, emp_sink);
    }
    if (veof->parsed()) {
      veof_common.validate();
      return cmd_veof(veof_common, veof_data, veof_k, veof_fraction,
                      veof_sink);
    }
    std::cerr << "error: no command given\n";
    return 1;
  } catch (const tmm::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
}
