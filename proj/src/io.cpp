/// @file io.cpp
/// @brief CSV and key-value readers/writers plus grid reconstruction.

#include "tmm/io.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "tmm/errors.hpp"

namespace tmm {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::string fmt(const char* spec, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

std::string coord(double v) { return fmt("%.10g", v); }
std::string value(double v) { return fmt("%.17g", v); }

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(trim(line.substr(start)));
      return out;
    }
    out.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
}

[[noreturn]] void fail_at(const std::filesystem::path& path, std::size_t line,
                          const std::string& what) {
  fail_validation(path.string() + " line " + std::to_string(line) + ": " +
                  what);
}

double parse_double(const std::filesystem::path& path, std::size_t line,
                    const std::string& field) {
  if (field.empty()) fail_at(path, line, "empty numeric field");
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(field.c_str(), &end);
  if (end != field.c_str() + field.size() || errno == ERANGE) {
    fail_at(path, line, "not a number: '" + field + "'");
  }
  return v;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail_validation("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  if (lines.empty()) fail_validation(path.string() + " is empty");
  return lines;
}

bool header_matches(const std::vector<std::string>& got,
                    const std::vector<std::string>& want) {
  return got == want;
}

}  // namespace

void atomic_write(const std::filesystem::path& path,
                  const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail_validation("cannot write " + tmp.string());
    out << content;
    if (!out) fail_validation("short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    fail_validation("cannot replace " + path.string() + ": " + ec.message());
  }
}

FieldCsv read_field_csv(const std::filesystem::path& path) {
  const auto lines = read_lines(path);
  const auto header = split_csv(lines[0]);
  bool labeled = true;
  if (header_matches(header, {"time", "lat_deg", "lon_deg", "u", "v"}) ||
      header_matches(header, {"rep", "lat_deg", "lon_deg", "u", "v"})) {
    labeled = true;
  } else if (header_matches(header, {"lat_deg", "lon_deg", "u", "v"})) {
    labeled = false;
  } else {
    fail_at(path, 1,
            "expected header [time|rep,]lat_deg,lon_deg,u,v, got '" +
                lines[0] + "'");
  }
  const std::size_t n_fields = labeled ? 5 : 4;

  struct Row {
    double label, lat, lon, u, v;
  };
  std::vector<Row> rows;
  rows.reserve(lines.size() - 1);
  for (std::size_t k = 1; k < lines.size(); ++k) {
    if (trim(lines[k]).empty()) continue;
    const auto f = split_csv(lines[k]);
    if (f.size() != n_fields) {
      fail_at(path, k + 1,
              "expected " + std::to_string(n_fields) + " fields, got " +
                  std::to_string(f.size()));
    }
    Row r{};
    std::size_t c = 0;
    r.label = labeled ? parse_double(path, k + 1, f[c++]) : 0.0;
    r.lat = parse_double(path, k + 1, f[c++]);
    r.lon = parse_double(path, k + 1, f[c++]);
    r.u = parse_double(path, k + 1, f[c++]);
    r.v = parse_double(path, k + 1, f[c]);
    rows.push_back(r);
  }
  if (rows.empty()) fail_validation(path.string() + " has no data rows");

  FieldCsv out;
  out.had_label = labeled;
  std::vector<std::size_t> starts{0};
  for (std::size_t k = 1; k < rows.size(); ++k) {
    if (rows[k].label != rows[k - 1].label) starts.push_back(k);
  }
  const std::size_t n = starts.size() > 1 ? starts[1] : rows.size();
  if (rows.size() % n != 0 || starts.size() != rows.size() / n) {
    fail_validation(path.string() + ": replicates have unequal lengths");
  }
  const std::size_t n_reps = starts.size();

  out.obs.locations.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.obs.locations.push_back(from_latlon(rows[i].lat, rows[i].lon));
  }
  out.obs.values.resize(static_cast<Eigen::Index>(n_reps),
                        static_cast<Eigen::Index>(2 * n));
  out.labels.reserve(n_reps);
  for (std::size_t r = 0; r < n_reps; ++r) {
    out.labels.push_back(rows[starts[r]].label);
    for (std::size_t q = 0; q < r; ++q) {
      if (out.labels[q] == out.labels[r]) {
        fail_validation(path.string() + ": replicate label " +
                        value(out.labels[r]) + " appears in separate blocks");
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      const Row& row = rows[starts[r] + i];
      if (row.lat != rows[i].lat || row.lon != rows[i].lon) {
        fail_at(path, starts[r] + i + 2,
                "location differs from the first replicate's sequence");
      }
      out.obs.values(static_cast<Eigen::Index>(r),
                     static_cast<Eigen::Index>(2 * i)) = row.u;
      out.obs.values(static_cast<Eigen::Index>(r),
                     static_cast<Eigen::Index>(2 * i + 1)) = row.v;
    }
  }
  validate_observations(out.obs);
  return out;
}

namespace {

void write_labeled_field(const std::filesystem::path& path,
                         const ObservationSet& obs, const char* label_name,
                         const std::vector<double>& labels, bool integer_label) {
  validate_observations(obs);
  std::string s(label_name);
  s += ",lat_deg,lon_deg,u,v\n";
  const auto n = static_cast<Eigen::Index>(obs.n_locations());
  for (Eigen::Index r = 0; r < static_cast<Eigen::Index>(obs.n_reps()); ++r) {
    const double label =
        labels.empty() ? static_cast<double>(r)
                       : labels[static_cast<std::size_t>(r)];
    const std::string label_str =
        integer_label ? std::to_string(static_cast<long long>(label))
                      : value(label);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& loc = obs.locations[static_cast<std::size_t>(i)];
      s += label_str;
      s += ',';
      s += coord(latitude_deg(loc));
      s += ',';
      s += coord(longitude_deg(loc));
      s += ',';
      s += value(obs.values(r, 2 * i));
      s += ',';
      s += value(obs.values(r, 2 * i + 1));
      s += '\n';
    }
  }
  atomic_write(path, s);
}

}  // namespace

void write_field_csv(const std::filesystem::path& path,
                     const ObservationSet& obs,
                     const std::vector<double>& labels) {
  if (!labels.empty() && labels.size() != obs.n_reps()) {
    fail_validation("label count does not match replicate count");
  }
  write_labeled_field(path, obs, "time", labels, labels.empty());
}

void write_samples_csv(const std::filesystem::path& path,
                       const ObservationSet& obs) {
  write_labeled_field(path, obs, "rep", {}, true);
}

std::vector<Location> read_locations_csv(const std::filesystem::path& path) {
  const auto lines = read_lines(path);
  if (!header_matches(split_csv(lines[0]), {"lat_deg", "lon_deg"})) {
    fail_at(path, 1, "expected header lat_deg,lon_deg");
  }
  std::vector<Location> out;
  for (std::size_t k = 1; k < lines.size(); ++k) {
    if (trim(lines[k]).empty()) continue;
    const auto f = split_csv(lines[k]);
    if (f.size() != 2) fail_at(path, k + 1, "expected 2 fields");
    out.push_back(from_latlon(parse_double(path, k + 1, f[0]),
                              parse_double(path, k + 1, f[1])));
  }
  if (out.empty()) fail_validation(path.string() + " has no locations");
  return out;
}

void write_locations_csv(const std::filesystem::path& path,
                         const std::vector<Location>& locations) {
  std::string s = "lat_deg,lon_deg\n";
  for (const auto& loc : locations) {
    s += coord(latitude_deg(loc));
    s += ',';
    s += coord(longitude_deg(loc));
    s += '\n';
  }
  atomic_write(path, s);
}

void write_predictions_csv(const std::filesystem::path& path,
                           const std::vector<Location>& targets,
                           const Eigen::VectorXd& mean_row,
                           const Eigen::VectorXd& sd) {
  const auto n = static_cast<Eigen::Index>(targets.size());
  if (mean_row.size() != 2 * n || sd.size() != 2 * n) {
    fail_validation("prediction rows must hold 2 values per target");
  }
  std::string s = "lat_deg,lon_deg,u_mean,v_mean,u_sd,v_sd\n";
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& loc = targets[static_cast<std::size_t>(i)];
    s += coord(latitude_deg(loc));
    s += ',';
    s += coord(longitude_deg(loc));
    s += ',';
    s += value(mean_row(2 * i));
    s += ',';
    s += value(mean_row(2 * i + 1));
    s += ',';
    s += value(sd(2 * i));
    s += ',';
    s += value(sd(2 * i + 1));
    s += '\n';
  }
  atomic_write(path, s);
}

void write_bins_csv(const std::filesystem::path& path,
                    const BinnedCovariance& bins) {
  std::string s = "bin_lo,bin_hi,count,mean,median\n";
  for (Eigen::Index b = 0; b < bins.bin_lo.size(); ++b) {
    s += value(bins.bin_lo(b));
    s += ',';
    s += value(bins.bin_hi(b));
    s += ',';
    s += std::to_string(bins.counts[static_cast<std::size_t>(b)]);
    s += ',';
    if (!std::isnan(bins.mean(b))) s += value(bins.mean(b));
    s += ',';
    if (!std::isnan(bins.median(b))) s += value(bins.median(b));
    s += '\n';
  }
  atomic_write(path, s);
}

void write_matrix_csv(const std::filesystem::path& path,
                      const Eigen::MatrixXd& m,
                      const std::string& col_prefix) {
  std::string s;
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    if (c > 0) s += ',';
    s += col_prefix + "_" + std::to_string(c + 1);
  }
  s += '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c > 0) s += ',';
      s += value(m(r, c));
    }
    s += '\n';
  }
  atomic_write(path, s);
}

std::string family_name(ModelFamily family) {
  switch (family) {
    case ModelFamily::kTmm:
      return "tmm";
    case ModelFamily::kParsBmDirect:
      return "parsbm_direct";
  }
  fail_validation("unknown model family");
}

ModelFamily family_from_name(const std::string& name) {
  if (name == "tmm") return ModelFamily::kTmm;
  if (name == "parsbm_direct" || name == "parsbm") {
    return ModelFamily::kParsBmDirect;
  }
  fail_validation("unknown model family '" + name +
                  "' (expected tmm or parsbm)");
}

void write_fit_result(const std::filesystem::path& path,
                      const FitResult& fit) {
  const Eigen::VectorXd theta = params_to_vector(fit.theta_hat);
  std::string s = "family = " + family_name(fit.family) + "\n";
  for (int k = 0; k < static_cast<int>(kParamNames.size()); ++k) {
    s += std::string(kParamNames[static_cast<std::size_t>(k)]) + " = " +
         value(theta(k)) + "\n";
  }
  s += "nll = " + value(fit.nll) + "\n";
  s += "iterations = " + std::to_string(fit.iterations) + "\n";
  s += "converged = " + std::string(fit.converged ? "true" : "false") + "\n";
  s += "lhs_candidates_evaluated = " +
       std::to_string(fit.lhs_candidates_evaluated) + "\n";
  atomic_write(path, s);
}

FitRecord read_fit_record(const std::filesystem::path& path) {
  const auto lines = read_lines(path);
  std::map<std::string, std::string> kv;
  for (std::size_t k = 0; k < lines.size(); ++k) {
    const std::string line = trim(lines[k]);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail_at(path, k + 1, "expected key = value");
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  const auto need = [&](const std::string& key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) {
      fail_validation(path.string() + ": missing key '" + key + "'");
    }
    return it->second;
  };

  FitRecord out;
  out.family = family_from_name(need("family"));
  Eigen::VectorXd theta(static_cast<Eigen::Index>(kParamNames.size()));
  for (int k = 0; k < theta.size(); ++k) {
    theta(k) = parse_double(path, 0,
                            need(std::string(
                                kParamNames[static_cast<std::size_t>(k)])));
  }
  out.theta = vector_to_params(theta);
  out.nll = parse_double(path, 0, need("nll"));
  out.iterations = static_cast<int>(parse_double(path, 0, need("iterations")));
  out.converged = need("converged") == "true";
  return out;
}

std::optional<GridObservationSet> as_grid(const ObservationSet& obs) {
  const auto n = obs.n_locations();
  if (n < 2) return std::nullopt;

  std::map<double, std::vector<std::size_t>> rings;
  for (std::size_t i = 0; i < n; ++i) {
    rings[obs.locations[i].theta].push_back(i);
  }
  const auto n_lat = rings.size();
  const auto n_lon = rings.begin()->second.size();
  if (n_lon < 2 || n_lat * n_lon != n) return std::nullopt;

  RegularGrid grid;
  grid.n_lat = static_cast<int>(n_lat);
  grid.n_lon = static_cast<int>(n_lon);
  std::vector<std::size_t> order;
  order.reserve(n);
  const auto phi_of = [&](std::size_t i) { return obs.locations[i].phi; };
  for (auto& [theta, idx] : rings) {
    if (idx.size() != n_lon) return std::nullopt;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return phi_of(a) < phi_of(b);
    });
    grid.theta_values.push_back(theta);
    if (grid.phi_values.empty()) {
      for (std::size_t j = 0; j < n_lon; ++j) {
        grid.phi_values.push_back(phi_of(idx[j]));
      }
      // One uniformly spaced full cycle, any offset.
      const double step = kTwoPi / static_cast<double>(n_lon);
      for (std::size_t j = 0; j < n_lon; ++j) {
        const double next = j + 1 < n_lon ? grid.phi_values[j + 1]
                                          : grid.phi_values[0] + kTwoPi;
        if (std::abs(next - grid.phi_values[j] - step) > 1e-9) {
          return std::nullopt;
        }
      }
    } else {
      for (std::size_t j = 0; j < n_lon; ++j) {
        if (std::abs(phi_of(idx[j]) - grid.phi_values[j]) > 1e-9) {
          return std::nullopt;
        }
      }
    }
    order.insert(order.end(), idx.begin(), idx.end());
  }

  GridObservationSet out;
  out.grid = std::move(grid);
  out.values.resize(obs.values.rows(), obs.values.cols());
  for (std::size_t k = 0; k < n; ++k) {
    const auto src = static_cast<Eigen::Index>(order[k]);
    out.values.col(2 * static_cast<Eigen::Index>(k)) =
        obs.values.col(2 * src);
    out.values.col(2 * static_cast<Eigen::Index>(k) + 1) =
        obs.values.col(2 * src + 1);
  }
  return out;
}

}  // namespace tmm
