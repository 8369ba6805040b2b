#pragma once
/// @file io.hpp
/// @brief CSV and key-value file formats: observed fields, sample draws,
///        location lists, predictions, binned diagnostics, fit results,
///        and regular-grid reconstruction from flat location lists.
///
/// All writers are atomic (temp file + rename), emit coordinates with 10
/// significant digits and data values with 17, and never depend on locale.

#include <Eigen/Dense>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tmm/covariance.hpp"
#include "tmm/empirical.hpp"
#include "tmm/inference.hpp"
#include "tmm/likelihood.hpp"
#include "tmm/sphere.hpp"

namespace tmm {

/// Observed field plus the replicate labels found in the file. Files
/// without a time/rep column yield one replicate labeled 0.
struct FieldCsv {
  ObservationSet obs;
  std::vector<double> labels;  ///< per replicate, first-appearance order
  bool had_label = false;
};

/// Reads `time,lat_deg,lon_deg,u,v` (first column optional, `rep` also
/// accepted). Rows group into replicates by label; every replicate must
/// repeat the first one's location sequence. Errors cite the line number.
FieldCsv read_field_csv(const std::filesystem::path& path);

/// Writes `time,lat_deg,lon_deg,u,v`; labels default to 0..R-1.
void write_field_csv(const std::filesystem::path& path,
                     const ObservationSet& obs,
                     const std::vector<double>& labels = {});

/// Writes `rep,lat_deg,lon_deg,u,v` with integer replicate indices.
void write_samples_csv(const std::filesystem::path& path,
                       const ObservationSet& obs);

std::vector<Location> read_locations_csv(const std::filesystem::path& path);
void write_locations_csv(const std::filesystem::path& path,
                         const std::vector<Location>& locations);

/// Writes `lat_deg,lon_deg,u_mean,v_mean,u_sd,v_sd` for one replicate row
/// of cokriging output.
void write_predictions_csv(const std::filesystem::path& path,
                           const std::vector<Location>& targets,
                           const Eigen::VectorXd& mean_row,
                           const Eigen::VectorXd& sd);

/// Writes `bin_lo,bin_hi,count,mean,median`; missing bins leave the mean
/// and median fields empty.
void write_bins_csv(const std::filesystem::path& path,
                    const BinnedCovariance& bins);

/// Writes a plain matrix with columns named by prefix (mode_1, mode_2, ...).
void write_matrix_csv(const std::filesystem::path& path,
                      const Eigen::MatrixXd& m, const std::string& col_prefix);

/// Fit result as `key = value` lines: family, the eight parameters, nll,
/// iterations, converged, lhs_candidates_evaluated.
void write_fit_result(const std::filesystem::path& path, const FitResult& fit);

/// The subset of a fit result file needed to rebuild the model.
struct FitRecord {
  ModelFamily family = ModelFamily::kTmm;
  TmmParams theta;
  double nll = 0.0;
  int iterations = 0;
  bool converged = false;
};

FitRecord read_fit_record(const std::filesystem::path& path);

std::string family_name(ModelFamily family);
ModelFamily family_from_name(const std::string& name);

/// Atomically replaces path with content via a sibling temp file.
void atomic_write(const std::filesystem::path& path, const std::string& content);

/// Reconstructs a full-longitude regular grid from a flat observation set:
/// equal-size latitude rings sharing one uniformly spaced longitude cycle
/// (tolerance 1e-9 rad). Returns the grid-ordered observations, or nullopt
/// when the locations do not form such a grid.
std::optional<GridObservationSet> as_grid(const ObservationSet& obs);

}  // namespace tmm
