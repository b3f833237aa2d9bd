#pragma once

// CSV ingestion and emission for uniformly sampled series, plus spline
// resampling.

#include <Eigen/Dense>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace lrf {

struct CsvSchema {
  /// Columns that must be present (besides an optional leading time column).
  std::vector<std::string> required{"u", "y"};
  /// Sample rate for files without a `t` column. A `# fs = <value>` comment
  /// line in the file takes its place when this is empty.
  std::optional<double> fs;
  /// Used only when neither `fs`, a `t` column nor `# fs` metadata is available.
  std::optional<double> default_fs;
  /// Relative tolerance for checking uniform spacing of `t`.
  double uniformity_tolerance = 1e-6;
};

struct SeriesTable {
  std::vector<std::string> names;  ///< column order as in the file
  Eigen::MatrixXd data;            ///< rows = samples, cols = names
  double fs = 0.0;
  double t0 = 0.0;
  std::map<std::string, std::string> metadata;  ///< from `# key = value` lines

  Eigen::Index size() const { return data.rows(); }
  bool has(const std::string& name) const;
  /// Throws DataError when the column is absent.
  Eigen::VectorXd column(const std::string& name) const;
  /// `t` if present, otherwise t0 + i / fs.
  Eigen::VectorXd time() const;
};

/// Reads a comma-separated file with a header row. Rejects missing required
/// columns, malformed or non-finite cells (citing the data row and file line)
/// and non-uniform time stamps.
SeriesTable ingest_csv(const std::string& path, const CsvSchema& schema = {});

/// Writes columns with a header; values use 17 significant digits so that
/// ingesting the file reproduces them exactly.
void write_csv(const std::string& path, const std::vector<std::string>& names,
               const std::vector<Eigen::VectorXd>& columns,
               const std::map<std::string, std::string>& metadata = {});

/// Natural cubic spline through equally spaced samples evaluated on a grid
/// `factor` times denser. Output length (N - 1) * factor + 1; every
/// factor-th output equals the corresponding input exactly.
/// Throws InvalidArgument for factor < 1 and DataError for N < 4.
Eigen::VectorXd upsample_cubic(const Eigen::VectorXd& series, int factor);

/// Every factor-th sample starting at index 0.
Eigen::VectorXd downsample(const Eigen::VectorXd& series, int factor);

}  // namespace lrf
