#include "lrf/series_io.hpp"

#include "lrf/errors.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_spline.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace lrf {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    cells.push_back(trim(std::string_view(line).substr(start, pos == std::string::npos ? std::string::npos : pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return cells;
}

std::optional<double> parse_double(const std::string& cell) {
  if (cell.empty()) return std::nullopt;
  const char* first = cell.data();
  const char* last = first + cell.size();
  if (*first == '+') ++first;
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) return std::nullopt;
  return value;
}

std::string location(std::size_t row, std::size_t line) {
  return "row " + std::to_string(row) + " (line " + std::to_string(line) + ")";
}

}  // namespace

bool SeriesTable::has(const std::string& name) const {
  return std::find(names.begin(), names.end(), name) != names.end();
}

Eigen::VectorXd SeriesTable::column(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw DataError("missing column '" + name + "'");
  return data.col(static_cast<Eigen::Index>(it - names.begin()));
}

Eigen::VectorXd SeriesTable::time() const {
  if (has("t")) return column("t");
  Eigen::VectorXd t(size());
  for (Eigen::Index i = 0; i < size(); ++i) t(i) = t0 + static_cast<double>(i) / fs;
  return t;
}

SeriesTable ingest_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");

  SeriesTable table;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string text = trim(line);
    if (text.empty()) continue;
    if (text.front() == '#') {
      const auto eq = text.find('=');
      if (eq != std::string::npos) {
        table.metadata[trim(std::string_view(text).substr(1, eq - 1))] = trim(std::string_view(text).substr(eq + 1));
      }
      continue;
    }
    auto cells = split_commas(text);
    if (!have_header) {
      table.names = cells;
      for (const auto& name : table.names) {
        if (name.empty()) throw DataError(path + ": empty column name in header (line " + std::to_string(line_no) + ")");
        if (std::count(table.names.begin(), table.names.end(), name) > 1) {
          throw DataError(path + ": duplicate column '" + name + "' in header");
        }
      }
      for (const auto& req : schema.required) {
        if (!table.has(req)) throw DataError(path + ": header lacks required column '" + req + "'");
      }
      have_header = true;
      continue;
    }
    ++rows;
    if (cells.size() != table.names.size()) {
      throw DataError(path + ": " + location(rows, line_no) + " has " + std::to_string(cells.size()) +
                      " fields, expected " + std::to_string(table.names.size()));
    }
    for (std::size_t j = 0; j < cells.size(); ++j) {
      const auto v = parse_double(cells[j]);
      if (!v) {
        throw DataError(path + ": " + location(rows, line_no) + ": malformed value '" + cells[j] +
                        "' in column '" + table.names[j] + "'");
      }
      if (!std::isfinite(*v)) {
        throw DataError(path + ": " + location(rows, line_no) + ": non-finite value in column '" +
                        table.names[j] + "'");
      }
      values.push_back(*v);
    }
  }
  if (!have_header) throw DataError(path + ": missing header row");

  const auto ncol = static_cast<Eigen::Index>(table.names.size());
  table.data = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), static_cast<Eigen::Index>(rows), ncol);

  std::optional<double> fs = schema.fs;
  if (!fs) {
    const auto it = table.metadata.find("fs");
    if (it != table.metadata.end()) {
      fs = parse_double(it->second);
      if (!fs) throw DataError(path + ": malformed fs metadata '" + it->second + "'");
    }
  }

  if (table.has("t")) {
    const Eigen::VectorXd t = table.column("t");
    if (t.size() >= 2) {
      const double dt = (t(t.size() - 1) - t(0)) / static_cast<double>(t.size() - 1);
      if (!(dt > 0.0)) throw DataError(path + ": time column is not increasing");
      for (Eigen::Index i = 1; i < t.size(); ++i) {
        if (std::abs((t(i) - t(i - 1)) - dt) > schema.uniformity_tolerance * dt) {
          throw DataError(path + ": non-uniform time step at row " + std::to_string(i + 1));
        }
      }
      table.fs = 1.0 / dt;
      if (fs && std::abs(*fs - table.fs) > 1e-6 * *fs) {
        throw DataError(path + ": declared fs disagrees with the time column");
      }
    } else {
      if (!fs) throw DataError(path + ": cannot infer fs from fewer than 2 time stamps");
      table.fs = *fs;
    }
    table.t0 = t.size() ? t(0) : 0.0;
  } else {
    if (!fs) fs = schema.default_fs;
    if (!fs) throw DataError(path + ": no 't' column and no declared fs");
    table.fs = *fs;
  }
  if (!(table.fs > 0.0) || !std::isfinite(table.fs)) throw DataError(path + ": sample rate must be positive");
  return table;
}

void write_csv(const std::string& path, const std::vector<std::string>& names,
               const std::vector<Eigen::VectorXd>& columns,
               const std::map<std::string, std::string>& metadata) {
  if (names.size() != columns.size()) throw InvalidArgument("write_csv: names and columns differ in count");
  const Eigen::Index n = columns.empty() ? 0 : columns.front().size();
  for (const auto& c : columns) {
    if (c.size() != n) throw InvalidArgument("write_csv: columns differ in length");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  for (const auto& [k, v] : metadata) out << "# " << k << " = " << v << '\n';
  for (std::size_t j = 0; j < names.size(); ++j) out << (j ? "," : "") << names[j];
  out << '\n';
  char buf[32];
  for (Eigen::Index i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < columns.size(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", columns[j](i));
      if (j) out << ',';
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw DataError("write failed for '" + path + "'");
}

Eigen::VectorXd upsample_cubic(const Eigen::VectorXd& series, int factor) {
  if (factor < 1) throw InvalidArgument("upsample_cubic: factor must be a positive integer");
  const auto n = static_cast<std::size_t>(series.size());
  if (n < 4) throw DataError("upsample_cubic: need at least 4 samples");
  if (factor == 1) return series;

  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<double>(i);
  gsl_error_handler_t* old_handler = gsl_set_error_handler_off();
  gsl_interp* interp = gsl_interp_alloc(gsl_interp_cspline, n);
  gsl_interp_accel* acc = gsl_interp_accel_alloc();
  if (gsl_interp_init(interp, x.data(), series.data(), n) != GSL_SUCCESS) {
    gsl_interp_accel_free(acc);
    gsl_interp_free(interp);
    gsl_set_error_handler(old_handler);
    throw NumericalError("upsample_cubic: spline construction failed");
  }
  const auto m = static_cast<Eigen::Index>((n - 1) * static_cast<std::size_t>(factor) + 1);
  Eigen::VectorXd out(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    if (j % factor == 0) {
      out(j) = series(j / factor);
      continue;
    }
    const double xi = static_cast<double>(j) / static_cast<double>(factor);
    out(j) = gsl_interp_eval(interp, x.data(), series.data(), xi, acc);
  }
  gsl_interp_accel_free(acc);
  gsl_interp_free(interp);
  gsl_set_error_handler(old_handler);
  return out;
}

Eigen::VectorXd downsample(const Eigen::VectorXd& series, int factor) {
  if (factor < 1) throw InvalidArgument("downsample: factor must be a positive integer");
  const Eigen::Index m = series.size() == 0 ? 0 : (series.size() - 1) / factor + 1;
  Eigen::VectorXd out(m);
  for (Eigen::Index j = 0; j < m; ++j) out(j) = series(j * factor);
  return out;
}

}  // namespace lrf
