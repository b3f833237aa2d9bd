#include "lrf/diagnostics.hpp"

#include "lrf/errors.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_fft_real.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace lrf {

namespace {

void check_pair(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const char* what) {
  if (a.size() != b.size()) {
    throw DataError(std::string(what) + ": length mismatch (" + std::to_string(a.size()) + " vs " +
                    std::to_string(b.size()) + ")");
  }
  if (a.size() < 2) throw DataError(std::string(what) + ": need at least 2 samples");
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// sup |F_n - Phi| after standardizing with the sample mean and (N-1) sd.
double lilliefors_statistic(std::vector<double>& x) {
  const double n = static_cast<double>(x.size());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  if (!(sd > 0.0) || !std::isfinite(sd)) {
    throw DataError("ks_gaussian_test: residuals have zero or non-finite spread");
  }
  std::sort(x.begin(), x.end());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = normal_cdf((x[i] - mean) / sd);
    const double lo = static_cast<double>(i) / n;
    const double hi = static_cast<double>(i + 1) / n;
    d = std::max({d, hi - f, f - lo});
  }
  return d;
}

double stephens_scale(std::size_t n) {
  const double rn = std::sqrt(static_cast<double>(n));
  return rn - 0.01 + 0.85 / rn;
}

constexpr std::size_t kTableSampleSize = 200;
constexpr std::size_t kTableReplicates = 20000;

// Sorted null distribution of the scaled statistic under estimated parameters.
const std::vector<double>& lilliefors_null_table() {
  static const std::vector<double> table = [] {
    std::mt19937_64 rng(0x5eed1111ULL);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> out(kTableReplicates);
    std::vector<double> x(kTableSampleSize);
    const double scale = stephens_scale(kTableSampleSize);
    for (auto& d : out) {
      for (auto& v : x) v = normal(rng);
      d = lilliefors_statistic(x) * scale;
    }
    std::sort(out.begin(), out.end());
    return out;
  }();
  return table;
}

// Dallal-Wilkinson tail approximation, used beyond the tabulated range.
double lilliefors_tail(double d, std::size_t n) {
  const double nn = static_cast<double>(n);
  const double p = std::exp(-7.01256 * d * d * (nn + 2.78019) + 2.99587 * d * std::sqrt(nn + 2.78019) -
                            0.122119 + 0.974598 / std::sqrt(nn) + 1.67997 / nn);
  return std::clamp(p, 0.0, 1.0);
}

}  // namespace

double nmse(const Eigen::VectorXd& y_true, const Eigen::VectorXd& y_est) {
  check_pair(y_true, y_est, "nmse");
  const double n = static_cast<double>(y_true.size());
  const double var = (y_true.array() - y_true.mean()).square().sum() / n;
  if (!(var > 0.0)) throw DataError("nmse: reference signal has zero variance");
  return 100.0 / (n * var) * (y_true - y_est).squaredNorm();
}

double rmse(const Eigen::VectorXd& y_true, const Eigen::VectorXd& y_est) {
  check_pair(y_true, y_est, "rmse");
  return std::sqrt((y_true - y_est).squaredNorm() / static_cast<double>(y_true.size()));
}

double kolmogorov_survival(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = std::exp(-2.0 * j * j * lambda * lambda);
    sum += (j % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-18) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

KsResult ks_gaussian_test(const Eigen::VectorXd& residuals, double significance) {
  const auto n = static_cast<std::size_t>(residuals.size());
  if (n < 20) throw DataError("ks_gaussian_test: need at least 20 residuals, got " + std::to_string(n));
  if (!residuals.allFinite()) throw DataError("ks_gaussian_test: residuals contain non-finite values");
  std::vector<double> x(residuals.data(), residuals.data() + n);
  KsResult out;
  out.statistic = lilliefors_statistic(x);
  const double scaled = out.statistic * stephens_scale(n);

  const auto& table = lilliefors_null_table();
  const auto above = static_cast<double>(table.end() - std::lower_bound(table.begin(), table.end(), scaled));
  if (above > 0.0) {
    out.p_value = (above + 1.0) / (static_cast<double>(table.size()) + 1.0);
  } else {
    out.p_value = std::min(lilliefors_tail(out.statistic, n), 1.0 / (static_cast<double>(table.size()) + 1.0));
  }
  out.reject = out.p_value < significance;
  return out;
}

Periodogram periodogram(const Eigen::VectorXd& signal, double fs, std::size_t segment_length) {
  if (!(fs > 0.0)) throw InvalidArgument("periodogram: fs must be positive");
  if (segment_length < 2) throw InvalidArgument("periodogram: segment length must be at least 2");
  const auto n = static_cast<std::size_t>(signal.size());
  if (n < 2) throw DataError("periodogram: need at least 2 samples");
  const std::size_t L = std::min(segment_length, n);
  const std::size_t hop = std::max<std::size_t>(L / 2, 1);
  const std::size_t n_bins = L / 2 + 1;

  std::vector<double> window(L);
  double wss = 0.0;
  for (std::size_t i = 0; i < L; ++i) {
    // Periodic Hann window.
    window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(L));
    wss += window[i] * window[i];
  }

  gsl_error_handler_t* old_handler = gsl_set_error_handler_off();
  gsl_fft_real_wavetable* wavetable = gsl_fft_real_wavetable_alloc(L);
  gsl_fft_real_workspace* workspace = gsl_fft_real_workspace_alloc(L);

  Periodogram out;
  out.frequency.resize(static_cast<Eigen::Index>(n_bins));
  out.power = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_bins));
  for (std::size_t k = 0; k < n_bins; ++k) {
    out.frequency(static_cast<Eigen::Index>(k)) = static_cast<double>(k) * fs / static_cast<double>(L);
  }

  std::vector<double> buf(L);
  std::size_t segments = 0;
  for (std::size_t start = 0; start + L <= n; start += hop) {
    double mean = 0.0;
    for (std::size_t i = 0; i < L; ++i) mean += signal(static_cast<Eigen::Index>(start + i));
    mean /= static_cast<double>(L);
    for (std::size_t i = 0; i < L; ++i) {
      buf[i] = (signal(static_cast<Eigen::Index>(start + i)) - mean) * window[i];
    }
    if (gsl_fft_real_transform(buf.data(), 1, L, wavetable, workspace) != GSL_SUCCESS) {
      gsl_fft_real_workspace_free(workspace);
      gsl_fft_real_wavetable_free(wavetable);
      gsl_set_error_handler(old_handler);
      throw NumericalError("periodogram: FFT failed");
    }
    out.power(0) += buf[0] * buf[0];
    for (std::size_t k = 1; k < n_bins; ++k) {
      double re = 0.0, im = 0.0;
      if (2 * k < L) {
        re = buf[2 * k - 1];
        im = buf[2 * k];
      } else {
        re = buf[L - 1];
      }
      out.power(static_cast<Eigen::Index>(k)) += re * re + im * im;
    }
    ++segments;
  }
  gsl_fft_real_workspace_free(workspace);
  gsl_fft_real_wavetable_free(wavetable);
  gsl_set_error_handler(old_handler);

  out.power /= static_cast<double>(segments) * fs * wss;
  // One-sided: double everything except DC and (for even L) Nyquist.
  const std::size_t last_doubled = (L % 2 == 0) ? n_bins - 1 : n_bins;
  for (std::size_t k = 1; k < last_doubled; ++k) out.power(static_cast<Eigen::Index>(k)) *= 2.0;
  return out;
}

ResidualReport residual_report(const Eigen::VectorXd& y_true, const Eigen::VectorXd& y_est,
                               double fs, std::size_t segment_length) {
  ResidualReport report;
  report.nmse = nmse(y_true, y_est);
  report.residuals = y_true - y_est;
  report.ks = ks_gaussian_test(report.residuals);
  report.spectrum = periodogram(report.residuals, fs, segment_length);
  return report;
}

void to_json(nlohmann::json& j, const KsResult& ks) {
  j = nlohmann::json{{"statistic", ks.statistic}, {"p_value", ks.p_value}, {"reject_at_0.001", ks.reject}};
}

void to_json(nlohmann::json& j, const ResidualReport& report) {
  j = nlohmann::json{{"nmse_percent", report.nmse},
                     {"ks_statistic", report.ks.statistic},
                     {"ks_p_value", report.ks.p_value},
                     {"ks_reject_at_0.001", report.ks.reject},
                     {"n_residuals", report.residuals.size()},
                     {"residual_mean", report.residuals.size() ? report.residuals.mean() : 0.0}};
}

}  // namespace lrf
