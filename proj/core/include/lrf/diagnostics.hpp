#pragma once

// Error metrics, residual Gaussianity checks and spectral summaries.

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include <cstddef>

namespace lrf {

/// 100 / (N Var[y]) * sum (y_i - yhat_i)^2 with the population variance of
/// y_true. Throws DataError on length mismatch, N < 2 or zero variance.
double nmse(const Eigen::VectorXd& y_true, const Eigen::VectorXd& y_est);

double rmse(const Eigen::VectorXd& y_true, const Eigen::VectorXd& y_est);

struct KsResult {
  double statistic = 0.0;  ///< sup |F_n - Phi((x - mean) / sd)|
  double p_value = 1.0;
  bool reject = false;     ///< at the requested significance
};

/// One-sample Kolmogorov-Smirnov test of normality with mean and variance
/// estimated from the data. The p-value accounts for the estimation
/// (Lilliefors null distribution, tabulated once by simulation).
/// Throws DataError for N < 20 or a degenerate (constant) sample.
KsResult ks_gaussian_test(const Eigen::VectorXd& residuals, double significance = 0.001);

/// Asymptotic Kolmogorov survival function Q(lambda) = P(K > lambda).
double kolmogorov_survival(double lambda);

struct Periodogram {
  Eigen::VectorXd frequency;
  Eigen::VectorXd power;  ///< one-sided PSD, signal units^2 / Hz
};

/// Welch estimate: Hann-windowed segments with 50% overlap, averaged.
/// Signals shorter than the segment length use a single full-length segment.
Periodogram periodogram(const Eigen::VectorXd& signal, double fs,
                        std::size_t segment_length = 1024);

struct ResidualReport {
  double nmse = 0.0;
  KsResult ks;
  Eigen::VectorXd residuals;
  Periodogram spectrum;
};

ResidualReport residual_report(const Eigen::VectorXd& y_true, const Eigen::VectorXd& y_est,
                               double fs, std::size_t segment_length = 1024);

void to_json(nlohmann::json& j, const KsResult& ks);
void to_json(nlohmann::json& j, const ResidualReport& report);

}  // namespace lrf
