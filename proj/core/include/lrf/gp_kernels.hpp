#pragma once

// Stationary Matérn kernels in time and their equivalent linear SDEs.

#include <Eigen/Dense>

#include <string_view>

namespace lrf {

enum class Smoothness { Half, ThreeHalves };

Smoothness parse_smoothness(std::string_view name);
std::string_view to_string(Smoothness nu);

struct KernelSpec {
  Smoothness smoothness = Smoothness::Half;
  double sigma_f2 = 1.0;  ///< signal variance
  double ell = 1.0;       ///< length scale, seconds

  void validate() const;
  Eigen::Index state_dim() const { return smoothness == Smoothness::Half ? 1 : 2; }
};

/// f' = F f + L w(t) with spectral density q; the force value is H f.
struct GpSde {
  Eigen::MatrixXd F;
  Eigen::MatrixXd L;
  double q = 0.0;
  Eigen::MatrixXd H;
  Eigen::MatrixXd P_inf;
};

GpSde matern_to_sde(const KernelSpec& kernel);

/// Solves F P + P F^T + L q L^T = 0. Throws NumericalError if F is not Hurwitz.
Eigen::MatrixXd stationary_covariance(const Eigen::MatrixXd& F, const Eigen::MatrixXd& L,
                                      const Eigen::MatrixXd& q);

double kernel_eval(const KernelSpec& kernel, double tau);

}  // namespace lrf
