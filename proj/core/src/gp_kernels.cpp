#include "lrf/gp_kernels.hpp"

#include "lrf/errors.hpp"

#include <unsupported/Eigen/KroneckerProduct>

#include <cmath>
#include <string>

namespace lrf {

Smoothness parse_smoothness(std::string_view name) {
  if (name == "1/2" || name == "matern12" || name == "0.5") return Smoothness::Half;
  if (name == "3/2" || name == "matern32" || name == "1.5") return Smoothness::ThreeHalves;
  throw InvalidArgument("unsupported Matern smoothness '" + std::string(name) +
                        "' (expected 1/2 or 3/2)");
}

std::string_view to_string(Smoothness nu) {
  return nu == Smoothness::Half ? "1/2" : "3/2";
}

void KernelSpec::validate() const {
  if (!(sigma_f2 >= 0.0) || !std::isfinite(sigma_f2)) {
    throw InvalidArgument("kernel signal variance must be non-negative");
  }
  if (!(ell > 0.0) || !std::isfinite(ell)) {
    throw InvalidArgument("kernel length scale must be positive");
  }
}

GpSde matern_to_sde(const KernelSpec& kernel) {
  kernel.validate();
  GpSde sde;
  switch (kernel.smoothness) {
    case Smoothness::Half: {
      sde.F = Eigen::MatrixXd::Constant(1, 1, -1.0 / kernel.ell);
      sde.L = Eigen::MatrixXd::Ones(1, 1);
      sde.q = 2.0 * kernel.sigma_f2 / kernel.ell;
      sde.H = Eigen::MatrixXd::Ones(1, 1);
      sde.P_inf = Eigen::MatrixXd::Constant(1, 1, kernel.sigma_f2);
      break;
    }
    case Smoothness::ThreeHalves: {
      const double lambda = std::sqrt(3.0) / kernel.ell;
      sde.F.resize(2, 2);
      sde.F << 0.0, 1.0, -lambda * lambda, -2.0 * lambda;
      sde.L.resize(2, 1);
      sde.L << 0.0, 1.0;
      sde.q = 4.0 * kernel.sigma_f2 * lambda * lambda * lambda;
      sde.H.resize(1, 2);
      sde.H << 1.0, 0.0;
      sde.P_inf = Eigen::MatrixXd::Zero(2, 2);
      sde.P_inf(0, 0) = kernel.sigma_f2;
      sde.P_inf(1, 1) = lambda * lambda * kernel.sigma_f2;
      break;
    }
  }
  return sde;
}

Eigen::MatrixXd stationary_covariance(const Eigen::MatrixXd& F, const Eigen::MatrixXd& L,
                                      const Eigen::MatrixXd& q) {
  const Eigen::Index d = F.rows();
  if (F.cols() != d || L.rows() != d || q.rows() != L.cols() || q.cols() != L.cols()) {
    throw InvalidArgument("stationary_covariance: dimension mismatch");
  }
  Eigen::EigenSolver<Eigen::MatrixXd> eig(F, false);
  if (eig.eigenvalues().real().maxCoeff() >= 0.0) {
    throw NumericalError("stationary_covariance: F is not Hurwitz stable");
  }
  // vec(F P + P F^T) = (I (x) F + F (x) I) vec(P).
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);
  const Eigen::MatrixXd K = Eigen::kroneckerProduct(I, F) + Eigen::kroneckerProduct(F, I);
  const Eigen::MatrixXd rhs = -(L * q * L.transpose());
  Eigen::VectorXd vec_p =
      K.fullPivLu().solve(Eigen::Map<const Eigen::VectorXd>(rhs.data(), d * d));
  Eigen::MatrixXd P = Eigen::Map<Eigen::MatrixXd>(vec_p.data(), d, d);
  return 0.5 * (P + P.transpose());
}

double kernel_eval(const KernelSpec& kernel, double tau) {
  const double r = std::abs(tau) / kernel.ell;
  switch (kernel.smoothness) {
    case Smoothness::Half:
      return kernel.sigma_f2 * std::exp(-r);
    case Smoothness::ThreeHalves: {
      const double s = std::sqrt(3.0) * r;
      return kernel.sigma_f2 * (1.0 + s) * std::exp(-s);
    }
  }
  return 0.0;
}

}  // namespace lrf
