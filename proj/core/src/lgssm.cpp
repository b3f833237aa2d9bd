#include "lrf/lgssm.hpp"

#include "lrf/errors.hpp"
#include "lrf/gp_kernels.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <string>

namespace lrf {

namespace {

void require_shape(const Eigen::MatrixXd& M, Eigen::Index rows, Eigen::Index cols,
                   const char* name) {
  if (M.rows() != rows || M.cols() != cols) {
    throw InvalidArgument(std::string("state-space matrix ") + name + " is " +
                          std::to_string(M.rows()) + "x" + std::to_string(M.cols()) +
                          ", expected " + std::to_string(rows) + "x" +
                          std::to_string(cols));
  }
}

bool all_finite(const Eigen::MatrixXd& M) { return M.allFinite(); }

}  // namespace

void ContinuousStateSpace::validate() const {
  const Eigen::Index n = A.rows();
  require_shape(A, n, n, "A");
  require_shape(B, n, B.cols(), "B");
  require_shape(L, n, L.cols(), "L");
  require_shape(q, L.cols(), L.cols(), "q");
  require_shape(C, C.rows(), n, "C");
  require_shape(D, C.rows(), B.cols(), "D");
  if (q.size() > 0) {
    if (!q.isApprox(q.transpose(), 1e-12) && (q - q.transpose()).norm() > 1e-14) {
      throw InvalidArgument("noise spectral density q is not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(q);
    const double floor = -1e-12 * std::max(1.0, q.norm());
    if (eig.eigenvalues().minCoeff() < floor) {
      throw InvalidArgument("noise spectral density q is not positive semi-definite");
    }
  }
}

void SdofParams::validate() const {
  if (!(m > 0.0) || !std::isfinite(m)) throw InvalidArgument("mass must be positive");
  if (!(k > 0.0) || !std::isfinite(k)) throw InvalidArgument("stiffness must be positive");
  if (!(c >= 0.0) || !std::isfinite(c)) throw InvalidArgument("damping must be non-negative");
}

ObservationMode parse_observation_mode(std::string_view name) {
  if (name == "acceleration") return ObservationMode::Acceleration;
  if (name == "velocity") return ObservationMode::Velocity;
  if (name == "displacement") return ObservationMode::Displacement;
  throw InvalidArgument("unknown observation mode '" + std::string(name) + "'");
}

std::string_view to_string(ObservationMode mode) {
  switch (mode) {
    case ObservationMode::Acceleration: return "acceleration";
    case ObservationMode::Velocity: return "velocity";
    case ObservationMode::Displacement: return "displacement";
  }
  return "unknown";
}

ContinuousStateSpace build_sdof(const SdofParams& params) {
  params.validate();
  ContinuousStateSpace sys;
  sys.A.resize(2, 2);
  sys.A << 0.0, 1.0, -params.k / params.m, -params.c / params.m;
  sys.B.resize(2, 1);
  sys.B << 0.0, 1.0 / params.m;
  sys.L = Eigen::MatrixXd::Zero(2, 0);
  sys.q = Eigen::MatrixXd::Zero(0, 0);
  sys.C = Eigen::MatrixXd::Zero(0, 2);
  sys.D = Eigen::MatrixXd::Zero(0, 1);
  return sys;
}

ContinuousStateSpace augment(const ContinuousStateSpace& sys, const GpSde& gp) {
  if (sys.A.rows() != 2 || sys.A.cols() != 2 || sys.B.rows() != 2 || sys.B.cols() != 1) {
    throw InvalidArgument("augment expects a 2-state single-input oscillator");
  }
  const Eigen::Index d = gp.F.rows();
  if (d < 1 || gp.F.cols() != d || gp.L.rows() != d || gp.L.cols() != 1 ||
      gp.H.cols() != d || gp.H.rows() != 1) {
    throw InvalidArgument("augment: inconsistent GP companion-form dimensions");
  }
  const Eigen::Index n = 2 + d;
  const double inv_mass = sys.B(1, 0);

  ContinuousStateSpace out;
  out.A = Eigen::MatrixXd::Zero(n, n);
  out.A.topLeftCorner(2, 2) = sys.A;
  // B_{c,f}: the force (H x_f) drives the velocity equation as -f/m.
  out.A.block(1, 2, 1, d) = -inv_mass * gp.H;
  out.A.bottomRightCorner(d, d) = gp.F;

  out.B = Eigen::MatrixXd::Zero(n, 1);
  out.B.topRows(2) = sys.B;

  out.L = Eigen::MatrixXd::Zero(n, 1);
  out.L.bottomRows(d) = gp.L;
  out.q = Eigen::MatrixXd::Constant(1, 1, gp.q);

  out.C = Eigen::MatrixXd::Zero(0, n);
  out.D = Eigen::MatrixXd::Zero(0, 1);
  return out;
}

ContinuousStateSpace build_observation(const ContinuousStateSpace& sys,
                                       ObservationMode mode) {
  const Eigen::Index n = sys.A.rows();
  if (n < 2 || sys.B.rows() != n) {
    throw InvalidArgument("build_observation expects an oscillator with at least 2 states");
  }
  ContinuousStateSpace out = sys;
  out.C = Eigen::MatrixXd::Zero(1, n);
  out.D = Eigen::MatrixXd::Zero(1, sys.B.cols());
  switch (mode) {
    case ObservationMode::Displacement:
      out.C(0, 0) = 1.0;
      break;
    case ObservationMode::Velocity:
      out.C(0, 1) = 1.0;
      break;
    case ObservationMode::Acceleration:
      out.C = sys.A.row(1);
      out.D = sys.B.row(1);
      break;
  }
  return out;
}

Eigen::MatrixXd matrix_exponential(const Eigen::MatrixXd& M) {
  if (!all_finite(M)) throw NumericalError("matrix exponential of non-finite matrix");
  Eigen::MatrixXd E = M.exp();
  if (!all_finite(E)) throw NumericalError("matrix exponential overflowed");
  return E;
}

DiscreteStateSpace discretize(const ContinuousStateSpace& sys, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("discretize: dt must be positive");
  sys.validate();
  if (!all_finite(sys.A) || !all_finite(sys.B) || !all_finite(sys.L) || !all_finite(sys.q) ||
      !all_finite(sys.C) || !all_finite(sys.D)) {
    throw NumericalError("discretize: non-finite system matrices");
  }
  const Eigen::Index n = sys.A.rows();
  const Eigen::Index m = sys.B.cols();

  DiscreteStateSpace out;
  out.dt = dt;
  out.C = sys.C;
  out.D = sys.D;

  // Zero-order hold: exp([[A, B], [0, 0]] dt) = [[A_d, B_d], [0, I]].
  Eigen::MatrixXd zoh = Eigen::MatrixXd::Zero(n + m, n + m);
  zoh.topLeftCorner(n, n) = sys.A * dt;
  zoh.topRightCorner(n, m) = sys.B * dt;
  const Eigen::MatrixXd zoh_exp = matrix_exponential(zoh);
  out.A = zoh_exp.topLeftCorner(n, n);
  out.B = zoh_exp.topRightCorner(n, m);

  // Matrix fraction: exp([[A, LqL^T], [0, -A^T]] dt) = [[A_d, Psi], [0, A_d^{-T}]],
  // Q_d = Psi A_d^T.
  Eigen::MatrixXd diffusion = Eigen::MatrixXd::Zero(n, n);
  if (sys.L.cols() > 0) diffusion = sys.L * sys.q * sys.L.transpose();
  Eigen::MatrixXd frac = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  frac.topLeftCorner(n, n) = sys.A * dt;
  frac.topRightCorner(n, n) = diffusion * dt;
  frac.bottomRightCorner(n, n) = -sys.A.transpose() * dt;
  const Eigen::MatrixXd frac_exp = matrix_exponential(frac);
  Eigen::MatrixXd Q = frac_exp.topRightCorner(n, n) * frac_exp.topLeftCorner(n, n).transpose();
  out.Q = 0.5 * (Q + Q.transpose());
  return out;
}

}  // namespace lrf
