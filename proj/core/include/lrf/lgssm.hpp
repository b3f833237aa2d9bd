#pragma once

// Continuous and discrete linear-Gaussian state-space models for a single
// degree-of-freedom oscillator, optionally augmented with the companion-form
// states of a Gaussian process force.

#include <Eigen/Dense>

#include <string_view>

namespace lrf {

struct GpSde;

/// x' = A x + B u + L w(t),  E[w(t) w(s)^T] = q δ(t-s);  y = C x + D u.
struct ContinuousStateSpace {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  Eigen::MatrixXd L;
  Eigen::MatrixXd q;
  Eigen::MatrixXd C;
  Eigen::MatrixXd D;

  Eigen::Index state_dim() const { return A.rows(); }
  Eigen::Index input_dim() const { return B.cols(); }
  Eigen::Index output_dim() const { return C.rows(); }

  /// Throws InvalidArgument when the six matrices are dimensionally
  /// inconsistent or q is not symmetric PSD.
  void validate() const;
};

/// x_{t+1} = A x_t + B u_t + w_t,  w_t ~ N(0, Q);  y_t = C x_t + D u_t + v_t.
struct DiscreteStateSpace {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  Eigen::MatrixXd Q;
  Eigen::MatrixXd C;
  Eigen::MatrixXd D;
  double dt = 0.0;

  Eigen::Index state_dim() const { return A.rows(); }
  Eigen::Index input_dim() const { return B.cols(); }
  Eigen::Index output_dim() const { return C.rows(); }
};

struct SdofParams {
  double m = 1.0;  ///< mass
  double k = 1.0;  ///< linear stiffness
  double c = 0.0;  ///< viscous damping

  void validate() const;
};

enum class ObservationMode { Acceleration, Velocity, Displacement };

ObservationMode parse_observation_mode(std::string_view name);
std::string_view to_string(ObservationMode mode);

/// Two-state [z, z'] oscillator. No noise loading, no output rows.
ContinuousStateSpace build_sdof(const SdofParams& params);

/// Appends the GP force states to a 2-state oscillator. The force enters the
/// velocity equation as -f/m, i.e. the GP models the nonlinear part of the
/// restoring force with the same sign as k z + c z'.
ContinuousStateSpace augment(const ContinuousStateSpace& sys, const GpSde& gp);

/// Sets C and D for a single sensor. The acceleration row is the velocity row
/// of A and B, so on an augmented model it picks up the GP force with -1/m.
ContinuousStateSpace build_observation(const ContinuousStateSpace& sys,
                                       ObservationMode mode);

/// Zero-order hold on the input; process noise by the matrix-fraction
/// (Van Loan) block exponential.
DiscreteStateSpace discretize(const ContinuousStateSpace& sys, double dt);

/// exp(M) by Padé scaling-and-squaring.
Eigen::MatrixXd matrix_exponential(const Eigen::MatrixXd& M);

}  // namespace lrf
