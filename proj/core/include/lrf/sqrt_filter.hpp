#pragma once

// Square-root Kalman filter, RTS smoother and backward simulation sampler.
//
// Covariances are carried as upper-triangular factors S with S^T S = P and
// every update is a QR triangularization of a stacked pre-array, so no
// covariance is ever formed and subtracted.
//
// Time convention: beliefs are indexed by sample t = 0..T-1. The initial
// belief is the prior on x_0 before y_0 is seen; the filter updates with
// y_t and then predicts x_{t+1} = A x_t + B u_t + w_t.

#include "lrf/lgssm.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace lrf {

struct GaussianBelief {
  Eigen::VectorXd mean;
  Eigen::MatrixXd sqrt_cov;  ///< upper triangular, sqrt_cov^T sqrt_cov = covariance

  Eigen::MatrixXd covariance() const { return sqrt_cov.transpose() * sqrt_cov; }
  static GaussianBelief from_covariance(Eigen::VectorXd mean, const Eigen::MatrixXd& cov);
};

enum class TrajectoryKind { Filtered, Smoothed };

struct StateTrajectory {
  std::vector<double> times;
  std::vector<GaussianBelief> beliefs;
  TrajectoryKind kind = TrajectoryKind::Filtered;

  std::size_t size() const { return beliefs.size(); }
  /// T x n matrix of means.
  Eigen::MatrixXd means() const;
  /// T x n matrix of marginal variances.
  Eigen::MatrixXd variances() const;
};

struct FilterResult {
  StateTrajectory trajectory;
  double log_likelihood = 0.0;
};

/// y is p x T, u is m x T (m may be 0), obs_noise is the p x p covariance R.
/// Throws NumericalError naming the step if an innovation covariance is
/// numerically singular.
FilterResult sqrt_kalman_filter(const DiscreteStateSpace& model, const Eigen::MatrixXd& y,
                                const Eigen::MatrixXd& u, const Eigen::MatrixXd& obs_noise,
                                const GaussianBelief& init, double t0 = 0.0);

/// Same recursion without storing beliefs; the MCMC hot path.
double kalman_log_likelihood(const DiscreteStateSpace& model, const Eigen::MatrixXd& y,
                             const Eigen::MatrixXd& u, const Eigen::MatrixXd& obs_noise,
                             const GaussianBelief& init);

StateTrajectory sqrt_rts_smoother(const DiscreteStateSpace& model, const Eigen::MatrixXd& u,
                                  const StateTrajectory& filtered);

/// One joint draw from p(x_{0:T-1} | y_{0:T-1}) as a T x n matrix.
Eigen::MatrixXd backward_sample(const DiscreteStateSpace& model, const Eigen::MatrixXd& u,
                                const StateTrajectory& filtered, std::uint64_t rng_seed);

/// Several joint draws sharing one backward factorization pass per draw set.
std::vector<Eigen::MatrixXd> backward_samples(const DiscreteStateSpace& model,
                                              const Eigen::MatrixXd& u,
                                              const StateTrajectory& filtered, int count,
                                              std::uint64_t rng_seed);

}  // namespace lrf
