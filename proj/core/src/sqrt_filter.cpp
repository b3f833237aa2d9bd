#include "lrf/sqrt_filter.hpp"

#include "lrf/errors.hpp"
#include "lrf/triangular.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

namespace lrf {

GaussianBelief GaussianBelief::from_covariance(Eigen::VectorXd mean, const Eigen::MatrixXd& cov) {
  if (cov.rows() != mean.size() || cov.cols() != mean.size()) {
    throw InvalidArgument("GaussianBelief: covariance does not match mean dimension");
  }
  return GaussianBelief{std::move(mean), psd_sqrt_factor(cov)};
}

Eigen::MatrixXd StateTrajectory::means() const {
  if (beliefs.empty()) return {};
  Eigen::MatrixXd out(beliefs.size(), beliefs.front().mean.size());
  for (std::size_t t = 0; t < beliefs.size(); ++t) out.row(t) = beliefs[t].mean.transpose();
  return out;
}

Eigen::MatrixXd StateTrajectory::variances() const {
  if (beliefs.empty()) return {};
  Eigen::MatrixXd out(beliefs.size(), beliefs.front().mean.size());
  for (std::size_t t = 0; t < beliefs.size(); ++t) {
    out.row(t) = beliefs[t].sqrt_cov.colwise().squaredNorm();
  }
  return out;
}

namespace {

void check_inputs(const DiscreteStateSpace& model, const Eigen::MatrixXd& y,
                  const Eigen::MatrixXd& u, const Eigen::MatrixXd& obs_noise,
                  const GaussianBelief& init) {
  const Eigen::Index n = model.state_dim();
  const Eigen::Index p = model.output_dim();
  if (model.A.cols() != n || model.Q.rows() != n || model.Q.cols() != n ||
      model.C.cols() != n || model.B.rows() != n) {
    throw InvalidArgument("filter: inconsistent model dimensions");
  }
  if (y.rows() != p) throw InvalidArgument("filter: observation rows do not match C");
  if (model.input_dim() > 0 && (u.rows() != model.input_dim() || u.cols() != y.cols())) {
    throw InvalidArgument("filter: input series must be m x T with the same T as y");
  }
  if (obs_noise.rows() != p || obs_noise.cols() != p) {
    throw InvalidArgument("filter: observation noise must be p x p");
  }
  if (init.mean.size() != n || init.sqrt_cov.rows() != n || init.sqrt_cov.cols() != n) {
    throw InvalidArgument("filter: initial belief dimension mismatch");
  }
}

// Shared square-root recursion with preallocated workspaces.
class SqrtStepper {
 public:
  SqrtStepper(const DiscreteStateSpace& model, const Eigen::MatrixXd& obs_noise)
      : model_(model),
        n_(model.state_dim()),
        p_(model.output_dim()),
        has_input_(model.input_dim() > 0),
        At_(model.A.transpose()),
        Ct_(model.C.transpose()),
        sqrt_q_(psd_sqrt_factor(model.Q)),
        sqrt_r_(psd_sqrt_factor(obs_noise)),
        update_(n_ + p_, n_ + p_),
        predict_(2 * n_, n_),
        work_(n_ + p_ + 1),
        innov_(p_),
        white_(p_),
        next_(n_) {
    log_2pi_ = std::log(2.0 * std::numbers::pi);
  }

  // Measurement update in place; returns the log-density of y_t.
  double update(Eigen::VectorXd& mean, Eigen::MatrixXd& S, const Eigen::Ref<const Eigen::VectorXd>& y,
                const Eigen::Ref<const Eigen::VectorXd>& u, Eigen::Index step) {
    update_.setZero();
    update_.topLeftCorner(p_, p_) = sqrt_r_;
    update_.bottomLeftCorner(n_, p_).noalias() = S * Ct_;
    update_.bottomRightCorner(n_, n_) = S;
    const double scale = sqrt_r_.norm() + update_.bottomLeftCorner(n_, p_).norm();
    triangularize(update_, work_);

    auto X = update_.topLeftCorner(p_, p_);
    for (Eigen::Index i = 0; i < p_; ++i) {
      if (!(X(i, i) > 1e-13 * scale) || !std::isfinite(X(i, i))) {
        throw NumericalError("innovation covariance numerically singular at step " +
                             std::to_string(step));
      }
    }
    innov_ = y;
    innov_.noalias() -= model_.C * mean;
    if (has_input_) innov_.noalias() -= model_.D * u;
    // X^T w = e
    white_ = X.transpose().triangularView<Eigen::Lower>().solve(innov_);
    mean.noalias() += update_.topRightCorner(p_, n_).transpose() * white_;
    S = update_.bottomRightCorner(n_, n_).triangularView<Eigen::Upper>();

    double log_det = 0.0;
    for (Eigen::Index i = 0; i < p_; ++i) log_det += std::log(X(i, i));
    return -0.5 * (static_cast<double>(p_) * log_2pi_ + 2.0 * log_det + white_.squaredNorm());
  }

  void predict(Eigen::VectorXd& mean, Eigen::MatrixXd& S,
               const Eigen::Ref<const Eigen::VectorXd>& u) {
    predict_.topRows(n_).noalias() = S * At_;
    predict_.bottomRows(n_) = sqrt_q_;
    triangularize(predict_, work_);
    S = predict_.topRows(n_).triangularView<Eigen::Upper>();
    next_.noalias() = model_.A * mean;
    if (has_input_) next_.noalias() += model_.B * u;
    mean.swap(next_);
  }

 private:
  const DiscreteStateSpace& model_;
  Eigen::Index n_;
  Eigen::Index p_;
  bool has_input_;
  Eigen::MatrixXd At_;
  Eigen::MatrixXd Ct_;
  Eigen::MatrixXd sqrt_q_;
  Eigen::MatrixXd sqrt_r_;
  Eigen::MatrixXd update_;
  Eigen::MatrixXd predict_;
  Eigen::VectorXd work_;
  Eigen::VectorXd innov_;
  Eigen::VectorXd white_;
  Eigen::VectorXd next_;
  double log_2pi_ = 0.0;
};

Eigen::VectorXd input_at(const Eigen::MatrixXd& u, Eigen::Index t) {
  if (u.size() == 0) return Eigen::VectorXd();
  return u.col(t);
}

// Per-step quantities of the backward conditional x_t | x_{t+1}, y_{0:t}:
//   mean = m_t + G_t (x_{t+1} - A m_t - B u_t),   sqrt cov = R22_t.
struct BackwardFactors {
  std::vector<Eigen::MatrixXd> gain;
  std::vector<Eigen::MatrixXd> cond_sqrt;
  std::vector<Eigen::VectorXd> predicted_mean;
};

BackwardFactors backward_factors(const DiscreteStateSpace& model, const Eigen::MatrixXd& u,
                                 const StateTrajectory& filtered) {
  const Eigen::Index n = model.state_dim();
  const std::size_t T = filtered.size();
  if (model.input_dim() > 0 && static_cast<std::size_t>(u.cols()) != T) {
    throw InvalidArgument("smoother: input length does not match filtered trajectory");
  }
  for (const auto& b : filtered.beliefs) {
    if (b.mean.size() != n) throw InvalidArgument("smoother: belief dimension mismatch");
  }
  BackwardFactors out;
  if (T < 2) return out;
  out.gain.resize(T - 1);
  out.cond_sqrt.resize(T - 1);
  out.predicted_mean.resize(T - 1);

  const Eigen::MatrixXd At = model.A.transpose();
  const Eigen::MatrixXd sqrt_q = psd_sqrt_factor(model.Q);
  Eigen::MatrixXd pre(2 * n, 2 * n);
  Eigen::VectorXd work(2 * n + 1);
  for (std::size_t t = 0; t + 1 < T; ++t) {
    const GaussianBelief& f = filtered.beliefs[t];
    // [[S A^T, S], [Sq, 0]] -> [[R11, R12], [0, R22]]
    pre.setZero();
    pre.topLeftCorner(n, n).noalias() = f.sqrt_cov * At;
    pre.topRightCorner(n, n) = f.sqrt_cov;
    pre.bottomLeftCorner(n, n) = sqrt_q;
    triangularize(pre, work);
    // G^T = R11^{-1} R12
    Eigen::MatrixXd gain_t = pre.topRightCorner(n, n);
    solve_upper_pinv(pre.topLeftCorner(n, n), gain_t);
    out.gain[t] = gain_t.transpose();
    out.cond_sqrt[t] = pre.bottomRightCorner(n, n).triangularView<Eigen::Upper>();
    Eigen::VectorXd mp = model.A * f.mean;
    if (model.input_dim() > 0) mp.noalias() += model.B * u.col(static_cast<Eigen::Index>(t));
    out.predicted_mean[t] = std::move(mp);
  }
  return out;
}

}  // namespace

FilterResult sqrt_kalman_filter(const DiscreteStateSpace& model, const Eigen::MatrixXd& y,
                                const Eigen::MatrixXd& u, const Eigen::MatrixXd& obs_noise,
                                const GaussianBelief& init, double t0) {
  check_inputs(model, y, u, obs_noise, init);
  const Eigen::Index T = y.cols();
  FilterResult result;
  result.trajectory.kind = TrajectoryKind::Filtered;
  result.trajectory.times.resize(T);
  result.trajectory.beliefs.reserve(T);

  SqrtStepper stepper(model, obs_noise);
  Eigen::VectorXd mean = init.mean;
  Eigen::MatrixXd S = init.sqrt_cov.triangularView<Eigen::Upper>();
  for (Eigen::Index t = 0; t < T; ++t) {
    const Eigen::VectorXd ut = input_at(u, t);
    result.log_likelihood += stepper.update(mean, S, y.col(t), ut, t);
    result.trajectory.times[t] = t0 + static_cast<double>(t) * model.dt;
    result.trajectory.beliefs.push_back(GaussianBelief{mean, S});
    if (t + 1 < T) stepper.predict(mean, S, ut);
  }
  return result;
}

double kalman_log_likelihood(const DiscreteStateSpace& model, const Eigen::MatrixXd& y,
                             const Eigen::MatrixXd& u, const Eigen::MatrixXd& obs_noise,
                             const GaussianBelief& init) {
  check_inputs(model, y, u, obs_noise, init);
  const Eigen::Index T = y.cols();
  SqrtStepper stepper(model, obs_noise);
  Eigen::VectorXd mean = init.mean;
  Eigen::MatrixXd S = init.sqrt_cov.triangularView<Eigen::Upper>();
  double loglik = 0.0;
  const bool has_input = model.input_dim() > 0;
  const Eigen::VectorXd empty;
  for (Eigen::Index t = 0; t < T; ++t) {
    if (has_input) {
      loglik += stepper.update(mean, S, y.col(t), u.col(t), t);
      if (t + 1 < T) stepper.predict(mean, S, u.col(t));
    } else {
      loglik += stepper.update(mean, S, y.col(t), empty, t);
      if (t + 1 < T) stepper.predict(mean, S, empty);
    }
  }
  return loglik;
}

StateTrajectory sqrt_rts_smoother(const DiscreteStateSpace& model, const Eigen::MatrixXd& u,
                                  const StateTrajectory& filtered) {
  if (filtered.kind != TrajectoryKind::Filtered) {
    throw InvalidArgument("smoother expects a filtered trajectory");
  }
  if (filtered.times.size() != filtered.beliefs.size()) {
    throw InvalidArgument("smoother: mismatched trajectory lengths");
  }
  const std::size_t T = filtered.size();
  StateTrajectory out;
  out.kind = TrajectoryKind::Smoothed;
  out.times = filtered.times;
  out.beliefs.resize(T);
  if (T == 0) return out;
  const BackwardFactors bf = backward_factors(model, u, filtered);
  const Eigen::Index n = model.state_dim();

  out.beliefs[T - 1] = filtered.beliefs[T - 1];
  Eigen::MatrixXd stack(2 * n, n);
  Eigen::VectorXd work(n + 1);
  for (std::size_t i = T - 1; i-- > 0;) {
    const GaussianBelief& f = filtered.beliefs[i];
    const GaussianBelief& next = out.beliefs[i + 1];
    GaussianBelief s;
    s.mean = f.mean + bf.gain[i] * (next.mean - bf.predicted_mean[i]);
    // P_s = R22^T R22 + G P_{s,t+1} G^T
    stack.topRows(n) = bf.cond_sqrt[i];
    stack.bottomRows(n).noalias() = next.sqrt_cov * bf.gain[i].transpose();
    triangularize(stack, work);
    s.sqrt_cov = stack.topRows(n).triangularView<Eigen::Upper>();
    out.beliefs[i] = std::move(s);
  }
  return out;
}

std::vector<Eigen::MatrixXd> backward_samples(const DiscreteStateSpace& model,
                                              const Eigen::MatrixXd& u,
                                              const StateTrajectory& filtered, int count,
                                              std::uint64_t rng_seed) {
  if (filtered.kind != TrajectoryKind::Filtered) {
    throw InvalidArgument("backward sampling expects a filtered trajectory");
  }
  const std::size_t T = filtered.size();
  const Eigen::Index n = model.state_dim();
  std::vector<Eigen::MatrixXd> draws;
  if (T == 0 || count <= 0) return draws;
  const BackwardFactors bf = backward_factors(model, u, filtered);

  std::mt19937_64 rng(rng_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd eps(n);
  auto fill = [&] {
    for (Eigen::Index j = 0; j < n; ++j) eps(j) = normal(rng);
  };

  draws.reserve(count);
  for (int s = 0; s < count; ++s) {
    Eigen::MatrixXd path(T, n);
    fill();
    const GaussianBelief& last = filtered.beliefs[T - 1];
    Eigen::VectorXd x = last.mean + last.sqrt_cov.transpose() * eps;
    path.row(T - 1) = x.transpose();
    for (std::size_t i = T - 1; i-- > 0;) {
      fill();
      x = filtered.beliefs[i].mean + bf.gain[i] * (x - bf.predicted_mean[i]) +
          bf.cond_sqrt[i].transpose() * eps;
      path.row(i) = x.transpose();
    }
    draws.push_back(std::move(path));
  }
  return draws;
}

Eigen::MatrixXd backward_sample(const DiscreteStateSpace& model, const Eigen::MatrixXd& u,
                                const StateTrajectory& filtered, std::uint64_t rng_seed) {
  auto draws = backward_samples(model, u, filtered, 1, rng_seed);
  if (draws.empty()) return Eigen::MatrixXd(0, model.state_dim());
  return std::move(draws.front());
}

}  // namespace lrf
