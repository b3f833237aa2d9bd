#pragma once

// Parameter inference: independent Gaussian priors, Kalman-filter likelihood
// and a random-walk Metropolis-Hastings sampler that counts until a target
// number of proposals has been accepted.

#include "lrf/model_builder.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace lrf {

struct ParamPrior {
  double mean = 0.0;
  double variance = 1.0;
  bool active = true;  ///< false: held fixed at `mean`
};

struct PriorSpec {
  std::array<ParamPrior, kNumParams> priors{};

  ParamPrior& operator[](Param p) { return priors[static_cast<std::size_t>(p)]; }
  const ParamPrior& operator[](Param p) const { return priors[static_cast<std::size_t>(p)]; }

  void validate() const;
  std::vector<std::size_t> active_indices() const;
  std::vector<std::string> active_names() const;

  /// Full parameter set with every parameter at its prior mean.
  ModelParameters at_means() const;
  /// Full parameter set: inactive entries from the prior means, active ones from `active`.
  ModelParameters expand(const Eigen::VectorXd& active) const;
  Eigen::VectorXd contract(const ModelParameters& full) const;

  /// Sum of Gaussian log densities over the active parameters.
  double log_density(const ModelParameters& params) const;
};

/// Case-study priors (means and variances as tabulated for the simulated
/// Duffing system; mass fixed at 1 kg).
PriorSpec duffing_priors();
/// Silverbox priors; all six parameters free.
PriorSpec silverbox_priors();

struct IdentificationData {
  Eigen::MatrixXd y;  ///< 1 x T
  Eigen::MatrixXd u;  ///< 1 x T
};

/// Kalman log-likelihood of the augmented model plus the active log prior.
/// Returns -inf outside the support or when the filter fails numerically.
double log_posterior(const ModelParameters& params, const PriorSpec& priors,
                     const LatentForceModelSpec& model_spec, const IdentificationData& data);

/// Log-likelihood alone (no prior).
double log_likelihood(const ModelParameters& params, const LatentForceModelSpec& model_spec,
                      const IdentificationData& data);

struct ParameterChain {
  std::vector<std::string> names;
  /// Every accepted state, in acceptance order; the first `burn_in` are discarded.
  std::vector<Eigen::VectorXd> samples;
  std::vector<double> log_posteriors;
  /// 1-based proposal index at which each sample was accepted.
  std::vector<long> accepted_at;
  Eigen::VectorXd proposal_scales;  ///< frozen random-walk standard deviations
  long accepted_count = 0;
  long proposed_count = 0;
  std::size_t burn_in = 0;

  double acceptance_rate() const;
  std::size_t retained_size() const;
  /// Retained samples as rows.
  Eigen::MatrixXd retained_matrix() const;
  /// Iterations the chain spent in each retained state (the state plus the
  /// rejected proposals that followed it), derived from `accepted_at`.
  Eigen::VectorXd holding_times() const;
  /// Moments of the Markov chain: retained states weighted by holding time.
  Eigen::VectorXd retained_mean() const;
  Eigen::VectorXd retained_variance() const;

  /// One row per retained sample: names..., log_posterior, accepted_at.
  void write_csv(std::ostream& os) const;
};

struct MhOptions {
  bool adapt = true;           ///< tune scales during burn-in, frozen afterwards
  double target_low = 0.20;    ///< adaptation target band for the acceptance rate
  double target_high = 0.30;
  int adapt_window = 50;       ///< proposals per adaptation step
  long abort_after = 100000;   ///< proposals before the low-acceptance check
  double abort_rate = 0.001;
};

using LogDensity = std::function<double(const Eigen::VectorXd&)>;

/// Random-walk MH with diagonal Gaussian proposals. Runs until `n_accept`
/// proposals are accepted; the first `burn_in` accepted states are flagged as
/// burn-in. Throws NumericalError if the acceptance rate is below
/// options.abort_rate after options.abort_after proposals.
ParameterChain mh_sample(const LogDensity& log_target, const Eigen::VectorXd& init,
                         const Eigen::VectorXd& proposal_scales, long n_accept,
                         std::size_t burn_in, std::uint64_t rng_seed,
                         const MhOptions& options = {},
                         std::vector<std::string> names = {});

/// The retained sample with the highest stored log posterior.
Eigen::VectorXd map_estimate(const ParameterChain& chain);

/// Multiplies each active prior mean by exp(z_i), z_i ~ N(0,1) i.i.d.;
/// variances are left unchanged.
PriorSpec perturb_priors(const PriorSpec& priors, std::uint64_t rng_seed);
/// Deterministic variant: z given per parameter (inactive entries ignored).
PriorSpec perturb_priors(const PriorSpec& priors, const std::array<double, kNumParams>& z);

/// Nelder-Mead maximization of `log_target` over positive parameters, carried
/// out on log-scale coordinates. Used to start chains near the mode.
Eigen::VectorXd maximize_positive(const LogDensity& log_target, const Eigen::VectorXd& start,
                                  int max_iterations = 600);

}  // namespace lrf
