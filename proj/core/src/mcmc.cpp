#include "lrf/mcmc.hpp"

#include "lrf/errors.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>

namespace lrf {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double gaussian_log_density(double x, double mean, double variance) {
  const double r = x - mean;
  return -0.5 * (std::log(2.0 * std::numbers::pi * variance) + r * r / variance);
}

}  // namespace

void PriorSpec::validate() const {
  for (std::size_t i = 0; i < kNumParams; ++i) {
    const auto& p = priors[i];
    if (!std::isfinite(p.mean)) {
      throw InvalidArgument("prior mean for " + std::string(kParamNames[i]) + " is not finite");
    }
    if (p.active && !(p.variance > 0.0)) {
      throw InvalidArgument("prior variance for " + std::string(kParamNames[i]) +
                            " must be positive");
    }
  }
}

std::vector<std::size_t> PriorSpec::active_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < kNumParams; ++i) {
    if (priors[i].active) out.push_back(i);
  }
  return out;
}

std::vector<std::string> PriorSpec::active_names() const {
  std::vector<std::string> out;
  for (std::size_t i : active_indices()) out.emplace_back(kParamNames[i]);
  return out;
}

ModelParameters PriorSpec::at_means() const {
  ModelParameters out;
  for (std::size_t i = 0; i < kNumParams; ++i) out.values[i] = priors[i].mean;
  return out;
}

ModelParameters PriorSpec::expand(const Eigen::VectorXd& active) const {
  ModelParameters out = at_means();
  const auto idx = active_indices();
  if (static_cast<std::size_t>(active.size()) != idx.size()) {
    throw InvalidArgument("active parameter vector has the wrong length");
  }
  for (std::size_t j = 0; j < idx.size(); ++j) out.values[idx[j]] = active(j);
  return out;
}

Eigen::VectorXd PriorSpec::contract(const ModelParameters& full) const {
  const auto idx = active_indices();
  Eigen::VectorXd out(idx.size());
  for (std::size_t j = 0; j < idx.size(); ++j) out(j) = full.values[idx[j]];
  return out;
}

double PriorSpec::log_density(const ModelParameters& params) const {
  double total = 0.0;
  for (std::size_t i = 0; i < kNumParams; ++i) {
    if (!priors[i].active) continue;
    total += gaussian_log_density(params.values[i], priors[i].mean, priors[i].variance);
  }
  return total;
}

PriorSpec duffing_priors() {
  PriorSpec p;
  p[Param::Mass] = {1.0, 1.0, false};
  p[Param::Stiffness] = {96.68, 100.0, true};
  p[Param::Damping] = {0.422, 0.1, true};
  p[Param::SignalVariance] = {0.5, 1.0, true};
  p[Param::LengthScale] = {0.1, 0.1, true};
  p[Param::NoiseVariance] = {0.1337, 1.0, true};
  return p;
}

PriorSpec silverbox_priors() {
  PriorSpec p;
  p[Param::Mass] = {5.3732e-6, 1e-5, true};
  p[Param::Damping] = {2.2653e-4, 1e-4, true};
  p[Param::Stiffness] = {0.99, 0.05, true};
  p[Param::SignalVariance] = {0.005, 0.05, true};
  p[Param::LengthScale] = {0.4, 0.05, true};
  p[Param::NoiseVariance] = {1.252e-6, 5e-6, true};
  return p;
}

double log_likelihood(const ModelParameters& params, const LatentForceModelSpec& model_spec,
                      const IdentificationData& data) {
  if (!params.in_support()) return kNegInf;
  try {
    const LatentForceModel lfm = build_latent_force_model(model_spec, params);
    const double ll = kalman_log_likelihood(lfm.model, data.y, data.u, lfm.obs_noise, lfm.init);
    return std::isfinite(ll) ? ll : kNegInf;
  } catch (const NumericalError&) {
    return kNegInf;
  }
}

double log_posterior(const ModelParameters& params, const PriorSpec& priors,
                     const LatentForceModelSpec& model_spec, const IdentificationData& data) {
  if (!params.in_support()) return kNegInf;
  const double prior = priors.log_density(params);
  if (data.y.cols() == 0) return prior;
  return prior + log_likelihood(params, model_spec, data);
}

double ParameterChain::acceptance_rate() const {
  return proposed_count > 0 ? static_cast<double>(accepted_count) / proposed_count : 0.0;
}

std::size_t ParameterChain::retained_size() const {
  return samples.size() > burn_in ? samples.size() - burn_in : 0;
}

Eigen::MatrixXd ParameterChain::retained_matrix() const {
  const std::size_t n = retained_size();
  const Eigen::Index d = samples.empty() ? 0 : samples.front().size();
  Eigen::MatrixXd out(n, d);
  for (std::size_t i = 0; i < n; ++i) out.row(i) = samples[burn_in + i].transpose();
  return out;
}

Eigen::VectorXd ParameterChain::holding_times() const {
  const std::size_t n = retained_size();
  Eigen::VectorXd w(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = burn_in + i;
    const long next = k + 1 < accepted_at.size() ? accepted_at[k + 1] : proposed_count + 1;
    w(i) = static_cast<double>(next - accepted_at[k]);
  }
  return w;
}

Eigen::VectorXd ParameterChain::retained_mean() const {
  const Eigen::MatrixXd m = retained_matrix();
  if (m.rows() == 0) throw NumericalError("chain has no retained samples");
  const Eigen::VectorXd w = holding_times();
  return m.transpose() * w / w.sum();
}

Eigen::VectorXd ParameterChain::retained_variance() const {
  const Eigen::MatrixXd m = retained_matrix();
  if (m.rows() < 2) throw NumericalError("chain has fewer than two retained samples");
  const Eigen::VectorXd w = holding_times();
  const double total = w.sum();
  const Eigen::RowVectorXd mean = (m.transpose() * w / total).transpose();
  const Eigen::MatrixXd centered = m.rowwise() - mean;
  return (centered.array().square().colwise() * w.array()).colwise().sum().transpose() / (total - 1.0);
}

void ParameterChain::write_csv(std::ostream& os) const {
  const auto old_precision = os.precision(17);
  for (const auto& name : names) os << name << ',';
  os << "log_posterior,accepted_at\n";
  for (std::size_t i = burn_in; i < samples.size(); ++i) {
    for (Eigen::Index j = 0; j < samples[i].size(); ++j) os << samples[i](j) << ',';
    os << log_posteriors[i] << ',' << accepted_at[i] << '\n';
  }
  os.precision(old_precision);
}

ParameterChain mh_sample(const LogDensity& log_target, const Eigen::VectorXd& init,
                         const Eigen::VectorXd& proposal_scales, long n_accept,
                         std::size_t burn_in, std::uint64_t rng_seed, const MhOptions& options,
                         std::vector<std::string> names) {
  const Eigen::Index d = init.size();
  if (proposal_scales.size() != d) throw InvalidArgument("mh_sample: scale/init size mismatch");
  if (n_accept <= static_cast<long>(burn_in)) {
    throw InvalidArgument("mh_sample: n_accept must exceed burn_in");
  }
  if ((proposal_scales.array() <= 0.0).any()) {
    throw InvalidArgument("mh_sample: proposal scales must be positive");
  }
  double current_lp = log_target(init);
  if (!std::isfinite(current_lp)) throw InvalidArgument("mh_sample: initial point outside support");

  ParameterChain chain;
  chain.names = std::move(names);
  if (chain.names.empty()) {
    for (Eigen::Index j = 0; j < d; ++j) chain.names.push_back("theta" + std::to_string(j));
  }
  chain.burn_in = burn_in;
  chain.samples.reserve(n_accept);
  chain.log_posteriors.reserve(n_accept);
  chain.accepted_at.reserve(n_accept);

  std::mt19937_64 rng(rng_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  Eigen::VectorXd shape = proposal_scales;  // per-parameter proposal shape
  double global = 1.0;                      // adapted multiplier
  Eigen::VectorXd current = init;
  Eigen::VectorXd candidate(d);
  int window_proposed = 0;
  int window_accepted = 0;
  std::size_t next_shape_update = 50;

  while (chain.accepted_count < n_accept) {
    const bool in_burn_in = chain.samples.size() < burn_in;
    for (Eigen::Index j = 0; j < d; ++j) candidate(j) = current(j) + global * shape(j) * normal(rng);
    ++chain.proposed_count;
    ++window_proposed;

    const double cand_lp = log_target(candidate);
    const double log_ratio = cand_lp - current_lp;
    const bool accept = std::isfinite(cand_lp) && (log_ratio >= 0.0 || std::log(uniform(rng)) < log_ratio);
    if (accept) {
      current = candidate;
      current_lp = cand_lp;
      ++chain.accepted_count;
      ++window_accepted;
      chain.samples.push_back(current);
      chain.log_posteriors.push_back(current_lp);
      chain.accepted_at.push_back(chain.proposed_count);
    }

    if (options.adapt && in_burn_in) {
      if (window_proposed >= options.adapt_window) {
        const double rate = static_cast<double>(window_accepted) / window_proposed;
        if (rate < options.target_low) {
          global *= std::max(0.3, std::sqrt(std::max(rate, 1e-3) / options.target_low));
        } else if (rate > options.target_high) {
          global *= std::min(3.0, rate / options.target_high * 1.2);
        }
        window_proposed = 0;
        window_accepted = 0;
      }
      // Re-shape from the spread of the second half of the accepted burn-in states.
      if (chain.samples.size() >= next_shape_update && chain.samples.size() >= 4 * static_cast<std::size_t>(d)) {
        const std::size_t n = chain.samples.size();
        const std::size_t start = n / 2;
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
        for (std::size_t i = start; i < n; ++i) mean += chain.samples[i];
        mean /= static_cast<double>(n - start);
        Eigen::VectorXd var = Eigen::VectorXd::Zero(d);
        for (std::size_t i = start; i < n; ++i) var += (chain.samples[i] - mean).cwiseAbs2();
        var /= static_cast<double>(n - start - 1);
        for (Eigen::Index j = 0; j < d; ++j) {
          const double sd = std::sqrt(var(j));
          if (sd > 0.0 && std::isfinite(sd)) {
            shape(j) = sd * 2.38 / std::sqrt(static_cast<double>(d));
          }
        }
        global = 1.0;
        next_shape_update *= 2;
      }
    }

    if (chain.proposed_count == options.abort_after &&
        chain.acceptance_rate() < options.abort_rate) {
      throw NumericalError(
          "MCMC acceptance rate below 0.1% after " + std::to_string(options.abort_after) +
          " proposals; reduce the proposal scales or start the chain closer to the mode");
    }
  }
  chain.proposal_scales = global * shape;
  return chain;
}

Eigen::VectorXd map_estimate(const ParameterChain& chain) {
  if (chain.retained_size() == 0) throw NumericalError("map_estimate: empty chain");
  std::size_t best = chain.burn_in;
  for (std::size_t i = chain.burn_in; i < chain.samples.size(); ++i) {
    if (chain.log_posteriors[i] > chain.log_posteriors[best]) best = i;
  }
  return chain.samples[best];
}

PriorSpec perturb_priors(const PriorSpec& priors, const std::array<double, kNumParams>& z) {
  PriorSpec out = priors;
  for (std::size_t i = 0; i < kNumParams; ++i) {
    if (!out.priors[i].active) continue;
    out.priors[i].mean *= std::exp(z[i]);
  }
  return out;
}

PriorSpec perturb_priors(const PriorSpec& priors, std::uint64_t rng_seed) {
  std::mt19937_64 rng(rng_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::array<double, kNumParams> z{};
  for (double& v : z) v = normal(rng);
  return perturb_priors(priors, z);
}

namespace {

struct NmContext {
  const LogDensity* target;
  Eigen::VectorXd scratch;
};

double nm_objective(const gsl_vector* x, void* params) {
  auto* ctx = static_cast<NmContext*>(params);
  for (Eigen::Index j = 0; j < ctx->scratch.size(); ++j) {
    ctx->scratch(j) = std::exp(gsl_vector_get(x, static_cast<std::size_t>(j)));
  }
  const double lp = (*ctx->target)(ctx->scratch);
  return std::isfinite(lp) ? -lp : std::numeric_limits<double>::max();
}

}  // namespace

Eigen::VectorXd maximize_positive(const LogDensity& log_target, const Eigen::VectorXd& start,
                                  int max_iterations) {
  const std::size_t d = static_cast<std::size_t>(start.size());
  if ((start.array() <= 0.0).any()) throw InvalidArgument("maximize_positive: start must be positive");
  gsl_set_error_handler_off();
  NmContext ctx{&log_target, Eigen::VectorXd(start.size())};
  gsl_multimin_function fn{&nm_objective, d, &ctx};

  gsl_vector* x = gsl_vector_alloc(d);
  gsl_vector* step = gsl_vector_alloc(d);
  for (std::size_t j = 0; j < d; ++j) {
    gsl_vector_set(x, j, std::log(start(static_cast<Eigen::Index>(j))));
    gsl_vector_set(step, j, 0.2);
  }
  gsl_multimin_fminimizer* s = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, d);
  gsl_multimin_fminimizer_set(s, &fn, x, step);
  for (int it = 0; it < max_iterations; ++it) {
    if (gsl_multimin_fminimizer_iterate(s) != GSL_SUCCESS) break;
    if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), 1e-5) == GSL_SUCCESS) break;
  }
  Eigen::VectorXd best(start.size());
  for (std::size_t j = 0; j < d; ++j) {
    best(static_cast<Eigen::Index>(j)) = std::exp(gsl_vector_get(s->x, j));
  }
  gsl_multimin_fminimizer_free(s);
  gsl_vector_free(step);
  gsl_vector_free(x);
  return best;
}

}  // namespace lrf
