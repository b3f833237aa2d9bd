#include "lrf/pipeline.hpp"

#include "lrf/errors.hpp"
#include "lrf/model_builder.hpp"
#include "lrf/series_io.hpp"
#include "lrf/sqrt_filter.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace lrf {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

constexpr const char* kVersion = "0.1.0";

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read artifact '" + path.string() + "'");
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  return hex.str();
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

// Collects artifact checksums and writes manifest.json last.
class Manifest {
 public:
  Manifest(fs::path dir, std::string command, json config)
      : dir_(std::move(dir)), command_(std::move(command)), config_(std::move(config)) {
    fs::create_directories(dir_);
  }

  fs::path path(const std::string& relative) const { return dir_ / relative; }

  void record(const std::string& relative) {
    const fs::path p = dir_ / relative;
    artifacts_[relative] = {{"sha256", sha256_file(p)}, {"bytes", fs::file_size(p)}};
  }

  void write_json(const std::string& relative, const json& value) {
    const fs::path p = dir_ / relative;
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw DataError("cannot write '" + p.string() + "'");
    out << value.dump(2) << '\n';
    out.close();
    record(relative);
  }

  void write_table(const std::string& relative, const std::vector<std::string>& names,
                   const std::vector<Eigen::VectorXd>& columns) {
    const fs::path p = dir_ / relative;
    fs::create_directories(p.parent_path());
    write_csv(p.string(), names, columns);
    record(relative);
  }

  void set_seed(const std::string& name, std::uint64_t value) { seeds_[name] = value; }
  void set(const std::string& key, json value) { extra_[key] = std::move(value); }

  json finish(const std::string& status, const std::string& error = {}) {
    json m = {{"command", command_},
              {"status", status},
              {"version", kVersion},
              {"created_utc", utc_timestamp()},
              {"config", config_},
              {"seeds", seeds_},
              {"artifacts", artifacts_}};
    for (const auto& [k, v] : extra_.items()) m[k] = v;
    if (!error.empty()) {
      m["error"] = error;
      m["partial_artifacts"] = true;
    }
    std::ofstream out(dir_ / "manifest.json", std::ios::binary);
    out << m.dump(2) << '\n';
    return m;
  }

 private:
  fs::path dir_;
  std::string command_;
  json config_;
  json seeds_ = json::object();
  json artifacts_ = json::object();
  json extra_ = json::object();
};

// Runs `body`; on failure the manifest is still written, flagged as partial.
template <class Body>
json guarded(Manifest& manifest, Body&& body) {
  try {
    body();
  } catch (const std::exception& e) {
    manifest.finish("failed", e.what());
    throw;
  }
  return manifest.finish("ok");
}

Eigen::VectorXd time_axis(Eigen::Index n, double fs, double t0 = 0.0) {
  Eigen::VectorXd t(n);
  for (Eigen::Index i = 0; i < n; ++i) t(i) = t0 + static_cast<double>(i) / fs;
  return t;
}

Eigen::VectorXd response_component(const Response& r, const std::string& which) {
  if (which == "displacement") return r.z;
  if (which == "velocity") return r.zdot;
  if (which == "acceleration") return r.zdd;
  throw InvalidArgument("unknown response quantity '" + which + "'");
}

std::vector<std::string> state_names(Eigen::Index n) {
  std::vector<std::string> names{"z", "zdot", "f"};
  if (n > 3) names.emplace_back("fdot");
  for (Eigen::Index i = 4; i < n; ++i) names.push_back("x" + std::to_string(i));
  return names;
}

std::string monomial_name(const Monomial& m) {
  if (m.z_degree == 0 && m.zdot_degree == 0) return "1";
  std::string s;
  if (m.z_degree > 0) s += "z^" + std::to_string(m.z_degree);
  if (m.zdot_degree > 0) s += std::string(s.empty() ? "" : "*") + "zdot^" + std::to_string(m.zdot_degree);
  return s;
}

json ode_json(const PolynomialOde& ode) {
  json terms = json::array();
  for (const auto& t : ode.nl_terms) {
    terms.push_back({{"z_degree", t.z_degree}, {"zdot_degree", t.zdot_degree}, {"coefficient", t.coefficient}});
  }
  return {{"m", ode.m}, {"c", ode.c}, {"k", ode.k}, {"nonlinear", terms}};
}

PolynomialOde ode_from(const json& j) {
  PolynomialOde ode;
  ode.m = j.at("m").get<double>();
  ode.c = j.at("c").get<double>();
  ode.k = j.at("k").get<double>();
  if (j.contains("nonlinear")) {
    for (const auto& t : j.at("nonlinear")) {
      ode.nl_terms.push_back({t.at("z_degree").get<int>(), t.value("zdot_degree", 0), t.at("coefficient").get<double>()});
    }
  }
  ode.validate();
  return ode;
}

TruthStates truth_for(const PolynomialOde& ode, const Response& r) {
  TruthStates truth{r.z, r.zdot, r.zdd, Eigen::VectorXd(r.z.size()), Eigen::VectorXd(r.z.size())};
  for (Eigen::Index i = 0; i < r.z.size(); ++i) {
    truth.f_nl(i) = ode.nonlinear_force(r.z(i), r.zdot(i));
    truth.f_total(i) = ode.restoring_force(r.z(i), r.zdot(i));
  }
  return truth;
}

json metrics_json(const StateMetrics& m) {
  return {{"displacement_nmse_percent", m.displacement},
          {"velocity_nmse_percent", m.velocity},
          {"acceleration_nmse_percent", m.acceleration},
          {"gp_state_nmse_percent", m.gp_state},
          {"total_restoring_force_nmse_percent", m.total_restoring_force}};
}

void write_identify_artifacts(Manifest& mf, const IdentifyResult& r, const IdentificationInput& input,
                              std::size_t psd_segment) {
  {
    std::ofstream out(mf.path("chain.csv"), std::ios::binary);
    r.chain.write_csv(out);
    out.close();
    mf.record("chain.csv");
  }
  mf.write_json("posterior_summary.json", r.posterior_summary());

  const Eigen::Index T = r.smoothed_mean.rows();
  const Eigen::Index n = r.smoothed_mean.cols();
  const Eigen::VectorXd t = time_axis(T, input.fs);
  const auto names = state_names(n);
  {
    std::vector<std::string> cols{"t"};
    std::vector<Eigen::VectorXd> data{t};
    for (Eigen::Index j = 0; j < n; ++j) {
      cols.push_back(names[static_cast<std::size_t>(j)]);
      data.emplace_back(r.smoothed_mean.col(j));
    }
    for (Eigen::Index j = 0; j < n; ++j) {
      cols.push_back("var_" + names[static_cast<std::size_t>(j)]);
      data.emplace_back(r.smoothed_var.col(j));
    }
    cols.insert(cols.end(), {"u", "y", "y_hat"});
    data.insert(data.end(), {input.u, input.y, r.y_hat});
    mf.write_table("smoothed_states.csv", cols, data);
  }
  for (std::size_t s = 0; s < r.state_samples.size(); ++s) {
    char name[64];
    std::snprintf(name, sizeof name, "state_samples/sample_%03zu.csv", s);
    std::vector<std::string> cols{"t"};
    std::vector<Eigen::VectorXd> data{t};
    for (Eigen::Index j = 0; j < n; ++j) {
      cols.push_back(names[static_cast<std::size_t>(j)]);
      data.emplace_back(r.state_samples[s].col(j));
    }
    mf.write_table(name, cols, data);
  }
  {
    const Eigen::Index N = r.rf_samples.z.size();
    Eigen::VectorXd sample_index(N);
    for (Eigen::Index i = 0; i < N; ++i) sample_index(i) = static_cast<double>(i / std::max<Eigen::Index>(T, 1));
    const ModelParameters& p = r.map;
    mf.write_table("restoring_force.csv", {"sample", "z", "zdot", "f_hat", "f_total"},
                   {sample_index, r.rf_samples.z, r.rf_samples.zdot, r.rf_samples.f_hat,
                    assemble_total_rf(r.rf_samples, p[Param::Stiffness], p[Param::Damping])});
  }
  {
    const auto K = static_cast<Eigen::Index>(r.scan.fits.size());
    Eigen::VectorXd order(K), n_params(K), loglik(K), bic_v(K), evidence(K), noise(K);
    for (Eigen::Index i = 0; i < K; ++i) {
      const auto& f = r.scan.fits[static_cast<std::size_t>(i)];
      order(i) = f.order;
      n_params(i) = static_cast<double>(f.basis.size());
      loglik(i) = f.log_likelihood;
      bic_v(i) = f.bic;
      evidence(i) = f.log_evidence;
      noise(i) = f.noise_variance;
    }
    mf.write_table("bic.csv", {"order", "n_params", "log_likelihood", "bic", "log_evidence", "noise_variance"},
                   {order, n_params, loglik, bic_v, evidence, noise});
  }
  mf.write_json("model.json", r.model_json());
  mf.write_json("residual_report.json", r.residuals);
  mf.write_table("residual_psd.csv", {"frequency", "power"}, {r.residuals.spectrum.frequency, r.residuals.spectrum.power});
  {
    const Periodogram py = periodogram(input.y, input.fs, psd_segment);
    const Periodogram ph = periodogram(r.y_hat, input.fs, psd_segment);
    mf.write_table("signal_psd.csv", {"frequency", "y_power", "y_hat_power"}, {py.frequency, py.power, ph.power});
  }
  if (r.metrics) mf.write_json("state_metrics.json", metrics_json(*r.metrics));
}

IdentificationInput silverbox_training_input(const RunConfig& config, const SilverboxData& data) {
  const auto tr0 = config.get<long>("silverbox.train_start");
  const auto tr1 = config.get<long>("silverbox.train_end");
  const int factor = config.get<int>("silverbox.upsample");
  if (tr1 > data.u.size()) {
    throw DataError("Silverbox training range exceeds the record length (" + std::to_string(data.u.size()) + ")");
  }
  IdentificationInput input;
  input.u = upsample_cubic(data.u.segment(tr0 - 1, tr1 - tr0 + 1), factor);
  input.y = upsample_cubic(data.y.segment(tr0 - 1, tr1 - tr0 + 1), factor);
  input.fs = data.fs * factor;
  return input;
}

// Chain start when the prior means sit far from the data. Nelder-Mead from the
// means can settle where a short length scale lets the GP absorb the
// measurement noise. This start first fits the dynamics and noise with the
// hyperparameters held at their means, then picks (sigma_f2, ell, R) from a
// coarse grid before the full optimization.
Eigen::VectorXd staged_start(const PriorSpec& priors, const LatentForceModelSpec& spec,
                             const IdentificationData& data) {
  const ModelParameters means = priors.at_means();
  auto log_post = [&](const ModelParameters& p) { return log_posterior(p, priors, spec, data); };

  std::vector<std::size_t> dynamics;
  for (Param p : {Param::Mass, Param::Damping, Param::Stiffness, Param::NoiseVariance}) {
    if (priors[p].active) dynamics.push_back(static_cast<std::size_t>(p));
  }
  ModelParameters current = means;
  if (!dynamics.empty()) {
    const LogDensity sub = [&](const Eigen::VectorXd& x) {
      ModelParameters p = current;
      for (std::size_t j = 0; j < dynamics.size(); ++j) p.values[dynamics[j]] = x(static_cast<Eigen::Index>(j));
      return log_post(p);
    };
    Eigen::VectorXd x(static_cast<Eigen::Index>(dynamics.size()));
    for (std::size_t j = 0; j < dynamics.size(); ++j) x(static_cast<Eigen::Index>(j)) = means.values[dynamics[j]];
    x = maximize_positive(sub, x);
    for (std::size_t j = 0; j < dynamics.size(); ++j) current.values[dynamics[j]] = x(static_cast<Eigen::Index>(j));
  }

  const double y_var = std::max((data.y.array() - data.y.mean()).square().mean(), 1e-300);
  auto grid_for = [&](Param p, std::vector<double> values) {
    if (!priors[p].active) return std::vector<double>{current[p]};
    values.push_back(means[p]);
    return values;
  };
  std::vector<double> ell_values, sf_values, r_values;
  for (double f : {2.0, 5.0, 20.0, 50.0, 200.0, 500.0, 2000.0}) ell_values.push_back(f * spec.dt);
  for (double f : {1e-3, 1e-2, 1e-1, 1.0, 10.0}) sf_values.push_back(f * means[Param::SignalVariance]);
  for (double f : {1e-5, 1e-4, 1e-3, 1e-2, 1e-1}) r_values.push_back(f * y_var);
  ell_values = grid_for(Param::LengthScale, ell_values);
  sf_values = grid_for(Param::SignalVariance, sf_values);
  r_values = grid_for(Param::NoiseVariance, r_values);

  ModelParameters best = current;
  double best_lp = log_post(current);
  for (double ell : ell_values) {
    for (double sf : sf_values) {
      for (double r : r_values) {
        ModelParameters p = current;
        p[Param::LengthScale] = ell;
        p[Param::SignalVariance] = sf;
        p[Param::NoiseVariance] = r;
        const double lp = log_post(p);
        if (lp > best_lp) {
          best_lp = lp;
          best = p;
        }
      }
    }
  }
  const LogDensity target = [&](const Eigen::VectorXd& x) { return log_post(priors.expand(x)); };
  return maximize_positive(target, priors.contract(best));
}

}  // namespace

PolynomialOde plant_from_config(const RunConfig& config) {
  const json& s = config.at("simulate");
  return ode_from(json{{"m", s.at("m")}, {"c", s.at("c")}, {"k", s.at("k")}, {"nonlinear", s.at("nonlinear")}});
}

PriorSpec priors_from_config(const RunConfig& config) {
  PriorSpec spec;
  for (std::size_t i = 0; i < kNumParams; ++i) {
    const json& p = config.at("priors").at(std::string(kParamNames[i]));
    spec.priors[i] = {p.at("mean").get<double>(), p.at("variance").get<double>(), p.at("free").get<bool>()};
  }
  spec.validate();
  return spec;
}

SimulatedDataset simulate_dataset(const RunConfig& config, std::uint64_t seed) {
  SimulatedDataset d;
  d.ode = plant_from_config(config);
  const json& s = config.at("simulate");
  d.excitation.Hs = s.at("Hs").get<double>();
  d.excitation.Tp = s.at("Tp").get<double>();
  d.excitation.n_freq = s.at("n_freq").get<int>();
  d.excitation.fs = s.at("fs").get<double>();
  d.excitation.n_samples = s.at("n_samples").get<long>();
  d.excitation.gamma_peak = s.at("gamma_peak").get<double>();
  d.excitation.f_low_factor = s.at("f_low_factor").get<double>();
  d.excitation.f_high_factor = s.at("f_high_factor").get<double>();
  d.excitation.seed = derive_seed(seed, 1);
  d.fs = d.excitation.fs;
  d.observed = s.at("observe").get<std::string>();
  const double noise_var = s.at("noise_variance").get<double>();
  if (!(noise_var >= 0.0)) throw InvalidArgument("simulate.noise_variance must be non-negative");

  const Eigen::VectorXd base = jonswap_multisine(d.excitation);
  auto run = [&](double gain) {
    d.u = gain * base;
    return newmark_simulate(d.ode, d.u, 1.0 / d.fs);
  };
  Response r = run(1.0);
  const json& fraction = s.at("noise_fraction");
  if (!fraction.is_null() && noise_var > 0.0) {
    const double target = std::sqrt(noise_var) / fraction.get<double>();
    if (!(target > 0.0) || !std::isfinite(target)) throw InvalidArgument("simulate.noise_fraction must be positive");
    auto spread = [](const Eigen::VectorXd& v) { return std::sqrt((v.array() - v.mean()).square().mean()); };
    double gain = 1.0;
    for (int it = 0; it < 50; ++it) {
      const double current = spread(response_component(r, d.observed));
      if (!(current > 0.0)) throw NumericalError("simulate: zero response; cannot calibrate the excitation");
      if (std::abs(current / target - 1.0) < 1e-10) break;
      gain *= target / current;
      r = run(gain);
    }
    d.excitation_gain = gain;
  }
  d.truth = truth_for(d.ode, r);
  d.y_clean = response_component(r, d.observed);
  d.noise_seed = derive_seed(seed, 2);
  d.y_noisy = add_measurement_noise(d.y_clean, std::sqrt(noise_var), d.noise_seed);
  d.t = time_axis(d.u.size(), d.fs);
  return d;
}

json IdentifyResult::posterior_summary() const {
  json params = json::object();
  const auto idx = priors.active_indices();
  const Eigen::VectorXd mean = chain.retained_mean();
  const Eigen::VectorXd var = chain.retained_variance();
  for (std::size_t i = 0; i < kNumParams; ++i) {
    const auto& pr = priors.priors[i];
    json entry = {{"prior_mean", pr.mean}, {"prior_variance", pr.variance}, {"free", pr.active},
                  {"start", start.values[i]}, {"map", map.values[i]}};
    const auto it = std::find(idx.begin(), idx.end(), i);
    if (it != idx.end()) {
      const auto j = static_cast<Eigen::Index>(it - idx.begin());
      entry["posterior_mean"] = mean(j);
      entry["posterior_variance"] = var(j);
      entry["proposal_scale"] = chain.proposal_scales(j);
    }
    params[std::string(kParamNames[i])] = entry;
  }
  double best_lp = -std::numeric_limits<double>::infinity();
  for (std::size_t i = chain.burn_in; i < chain.log_posteriors.size(); ++i) best_lp = std::max(best_lp, chain.log_posteriors[i]);
  return {{"parameters", params},
          {"accepted", chain.accepted_count},
          {"proposed", chain.proposed_count},
          {"acceptance_rate", chain.acceptance_rate()},
          {"burn_in", chain.burn_in},
          {"retained", chain.retained_size()},
          {"map_log_posterior", best_lp},
          {"kernel", std::string(to_string(model_spec.smoothness))},
          {"observation", std::string(to_string(model_spec.observation))},
          {"dt", model_spec.dt}};
}

json IdentifyResult::model_json() const {
  json basis = json::array();
  json coefficients = json::object();
  const Eigen::VectorXd sd = fit.weight_std();
  for (std::size_t j = 0; j < fit.basis.size(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    basis.push_back({{"z_degree", fit.basis[j].z_degree}, {"zdot_degree", fit.basis[j].zdot_degree},
                     {"mean", fit.weight_mean(jj)}, {"std", sd(jj)}});
    coefficients[monomial_name(fit.basis[j])] = {{"mean", fit.weight_mean(jj)}, {"std", sd(jj)}};
  }
  json table = json::array();
  for (const auto& f : scan.fits) table.push_back({{"order", f.order}, {"bic", f.bic}});
  return {{"order", fit.order},
          {"basis", basis},
          {"coefficients", coefficients},
          {"bic", fit.bic},
          {"bic_table", table},
          {"selected_by_bic", scan.best_order},
          {"noise_variance", fit.noise_variance},
          {"log_evidence", fit.log_evidence},
          {"alpha", alpha},
          {"beta", fit.coefficient(3, 0)},
          {"k_map", map[Param::Stiffness]},
          {"k_corrected", k_corrected},
          {"c", map[Param::Damping]},
          {"m", map[Param::Mass]},
          {"dt", model_spec.dt},
          {"nonlinear_model", ode_json(nonlinear_model)},
          {"linear_model", ode_json(linear_model)}};
}

IdentifyResult identify(const RunConfig& config, const IdentificationInput& input, std::uint64_t seed,
                        const PriorSpec& priors, const IdentifyOptions& options) {
  priors.validate();
  if (input.u.size() != input.y.size()) throw DataError("identify: u and y lengths differ");
  if (input.y.size() < 20) throw DataError("identify: need at least 20 samples");
  if (!(input.fs > 0.0)) throw DataError("identify: sample rate must be positive");
  if (priors.active_indices().empty()) throw InvalidArgument("identify: no free parameters");

  IdentifyResult r;
  r.priors = priors;
  r.model_spec.observation = parse_observation_mode(config.get<std::string>("system.observation"));
  r.model_spec.smoothness = parse_smoothness(config.get<std::string>("kernel.smoothness"));
  r.model_spec.dt = 1.0 / input.fs;
  r.model_spec.physical_initial_std = config.get<double>("system.initial_std");

  const IdentificationData data{input.y.transpose(), input.u.transpose()};
  const LatentForceModelSpec spec = r.model_spec;
  const LogDensity target = [&](const Eigen::VectorXd& active) {
    return log_posterior(priors.expand(active), priors, spec, data);
  };

  Eigen::VectorXd init = priors.contract(priors.at_means());
  if (config.get<std::string>("mcmc.init") == "optimize") {
    init = maximize_positive(target, init);
    const Eigen::VectorXd staged = staged_start(priors, spec, data);
    if (target(staged) > target(init)) init = staged;
  }
  if (!std::isfinite(target(init))) {
    throw NumericalError("identify: posterior density vanishes at the chain start; check priors and data");
  }
  const auto idx = priors.active_indices();
  const double fraction = config.get<double>("mcmc.scale_fraction");
  Eigen::VectorXd scales(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) {
    scales(static_cast<Eigen::Index>(j)) = fraction * std::sqrt(priors.priors[idx[j]].variance);
  }
  MhOptions mh;
  mh.adapt = config.get<bool>("mcmc.adapt");
  r.chain = mh_sample(target, init, scales, config.get<long>("mcmc.n_accept"),
                      config.get<std::size_t>("mcmc.burn_in"), derive_seed(seed, 1), mh,
                      priors.active_names());
  r.start = priors.expand(init);
  r.map = priors.expand(map_estimate(r.chain));

  const LatentForceModel lfm = build_latent_force_model(spec, r.map);
  const FilterResult filtered = sqrt_kalman_filter(lfm.model, data.y, data.u, lfm.obs_noise, lfm.init);
  const StateTrajectory smoothed = sqrt_rts_smoother(lfm.model, data.u, filtered.trajectory);
  r.smoothed_mean = smoothed.means();
  r.smoothed_var = smoothed.variances();
  r.y_hat = r.smoothed_mean * lfm.model.C.row(0).transpose() + input.u * lfm.model.D(0, 0);

  const int S = config.get<int>("fit.n_state_samples");
  r.state_samples = backward_samples(lfm.model, data.u, filtered.trajectory, S, derive_seed(seed, 2));
  const Eigen::Index T = input.y.size();
  r.rf_samples.z.resize(S * T);
  r.rf_samples.zdot.resize(S * T);
  r.rf_samples.f_hat.resize(S * T);
  for (int s = 0; s < S; ++s) {
    const auto& path = r.state_samples[static_cast<std::size_t>(s)];
    r.rf_samples.z.segment(s * T, T) = path.col(0);
    r.rf_samples.zdot.segment(s * T, T) = path.col(1);
    r.rf_samples.f_hat.segment(s * T, T) = path.col(lfm.force_index);
  }

  BlrOptions blr;
  blr.replicates = static_cast<std::size_t>(S);
  blr.basis.intercept = config.get<bool>("fit.intercept");
  blr.basis.velocity_terms = config.get<bool>("fit.velocity_terms");
  blr.weight_prior_variance = config.get<double>("fit.weight_prior_variance");
  const int max_order = config.get<int>("fit.max_order");
  r.scan = bic_scan(r.rf_samples.z, r.rf_samples.f_hat, max_order, blr, r.rf_samples.zdot);
  const int order = config.at("fit.order").is_null() ? r.scan.best_order : config.get<int>("fit.order");
  r.fit = order <= max_order ? r.scan.fits[static_cast<std::size_t>(order - 1)]
                             : blr_fit(r.rf_samples.z, r.rf_samples.f_hat, order, blr, r.rf_samples.zdot);
  r.alpha = r.fit.coefficient(1, 0);
  r.k_corrected = bias_correct(r.map[Param::Stiffness], r.alpha);

  r.nonlinear_model.m = r.map[Param::Mass];
  r.nonlinear_model.c = r.map[Param::Damping];
  r.nonlinear_model.k = r.k_corrected;
  for (std::size_t j = 0; j < r.fit.basis.size(); ++j) {
    const auto& mono = r.fit.basis[j];
    if (mono.z_degree == 1 && mono.zdot_degree == 0) continue;
    r.nonlinear_model.nl_terms.push_back({mono.z_degree, mono.zdot_degree, r.fit.weight_mean(static_cast<Eigen::Index>(j))});
  }
  r.linear_model.m = r.map[Param::Mass];
  r.linear_model.c = r.map[Param::Damping];
  r.linear_model.k = r.map[Param::Stiffness];

  r.residuals = residual_report(input.y, r.y_hat, input.fs,
                                static_cast<std::size_t>(config.get<int>("diagnostics.psd_segment")));

  if (input.truth) {
    const TruthStates& tr = *input.truth;
    if (tr.z.size() != T) throw DataError("identify: truth length differs from the data length");
    const ModelParameters& p = r.map;
    const Eigen::VectorXd z = r.smoothed_mean.col(0);
    const Eigen::VectorXd zd = r.smoothed_mean.col(1);
    const Eigen::VectorXd f = r.smoothed_mean.col(lfm.force_index);
    const Eigen::VectorXd acc =
        (input.u - p[Param::Stiffness] * z - p[Param::Damping] * zd - f) / p[Param::Mass];
    StateMetrics m;
    m.displacement = nmse(tr.z, z);
    m.velocity = nmse(tr.zdot, zd);
    m.acceleration = nmse(tr.zdd, acc);
    m.gp_state = nmse(tr.f_nl, f);
    m.total_restoring_force = nmse(tr.f_total, p[Param::Stiffness] * z + p[Param::Damping] * zd + f);
    r.metrics = m;
  }
  if (!options.keep_state_samples) r.state_samples.clear();
  return r;
}

PolynomialOde model_from_json(const json& model, bool linear_only) {
  try {
    return ode_from(model.at(linear_only ? "linear_model" : "nonlinear_model"));
  } catch (const json::exception& e) {
    throw DataError(std::string("model JSON is missing fields: ") + e.what());
  }
}

PredictResult predict(const PolynomialOde& ode, const Eigen::VectorXd& u, double dt, double z0,
                      double zdot0, const std::optional<Eigen::VectorXd>& truth,
                      const std::string& compare) {
  PredictResult out;
  out.response = simulate_identified(ode, u, dt, z0, zdot0);
  if (truth) {
    const Eigen::VectorXd sim = response_component(out.response, compare);
    out.nmse = nmse(*truth, sim);
    out.rmse = rmse(*truth, sim);
  }
  return out;
}

json SensitivityResult::report() const {
  json runs_json = json::array();
  for (std::size_t i = 0; i < runs.size(); ++i) {
    json entry = {{"prior_index", i}, {"posterior", runs[i].posterior_summary()},
                  {"k_corrected", runs[i].k_corrected}, {"order", runs[i].fit.order}};
    runs_json.push_back(entry);
  }
  json spread = json::object();
  for (std::size_t i = 0; i < kNumParams; ++i) {
    if (!priors.empty() && priors.front().priors[i].active) {
      spread[std::string(kParamNames[i])] = map_relative_spread[i];
    }
  }
  return {{"n_priors", runs.size()}, {"map_relative_spread", spread}, {"runs", runs_json}};
}

SensitivityResult prior_sensitivity(const RunConfig& config, const IdentificationInput& input,
                                    int n_priors, std::uint64_t seed) {
  if (n_priors < 1) throw InvalidArgument("prior sensitivity needs at least one prior");
  SensitivityResult out;
  const PriorSpec base = priors_from_config(config);
  for (int i = 0; i < n_priors; ++i) {
    out.priors.push_back(i == 0 ? base : perturb_priors(base, derive_seed(seed, 100 + static_cast<std::uint64_t>(i))));
    out.runs.push_back(identify(config, input, seed, out.priors.back(), IdentifyOptions{false}));
  }
  for (std::size_t p = 0; p < kNumParams; ++p) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo, sum = 0.0;
    for (const auto& r : out.runs) {
      lo = std::min(lo, r.map.values[p]);
      hi = std::max(hi, r.map.values[p]);
      sum += r.map.values[p];
    }
    const double mean = sum / static_cast<double>(out.runs.size());
    out.map_relative_spread[p] = mean != 0.0 ? (hi - lo) / std::abs(mean) : 0.0;
  }
  return out;
}

IdentificationInput load_identification_input(const RunConfig& config) {
  const auto path = config.get<std::string>("data.path");
  if (path.empty()) throw InvalidArgument("data.path is not set");
  CsvSchema schema;
  schema.required = {config.get<std::string>("data.u_column"), config.get<std::string>("data.y_column")};
  if (!config.at("data.fs").is_null()) schema.fs = config.get<double>("data.fs");
  const SeriesTable table = ingest_csv(path, schema);
  IdentificationInput in;
  in.u = table.column(schema.required[0]);
  in.y = table.column(schema.required[1]);
  in.fs = table.fs;
  const auto truth_path = config.get<std::string>("data.truth_path");
  if (!truth_path.empty()) {
    CsvSchema ts;
    ts.required = {"z", "zdot", "zdd", "f_nl", "f_total"};
    ts.fs = table.fs;
    const SeriesTable tt = ingest_csv(truth_path, ts);
    if (tt.size() != table.size()) throw DataError("truth file length differs from the data file");
    in.truth = TruthStates{tt.column("z"), tt.column("zdot"), tt.column("zdd"), tt.column("f_nl"), tt.column("f_total")};
  }
  return in;
}

SilverboxData load_silverbox(const RunConfig& config) {
  const auto path = config.get<std::string>("data.path");
  if (path.empty()) throw InvalidArgument("data.path must point to the Silverbox CSV (columns u, v)");
  CsvSchema schema;
  schema.required = {config.get<std::string>("data.u_column"), config.get<std::string>("data.y_column")};
  if (!config.at("data.fs").is_null()) schema.fs = config.get<double>("data.fs");
  schema.default_fs = config.get<double>("silverbox.fs");
  const SeriesTable table = ingest_csv(path, schema);
  return {table.column(schema.required[0]), table.column(schema.required[1]), table.fs};
}

SilverboxResult silverbox(const RunConfig& config, const SilverboxData& data, std::uint64_t seed) {
  const auto tr1 = config.get<long>("silverbox.train_end");
  const auto te0 = config.get<long>("silverbox.test_start");
  const auto te1 = config.get<long>("silverbox.test_end");
  const int factor = config.get<int>("silverbox.upsample");
  const long N = data.u.size();
  if (tr1 > N || te1 > N) {
    throw DataError("Silverbox index ranges exceed the record length (" + std::to_string(N) + ")");
  }
  const IdentificationInput input = silverbox_training_input(config, data);

  SilverboxResult out;
  out.identification = identify(config, input, seed, priors_from_config(config));
  out.test_u = data.u.segment(te0 - 1, te1 - te0 + 1);
  out.test_y = data.y.segment(te0 - 1, te1 - te0 + 1);
  const Eigen::VectorXd u_fine = upsample_cubic(out.test_u, factor);
  const double dt = 1.0 / input.fs;
  out.nonlinear_sim = downsample(simulate_identified(out.identification.nonlinear_model, u_fine, dt).z, factor);
  out.linear_sim = downsample(simulate_identified(out.identification.linear_model, u_fine, dt).z, factor);
  out.nonlinear_nmse = nmse(out.test_y, out.nonlinear_sim);
  out.linear_nmse = nmse(out.test_y, out.linear_sim);
  out.nonlinear_rmse = rmse(out.test_y, out.nonlinear_sim);
  out.linear_rmse = rmse(out.test_y, out.linear_sim);
  return out;
}

json run_simulate(const RunConfig& config, std::uint64_t seed, const fs::path& out_dir) {
  Manifest mf(out_dir, "simulate", config.tree());
  mf.set_seed("run", seed);
  return guarded(mf, [&] {
    const SimulatedDataset d = simulate_dataset(config, seed);
    mf.set_seed("excitation", d.excitation.seed);
    mf.set_seed("noise", d.noise_seed);
    mf.write_table("dataset.csv", {"t", "u", "y_clean", "y_noisy"}, {d.t, d.u, d.y_clean, d.y_noisy});
    mf.write_table("truth.csv", {"t", "u", "z", "zdot", "zdd", "f_nl", "f_total"},
                   {d.t, d.u, d.truth.z, d.truth.zdot, d.truth.zdd, d.truth.f_nl, d.truth.f_total});
    const json sidecar = {
        {"plant", ode_json(d.ode)},
        {"excitation",
         {{"kind", "jonswap_multisine"}, {"Hs", d.excitation.Hs}, {"Tp", d.excitation.Tp},
          {"n_freq", d.excitation.n_freq}, {"fs", d.excitation.fs}, {"n_samples", d.excitation.n_samples},
          {"gamma_peak", d.excitation.gamma_peak}, {"f_low_factor", d.excitation.f_low_factor},
          {"f_high_factor", d.excitation.f_high_factor}, {"seed", d.excitation.seed}}},
        {"integrator", {{"scheme", "newmark"}, {"gamma", 0.5}, {"beta", 0.25}}},
        {"observed", d.observed},
        {"noise_variance", config.get<double>("simulate.noise_variance")},
        {"noise_seed", d.noise_seed},
        {"noise_fraction", config.at("simulate.noise_fraction")},
        {"excitation_gain", d.excitation_gain},
        {"run_seed", seed}};
    mf.write_json("dataset.json", sidecar);
  });
}

json run_identify(const RunConfig& config, std::uint64_t seed, const fs::path& out_dir) {
  config.validate();
  Manifest mf(out_dir, "identify", config.tree());
  mf.set_seed("run", seed);
  mf.set_seed("chain", derive_seed(seed, 1));
  mf.set_seed("state_samples", derive_seed(seed, 2));
  return guarded(mf, [&] {
    const IdentificationInput input = load_identification_input(config);
    const IdentifyResult r = identify(config, input, seed, priors_from_config(config));
    write_identify_artifacts(mf, r, input, static_cast<std::size_t>(config.get<int>("diagnostics.psd_segment")));
  });
}

json run_predict(const fs::path& model_path, const fs::path& excitation_path, const fs::path& out_dir,
                 double z0, double zdot0, const std::string& truth_column, const std::string& compare,
                 bool linear_only, std::size_t psd_segment) {
  Manifest mf(out_dir, "predict",
              json{{"model", model_path.string()}, {"excitation", excitation_path.string()}, {"z0", z0},
                   {"zdot0", zdot0}, {"truth_column", truth_column}, {"compare", compare},
                   {"linear_only", linear_only}});
  return guarded(mf, [&] {
    std::ifstream in(model_path);
    if (!in) throw DataError("cannot open model '" + model_path.string() + "'");
    json model;
    try {
      model = json::parse(in);
    } catch (const json::parse_error& e) {
      throw DataError("model file is not valid JSON: " + std::string(e.what()));
    }
    const PolynomialOde ode = model_from_json(model, linear_only);
    CsvSchema schema;
    schema.required = {"u"};
    if (model.contains("dt")) schema.default_fs = 1.0 / model.at("dt").get<double>();
    const SeriesTable table = ingest_csv(excitation_path.string(), schema);
    std::optional<Eigen::VectorXd> truth;
    if (!truth_column.empty() && table.has(truth_column)) truth = table.column(truth_column);
    const PredictResult pr = predict(ode, table.column("u"), 1.0 / table.fs, z0, zdot0, truth, compare);
    const Eigen::VectorXd t = table.time();
    mf.write_table("response.csv", {"t", "u", "z", "zdot", "zdd"},
                   {t, table.column("u"), pr.response.z, pr.response.zdot, pr.response.zdd});
    json metrics = {{"compare", compare}, {"model", linear_only ? "linear" : "nonlinear"}};
    if (truth) {
      metrics["nmse_percent"] = *pr.nmse;
      metrics["rmse"] = *pr.rmse;
      const Eigen::VectorXd sim = response_component(pr.response, compare);
      const Periodogram pt = periodogram(*truth, table.fs, psd_segment);
      const Periodogram ps = periodogram(sim, table.fs, psd_segment);
      mf.write_table("psd.csv", {"frequency", "truth_power", "simulated_power"}, {pt.frequency, pt.power, ps.power});
    } else {
      metrics["note"] = "no truth column; metrics omitted";
    }
    mf.write_json("metrics.json", metrics);
  });
}

json run_prior_sensitivity(const RunConfig& config, int n_priors, std::uint64_t seed, const fs::path& out_dir) {
  config.validate();
  Manifest mf(out_dir, "prior-sensitivity", config.tree());
  mf.set_seed("run", seed);
  mf.set("n_priors", n_priors);
  return guarded(mf, [&] {
    SensitivityResult res;
    if (config.kind() == CaseKind::Silverbox) {
      res = prior_sensitivity(config, silverbox_training_input(config, load_silverbox(config)), n_priors, seed);
    } else {
      res = prior_sensitivity(config, load_identification_input(config), n_priors, seed);
    }
    for (std::size_t i = 0; i < res.runs.size(); ++i) {
      const std::string name = "chain_prior_" + std::to_string(i) + ".csv";
      std::ofstream out(mf.path(name), std::ios::binary);
      res.runs[i].chain.write_csv(out);
      out.close();
      mf.record(name);
    }
    std::vector<Eigen::VectorXd> cols(7, Eigen::VectorXd(static_cast<Eigen::Index>(res.runs.size() * kNumParams)));
    Eigen::Index row = 0;
    for (std::size_t i = 0; i < res.runs.size(); ++i) {
      const Eigen::VectorXd mean = res.runs[i].chain.retained_mean();
      const Eigen::VectorXd var = res.runs[i].chain.retained_variance();
      const auto idx = res.priors[i].active_indices();
      for (std::size_t p = 0; p < kNumParams; ++p, ++row) {
        const auto it = std::find(idx.begin(), idx.end(), p);
        const bool active = it != idx.end();
        const auto j = active ? static_cast<Eigen::Index>(it - idx.begin()) : 0;
        cols[0](row) = static_cast<double>(i);
        cols[1](row) = static_cast<double>(p);
        cols[2](row) = res.priors[i].priors[p].mean;
        cols[3](row) = res.priors[i].priors[p].variance;
        cols[4](row) = res.runs[i].map.values[p];
        cols[5](row) = active ? mean(j) : res.priors[i].priors[p].mean;
        cols[6](row) = active ? std::sqrt(var(j)) : 0.0;
      }
    }
    mf.write_table("sensitivity.csv",
                   {"prior_index", "param_index", "prior_mean", "prior_variance", "map", "posterior_mean", "posterior_std"},
                   cols);
    json report = res.report();
    json names = json::array();
    for (auto n : kParamNames) names.push_back(std::string(n));
    report["param_names"] = names;
    mf.write_json("sensitivity.json", report);
  });
}

json run_silverbox(const RunConfig& config, std::uint64_t seed, const fs::path& out_dir) {
  config.validate();
  Manifest mf(out_dir, "silverbox", config.tree());
  mf.set_seed("run", seed);
  mf.set_seed("chain", derive_seed(seed, 1));
  mf.set_seed("state_samples", derive_seed(seed, 2));
  return guarded(mf, [&] {
    const SilverboxData data = load_silverbox(config);
    const SilverboxResult res = silverbox(config, data, seed);
    const auto tr0 = config.get<long>("silverbox.train_start");
    const auto tr1 = config.get<long>("silverbox.train_end");
    const IdentificationInput input = silverbox_training_input(config, data);
    const auto psd_segment = static_cast<std::size_t>(config.get<int>("diagnostics.psd_segment"));
    write_identify_artifacts(mf, res.identification, input, psd_segment);

    const Eigen::VectorXd t = time_axis(res.test_u.size(), data.fs,
                                        static_cast<double>(config.get<long>("silverbox.test_start") - 1) / data.fs);
    mf.write_table("simulation.csv", {"t", "u", "y", "y_nonlinear", "y_linear"},
                   {t, res.test_u, res.test_y, res.nonlinear_sim, res.linear_sim});
    const Periodogram py = periodogram(res.test_y, data.fs, psd_segment);
    const Periodogram pn = periodogram(res.test_y - res.nonlinear_sim, data.fs, psd_segment);
    const Periodogram pl = periodogram(res.test_y - res.linear_sim, data.fs, psd_segment);
    mf.write_table("simulation_psd.csv", {"frequency", "y_power", "nonlinear_error_power", "linear_error_power"},
                   {py.frequency, py.power, pn.power, pl.power});
    const auto& p = res.identification.map;
    mf.write_json("silverbox_metrics.json",
                  {{"nonlinear_nmse_percent", res.nonlinear_nmse},
                   {"linear_nmse_percent", res.linear_nmse},
                   {"nonlinear_rmse", res.nonlinear_rmse},
                   {"linear_rmse", res.linear_rmse},
                   {"train_points", tr1 - tr0 + 1},
                   {"test_points", res.test_u.size()},
                   {"map", {{"m", p[Param::Mass]}, {"c", p[Param::Damping]}, {"k", p[Param::Stiffness]},
                            {"k_corrected", res.identification.k_corrected},
                            {"k3", res.identification.fit.coefficient(3, 0)}}}});
  });
}

}  // namespace lrf
