#pragma once

// End-to-end workflows: dataset generation, two-stage identification,
// forward prediction, prior-sensitivity studies and the Silverbox run.
// The in-memory functions return everything the artifact writers emit.

#include "lrf/config.hpp"
#include "lrf/diagnostics.hpp"
#include "lrf/mcmc.hpp"
#include "lrf/nonlin_fit.hpp"
#include "lrf/simulate.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace lrf {

/// Deterministic derivation of independent stream seeds from one run seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

struct TruthStates {
  Eigen::VectorXd z, zdot, zdd;
  Eigen::VectorXd f_nl;     ///< nonlinear part of the restoring force
  Eigen::VectorXd f_total;  ///< full restoring force c z' + k z + f_nl
};

struct SimulatedDataset {
  double fs = 0.0;
  Eigen::VectorXd t, u, y_clean, y_noisy;
  TruthStates truth;
  PolynomialOde ode;
  ExcitationSpec excitation;
  std::string observed;  ///< which response quantity y holds
  std::uint64_t noise_seed = 0;
  /// Factor applied to the multisine so that the noise standard deviation is
  /// the configured fraction of the clean signal's (1 when not calibrated).
  double excitation_gain = 1.0;
};

/// Builds the plant and excitation from the `simulate` section and integrates it.
SimulatedDataset simulate_dataset(const RunConfig& config, std::uint64_t seed);
PolynomialOde plant_from_config(const RunConfig& config);
PriorSpec priors_from_config(const RunConfig& config);

struct IdentificationInput {
  Eigen::VectorXd u, y;
  double fs = 0.0;
  std::optional<TruthStates> truth;
};

struct StateMetrics {
  double displacement = 0.0;
  double velocity = 0.0;
  double acceleration = 0.0;
  double gp_state = 0.0;
  double total_restoring_force = 0.0;
};

struct IdentifyResult {
  LatentForceModelSpec model_spec;
  PriorSpec priors;
  ParameterChain chain;
  ModelParameters start;  ///< chain initial state
  ModelParameters map;
  Eigen::MatrixXd smoothed_mean;  ///< T x n
  Eigen::MatrixXd smoothed_var;   ///< T x n
  Eigen::VectorXd y_hat;          ///< smoothed observation estimate
  std::vector<Eigen::MatrixXd> state_samples;  ///< S draws, each T x n
  RestoringForceSamples rf_samples;            ///< all draws stacked
  BicScan scan;
  PolynomialPosterior fit;  ///< selected order
  double alpha = 0.0;
  double k_corrected = 0.0;
  PolynomialOde nonlinear_model;
  PolynomialOde linear_model;  ///< MAP (m, c, k) with the GP removed
  ResidualReport residuals;
  std::optional<StateMetrics> metrics;

  nlohmann::json posterior_summary() const;
  nlohmann::json model_json() const;
};

struct IdentifyOptions {
  bool keep_state_samples = true;
};

/// Runs MCMC, smoothing, backward sampling and the polynomial fit.
IdentifyResult identify(const RunConfig& config, const IdentificationInput& input,
                        std::uint64_t seed, const PriorSpec& priors,
                        const IdentifyOptions& options = {});

/// Model JSON as written by the identify pipeline, back to an ODE.
PolynomialOde model_from_json(const nlohmann::json& model, bool linear_only = false);

struct PredictResult {
  Response response;
  std::optional<double> nmse;
  std::optional<double> rmse;
};

/// Simulates `ode` under u; metrics against `truth` when given.
PredictResult predict(const PolynomialOde& ode, const Eigen::VectorXd& u, double dt,
                      double z0, double zdot0,
                      const std::optional<Eigen::VectorXd>& truth = std::nullopt,
                      const std::string& compare = "displacement");

struct SensitivityResult {
  std::vector<PriorSpec> priors;
  std::vector<IdentifyResult> runs;
  /// (max - min) / |mean| of the MAP value across runs, per parameter.
  std::array<double, kNumParams> map_relative_spread{};
  nlohmann::json report() const;
};

SensitivityResult prior_sensitivity(const RunConfig& config, const IdentificationInput& input,
                                    int n_priors, std::uint64_t seed);

struct SilverboxData {
  Eigen::VectorXd u, y;
  double fs = 0.0;
};

SilverboxData load_silverbox(const RunConfig& config);

struct SilverboxResult {
  IdentifyResult identification;
  Eigen::VectorXd test_u, test_y;
  Eigen::VectorXd nonlinear_sim, linear_sim;  ///< at the original rate
  double nonlinear_nmse = 0.0;
  double linear_nmse = 0.0;
  double nonlinear_rmse = 0.0;
  double linear_rmse = 0.0;
};

SilverboxResult silverbox(const RunConfig& config, const SilverboxData& data, std::uint64_t seed);

/// Loads identification data from `data.path` (and `data.truth_path`).
IdentificationInput load_identification_input(const RunConfig& config);

// Command-level entry points; each writes its artifacts plus manifest.json
// into `out_dir` and returns the manifest.
nlohmann::json run_simulate(const RunConfig& config, std::uint64_t seed,
                            const std::filesystem::path& out_dir);
nlohmann::json run_identify(const RunConfig& config, std::uint64_t seed,
                            const std::filesystem::path& out_dir);
nlohmann::json run_predict(const std::filesystem::path& model_path,
                           const std::filesystem::path& excitation_path,
                           const std::filesystem::path& out_dir, double z0, double zdot0,
                           const std::string& truth_column, const std::string& compare,
                           bool linear_only, std::size_t psd_segment = 1024);
nlohmann::json run_prior_sensitivity(const RunConfig& config, int n_priors, std::uint64_t seed,
                                     const std::filesystem::path& out_dir);
nlohmann::json run_silverbox(const RunConfig& config, std::uint64_t seed,
                             const std::filesystem::path& out_dir);

}  // namespace lrf
