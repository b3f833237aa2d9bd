// lrfid: command-line front end for simulation, identification and prediction
// with latent restoring force models.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

#include "lrf/config.hpp"
#include "lrf/errors.hpp"
#include "lrf/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::vector<std::string> sets;
  bool paper_scale = false;
  std::string data_path;
};

void add_config_options(CLI::App* cmd, CommonOptions& opts, bool stochastic) {
  cmd->add_option("-c,--config", opts.config_path, "JSON run configuration")->check(CLI::ExistingFile);
  if (stochastic) cmd->add_option("--seed", opts.seed, "Random seed (required)")->required();
  cmd->add_option("-o,--out", opts.out_dir, "Output directory (overrides output.dir)");
  cmd->add_option("--set", opts.sets, "Config override key=value (repeatable)");
  cmd->allow_extras();
  cmd->footer("Any config key may also be given directly, e.g. --mcmc.n_accept=5000.");
}

// Turns leftover `--a.b=value` / `--a.b value` tokens into key/value pairs.
std::vector<std::pair<std::string, std::string>> parse_extras(const std::vector<std::string>& extras) {
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& tok = extras[i];
    if (tok.rfind("--", 0) != 0 || tok.size() <= 2) {
      throw lrf::InvalidArgument("unexpected argument '" + tok + "'");
    }
    const std::string body = tok.substr(2);
    const auto eq = body.find('=');
    if (eq != std::string::npos) {
      out.emplace_back(body.substr(0, eq), body.substr(eq + 1));
    } else {
      if (i + 1 >= extras.size()) throw lrf::InvalidArgument("missing value for '" + tok + "'");
      out.emplace_back(body, extras[++i]);
    }
    if (out.back().first.find('.') == std::string::npos && out.back().first != "seed") {
      throw lrf::InvalidArgument("unknown option '" + tok + "'");
    }
  }
  return out;
}

lrf::RunConfig build_config(const CommonOptions& opts, const std::vector<std::string>& extras,
                            std::optional<lrf::CaseKind> forced_case = std::nullopt) {
  lrf::RunConfig cfg = opts.config_path.empty()
                           ? lrf::RunConfig::defaults(forced_case.value_or(lrf::CaseKind::Duffing))
                           : lrf::RunConfig::load(opts.config_path);
  if (opts.paper_scale) cfg.use_paper_scale();
  for (const auto& s : opts.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw lrf::InvalidArgument("--set expects key=value, got '" + s + "'");
    cfg.apply_override(s.substr(0, eq), s.substr(eq + 1));
  }
  for (const auto& [key, value] : parse_extras(extras)) cfg.apply_override(key, value);
  if (!opts.data_path.empty()) cfg.tree()["data"]["path"] = opts.data_path;
  if (!opts.out_dir.empty()) cfg.tree()["output"]["dir"] = opts.out_dir;
  if (opts.seed) cfg.tree()["seed"] = *opts.seed;
  cfg.validate();
  return cfg;
}

void report(const nlohmann::json& manifest) {
  std::cout << manifest.at("command").get<std::string>() << ": " << manifest.at("status").get<std::string>()
            << " (" << manifest.at("artifacts").size() << " artifacts)\n";
}

void print_file(const std::string& path) {
  std::ifstream in(path);
  if (in) std::cout << in.rdbuf() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latent restoring force identification toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "lrfid 0.1.0");

  CommonOptions sim_opts, id_opts, sens_opts, sb_opts;
  auto* simulate = app.add_subcommand("simulate", "Generate a simulated oscillator dataset");
  add_config_options(simulate, sim_opts, true);

  auto* identify = app.add_subcommand("identify", "Run the two-stage identification on a dataset");
  add_config_options(identify, id_opts, true);
  identify->add_option("--data", id_opts.data_path, "Dataset CSV (overrides data.path)");
  identify->add_flag("--paper-scale", id_opts.paper_scale, "Use the full MCMC budget");

  std::string model_path, excitation_path, predict_out = "predict_out", truth_column = "z",
                                           compare = "displacement";
  double z0 = 0.0, zdot0 = 0.0;
  bool linear_only = false;
  int psd_segment = 1024;
  auto* predict = app.add_subcommand("predict", "Simulate an identified model under a given excitation");
  predict->add_option("--model", model_path, "model.json from identify")->required()->check(CLI::ExistingFile);
  predict->add_option("--excitation", excitation_path, "CSV with a u column (t optional)")
      ->required()
      ->check(CLI::ExistingFile);
  predict->add_option("-o,--out", predict_out, "Output directory");
  predict->add_option("--z0", z0, "Initial displacement");
  predict->add_option("--zdot0", zdot0, "Initial velocity");
  predict->add_option("--truth-column", truth_column, "Column compared against the simulation when present");
  predict->add_option("--compare", compare, "Simulated quantity to compare")
      ->check(CLI::IsMember({"displacement", "velocity", "acceleration"}));
  predict->add_flag("--linear", linear_only, "Use the linear model instead of the nonlinear one");
  predict->add_option("--psd-segment", psd_segment, "Periodogram segment length")->check(CLI::Range(2, 1 << 24));

  int n_priors = 0;
  auto* sensitivity = app.add_subcommand("prior-sensitivity", "Repeat identification under perturbed priors");
  add_config_options(sensitivity, sens_opts, true);
  sensitivity->add_option("--data", sens_opts.data_path, "Dataset CSV (overrides data.path)");
  sensitivity->add_option("--n-priors", n_priors, "Number of priors (first is unperturbed)")->check(CLI::PositiveNumber);
  sensitivity->add_flag("--paper-scale", sens_opts.paper_scale, "Use the full MCMC budget");

  auto* sb = app.add_subcommand("silverbox", "Full Silverbox identification and test simulation");
  add_config_options(sb, sb_opts, true);
  sb->add_option("--data", sb_opts.data_path, "Silverbox CSV with columns u, v and a '# fs = ...' line");
  sb->add_flag("--paper-scale", sb_opts.paper_scale, "Use the full MCMC budget");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    nlohmann::json manifest;
    if (simulate->parsed()) {
      const auto cfg = build_config(sim_opts, simulate->remaining());
      manifest = lrf::run_simulate(cfg, *sim_opts.seed, cfg.get<std::string>("output.dir"));
    } else if (identify->parsed()) {
      const auto cfg = build_config(id_opts, identify->remaining());
      const std::string out = cfg.get<std::string>("output.dir");
      manifest = lrf::run_identify(cfg, *id_opts.seed, out);
      if (std::filesystem::exists(out + "/state_metrics.json")) print_file(out + "/state_metrics.json");
    } else if (predict->parsed()) {
      manifest = lrf::run_predict(model_path, excitation_path, predict_out, z0, zdot0, truth_column, compare,
                                  linear_only, static_cast<std::size_t>(psd_segment));
      print_file(predict_out + "/metrics.json");
    } else if (sensitivity->parsed()) {
      const auto cfg = build_config(sens_opts, sensitivity->remaining());
      const int n = n_priors > 0 ? n_priors : cfg.get<int>("sensitivity.n_priors");
      manifest = lrf::run_prior_sensitivity(cfg, n, *sens_opts.seed, cfg.get<std::string>("output.dir"));
    } else if (sb->parsed()) {
      const auto cfg = build_config(sb_opts, sb->remaining(), lrf::CaseKind::Silverbox);
      if (cfg.kind() != lrf::CaseKind::Silverbox) throw lrf::InvalidArgument("silverbox needs a silverbox config");
      const std::string out = cfg.get<std::string>("output.dir");
      manifest = lrf::run_silverbox(cfg, *sb_opts.seed, out);
      print_file(out + "/silverbox_metrics.json");
    }
    report(manifest);
    return kOk;
  } catch (const lrf::InvalidArgument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const lrf::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const lrf::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  }
}
