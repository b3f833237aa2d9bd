#include "lrf/config.hpp"

#include "lrf/errors.hpp"
#include "lrf/mcmc.hpp"

#include <fstream>
#include <vector>

namespace lrf {

namespace {

using nlohmann::json;

json priors_to_json(const PriorSpec& spec) {
  json out = json::object();
  for (std::size_t i = 0; i < kNumParams; ++i) {
    const auto& p = spec.priors[i];
    out[std::string(kParamNames[i])] = {{"mean", p.mean}, {"variance", p.variance}, {"free", p.active}};
  }
  return out;
}

std::vector<std::string> split_path(std::string_view dotted) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (start <= dotted.size()) {
    const auto pos = dotted.find('.', start);
    const auto part = dotted.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
    if (part.empty()) throw InvalidArgument("malformed config key '" + std::string(dotted) + "'");
    parts.emplace_back(part);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

// Recursively checks that every key of `patch` exists in `base`.
void check_known(const json& base, const json& patch, const std::string& prefix) {
  for (const auto& [key, value] : patch.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!base.contains(key)) throw InvalidArgument("unknown config key '" + path + "'");
    if (value.is_object() && base.at(key).is_object()) check_known(base.at(key), value, path);
  }
}

CaseKind parse_case(const std::string& name) {
  if (name == "duffing") return CaseKind::Duffing;
  if (name == "silverbox") return CaseKind::Silverbox;
  throw InvalidArgument("unknown case '" + name + "' (expected duffing or silverbox)");
}

}  // namespace

RunConfig RunConfig::defaults(CaseKind kind) {
  RunConfig cfg;
  const bool silver = kind == CaseKind::Silverbox;
  cfg.tree_ = json{
      {"case", silver ? "silverbox" : "duffing"},
      {"seed", nullptr},
      {"data",
       {{"path", ""},
        {"truth_path", ""},
        {"fs", nullptr},
        {"u_column", "u"},
        {"y_column", silver ? "v" : "y_noisy"}}},
      {"system",
       {{"observation", silver ? "displacement" : "acceleration"}, {"initial_std", 1e3}}},
      {"kernel", {{"smoothness", "1/2"}}},
      {"priors", priors_to_json(silver ? silverbox_priors() : duffing_priors())},
      {"mcmc",
       {{"n_accept", 2000},
        {"burn_in", 200},
        {"paper_n_accept", silver ? 10000 : 20000},
        {"paper_burn_in", 2000},
        {"init", "optimize"},
        {"scale_fraction", 0.02},
        {"adapt", true}}},
      {"fit",
       {{"max_order", 9},
        {"order", silver ? json(3) : json(nullptr)},
        {"n_state_samples", 50},
        {"intercept", false},
        {"velocity_terms", false},
        {"weight_prior_variance", 1e4}}},
      {"simulate",
       {{"m", 1.0},
        {"c", 0.4},
        {"k", 100.0},
        {"nonlinear", json::array({json{{"z_degree", 3}, {"zdot_degree", 0}, {"coefficient", 1000.0}}})},
        {"Hs", 2.5},
        {"Tp", 1.0},
        {"n_freq", 1000},
        {"fs", 100.0},
        {"n_samples", 12566},
        {"gamma_peak", 3.3},
        {"f_low_factor", 0.2},
        {"f_high_factor", 5.0},
        {"noise_variance", 0.05},
        {"noise_fraction", silver ? json(nullptr) : json(0.05)},
        {"observe", "acceleration"}}},
      {"silverbox",
       {{"train_start", 49278},
        {"train_end", 52350},
        {"test_start", 1},
        {"test_end", 40500},
        {"upsample", 4},
        {"fs", 610.35}}},
      {"sensitivity", {{"n_priors", 5}}},
      {"diagnostics", {{"psd_segment", 1024}}},
      {"output", {{"dir", "out"}}},
  };
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open config '" + path + "'");
  json patch;
  try {
    patch = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw InvalidArgument("config '" + path + "' is not valid JSON: " + e.what());
  }
  if (!patch.is_object()) throw InvalidArgument("config '" + path + "' must be a JSON object");
  const CaseKind kind = parse_case(patch.value("case", std::string("duffing")));
  RunConfig cfg = defaults(kind);
  check_known(cfg.tree_, patch, "");
  cfg.tree_.merge_patch(patch);
  cfg.validate();
  return cfg;
}

void RunConfig::apply_override(std::string_view dotted_key, std::string_view value) {
  const auto parts = split_path(dotted_key);
  json* node = &tree_;
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->is_object() || !node->contains(parts[i])) {
      throw InvalidArgument("unknown config key '" + std::string(dotted_key) + "'");
    }
    node = &(*node)[parts[i]];
  }
  if (!node->is_object() || !node->contains(parts.back())) {
    throw InvalidArgument("unknown config key '" + std::string(dotted_key) + "'");
  }
  json parsed = json::parse(value, nullptr, false);
  if (parsed.is_discarded()) parsed = std::string(value);
  (*node)[parts.back()] = std::move(parsed);
}

void RunConfig::use_paper_scale() {
  tree_["mcmc"]["n_accept"] = tree_["mcmc"]["paper_n_accept"];
  tree_["mcmc"]["burn_in"] = tree_["mcmc"]["paper_burn_in"];
}

CaseKind RunConfig::kind() const { return parse_case(tree_.at("case").get<std::string>()); }

const nlohmann::json& RunConfig::at(std::string_view dotted_key) const {
  const json* node = &tree_;
  for (const auto& part : split_path(dotted_key)) {
    if (!node->is_object() || !node->contains(part)) {
      throw InvalidArgument("unknown config key '" + std::string(dotted_key) + "'");
    }
    node = &node->at(part);
  }
  return *node;
}

void RunConfig::validate() const {
  try {
    kind();
    const auto n_accept = get<long>("mcmc.n_accept");
    const auto burn_in = get<long>("mcmc.burn_in");
    if (n_accept < 1 || burn_in < 0 || burn_in >= n_accept) {
      throw InvalidArgument("mcmc.n_accept must exceed mcmc.burn_in >= 0");
    }
    const auto init = get<std::string>("mcmc.init");
    if (init != "optimize" && init != "prior_mean") {
      throw InvalidArgument("mcmc.init must be 'optimize' or 'prior_mean'");
    }
    if (!(get<double>("mcmc.scale_fraction") > 0.0)) throw InvalidArgument("mcmc.scale_fraction must be positive");
    if (get<int>("fit.max_order") < 1) throw InvalidArgument("fit.max_order must be at least 1");
    if (!at("fit.order").is_null() && get<int>("fit.order") < 1) {
      throw InvalidArgument("fit.order must be null or at least 1");
    }
    if (get<int>("fit.n_state_samples") < 1) throw InvalidArgument("fit.n_state_samples must be at least 1");
    if (!(get<double>("fit.weight_prior_variance") > 0.0)) {
      throw InvalidArgument("fit.weight_prior_variance must be positive");
    }
    if (!(get<double>("system.initial_std") > 0.0)) throw InvalidArgument("system.initial_std must be positive");
    if (get<int>("diagnostics.psd_segment") < 2) throw InvalidArgument("diagnostics.psd_segment must be at least 2");
    if (get<int>("silverbox.upsample") < 1) throw InvalidArgument("silverbox.upsample must be at least 1");
    if (get<long>("silverbox.train_start") < 1 || get<long>("silverbox.train_end") < get<long>("silverbox.train_start") ||
        get<long>("silverbox.test_start") < 1 || get<long>("silverbox.test_end") < get<long>("silverbox.test_start")) {
      throw InvalidArgument("silverbox index ranges must be 1-based and non-empty");
    }
    if (get<int>("sensitivity.n_priors") < 1) throw InvalidArgument("sensitivity.n_priors must be at least 1");
    if (!at("seed").is_null()) get<std::uint64_t>("seed");
    for (std::size_t i = 0; i < kNumParams; ++i) {
      const auto& p = at("priors").at(std::string(kParamNames[i]));
      p.at("mean").get<double>();
      p.at("variance").get<double>();
      p.at("free").get<bool>();
    }
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("config value has the wrong type: ") + e.what());
  }
}

}  // namespace lrf
