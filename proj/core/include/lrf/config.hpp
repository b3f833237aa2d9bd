#pragma once

// Run configuration: a nested JSON document layered over built-in defaults,
// with dotted-path overrides from the command line.

#include <nlohmann/json.hpp>

#include <string>
#include <string_view>

namespace lrf {

enum class CaseKind { Duffing, Silverbox };

class RunConfig {
 public:
  /// Defaults for the simulated Duffing case or the Silverbox case.
  static RunConfig defaults(CaseKind kind = CaseKind::Duffing);
  /// Reads a JSON file and merges it over the defaults of its `case` field.
  /// Throws InvalidArgument on malformed JSON or unknown keys.
  static RunConfig load(const std::string& path);

  /// Sets `a.b.c` to `value`. The value is parsed as JSON when possible
  /// (numbers, booleans, null, arrays) and kept as a string otherwise.
  /// Unknown paths are rejected.
  void apply_override(std::string_view dotted_key, std::string_view value);

  /// Switches to MCMC budgets for the full-scale runs.
  void use_paper_scale();

  /// Checks types and ranges; resolves no paths.
  void validate() const;

  CaseKind kind() const;
  const nlohmann::json& tree() const { return tree_; }
  nlohmann::json& tree() { return tree_; }

  const nlohmann::json& at(std::string_view dotted_key) const;
  template <class T>
  T get(std::string_view dotted_key) const {
    return at(dotted_key).get<T>();
  }

 private:
  nlohmann::json tree_;
};

}  // namespace lrf
