#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace ftle::cli {

using Json = nlohmann::json;

/// Fully resolved experiment configuration: schema defaults, then the TOML file,
/// then flag overrides. Keys are "section.key" or top-level names.
class ExperimentConfig {
 public:
  /// Throws Error(ConfigError) naming the offending key for unknown keys or
  /// mistyped values.
  static ExperimentConfig resolve(const std::string& toml_path,
                                  const std::vector<std::pair<std::string, std::string>>& overrides);

  double number(const std::string& key) const;
  std::int64_t integer(const std::string& key) const;
  std::string text(const std::string& key) const;
  bool flag(const std::string& key) const;
  /// Accepts a JSON array, a scalar, a comma list, or an inclusive "lo:hi:step" range.
  std::vector<double> grid(const std::string& key) const;

  const Json& json() const { return data_; }
  /// FNV-1a 64 of the canonical (sorted-key, compact) JSON dump, without `threads` and `out`.
  std::string hash() const;

 private:
  Json data_;
};

/// Inclusive arithmetic grid lo, lo + step, ..., up to hi within 1e-9 step.
std::vector<double> parse_range(const std::string& spec);

std::uint64_t fnv1a64(const std::string& bytes);

}  // namespace ftle::cli
