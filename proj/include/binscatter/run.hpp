#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace binscatter {

inline constexpr const char* kVersion = "1.0.0";

/// Everything that determines a run's numbers. Output paths live outside so a
/// recorded config reproduces the same document.
struct RunConfig {
  std::string subcommand;  // fit, select, band, test-spec, test-shape, compare
  std::string data;
  std::string y;
  std::string x;
  std::vector<std::string> w;
  std::string group;
  std::string model = "ls";
  int p = 0;
  std::string s = "p";  // "0" or "p"
  int v = 0;
  std::optional<std::size_t> nbins;
  std::string nbins_select = "rot";
  std::string binspos = "qs";
  double level = 0.05;
  int nsims = 50000;
  std::optional<std::uint64_t> seed;
  std::string at = "mean";
  std::string target;  // empty: derived from v (or marginal for test-shape)
  std::string pselect;  // "pmin:pmax"
  std::string null_spec = "poly:1";
  std::string shape = "decreasing";
  unsigned threads = 1;  // not recorded; results do not depend on it
};

nlohmann::json config_to_json(const RunConfig& c);
/// Accepts a bare config object or a full result document (uses meta.config).
RunConfig config_from_json(const nlohmann::json& j);

/// Checks flag combinations before any computation. Throws InvalidArgument.
void validate_config(const RunConfig& c);

struct RunOutput {
  nlohmann::json document;
  std::string svg;  // empty unless a band was computed
};

RunOutput run(const RunConfig& c);

/// Serialized document as written by the CLI.
std::string dump_document(const nlohmann::json& doc);

}  // namespace binscatter
