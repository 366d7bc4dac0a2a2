#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace k2v::cli {

/// Resolves the layered run configuration: defaults, then the JSON file
/// (if any), then K2V_SEED from `env_seed` (if non-empty), then the dotted
/// `--section.key=value` overrides in order. Returns the full config JSON.
nlohmann::json resolve_config(const std::string& config_file, const std::string& env_seed,
                              const std::vector<std::string>& overrides);

/// Entry point shared by the binary and the tests. `args` excludes the
/// program name. Returns the process exit code; failures print one JSON
/// object {"error": {code, message, command}} on `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace k2v::cli
