#pragma once

#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "k2v/eval/experiment.hpp"

namespace k2v::eval {

/// Nested JSON view of every field, grouped by section (seed, zoo, pools,
/// probe, encoder, train, eval).
nlohmann::json to_json(const ExperimentConfig& c);
/// Strict inverse of to_json: missing keys keep their defaults, unknown
/// keys and wrongly typed values throw InvalidArgument.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);

/// Recursively overlays `patch` onto `base`; every patch key must already
/// exist in `base` (InvalidArgument naming the dotted path otherwise).
void merge_config(nlohmann::json& base, const nlohmann::json& patch, const std::string& prefix = "");

/// Sets the leaf at a dotted path ("train.epochs") from text, converting
/// to the type of the existing value.
void set_dotted(nlohmann::json& config, const std::string& path, const std::string& text);

/// Hex hash of the canonical JSON dump.
std::string config_digest(const ExperimentConfig& c);

}  // namespace k2v::eval
