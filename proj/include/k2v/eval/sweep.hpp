#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "k2v/eval/experiment.hpp"

namespace k2v::eval {

enum class SweepAxis { zoo_size, q_n, embedding_dim, encoder_variant, sal_variant };

std::string to_string(SweepAxis a);
SweepAxis sweep_axis_from_string(const std::string& s);

/// Grid used when none is given: zoo sizes {4, 8, 12}, q_n {2..8},
/// E {64, 128, 256}, the 3x3 model/query variant grid, and the three
/// loss variants.
std::vector<std::string> default_grid(SweepAxis axis);

/// Copy of `base` with the axis set to `value`. q_n sets both the training
/// episode and evaluation query sizes; encoder variants read
/// "model/query" (or one name for both); loss variants are cosine,
/// contrastive and no_mkc. Throws InvalidArgument for a bad value.
ExperimentConfig apply_axis(const ExperimentConfig& base, SweepAxis axis, const std::string& value);

struct SweepRow {
  std::string value;
  MetricSummary benchmark;
  MetricSummary mixed;
  ParityReport parity;
  double validation_r1 = 0.0;
  double seconds = 0.0;
};

struct SweepError {
  std::string value;
  std::string code;
  std::string message;
};

struct SweepTable {
  SweepAxis axis = SweepAxis::q_n;
  std::vector<SweepRow> rows;
  std::vector<SweepError> errors;
};

/// One full train+eval cycle per grid value with every seed held fixed.
/// A failing cycle is recorded in `errors` and the sweep moves on.
SweepTable sweep(const ExperimentConfig& base, SweepAxis axis, const std::vector<std::string>& grid);

nlohmann::json to_json(const SweepTable& t);
std::string format_table(const SweepTable& t);

}  // namespace k2v::eval
