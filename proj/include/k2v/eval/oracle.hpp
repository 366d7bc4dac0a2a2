#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "k2v/model/task.hpp"
#include "k2v/zoo/zoo.hpp"

namespace k2v::eval {

enum class OracleMode { direct, head_finetune };

std::string to_string(OracleMode m);
OracleMode oracle_mode_from_string(const std::string& s);

struct OracleConfig {
  OracleMode mode = OracleMode::direct;
  double split_ratio = 0.5;
  zoo::FinetuneConfig finetune;
  /// 0 = hardware concurrency.
  std::size_t threads = 0;
};

/// accuracy[t][j]: model j on task t, every entry filled.
struct OracleTable {
  OracleMode mode = OracleMode::direct;
  std::vector<std::string> task_ids;
  std::vector<std::string> model_ids;
  std::vector<std::vector<double>> accuracy;

  std::size_t best_model(std::size_t task) const;
};

/// Exhaustive evaluation of every zoo model on every task (identity label
/// map). Work is split across threads by (task, model) pair; results do
/// not depend on the thread count.
OracleTable build_oracle(const std::vector<QueryTask>& tasks, const zoo::Zoo& zoo, const OracleConfig& config = {});

}  // namespace k2v::eval
