#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "k2v/alignment/losses.hpp"
#include "k2v/alignment/store.hpp"
#include "k2v/encoders/encoders.hpp"
#include "k2v/model/task.hpp"
#include "k2v/util/random.hpp"

namespace k2v::alignment {

struct TrainConfig {
  double alpha = 1.0;
  double margin = 0.4;
  std::size_t batch_size = 32;
  double learning_rate = 1e-4;
  std::size_t epochs = 40;
  std::uint64_t seed = 7;
  SalVariant sal = SalVariant::cosine;
  bool use_mkc = true;
  /// Episode spec: training tasks per model and epoch, per-category sample
  /// count drawn uniformly from [q_n_min, q_n_max].
  std::size_t tasks_per_model = 16;
  std::size_t q_n_min = 5;
  std::size_t q_n_max = 5;
  /// Restore the parameters of the epoch with the best validation R@1
  /// (the latest such epoch on ties).
  bool keep_best = true;
  /// Store vectors: the designated evaluation pool, or the mean over the
  /// evaluation and training pools.
  bool mean_pool_store = false;

  void validate() const;
};

using TaskSampler = std::function<QueryTask(std::size_t model, std::size_t q_n, Rng& rng)>;

struct LabeledQuery {
  QueryTask task;
  std::size_t model = 0;  // index of the model the task was drawn for
};

struct TrainingData {
  std::vector<std::string> model_ids;
  /// Graph sets from the training pools, per model.
  std::vector<std::vector<probe::KnowledgeGraphSet>> train_graphs;
  /// Graph set from each model's designated evaluation pool.
  std::vector<probe::KnowledgeGraphSet> eval_graphs;
  TaskSampler sample_task;
  std::vector<LabeledQuery> validation;

  void validate() const;
};

struct EpochLog {
  std::size_t epoch = 0;
  double loss = 0.0;
  double loss_mkc = 0.0;
  double loss_sal = 0.0;
  double val_r1 = 0.0;
};

struct TrainResult {
  nn::ParameterSet params;
  encoders::EncoderConfig encoder;
  EmbeddingStore store;
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
  /// Head accuracy over every training-pool graph set after training.
  double head_accuracy = 0.0;
};

/// Episode training of both encoders. All models are re-encoded each step
/// (with a random training pool each) because the parameters move. Single
/// threaded and bitwise reproducible for a fixed seed. `log_path`, when set,
/// receives one JSON line per epoch.
TrainResult train_proxy(const TrainingData& data, const encoders::EncoderConfig& encoder, const TrainConfig& config,
                        const std::optional<std::filesystem::path>& log_path = std::nullopt);

/// Frozen-parameter store from the evaluation graphs (and, with
/// mean_pool, the training graphs averaged in).
EmbeddingStore build_store(const TrainingData& data, const nn::ParameterSet& params,
                           const encoders::EncoderConfig& encoder, bool mean_pool);

/// Fraction of labeled queries whose top-1 retrieval is their own model.
double validation_r1(const std::vector<LabeledQuery>& queries, const std::vector<std::string>& model_ids,
                     const EmbeddingStore& store, const nn::ParameterSet& params,
                     const encoders::EncoderConfig& encoder);

std::string to_json_line(const EpochLog& e);

}  // namespace k2v::alignment
