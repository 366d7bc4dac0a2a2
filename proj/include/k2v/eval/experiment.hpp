#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "k2v/alignment/train.hpp"
#include "k2v/eval/oracle.hpp"
#include "k2v/probe/probe.hpp"
#include "k2v/zoo/pools.hpp"
#include "k2v/zoo/zoo.hpp"

namespace k2v::eval {

/// Every knob of one end-to-end run. Per-stage seeds are derived from
/// `seed` by `resolved()`.
struct ExperimentConfig {
  std::uint64_t seed = 20240601;
  zoo::ZooConfig zoo;
  zoo::PoolConfig pools;
  probe::ProbeConfig probe;
  encoders::EncoderConfig encoder;
  alignment::TrainConfig train;
  /// Categories per query task (identity-prefix label map onto each model).
  std::size_t task_categories = 4;
  std::size_t validation_tasks_per_model = 2;
  std::size_t eval_tasks_per_model = 5;
  std::size_t eval_q_n = 5;
  std::size_t mixed_tasks = 20;
  std::size_t mixed_q_n = 10;
  OracleConfig oracle;
  /// Head-finetune is available but saturates at 1.0 on this zoo.
  OracleConfig mixed_oracle;

  /// Copy with seeds propagated and model_count/feature_dim synced between
  /// the zoo and the encoder head.
  ExperimentConfig resolved() const;
  void validate() const;
};

/// Probe results of one model under each pool kind.
struct ModelProbes {
  std::vector<probe::ProbeResult> training;
  probe::ProbeResult evaluation;
  probe::ProbeResult training_data;
};

std::vector<zoo::DomainData> zoo_domains(const zoo::Zoo& zoo);

/// Which pools to probe: the external ones (training + evaluation), the
/// models' own training data, or both.
enum class PoolSet { external, training_data, all };

std::string to_string(PoolSet s);
PoolSet pool_set_from_string(const std::string& s);

/// Probes every model with its pools (parallel across models), then calls
/// require_coverage.
std::vector<ModelProbes> probe_zoo(const zoo::Zoo& zoo, const std::vector<zoo::DomainData>& domains,
                                   const ExperimentConfig& config, PoolSet which = PoolSet::all);
/// Same without the coverage check; unprobed pool kinds stay empty.
std::vector<ModelProbes> probe_zoo_unchecked(const zoo::Zoo& zoo, const std::vector<zoo::DomainData>& domains,
                                             const ExperimentConfig& config, PoolSet which = PoolSet::all);
/// Throws ProbePoolUnsuitableError naming every model with a probed pool
/// that covers fewer than two categories.
void require_coverage(const std::vector<std::string>& model_ids, const std::vector<ModelProbes>& probes,
                      PoolSet which);

/// Training tasks come from each domain's query split, validation tasks
/// from its validation split.
alignment::TrainingData make_training_data(const zoo::Zoo& zoo, const std::vector<zoo::DomainData>& domains,
                                           const std::vector<ModelProbes>& probes, const ExperimentConfig& config);

/// Held-out benchmark: eval_tasks_per_model tasks from each test split.
std::vector<alignment::LabeledQuery> benchmark_tasks(const std::vector<zoo::DomainData>& domains,
                                                     const ExperimentConfig& config);

/// Tasks whose category c is drawn from category c of a randomly chosen
/// domain (one independent domain per category); sources may repeat.
std::vector<QueryTask> mixed_domain_tasks(const zoo::Zoo& zoo, const std::vector<zoo::DomainData>& domains,
                                          const ExperimentConfig& config);

struct MetricSummary {
  std::size_t tasks = 0;
  double r1 = 0.0;
  double r3 = 0.0;
  /// Oracle accuracy of the retrieved top-1 model, averaged over tasks.
  double top1_accuracy = 0.0;
  double pearson = 0.0;
  double spearman = 0.0;
  std::vector<double> pearson_per_task;
  std::vector<double> spearman_per_task;
  /// Tasks dropped from the correlation means (constant oracle row).
  std::size_t undefined_correlations = 0;
  double runtime_seconds = 0.0;
};

nlohmann::json to_json(const MetricSummary& s);

/// Retrieval of every task against the store plus all metrics vs. `oracle`.
MetricSummary summarize(const std::vector<alignment::Retrieval>& retrievals, const OracleTable& oracle);

std::vector<alignment::Retrieval> retrieve_all(const std::vector<QueryTask>& tasks, const alignment::EmbeddingStore& store,
                                               const nn::ParameterSet& params, const encoders::EncoderConfig& encoder);

alignment::EmbeddingStore store_from_probes(const std::vector<ModelProbes>& probes, bool training_data,
                                            const nn::ParameterSet& params, const encoders::EncoderConfig& encoder);

struct ParityReport {
  double r1_external = 0.0;
  double r1_training_data = 0.0;
  double gap = 0.0;
  /// Fraction of tasks whose top-1 pick is the same under both stores.
  double agreement = 0.0;
};

/// Same encoder, same benchmark, two store provenances.
ParityReport probe_parity_experiment(const std::vector<QueryTask>& tasks, const OracleTable& oracle,
                                     const alignment::EmbeddingStore& external,
                                     const alignment::EmbeddingStore& training_data, const nn::ParameterSet& params,
                                     const encoders::EncoderConfig& encoder);

struct ExperimentResult {
  alignment::TrainResult training;
  MetricSummary benchmark;
  MetricSummary mixed;
  ParityReport parity;
  double zoo_seconds = 0.0;
  double probe_seconds = 0.0;
  double train_seconds = 0.0;
  double eval_seconds = 0.0;
};

/// Zoo build, probing, training and every evaluation, in memory.
ExperimentResult run_experiment(const ExperimentConfig& config,
                                const std::optional<std::filesystem::path>& log_path = std::nullopt);

}  // namespace k2v::eval
