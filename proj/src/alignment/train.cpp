#include "k2v/alignment/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>

#include "k2v/error.hpp"
#include "k2v/nn/adam.hpp"
#include "k2v/nn/functional.hpp"

namespace k2v::alignment {

using encoders::EncoderConfig;
using probe::KnowledgeGraphSet;

void TrainConfig::validate() const {
  if (alpha < 0.0) throw InvalidArgument("alpha must be >= 0");
  if (margin < 0.0 || margin >= 1.0) throw InvalidArgument("margin must lie in [0, 1)");
  if (batch_size == 0) throw InvalidArgument("batch_size must be positive");
  if (!(learning_rate > 0.0)) throw InvalidArgument("learning_rate must be positive");
  if (q_n_min < 2 || q_n_max < q_n_min) throw InvalidArgument("q_n range must satisfy 2 <= q_n_min <= q_n_max");
  if (tasks_per_model == 0) throw InvalidArgument("tasks_per_model must be positive");
}

void TrainingData::validate() const {
  const std::size_t m = model_ids.size();
  if (m < 2) throw InvalidArgument("training needs at least two models");
  if (train_graphs.size() != m || eval_graphs.size() != m) {
    throw InvalidArgument("training data must hold graph sets for every model");
  }
  std::string uncovered;
  for (std::size_t i = 0; i < m; ++i) {
    bool ok = eval_graphs[i].subgraphs.size() >= 2 && !train_graphs[i].empty();
    for (const auto& g : train_graphs[i]) ok = ok && g.subgraphs.size() >= 2;
    if (!ok) uncovered += (uncovered.empty() ? "" : ", ") + model_ids[i];
  }
  if (!uncovered.empty()) throw InvalidArgument("models without a usable graph set: " + uncovered);
  if (!sample_task) throw InvalidArgument("training data lacks a task sampler");
}

std::string to_json_line(const EpochLog& e) {
  return nlohmann::json{{"epoch", e.epoch},
                        {"loss", e.loss},
                        {"loss_mkc", e.loss_mkc},
                        {"loss_sal", e.loss_sal},
                        {"val_r1", e.val_r1}}
      .dump();
}

EmbeddingStore build_store(const TrainingData& data, const nn::ParameterSet& params, const EncoderConfig& encoder,
                           bool mean_pool) {
  std::vector<const KnowledgeGraphSet*> graphs;
  for (const auto& g : data.eval_graphs) graphs.push_back(&g);
  auto vectors = encoders::encode_model_batch(graphs, params, encoder);
  if (mean_pool) {
    for (std::size_t i = 0; i < vectors.size(); ++i) {
      std::vector<const KnowledgeGraphSet*> extra;
      for (const auto& g : data.train_graphs[i]) extra.push_back(&g);
      auto more = encoders::encode_model_batch(extra, params, encoder);
      for (const auto& v : more) {
        for (std::size_t j = 0; j < v.h.size(); ++j) vectors[i].h[j] += v.h[j];
      }
      for (double& x : vectors[i].h) x /= static_cast<double>(more.size() + 1);
      vectors[i].pool_id = "mean";
    }
  }
  EmbeddingStore store(encoder.embedding);
  for (auto& v : vectors) store.add(std::move(v));
  return store;
}

double validation_r1(const std::vector<LabeledQuery>& queries, const std::vector<std::string>& model_ids,
                     const EmbeddingStore& store, const nn::ParameterSet& params, const EncoderConfig& encoder) {
  if (queries.empty()) return 0.0;
  std::vector<const QueryTask*> tasks;
  for (const auto& q : queries) tasks.push_back(&q.task);
  const auto vectors = encoders::encode_query_batch(tasks, params, encoder);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    hits += retrieve(vectors[i], store, 1).chosen() == model_ids.at(queries[i].model);
  }
  return static_cast<double>(hits) / static_cast<double>(queries.size());
}

namespace {

double head_accuracy(const TrainingData& data, const nn::ParameterSet& params, const EncoderConfig& encoder) {
  std::size_t hits = 0, total = 0;
  for (std::size_t i = 0; i < data.train_graphs.size(); ++i) {
    std::vector<const KnowledgeGraphSet*> graphs;
    for (const auto& g : data.train_graphs[i]) graphs.push_back(&g);
    for (const auto& h : encoders::encode_model_batch(graphs, params, encoder)) {
      hits += nn::argmax(encoders::classifier_logits(h, params, encoder)) == i;
      ++total;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace

TrainResult train_proxy(const TrainingData& data, const EncoderConfig& encoder, const TrainConfig& config,
                        const std::optional<std::filesystem::path>& log_path) {
  config.validate();
  data.validate();
  const std::size_t m = data.model_ids.size();
  if (encoder.model_count != m) {
    throw InvalidArgument("encoder head has " + std::to_string(encoder.model_count) + " outputs for " +
                          std::to_string(m) + " models");
  }
  nn::ParameterSet params = encoders::make_encoder_params(encoder);
  nn::AdamState adam;
  adam.learning_rate = config.learning_rate;
  Rng rng(derive_seed(config.seed, {0xa1}));
  LossWeights weights{config.alpha, config.margin, config.sal, config.use_mkc};

  std::ofstream log_file;
  if (log_path) {
    if (log_path->has_parent_path()) std::filesystem::create_directories(log_path->parent_path());
    log_file.open(*log_path, std::ios::trunc);
    if (!log_file) throw Error("io", "cannot write training log " + log_path->string());
  }

  TrainResult result{params, encoder, EmbeddingStore(encoder.embedding), {}, 0, 0.0};
  double best_r1 = -1.0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < m; ++i) order.insert(order.end(), config.tasks_per_model, i);
    std::shuffle(order.begin(), order.end(), rng);
    EpochLog log{.epoch = epoch};
    std::size_t steps = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<const KnowledgeGraphSet*> graphs;
      for (std::size_t i = 0; i < m; ++i) {
        const auto& pools = data.train_graphs[i];
        graphs.push_back(&pools[rng() % pools.size()]);
      }
      std::vector<QueryTask> tasks;
      std::vector<std::size_t> truth(order.begin() + static_cast<std::ptrdiff_t>(start),
                                     order.begin() + static_cast<std::ptrdiff_t>(end));
      for (std::size_t i : truth) {
        const std::size_t q_n = config.q_n_min + rng() % (config.q_n_max - config.q_n_min + 1);
        tasks.push_back(data.sample_task(i, q_n, rng));
      }
      std::vector<const QueryTask*> task_ptrs;
      for (const auto& t : tasks) task_ptrs.push_back(&t);

      nn::Tape tape;
      LossTerms loss;
      try {
        nn::Var h = encoders::encode_models(tape, params, encoder, graphs);
        nn::Var t = encoders::encode_queries(tape, params, encoder, task_ptrs);
        loss = total_loss(tape, params, encoder, h, t, truth, weights);
      } catch (const NonFiniteError& e) {
        throw NonFiniteError("training diverged at epoch " + std::to_string(epoch) + ", step " +
                             std::to_string(steps) + ": " + e.what());
      }
      const double value = loss.total.scalar();
      if (!std::isfinite(value)) {
        throw NonFiniteError("non-finite loss at epoch " + std::to_string(epoch) + ", step " + std::to_string(steps));
      }
      tape.backward(loss.total);
      nn::adam_step(params, adam);
      log.loss += value;
      log.loss_mkc += loss.mkc.scalar();
      log.loss_sal += loss.sal.scalar();
      ++steps;
    }
    log.loss /= static_cast<double>(steps);
    log.loss_mkc /= static_cast<double>(steps);
    log.loss_sal /= static_cast<double>(steps);
    const EmbeddingStore store = build_store(data, params, encoder, config.mean_pool_store);
    log.val_r1 = validation_r1(data.validation, data.model_ids, store, params, encoder);
    result.log.push_back(log);
    if (log_file) log_file << to_json_line(log) << '\n' << std::flush;
    if (!config.keep_best || log.val_r1 >= best_r1) {
      best_r1 = log.val_r1;
      result.best_epoch = epoch;
      result.params = params;
    }
  }
  result.params.zero_grad();
  result.store = build_store(data, result.params, encoder, config.mean_pool_store);
  result.head_accuracy = head_accuracy(data, result.params, encoder);
  return result;
}

}  // namespace k2v::alignment
