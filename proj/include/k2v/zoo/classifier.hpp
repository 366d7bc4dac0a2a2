#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "k2v/error.hpp"
#include "k2v/model/black_box.hpp"
#include "k2v/model/task.hpp"
#include "k2v/nn/parameters.hpp"
#include "k2v/zoo/domain.hpp"

namespace k2v::zoo {

struct ClassifierConfig {
  std::size_t hidden = 32;
  double learning_rate = 0.01;
  std::size_t max_epochs = 400;
  /// Training stops early once the full-batch loss falls below this.
  double target_loss = 0.01;
  double min_val_acc = 0.90;
  std::uint64_t seed = 0;
};

/// Raised when a classifier misses min_val_acc; carries the value reached.
class UnderTrainedError : public Error {
 public:
  UnderTrainedError(const std::string& model_id, double achieved, double required);
  double achieved() const noexcept { return achieved_; }

 private:
  double achieved_;
};

/// Two-layer perceptron x -> tanh(x W1 + b1) W2 + b2 -> softmax.
///
/// Inference uses fixed-order scalar loops, so single and batched
/// predictions are bitwise identical and independent of thread count.
class ZooModel final : public BlackBoxModel {
 public:
  ZooModel(std::string model_id, nn::ParameterSet params, std::string domain_digest, double val_acc);

  const std::string& model_id() const override { return model_id_; }
  std::size_t category_count() const override { return k_; }
  std::vector<double> predict_proba(std::span<const double> x) const override;

  std::size_t input_dim() const noexcept { return d_; }
  std::size_t hidden_width() const noexcept { return hidden_; }
  /// [n x d] -> [n x k].
  nn::Tensor predict_batch(const nn::Tensor& x) const;
  /// Hidden-layer activations; white-box access reserved for the oracle.
  std::vector<double> hidden_features(std::span<const double> x) const;

  const nn::ParameterSet& parameters() const noexcept { return params_; }
  const std::string& domain_digest() const noexcept { return domain_digest_; }
  double validation_accuracy() const noexcept { return val_acc_; }

 private:
  std::string model_id_;
  nn::ParameterSet params_;
  std::string domain_digest_;
  double val_acc_;
  std::size_t d_ = 0, hidden_ = 0, k_ = 0;
};

/// Fits a classifier on `data.train`; throws UnderTrainedError if the
/// validation accuracy stays below `config.min_val_acc`.
ZooModel train_classifier(const std::string& model_id, const SyntheticDomainSpec& spec, const DomainData& data,
                          const ClassifierConfig& config);

double accuracy_on(const ZooModel& model, const LabeledSet& set);

/// Fraction of task samples whose argmax matches the (mapped) label.
/// `label_map[c]` is the model category for task label c; identity if absent.
double evaluate_accuracy(const ZooModel& model, const QueryTask& task,
                         const std::optional<std::vector<std::size_t>>& label_map = std::nullopt);

struct FinetuneConfig {
  std::size_t steps = 100;
  double learning_rate = 0.01;
  std::uint64_t seed = 0;
};

/// Refits only the output layer (warm-started from the model's own head,
/// restricted to the task's k_T categories) on a per-category split of the
/// task and reports accuracy on the held-out remainder. The hidden layer is
/// never modified.
double head_finetune_accuracy(const ZooModel& model, const QueryTask& task, double split_ratio,
                              const FinetuneConfig& config = {});

}  // namespace k2v::zoo
