#include "k2v/zoo/classifier.hpp"

#include <algorithm>
#include <cmath>

#include "k2v/nn/adam.hpp"
#include "k2v/nn/functional.hpp"
#include "k2v/nn/layers.hpp"
#include "k2v/nn/tape.hpp"

namespace k2v::zoo {

UnderTrainedError::UnderTrainedError(const std::string& model_id, double achieved, double required)
    : Error("under_trained", "model '" + model_id + "' reached validation accuracy " + std::to_string(achieved) +
                                 " < required " + std::to_string(required)),
      achieved_(achieved) {}

ZooModel::ZooModel(std::string model_id, nn::ParameterSet params, std::string domain_digest, double val_acc)
    : model_id_(std::move(model_id)), params_(std::move(params)), domain_digest_(std::move(domain_digest)), val_acc_(val_acc) {
  const nn::Tensor& w1 = params_.at("fc1.weight").value;
  const nn::Tensor& w2 = params_.at("fc2.weight").value;
  d_ = w1.rows();
  hidden_ = w1.cols();
  k_ = w2.cols();
  if (w2.rows() != hidden_ || params_.at("fc1.bias").value.cols() != hidden_ || params_.at("fc2.bias").value.cols() != k_) {
    throw DimensionError("classifier '" + model_id_ + "': inconsistent layer shapes");
  }
}

std::vector<double> ZooModel::hidden_features(std::span<const double> x) const {
  if (x.size() != d_) {
    throw DimensionError("model '" + model_id_ + "' expects inputs of dimension " + std::to_string(d_) + ", got " +
                         std::to_string(x.size()));
  }
  const nn::Tensor& w1 = params_.at("fc1.weight").value;
  const nn::Tensor& b1 = params_.at("fc1.bias").value;
  std::vector<double> h(b1.values().begin(), b1.values().end());
  for (std::size_t i = 0; i < d_; ++i) {
    const double xi = x[i];
    const auto row = w1.row_span(i);
    for (std::size_t j = 0; j < hidden_; ++j) h[j] += xi * row[j];
  }
  for (double& v : h) v = std::tanh(v);
  return h;
}

std::vector<double> ZooModel::predict_proba(std::span<const double> x) const {
  const auto h = hidden_features(x);
  const nn::Tensor& w2 = params_.at("fc2.weight").value;
  const nn::Tensor& b2 = params_.at("fc2.bias").value;
  std::vector<double> z(b2.values().begin(), b2.values().end());
  for (std::size_t j = 0; j < hidden_; ++j) {
    const auto row = w2.row_span(j);
    for (std::size_t c = 0; c < k_; ++c) z[c] += h[j] * row[c];
  }
  return nn::softmax(z);
}

nn::Tensor ZooModel::predict_batch(const nn::Tensor& x) const {
  nn::Tensor out({x.rows(), k_});
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto p = predict_proba(x.row_span(r));
    std::ranges::copy(p, out.row_span(r).begin());
  }
  return out;
}

double accuracy_on(const ZooModel& model, const LabeledSet& set) {
  if (set.size() == 0) throw InvalidArgument("accuracy on an empty set");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (nn::argmax(model.predict_proba(set.samples.row_span(i))) == set.labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(set.size());
}

ZooModel train_classifier(const std::string& model_id, const SyntheticDomainSpec& spec, const DomainData& data,
                          const ClassifierConfig& config) {
  spec.validate();
  const std::size_t k = spec.category_count;
  nn::ParameterSet params(config.seed);
  nn::add_dense(params, "fc1", spec.feature_dim, config.hidden);
  nn::add_dense(params, "fc2", config.hidden, k);
  nn::AdamState adam;
  adam.learning_rate = config.learning_rate;

  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    nn::Tape tape;
    nn::Var x = tape.constant(data.train.samples);
    nn::Var hidden = nn::tanh(nn::dense_forward(tape, x, params, "fc1"));
    nn::Var logits = nn::dense_forward(tape, hidden, params, "fc2");
    nn::Var loss = nn::mean(nn::softmax_cross_entropy(logits, data.train.labels));
    const double value = loss.scalar();
    tape.backward(loss);
    nn::adam_step(params, adam);
    if (value < config.target_loss) break;
  }

  ZooModel probe(model_id, params, spec.digest(), 0.0);
  const double val_acc = accuracy_on(probe, data.validation);
  if (val_acc < config.min_val_acc) throw UnderTrainedError(model_id, val_acc, config.min_val_acc);
  return ZooModel(model_id, std::move(params), spec.digest(), val_acc);
}

double evaluate_accuracy(const ZooModel& model, const QueryTask& task,
                         const std::optional<std::vector<std::size_t>>& label_map) {
  if (task.size() == 0) throw InvalidArgument("accuracy of an empty task is undefined");
  if (label_map && label_map->size() < task.category_count) {
    throw InvalidArgument("label map covers " + std::to_string(label_map->size()) + " of " +
                          std::to_string(task.category_count) + " task categories");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < task.size(); ++i) {
    const std::size_t target = label_map ? (*label_map)[task.labels[i]] : task.labels[i];
    if (target >= model.category_count()) {
      throw IndexError("task '" + task.task_id + "' label " + std::to_string(task.labels[i]) + " maps outside model '" +
                       model.model_id() + "' (k=" + std::to_string(model.category_count()) + ")");
    }
    if (nn::argmax(model.predict_proba(task.samples.row_span(i))) == target) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(task.size());
}

double head_finetune_accuracy(const ZooModel& model, const QueryTask& task, double split_ratio,
                              const FinetuneConfig& config) {
  task.validate();
  if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw InvalidArgument("split_ratio must lie in (0, 1)");
  if (task.per_category() < 2) throw InvalidArgument("head fine-tuning needs at least 2 samples per category");
  const std::size_t k_t = task.category_count;
  if (k_t > model.category_count()) {
    throw IndexError("task '" + task.task_id + "' has " + std::to_string(k_t) + " categories, model '" +
                     model.model_id() + "' only " + std::to_string(model.category_count()));
  }

  Rng rng(config.seed);
  std::vector<std::size_t> fit_rows, eval_rows;
  for (std::size_t c = 0; c < k_t; ++c) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < task.size(); ++i) {
      if (task.labels[i] == c) rows.push_back(i);
    }
    std::shuffle(rows.begin(), rows.end(), rng);
    const auto n_fit = std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(split_ratio * rows.size())), 1,
                                               rows.size() - 1);
    fit_rows.insert(fit_rows.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_fit));
    eval_rows.insert(eval_rows.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_fit), rows.end());
  }

  const std::size_t hidden = model.hidden_width();
  auto features = [&](const std::vector<std::size_t>& rows) {
    nn::Tensor f({rows.size(), hidden});
    for (std::size_t r = 0; r < rows.size(); ++r) {
      std::ranges::copy(model.hidden_features(task.samples.row_span(rows[r])), f.row_span(r).begin());
    }
    return f;
  };
  const nn::Tensor fit_x = features(fit_rows);
  std::vector<std::size_t> fit_y;
  for (std::size_t r : fit_rows) fit_y.push_back(task.labels[r]);

  const nn::Tensor& w2 = model.parameters().at("fc2.weight").value;
  const nn::Tensor& b2 = model.parameters().at("fc2.bias").value;
  nn::Tensor w({hidden, k_t}), b({1, k_t});
  for (std::size_t j = 0; j < hidden; ++j) {
    for (std::size_t c = 0; c < k_t; ++c) w(j, c) = w2(j, c);
  }
  for (std::size_t c = 0; c < k_t; ++c) b[c] = b2[c];
  nn::ParameterSet head;
  head.add("head.weight", std::move(w));
  head.add("head.bias", std::move(b));
  nn::AdamState adam;
  adam.learning_rate = config.learning_rate;
  for (std::size_t s = 0; s < config.steps; ++s) {
    nn::Tape tape;
    nn::Var logits = nn::dense_forward(tape, tape.constant(fit_x), head, "head");
    tape.backward(nn::mean(nn::softmax_cross_entropy(logits, fit_y)));
    nn::adam_step(head, adam);
  }

  const nn::Tensor& hw = head.at("head.weight").value;
  const nn::Tensor& hb = head.at("head.bias").value;
  std::size_t hits = 0;
  for (std::size_t r : eval_rows) {
    const auto h = model.hidden_features(task.samples.row_span(r));
    std::vector<double> z(hb.values().begin(), hb.values().end());
    for (std::size_t j = 0; j < hidden; ++j) {
      for (std::size_t c = 0; c < k_t; ++c) z[c] += h[j] * hw(j, c);
    }
    if (nn::argmax(z) == task.labels[r]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(eval_rows.size());
}

}  // namespace k2v::zoo
