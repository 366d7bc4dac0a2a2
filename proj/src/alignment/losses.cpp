#include "k2v/alignment/losses.hpp"

#include <algorithm>

#include "k2v/error.hpp"
#include "k2v/nn/functional.hpp"

namespace k2v::alignment {

using nn::Var;

double dis(std::span<const double> t, std::span<const double> h) {
  return std::clamp(1.0 - nn::cosine_similarity(t, h), 0.0, 2.0);
}

double loss_sal(std::span<const double> t, std::span<const double> h, bool matched, double margin) {
  const double c = nn::cosine_similarity(t, h);
  return matched ? 1.0 - c : std::max(0.0, c - margin);
}

double loss_sal_contrastive(std::span<const double> t, std::span<const double> h, bool matched, double margin) {
  const double v = loss_sal(t, h, matched, margin);
  return v * v;
}

double loss_mkc(const encoders::ModelVector& h, std::size_t model_index, const nn::ParameterSet& params,
                const encoders::EncoderConfig& config) {
  if (model_index >= config.model_count) {
    throw IndexError("model index " + std::to_string(model_index) + " outside head of size " +
                     std::to_string(config.model_count));
  }
  return nn::softmax_cross_entropy(encoders::classifier_logits(h, params, config), model_index);
}

Var sal_matched(Var cos, SalVariant variant) {
  Var gap = nn::add_scalar(nn::scale(cos, -1.0), 1.0);
  return nn::mean(variant == SalVariant::contrastive ? nn::square(gap) : gap);
}

Var sal_unmatched(Var cos, double margin, SalVariant variant) {
  Var hinge = nn::relu(nn::add_scalar(cos, -margin));
  return nn::mean(variant == SalVariant::contrastive ? nn::square(hinge) : hinge);
}

LossTerms total_loss(nn::Tape& tape, nn::ParamSource params, const encoders::EncoderConfig& config, Var h, Var t,
                     std::span<const std::size_t> truth, const LossWeights& w) {
  if (truth.empty()) throw InvalidArgument("total_loss: empty batch");
  if (w.alpha < 0.0) throw InvalidArgument("alpha must be non-negative");
  if (t.rows() != truth.size()) throw DimensionError("total_loss: one truth index per task row required");
  const std::size_t m = h.rows();
  for (std::size_t i : truth) {
    if (i >= m) throw IndexError("truth index " + std::to_string(i) + " outside " + std::to_string(m) + " models");
  }
  std::vector<std::size_t> tm, hm, tu, hu;
  for (std::size_t b = 0; b < truth.size(); ++b) {
    tm.push_back(b);
    hm.push_back(truth[b]);
    for (std::size_t j = 0; j < m; ++j) {
      if (j == truth[b]) continue;
      tu.push_back(b);
      hu.push_back(j);
    }
  }
  LossTerms out;
  out.sal = sal_matched(nn::cosine_rows(nn::gather_rows(t, tm), nn::gather_rows(h, hm)), w.sal);
  if (!tu.empty()) {
    // Every task has the same m - 1 negatives, so the flat mean equals the
    // per-task mean averaged over the batch.
    Var neg = nn::cosine_rows(nn::gather_rows(t, tu), nn::gather_rows(h, hu));
    out.sal = nn::add(out.sal, sal_unmatched(neg, w.margin, w.sal));
  }
  Var ce = nn::softmax_cross_entropy(encoders::classifier_logits(tape, params, config, nn::gather_rows(h, hm)), truth);
  out.mkc = nn::mean(ce);
  out.total = nn::scale(out.sal, w.alpha);
  if (w.use_mkc) out.total = nn::add(out.mkc, out.total);
  return out;
}

}  // namespace k2v::alignment
