#pragma once

#include <cstddef>
#include <span>

#include "k2v/encoders/encoders.hpp"
#include "k2v/nn/tape.hpp"

namespace k2v::alignment {

enum class SalVariant { cosine, contrastive };

/// DIS(t, h) = 1 - cos(t, h), in [0, 2].
double dis(std::span<const double> t, std::span<const double> h);

/// matched: 1 - cos; unmatched: max(0, cos - margin).
double loss_sal(std::span<const double> t, std::span<const double> h, bool matched, double margin);
/// matched: (1 - cos)^2; unmatched: max(0, cos - margin)^2.
double loss_sal_contrastive(std::span<const double> t, std::span<const double> h, bool matched, double margin);
/// Cross-entropy of the head's logits for `h` against `model_index`.
double loss_mkc(const encoders::ModelVector& h, std::size_t model_index, const nn::ParameterSet& params,
                const encoders::EncoderConfig& config);

/// Tape forms over a column of cosines [n x 1]; each returns the mean term.
nn::Var sal_matched(nn::Var cos, SalVariant variant);
nn::Var sal_unmatched(nn::Var cos, double margin, SalVariant variant);

struct LossTerms {
  nn::Var total;
  nn::Var mkc;
  nn::Var sal;
};

struct LossWeights {
  double alpha = 1.0;
  double margin = 0.4;
  SalVariant sal = SalVariant::cosine;
  bool use_mkc = true;
};

/// Mean over the batch of L_MKC(h_i, i) + alpha * (matched L_SAL(t, h_i) +
/// mean of unmatched L_SAL(t, h_j) over j != i). `h` is [m x E] (all
/// models), `t` is [B x E], `truth[b]` the model index of task b.
LossTerms total_loss(nn::Tape& tape, nn::ParamSource params, const encoders::EncoderConfig& config, nn::Var h,
                     nn::Var t, std::span<const std::size_t> truth, const LossWeights& weights);

}  // namespace k2v::alignment
