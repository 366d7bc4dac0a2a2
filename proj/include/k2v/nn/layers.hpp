#pragma once

#include <span>
#include <string>
#include <vector>

#include "k2v/nn/parameters.hpp"
#include "k2v/nn/tape.hpp"

namespace k2v::nn {

/// Where a layer reads its parameters from: a trainable set (leaves receive
/// gradients) or a frozen one (forward only, safe to share across threads).
class ParamSource {
 public:
  ParamSource(ParameterSet& params) : mutable_(&params), const_(&params) {}  // NOLINT
  ParamSource(const ParameterSet& params) : const_(&params) {}                // NOLINT

  Var get(Tape& tape, const std::string& name) const {
    return mutable_ != nullptr ? tape.param(*mutable_, name) : tape.frozen(*const_, name);
  }
  const ParameterSet& set() const { return *const_; }
  bool trainable() const { return mutable_ != nullptr; }

 private:
  ParameterSet* mutable_ = nullptr;
  const ParameterSet* const_ = nullptr;
};

/// Registers `<name>.weight` [in x out] ~ U(-1/sqrt(in), 1/sqrt(in)) and a
/// zero `<name>.bias` [1 x out].
void add_dense(ParameterSet& params, const std::string& name, std::size_t in, std::size_t out);

/// y = x . W + b for the named layer. x is [batch x in].
Var dense_forward(Tape& tape, Var x, ParamSource params, const std::string& name);

/// Registers a bidirectional LSTM: `<name>.fwd.*` and `<name>.bwd.*`, each
/// with wx [in x 4H], wh [H x 4H], b [1 x 4H]. Gate column order is
/// input, forget, candidate, output. Weights ~ U(-1/sqrt(H), 1/sqrt(H));
/// forget-gate bias starts at 1, remaining biases uniform like weights.
void add_bilstm(ParameterSet& params, const std::string& name, std::size_t in, std::size_t hidden);

struct BiLstmOutput {
  /// per_step[t] = [forward state at t | backward state at t], [batch x 2H].
  std::vector<Var> per_step;
  /// [forward state after the last step | backward state after step 0].
  Var final;
};

/// Runs the forward cell over `steps` left to right and the backward cell
/// right to left. Each step is [batch x in]; all steps share the batch size.
BiLstmOutput bilstm_forward(Tape& tape, std::span<const Var> steps, ParamSource params, const std::string& name);

std::size_t bilstm_hidden(const ParameterSet& params, const std::string& name);

}  // namespace k2v::nn
