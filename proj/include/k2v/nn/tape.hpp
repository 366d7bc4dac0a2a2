#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "k2v/nn/parameters.hpp"
#include "k2v/nn/tensor.hpp"

namespace k2v::nn {

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; only valid while
/// the owning tape is alive.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  double scalar() const;

  Tape* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Records one computation and replays it backwards.
///
/// A tape holds a single graph per loss evaluation. `backward` may be run
/// once; gradients of trainable parameters are accumulated into their
/// ParameterSet and the set is marked pending until it is reset (by
/// `zero_grad` or an optimizer step). Forward-only tapes over frozen
/// parameters never touch parameter state, so they may be used from
/// several threads concurrently, one tape per thread.
class Tape {
 public:
  using Pullback = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Trainable leaf bound to `params[name]`; repeated calls return the same node.
  Var param(ParameterSet& params, const std::string& name);
  /// Frozen leaf: participates in the forward pass, never receives gradient.
  Var frozen(const ParameterSet& params, const std::string& name);

  void backward(Var loss);

  const Tensor& value(std::size_t id) const;
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  /// Gradient of the last backward pass w.r.t. node `v` (zeros if unreached).
  Tensor grad(Var v) const;
  std::size_t size() const noexcept { return nodes_.size(); }

  // Op-implementation interface.
  Var record(Tensor value, std::vector<std::size_t> inputs, Pullback pullback, const char* op);
  const Tensor& upstream(std::size_t id) const { return nodes_[id].grad; }
  /// Gradient accumulator of node `id`, zero-initialized on first use.
  Tensor& grad_buffer(std::size_t id);

 private:
  struct Node {
    Tensor value;
    const Tensor* external = nullptr;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    std::vector<std::size_t> inputs;
    Pullback pullback;
    Parameter* param = nullptr;
    ParameterSet* owner = nullptr;
  };

  std::deque<Node> nodes_;
  std::map<std::pair<const ParameterSet*, std::string>, std::size_t> leaves_;
  bool backward_done_ = false;
};

// ---- differentiable operations -------------------------------------------
// Every operand is a rank-2 tensor; vectors are 1 x n rows.

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
/// x[n x m] + row[1 x m] broadcast over rows.
Var add_row(Var x, Var row);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);
Var square(Var a);
Var slice_cols(Var a, std::size_t begin, std::size_t count);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var gather_rows(Var a, std::span<const std::size_t> rows);
/// Column-wise mean over rows: [n x m] -> [1 x m].
Var mean_rows(Var a);
/// [n x m] -> [1 x n*m] (row-major flatten).
Var flatten(Var a);
Var sum(Var a);
Var mean(Var a);
/// Row-wise cosine similarity of two [n x d] operands -> [n x 1].
/// Throws DegenerateVectorError if any row has norm below 1e-12.
Var cosine_rows(Var a, Var b);
/// Row-wise softmax cross-entropy -> [n x 1]; `targets[i]` indexes row i.
Var softmax_cross_entropy(Var logits, std::span<const std::size_t> targets);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }

}  // namespace k2v::nn
