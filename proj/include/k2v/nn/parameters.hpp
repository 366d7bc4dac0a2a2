#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "k2v/nn/tensor.hpp"

namespace k2v::nn {

struct Parameter {
  Tensor value;
  Tensor grad;
};

/// Named trainable tensors with paired gradient buffers.
///
/// Initialization is a pure function of (seed, name, shape), so two sets
/// built with the same seed and the same sequence of `add_*` calls are
/// bitwise identical.
class ParameterSet {
 public:
  explicit ParameterSet(std::uint64_t seed = 0) : seed_(seed) {}

  Parameter& add(const std::string& name, Tensor value);
  Parameter& add_uniform(const std::string& name, Shape shape, double bound);
  Parameter& add_constant(const std::string& name, Shape shape, double value);

  bool contains(const std::string& name) const { return params_.count(name) > 0; }
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;

  std::vector<std::string> names() const;
  const std::map<std::string, Parameter>& entries() const { return params_; }
  std::map<std::string, Parameter>& entries() { return params_; }

  std::uint64_t seed() const noexcept { return seed_; }
  std::size_t scalar_count() const;

  void zero_grad();
  bool grad_pending() const noexcept { return grad_pending_; }
  void mark_grad_pending() noexcept { grad_pending_ = true; }

  /// Bitwise equality of names and values (gradients ignored).
  bool same_values(const ParameterSet& other) const;

 private:
  std::uint64_t seed_;
  std::map<std::string, Parameter> params_;
  bool grad_pending_ = false;
};

}  // namespace k2v::nn
