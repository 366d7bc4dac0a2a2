#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "k2v/nn/parameters.hpp"

namespace k2v::nn {

struct AdamState {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::map<std::string, Tensor> first_moment;
  std::map<std::string, Tensor> second_moment;
};

/// One bias-corrected Adam update over every parameter in `params`, then
/// zeroes the gradients. Throws StateError if no gradients are pending.
void adam_step(ParameterSet& params, AdamState& state);

}  // namespace k2v::nn
