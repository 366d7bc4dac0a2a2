#include "k2v/nn/adam.hpp"

#include <cmath>

#include "k2v/error.hpp"

namespace k2v::nn {

void adam_step(ParameterSet& params, AdamState& state) {
  if (!params.grad_pending()) throw StateError("adam_step without pending gradients (run backward first)");
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (auto& [name, p] : params.entries()) {
    auto [mit, m_new] = state.first_moment.try_emplace(name, p.value.shape());
    auto [vit, v_new] = state.second_moment.try_emplace(name, p.value.shape());
    Tensor& m = mit->second;
    Tensor& v = vit->second;
    if (m.shape() != p.value.shape()) throw DimensionError("Adam moment shape mismatch for '" + name + "'");
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p.value[i] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
    }
  }
  params.zero_grad();
}

}  // namespace k2v::nn
