#include "k2v/nn/parameters.hpp"

#include "k2v/error.hpp"
#include "k2v/util/random.hpp"

namespace k2v::nn {

Parameter& ParameterSet::add(const std::string& name, Tensor value) {
  if (contains(name)) throw InvalidArgument("duplicate parameter '" + name + "'");
  require_finite(value, "parameter '" + name + "'");
  Tensor grad(value.shape());
  auto [it, _] = params_.emplace(name, Parameter{std::move(value), std::move(grad)});
  return it->second;
}

Parameter& ParameterSet::add_uniform(const std::string& name, Shape shape, double bound) {
  Rng rng(derive_seed(seed_, {fnv1a(name)}));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor value(std::move(shape));
  for (double& v : value.values()) v = dist(rng);
  return add(name, std::move(value));
}

Parameter& ParameterSet::add_constant(const std::string& name, Shape shape, double value) {
  return add(name, Tensor(std::move(shape), value));
}

Parameter& ParameterSet::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw InvalidArgument("unknown parameter '" + name + "'");
  return it->second;
}

const Parameter& ParameterSet::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw InvalidArgument("unknown parameter '" + name + "'");
  return it->second;
}

std::vector<std::string> ParameterSet::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& [name, _] : params_) out.push_back(name);
  return out;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [_, p] : params_) n += p.value.size();
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& [_, p] : params_) p.grad.fill(0.0);
  grad_pending_ = false;
}

bool ParameterSet::same_values(const ParameterSet& other) const {
  if (params_.size() != other.params_.size()) return false;
  auto a = params_.begin();
  auto b = other.params_.begin();
  for (; a != params_.end(); ++a, ++b) {
    if (a->first != b->first || !(a->second.value == b->second.value)) return false;
  }
  return true;
}

}  // namespace k2v::nn
