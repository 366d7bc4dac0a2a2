#pragma once

#include <cstddef>
#include <vector>

#include "k2v/probe/probe.hpp"
#include "k2v/zoo/domain.hpp"

namespace k2v::zoo {

struct PoolConfig {
  std::size_t pool_size = 64;
  /// External pools used while training the encoders.
  std::size_t training_pools = 3;
};

/// Probe pools of one zoo model. External pools are fresh draws from the
/// model's domain distribution, disjoint from every labeled split.
struct ModelPools {
  std::vector<probe::ProbePool> training;
  probe::ProbePool evaluation;
  /// Subset of the model's own training split (probe-substitution arm).
  probe::ProbePool training_data;
};

ModelPools make_probe_pools(const std::string& model_id, const SyntheticDomainSpec& spec, const DomainData& data,
                            const PoolConfig& config = {});

}  // namespace k2v::zoo
