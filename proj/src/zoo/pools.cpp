#include "k2v/zoo/pools.hpp"

#include <algorithm>
#include <numeric>

namespace k2v::zoo {

ModelPools make_probe_pools(const std::string& model_id, const SyntheticDomainSpec& spec, const DomainData& data,
                            const PoolConfig& config) {
  if (config.pool_size == 0) throw InvalidArgument("pool_size must be positive");
  if (config.training_pools == 0) throw InvalidArgument("at least one training pool is required");
  ModelPools out;
  for (std::size_t p = 0; p < config.training_pools; ++p) {
    out.training.push_back({model_id + "/ext-" + std::to_string(p), draw_unlabeled(spec, p, config.pool_size),
                            probe::PoolSource::external});
  }
  out.evaluation = {model_id + "/ext-eval", draw_unlabeled(spec, 1000, config.pool_size), probe::PoolSource::external};

  const LabeledSet& train = data.train;
  std::vector<std::size_t> rows(train.size());
  std::iota(rows.begin(), rows.end(), 0);
  Rng rng(derive_seed(spec.seed, {0x7d, config.pool_size}));
  std::shuffle(rows.begin(), rows.end(), rng);
  rows.resize(std::min(rows.size(), config.pool_size));
  std::sort(rows.begin(), rows.end());
  nn::Tensor samples({rows.size(), train.samples.cols()});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::ranges::copy(train.samples.row_span(rows[i]), samples.row_span(i).begin());
  }
  out.training_data = {model_id + "/train-data", std::move(samples), probe::PoolSource::training_data};
  return out;
}

}  // namespace k2v::zoo
