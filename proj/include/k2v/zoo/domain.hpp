#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "k2v/model/task.hpp"
#include "k2v/nn/tensor.hpp"
#include "k2v/util/random.hpp"

namespace k2v::zoo {

struct SplitSizes {
  std::size_t train = 50;
  std::size_t validation = 30;
  std::size_t query = 40;
  std::size_t test = 40;
};

/// Gaussian-cluster classification domain standing in for a real dataset.
struct SyntheticDomainSpec {
  std::size_t feature_dim = 32;
  std::size_t category_count = 0;
  nn::Tensor centers;           // [k x d]
  std::vector<double> spreads;  // per-category standard deviation
  SplitSizes samples_per_category;
  std::uint64_t seed = 0;

  /// Throws InvalidArgument when k < 2, a spread is not positive, centers
  /// are not pairwise distinct, or shapes disagree.
  void validate() const;
  std::string digest() const;
};

nlohmann::json to_json(const SyntheticDomainSpec& spec);
SyntheticDomainSpec domain_spec_from_json(const nlohmann::json& j);

struct LabeledSet {
  nn::Tensor samples;  // [n x d], grouped by category in ascending order
  std::vector<std::size_t> labels;
  std::size_t category_count = 0;

  std::size_t size() const noexcept { return labels.size(); }
  /// Row indices of category `c`.
  std::vector<std::size_t> rows_of(std::size_t c) const;
};

struct DomainData {
  LabeledSet train;
  LabeledSet validation;
  LabeledSet query;
  LabeledSet test;
};

/// Number of leading coordinates whose sign pattern identifies a domain's
/// region of the hypercube; 2^6 = 64 disjoint regions.
inline constexpr std::size_t kRegionBits = 6;
inline constexpr std::size_t kMaxDomains = std::size_t{1} << kRegionBits;

/// Domain `index` of a zoo: its k centers all lie in the orthant of the
/// first kRegionBits coordinates selected by the bits of `index`, at
/// magnitude in [0.4, 1]; the remaining coordinates are uniform in [-1, 1].
/// Different indices therefore never share a region.
SyntheticDomainSpec make_domain_spec(std::uint64_t zoo_seed, std::size_t index, std::size_t k, std::size_t feature_dim,
                                     double spread, const SplitSizes& sizes);

/// Draws the four splits; each split uses its own RNG stream so they are
/// disjoint by construction and deterministic per seed.
DomainData generate_domain(const SyntheticDomainSpec& spec);

/// `count` fresh samples from the domain distribution (categories in
/// round-robin order) from stream `stream`; used for external probe pools.
nn::Tensor draw_unlabeled(const SyntheticDomainSpec& spec, std::uint64_t stream, std::size_t count);

/// q_n distinct samples of each category 0..k_T-1 of `split`.
QueryTask sample_task(const LabeledSet& split, std::size_t k_T, std::size_t q_n, Rng& rng, std::string task_id);

/// Task whose category c is drawn from `sources[c]` (category c of that
/// split). Used to build tasks that straddle several domains.
QueryTask sample_mixed_task(const std::vector<const LabeledSet*>& sources, std::size_t q_n, Rng& rng,
                            std::string task_id);

}  // namespace k2v::zoo
