#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "k2v/error.hpp"
#include "k2v/model/black_box.hpp"
#include "k2v/nn/tensor.hpp"

// Everything here talks to models through BlackBoxModel::predict_proba only.

namespace k2v::probe {

enum class PoolSource { external, training_data };

std::string to_string(PoolSource s);
PoolSource pool_source_from_string(const std::string& s);

struct ProbePool {
  std::string pool_id;
  nn::Tensor samples;  // [n x d]
  PoolSource source = PoolSource::external;

  std::size_t size() const noexcept { return samples.empty() ? 0 : samples.rows(); }
  std::size_t dim() const { return samples.empty() ? 0 : samples.cols(); }
  void validate() const;
};

struct ClassAnchor {
  std::size_t category = 0;
  std::vector<double> sample;
  double confidence = 0.0;
};

class ProbePoolUnsuitableError : public Error {
 public:
  explicit ProbePoolUnsuitableError(const std::string& msg) : Error("probe_pool_unsuitable", msg) {}
};

class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& msg, double best_gap) : Error("non_convergence", msg), best_gap_(best_gap) {}
  double best_gap() const noexcept { return best_gap_; }

 private:
  double best_gap_;
};

struct AnchorSelection {
  std::size_t category_count = 0;
  /// anchors[c] is empty when category c is uncovered.
  std::vector<std::optional<ClassAnchor>> anchors;
  /// Qualifying samples per category, most confident first; candidates[c][0]
  /// is the anchor. Later entries feed the re-pairing retries.
  std::vector<std::vector<ClassAnchor>> candidates;

  std::vector<std::size_t> covered() const;
  std::vector<std::size_t> uncovered() const;
};

/// Picks, for every category, the pool sample whose probability for that
/// category is both maximal and >= tau, keeping the most confident one.
/// Throws ProbePoolUnsuitableError if no category is covered.
AnchorSelection select_anchors(const BlackBoxModel& model, const ProbePool& pool, double tau);

struct BoundarySample {
  std::size_t origin = 0;
  std::size_t target = 0;
  std::vector<double> sample;
  double gap = 0.0;
  std::size_t iterations = 0;
};

struct ThirdCategoryInterposed {
  std::size_t origin = 0;
  std::size_t target = 0;
  std::size_t interposed = 0;
  double lambda = 0.0;
};

using BoundaryResult = std::variant<BoundarySample, ThirdCategoryInterposed>;

/// Bisection on x(l) = (1 - l) z_a + l z_b keeping argmax a on the left and
/// argmax b on the right. Returns the first midpoint with |g_a - g_b| <= eps
/// where a and b are the two most probable categories, or the interposing
/// category if a midpoint predicts neither. Throws NonConvergenceError after
/// max_iter halvings and InvalidArgument on bad anchors.
BoundaryResult find_boundary_sample(const BlackBoxModel& model, const ClassAnchor& za, const ClassAnchor& zb,
                                    double eps, std::size_t max_iter);

struct ProbeConfig {
  double tau = 0.9;
  double epsilon = 1e-3;
  std::size_t max_iter = 60;
  std::size_t retries = 5;
};

struct ProbeStats {
  std::size_t pairs = 0;
  std::size_t direct = 0;
  std::size_t recovered = 0;
  std::size_t masked = 0;
  std::size_t third_category_failures = 0;
  std::size_t non_converged = 0;
};

/// Anchors and boundary samples of one model under one pool. The boundary
/// between a and b is searched once and stored for both (a, b) and (b, a).
struct ProbeResult {
  std::string model_id;
  std::string pool_id;
  std::size_t category_count = 0;
  std::size_t dim = 0;
  double epsilon = 0.0;
  std::vector<std::optional<ClassAnchor>> anchors;
  std::map<std::pair<std::size_t, std::size_t>, BoundarySample> boundaries;
  ProbeStats stats;

  std::vector<bool> coverage() const;
  std::vector<BoundarySample> boundary_list() const;
  std::vector<ClassAnchor> anchor_list() const;
};

ProbeResult probe_model(const BlackBoxModel& model, const ProbePool& pool, const ProbeConfig& config = {});

/// r[a][b] = z_a^b - z_a. Diagonal entries are zero and never present.
struct Krm {
  std::size_t category_count = 0;
  std::size_t dim = 0;
  nn::Tensor vectors;         // [k*k x d], row a*k + b
  std::vector<bool> present;  // k*k

  std::span<const double> r(std::size_t a, std::size_t b) const;
  bool has(std::size_t a, std::size_t b) const;
  std::size_t present_count() const;
};

/// Throws InvalidArgument if an anchor or boundary category is outside
/// [0, k) or a boundary's origin/target lacks an anchor.
Krm build_krm(const std::vector<ClassAnchor>& anchors, const std::vector<BoundarySample>& boundaries, std::size_t k);

struct Subgraph {
  std::size_t category = 0;
  nn::Tensor nodes;                // [k x d]; row category is the anchor
  nn::Tensor edges;                // [k x d]; nodes - anchor
  std::vector<bool> node_present;  // anchor position is always true

  std::size_t node_count() const;
};

struct KnowledgeGraphSet {
  std::string model_id;
  std::string pool_id;
  std::size_t category_count = 0;
  std::size_t dim = 0;
  std::vector<Subgraph> subgraphs;  // ascending category order, covered only
};

KnowledgeGraphSet build_graph_set(const std::vector<ClassAnchor>& anchors,
                                  const std::vector<BoundarySample>& boundaries, std::size_t k,
                                  std::string model_id = {}, std::string pool_id = {});
KnowledgeGraphSet build_graph_set(const ProbeResult& result);

/// One file per (model, pool): a JSON header line {model_id, pool_id, k, d,
/// epsilon, coverage} followed by a K2V1 payload.
void save_probe(const std::filesystem::path& path, const ProbeResult& result);
ProbeResult load_probe(const std::filesystem::path& path);

}  // namespace k2v::probe
