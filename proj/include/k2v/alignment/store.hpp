#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "k2v/encoders/encoders.hpp"

namespace k2v::alignment {

/// Frozen model embeddings, one entry per (model, pool).
class EmbeddingStore {
 public:
  explicit EmbeddingStore(std::size_t embedding_dim = 0) : dim_(embedding_dim) {}

  /// Throws DimensionError on a length mismatch and InvalidArgument on a
  /// duplicate (model, pool) pair or non-finite vector.
  void add(encoders::ModelVector v);

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  std::size_t dim() const noexcept { return dim_; }
  const std::vector<encoders::ModelVector>& entries() const noexcept { return entries_; }
  /// Distinct model ids in lexical order.
  std::vector<std::string> model_ids() const;

  friend bool operator==(const EmbeddingStore&, const EmbeddingStore&) = default;

 private:
  std::size_t dim_;
  std::vector<encoders::ModelVector> entries_;
};

/// `<dir>/store.json` index {E, entries[{model_id, pool_id, row}]} plus
/// `<dir>/store.k2v` holding "vectors" [n x E].
void save_store(const std::filesystem::path& dir, const EmbeddingStore& store);
EmbeddingStore load_store(const std::filesystem::path& dir);

struct RankedModel {
  std::string model_id;
  double distance = 0.0;
};

struct Retrieval {
  std::string task_id;
  std::vector<RankedModel> ranking;  // ascending distance, ties by model_id

  const std::string& chosen() const { return ranking.front().model_id; }
  std::vector<std::string> top(std::size_t k) const;
};

/// Ranks store models by DIS(t, h). A model with several pool entries is
/// scored by its closest one. `top_k` = 0 keeps the full ranking.
Retrieval retrieve(const encoders::QueryVector& t, const EmbeddingStore& store, std::size_t top_k = 0,
                   std::string task_id = {});

}  // namespace k2v::alignment
