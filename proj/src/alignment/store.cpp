#include "k2v/alignment/store.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <nlohmann/json.hpp>

#include "k2v/alignment/losses.hpp"
#include "k2v/error.hpp"
#include "k2v/nn/checkpoint.hpp"

namespace k2v::alignment {

using nlohmann::json;

void EmbeddingStore::add(encoders::ModelVector v) {
  if (dim_ == 0) dim_ = v.h.size();
  if (v.h.size() != dim_) {
    throw DimensionError("store holds E=" + std::to_string(dim_) + ", got vector of length " + std::to_string(v.h.size()));
  }
  for (double x : v.h) {
    if (!std::isfinite(x)) throw InvalidArgument("non-finite embedding for '" + v.model_id + "'");
  }
  for (const auto& e : entries_) {
    if (e.model_id == v.model_id && e.pool_id == v.pool_id) {
      throw InvalidArgument("duplicate store entry (" + v.model_id + ", " + v.pool_id + ")");
    }
  }
  entries_.push_back(std::move(v));
}

std::vector<std::string> EmbeddingStore::model_ids() const {
  std::vector<std::string> ids;
  for (const auto& e : entries_) ids.push_back(e.model_id);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

void save_store(const std::filesystem::path& dir, const EmbeddingStore& store) {
  json index = {{"E", store.dim()}, {"entries", json::array()}};
  nn::Tensor vectors({store.size(), store.dim()});
  for (std::size_t r = 0; r < store.size(); ++r) {
    const auto& e = store.entries()[r];
    index["entries"].push_back({{"model_id", e.model_id}, {"pool_id", e.pool_id}, {"row", r}});
    std::ranges::copy(e.h, vectors.row_span(r).begin());
  }
  nn::write_k2v1(dir / "store.k2v", {{"vectors", vectors}});
  nn::write_file(dir / "store.json", index.dump(2) + "\n");
}

EmbeddingStore load_store(const std::filesystem::path& dir) {
  const json index = json::parse(nn::read_file(dir / "store.json"));
  const auto tensors = nn::read_k2v1(dir / "store.k2v");
  const nn::Tensor& vectors = nn::find_tensor(tensors, "vectors");
  EmbeddingStore store(index.at("E").get<std::size_t>());
  for (const auto& e : index.at("entries")) {
    const std::size_t row = e.at("row");
    if (row >= vectors.rows()) throw FormatError("store index points past the vector payload");
    const auto v = vectors.row_span(row);
    store.add({{v.begin(), v.end()}, e.at("model_id"), e.at("pool_id")});
  }
  return store;
}

std::vector<std::string> Retrieval::top(std::size_t k) const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < std::min(k, ranking.size()); ++i) out.push_back(ranking[i].model_id);
  return out;
}

Retrieval retrieve(const encoders::QueryVector& t, const EmbeddingStore& store, std::size_t top_k, std::string task_id) {
  if (store.empty()) throw InvalidArgument("retrieve: embedding store is empty");
  if (t.t.size() != store.dim()) {
    throw DimensionError("query vector has length " + std::to_string(t.t.size()) + ", store E=" +
                         std::to_string(store.dim()));
  }
  std::map<std::string, double> best;
  for (const auto& e : store.entries()) {
    const double d = dis(t.t, e.h);
    auto [it, inserted] = best.try_emplace(e.model_id, d);
    if (!inserted) it->second = std::min(it->second, d);
  }
  Retrieval r;
  r.task_id = std::move(task_id);
  for (const auto& [id, d] : best) r.ranking.push_back({id, d});
  // std::map iteration is lexical, so a stable sort breaks ties by model_id.
  std::stable_sort(r.ranking.begin(), r.ranking.end(),
                   [](const RankedModel& a, const RankedModel& b) { return a.distance < b.distance; });
  if (top_k > 0 && r.ranking.size() > top_k) r.ranking.resize(top_k);
  return r;
}

}  // namespace k2v::alignment
