#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "k2v/nn/tensor.hpp"

namespace k2v {

/// A labeled query task {s_i, l_i}. Labels are task-local category
/// indices 0..k_T-1 and every index appears at least once.
struct QueryTask {
  std::string task_id;
  nn::Tensor samples;  // [n x d]
  std::vector<std::size_t> labels;
  std::size_t category_count = 0;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t dim() const { return samples.empty() ? 0 : samples.cols(); }
  /// Smallest per-category sample count (q_n for balanced tasks).
  std::size_t per_category() const;
  std::vector<std::size_t> category_sizes() const;
  /// Content hash over samples and labels (hex).
  std::string digest() const;
  void validate() const;
};

/// Builds and validates a task; k_T is 1 + the largest label.
QueryTask make_task(std::string task_id, nn::Tensor samples, std::vector<std::size_t> labels);

/// Task file: one JSON header line {k_T, d, q_n, task_id} followed by a
/// K2V1 payload holding "samples" [n x d] and "labels" [n].
void save_task(const std::filesystem::path& path, const QueryTask& task);
QueryTask load_task(const std::filesystem::path& path);

}  // namespace k2v
