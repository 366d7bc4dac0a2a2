#include "k2v/model/task.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <nlohmann/json.hpp>

#include "k2v/error.hpp"
#include "k2v/nn/checkpoint.hpp"
#include "k2v/util/random.hpp"

namespace k2v {

std::vector<std::size_t> QueryTask::category_sizes() const {
  std::vector<std::size_t> sizes(category_count, 0);
  for (std::size_t l : labels) {
    if (l < sizes.size()) ++sizes[l];
  }
  return sizes;
}

std::size_t QueryTask::per_category() const {
  const auto sizes = category_sizes();
  return sizes.empty() ? 0 : *std::min_element(sizes.begin(), sizes.end());
}

std::string QueryTask::digest() const {
  std::uint64_t h = fnv1a(task_id);
  for (double v : samples.values()) h = mix64(h ^ std::bit_cast<std::uint64_t>(v));
  for (std::size_t l : labels) h = mix64(h ^ l);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void QueryTask::validate() const {
  if (labels.empty()) throw InvalidArgument("task '" + task_id + "' is empty");
  if (samples.rows() != labels.size()) {
    throw DimensionError("task '" + task_id + "': " + std::to_string(samples.rows()) + " samples but " +
                         std::to_string(labels.size()) + " labels");
  }
  const auto sizes = category_sizes();
  for (std::size_t l : labels) {
    if (l >= category_count) throw IndexError("task '" + task_id + "': label " + std::to_string(l) + " >= k_T");
  }
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    if (sizes[c] == 0) throw InvalidArgument("task '" + task_id + "': category " + std::to_string(c) + " is empty");
  }
  nn::require_finite(samples, "task '" + task_id + "' samples");
}

QueryTask make_task(std::string task_id, nn::Tensor samples, std::vector<std::size_t> labels) {
  QueryTask task;
  task.task_id = std::move(task_id);
  task.samples = std::move(samples);
  task.labels = std::move(labels);
  task.category_count = task.labels.empty() ? 0 : *std::max_element(task.labels.begin(), task.labels.end()) + 1;
  task.validate();
  return task;
}

void save_task(const std::filesystem::path& path, const QueryTask& task) {
  task.validate();
  nlohmann::json header = {{"k_T", task.category_count},
                           {"d", task.dim()},
                           {"q_n", task.per_category()},
                           {"task_id", task.task_id}};
  nn::Tensor labels({task.size()});
  for (std::size_t i = 0; i < task.size(); ++i) labels[i] = static_cast<double>(task.labels[i]);
  nn::write_with_header(path, header.dump(), {{"samples", task.samples}, {"labels", labels}});
}

QueryTask load_task(const std::filesystem::path& path) {
  auto [header_text, tensors] = nn::read_with_header(path);
  const auto header = nlohmann::json::parse(header_text);
  for (const char* key : {"k_T", "d", "q_n"}) {
    if (!header.contains(key)) throw FormatError(path.string() + ": task header lacks '" + key + "'");
  }
  const nn::Tensor& samples = nn::find_tensor(tensors, "samples");
  const nn::Tensor& label_values = nn::find_tensor(tensors, "labels");
  std::vector<std::size_t> labels;
  for (double v : label_values.values()) {
    if (v < 0 || v != std::floor(v)) throw FormatError(path.string() + ": non-integer label");
    labels.push_back(static_cast<std::size_t>(v));
  }
  nn::Tensor rows = samples;
  if (rows.rank() != 2) throw FormatError(path.string() + ": samples must be [n x d]");
  QueryTask task = make_task(header.value("task_id", path.stem().string()), std::move(rows), std::move(labels));
  if (task.category_count != header["k_T"].get<std::size_t>() || task.dim() != header["d"].get<std::size_t>()) {
    throw FormatError(path.string() + ": header does not match payload");
  }
  return task;
}

}  // namespace k2v
