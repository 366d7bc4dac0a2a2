#include "k2v/eval/oracle.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>

namespace k2v::eval {

std::string to_string(OracleMode m) { return m == OracleMode::direct ? "direct" : "head_finetune"; }

OracleMode oracle_mode_from_string(const std::string& s) {
  if (s == "direct") return OracleMode::direct;
  if (s == "head_finetune") return OracleMode::head_finetune;
  throw InvalidArgument("unknown oracle mode '" + s + "'");
}

std::size_t OracleTable::best_model(std::size_t task) const {
  const auto& row = accuracy.at(task);
  return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
}

OracleTable build_oracle(const std::vector<QueryTask>& tasks, const zoo::Zoo& zoo, const OracleConfig& config) {
  if (tasks.empty()) throw InvalidArgument("oracle needs at least one task");
  const std::size_t n = tasks.size(), m = zoo.size();
  OracleTable table;
  table.mode = config.mode;
  for (const auto& t : tasks) table.task_ids.push_back(t.task_id);
  for (const auto& e : zoo.entries) table.model_ids.push_back(e.model.model_id());
  table.accuracy.assign(n, std::vector<double>(m, 0.0));
  for (const auto& t : tasks) {
    for (const auto& e : zoo.entries) {
      if (t.category_count > e.model.category_count()) {
        throw InvalidArgument("task '" + t.task_id + "' has " + std::to_string(t.category_count) +
                              " categories; model '" + e.model.model_id() + "' has only " +
                              std::to_string(e.model.category_count()) + " (no identity-prefix mapping)");
      }
    }
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n * m);
  auto worker = [&] {
    for (std::size_t w = next++; w < n * m; w = next++) {
      const std::size_t t = w / m, j = w % m;
      try {
        const auto& model = zoo.model(j);
        table.accuracy[t][j] = config.mode == OracleMode::direct
                                   ? zoo::evaluate_accuracy(model, tasks[t])
                                   : zoo::head_finetune_accuracy(model, tasks[t], config.split_ratio, config.finetune);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    }
  };
  std::size_t threads = config.threads != 0 ? config.threads : std::max(1U, std::thread::hardware_concurrency());
  threads = std::min(threads, n * m);
  std::vector<std::thread> pool;
  for (std::size_t i = 1; i < threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return table;
}

}  // namespace k2v::eval
