#include <gtest/gtest.h>

#include <chrono>

#include "k2v/eval/experiment.hpp"
#include "k2v/eval/oracle.hpp"
#include "zoo/shared_zoo.hpp"

namespace k2v::eval {
namespace {

std::vector<QueryTask> own_domain_tasks(std::size_t per_model) {
  const auto& zoo = testing::shared_zoo();
  ExperimentConfig c;
  c.eval_tasks_per_model = per_model;
  std::vector<QueryTask> tasks;
  for (auto& q : benchmark_tasks(zoo_domains(zoo), c.resolved())) tasks.push_back(std::move(q.task));
  return tasks;
}

TEST(Oracle, OwnDomainModelWins) {
  const auto tasks = own_domain_tasks(5);
  ASSERT_EQ(tasks.size(), 60u);
  const auto start = std::chrono::steady_clock::now();
  const auto table = build_oracle(tasks, testing::shared_zoo());
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_LE(secs, 60.0);
  ASSERT_EQ(table.accuracy.size(), 60u);
  std::size_t own = 0;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    ASSERT_EQ(table.accuracy[t].size(), 12u);
    for (double a : table.accuracy[t]) EXPECT_TRUE(a >= 0.0 && a <= 1.0);
    own += table.best_model(t) == t / 5;
  }
  EXPECT_GE(static_cast<double>(own) / 60.0, 0.9);
}

TEST(Oracle, DirectModeIsDeterministic) {
  const auto tasks = own_domain_tasks(1);
  OracleConfig one;
  one.threads = 1;
  const auto a = build_oracle(tasks, testing::shared_zoo());
  const auto b = build_oracle(tasks, testing::shared_zoo(), one);
  EXPECT_EQ(a.accuracy, b.accuracy);
  EXPECT_EQ(a.task_ids, b.task_ids);
}

TEST(Oracle, HeadFinetuneFillsEveryEntry) {
  const auto tasks = own_domain_tasks(1);
  OracleConfig c;
  c.mode = OracleMode::head_finetune;
  const auto table = build_oracle(tasks, testing::shared_zoo(), c);
  EXPECT_EQ(table.mode, OracleMode::head_finetune);
  for (const auto& row : table.accuracy) {
    ASSERT_EQ(row.size(), 12u);
    for (double a : row) EXPECT_TRUE(a >= 0.0 && a <= 1.0);
  }
  EXPECT_EQ(oracle_mode_from_string(to_string(OracleMode::head_finetune)), OracleMode::head_finetune);
}

TEST(Oracle, UnmappableTaskIsRejected) {
  const auto& zoo = testing::shared_zoo();
  const auto domain = testing::shared_domain(0);
  Rng rng(1);
  auto task = zoo::sample_task(domain.test, 4, 3, rng, "t");
  // Relabel to more categories than any model has.
  for (std::size_t i = 0; i < task.labels.size(); ++i) task.labels[i] = i % 11;
  task.category_count = 11;
  EXPECT_THROW(build_oracle({task}, zoo), InvalidArgument);
  EXPECT_THROW(build_oracle({}, zoo), InvalidArgument);
}

}  // namespace
}  // namespace k2v::eval
