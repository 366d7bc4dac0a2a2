#include "k2v/eval/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <map>
#include <nlohmann/json.hpp>
#include <thread>

#include "k2v/eval/metrics.hpp"

namespace k2v::eval {

using alignment::EmbeddingStore;
using alignment::LabeledQuery;
using alignment::Retrieval;
using nlohmann::json;
using probe::KnowledgeGraphSet;

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

ExperimentConfig ExperimentConfig::resolved() const {
  ExperimentConfig c = *this;
  c.zoo.seed = seed;
  c.encoder.seed = derive_seed(seed, {0xe1});
  c.train.seed = derive_seed(seed, {0x7a});
  c.oracle.finetune.seed = derive_seed(seed, {0xf7});
  c.mixed_oracle.finetune.seed = derive_seed(seed, {0xf7});
  c.encoder.model_count = c.zoo.model_count;
  c.encoder.feature_dim = c.zoo.feature_dim;
  return c;
}

void ExperimentConfig::validate() const {
  zoo.validate();
  encoder.validate();
  train.validate();
  if (task_categories < 2 || task_categories > zoo.k_min) {
    throw InvalidArgument("task_categories must lie in [2, k_min=" + std::to_string(zoo.k_min) + "]");
  }
  if (zoo.k_max > encoder.k_max) throw InvalidArgument("encoder k_max is below the zoo's k_max");
  if (train.q_n_max > zoo.samples.query) throw InvalidArgument("q_n_max exceeds the query split size");
  if (eval_q_n < 1 || eval_q_n > zoo.samples.test || eval_q_n > zoo.samples.validation) {
    throw InvalidArgument("eval_q_n must lie in [1, test split size]");
  }
  if (mixed_q_n < 2 || mixed_q_n > zoo.samples.test) throw InvalidArgument("mixed_q_n must lie in [2, test split size]");
  if (eval_tasks_per_model == 0) throw InvalidArgument("eval_tasks_per_model must be positive");
  if (!(oracle.split_ratio > 0.0 && oracle.split_ratio < 1.0) ||
      !(mixed_oracle.split_ratio > 0.0 && mixed_oracle.split_ratio < 1.0)) {
    throw InvalidArgument("oracle split_ratio must lie in (0, 1)");
  }
}

std::vector<zoo::DomainData> zoo_domains(const zoo::Zoo& zoo) {
  std::vector<zoo::DomainData> out;
  for (const auto& e : zoo.entries) out.push_back(zoo::generate_domain(e.domain));
  return out;
}

std::string to_string(PoolSet s) {
  switch (s) {
    case PoolSet::external: return "external";
    case PoolSet::training_data: return "training_data";
    case PoolSet::all: return "all";
  }
  return "?";
}

PoolSet pool_set_from_string(const std::string& s) {
  for (PoolSet p : {PoolSet::external, PoolSet::training_data, PoolSet::all}) {
    if (to_string(p) == s) return p;
  }
  throw InvalidArgument("unknown pool source '" + s + "' (external|training_data|all)");
}

std::vector<ModelProbes> probe_zoo_unchecked(const zoo::Zoo& zoo, const std::vector<zoo::DomainData>& domains,
                                             const ExperimentConfig& config, PoolSet which) {
  const std::size_t m = zoo.size();
  const bool external = which != PoolSet::training_data;
  const bool own = which != PoolSet::external;
  std::vector<ModelProbes> out(m);
  std::vector<std::exception_ptr> errors(m);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < m; i = next++) {
      try {
        const auto& e = zoo.entries[i];
        const auto pools = zoo::make_probe_pools(e.model.model_id(), e.domain, domains[i], config.pools);
        if (external) {
          for (const auto& p : pools.training) out[i].training.push_back(probe::probe_model(e.model, p, config.probe));
          out[i].evaluation = probe::probe_model(e.model, pools.evaluation, config.probe);
        }
        if (own) out[i].training_data = probe::probe_model(e.model, pools.training_data, config.probe);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::size_t threads = config.zoo.threads != 0 ? config.zoo.threads : std::max(1U, std::thread::hardware_concurrency());
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < std::min(threads, m); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

void require_coverage(const std::vector<std::string>& model_ids, const std::vector<ModelProbes>& probes,
                      PoolSet which) {
  auto covered = [](const probe::ProbeResult& r) { return r.anchor_list().size(); };
  std::string bad;
  for (std::size_t i = 0; i < probes.size(); ++i) {
    bool ok = true;
    if (which != PoolSet::training_data) {
      ok = covered(probes[i].evaluation) >= 2 && !probes[i].training.empty();
      for (const auto& r : probes[i].training) ok = ok && covered(r) >= 2;
    }
    if (which != PoolSet::external) ok = ok && covered(probes[i].training_data) >= 2;
    if (!ok) bad += (bad.empty() ? "" : ", ") + model_ids.at(i);
  }
  if (!bad.empty()) throw probe::ProbePoolUnsuitableError("pools cover fewer than two categories for: " + bad);
}

std::vector<ModelProbes> probe_zoo(const zoo::Zoo& zoo, const std::vector<zoo::DomainData>& domains,
                                   const ExperimentConfig& config, PoolSet which) {
  auto out = probe_zoo_unchecked(zoo, domains, config, which);
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < zoo.size(); ++i) ids.push_back(zoo.model(i).model_id());
  require_coverage(ids, out, which);
  return out;
}

alignment::TrainingData make_training_data(const zoo::Zoo& zoo, const std::vector<zoo::DomainData>& domains,
                                           const std::vector<ModelProbes>& probes, const ExperimentConfig& config) {
  alignment::TrainingData data;
  for (std::size_t i = 0; i < zoo.size(); ++i) {
    data.model_ids.push_back(zoo.model(i).model_id());
    std::vector<KnowledgeGraphSet> graphs;
    for (const auto& r : probes[i].training) graphs.push_back(probe::build_graph_set(r));
    data.train_graphs.push_back(std::move(graphs));
    data.eval_graphs.push_back(probe::build_graph_set(probes[i].evaluation));
  }
  const std::size_t k_T = config.task_categories;
  data.sample_task = [&domains, k_T](std::size_t model, std::size_t q_n, Rng& rng) {
    return zoo::sample_task(domains.at(model).query, k_T, q_n, rng, "train");
  };
  Rng rng(derive_seed(config.seed, {0x7a1}));
  for (std::size_t i = 0; i < zoo.size(); ++i) {
    for (std::size_t r = 0; r < config.validation_tasks_per_model; ++r) {
      data.validation.push_back(
          {zoo::sample_task(domains[i].validation, k_T, config.eval_q_n, rng,
                            zoo.model(i).model_id() + "/val-" + std::to_string(r)),
           i});
    }
  }
  return data;
}

std::vector<LabeledQuery> benchmark_tasks(const std::vector<zoo::DomainData>& domains, const ExperimentConfig& config) {
  Rng rng(derive_seed(config.seed, {0xbe}));
  std::vector<LabeledQuery> out;
  for (std::size_t i = 0; i < domains.size(); ++i) {
    for (std::size_t r = 0; r < config.eval_tasks_per_model; ++r) {
      out.push_back({zoo::sample_task(domains[i].test, config.task_categories, config.eval_q_n, rng,
                                      zoo::model_id_for(i) + "/test-" + std::to_string(r)),
                     i});
    }
  }
  return out;
}

std::vector<QueryTask> mixed_domain_tasks(const zoo::Zoo& zoo, const std::vector<zoo::DomainData>& domains,
                                          const ExperimentConfig& config) {
  Rng rng(derive_seed(config.seed, {0x3f}));
  std::vector<QueryTask> out;
  for (std::size_t t = 0; t < config.mixed_tasks; ++t) {
    std::vector<const zoo::LabeledSet*> sources;
    for (std::size_t c = 0; c < config.task_categories; ++c) sources.push_back(&domains[rng() % zoo.size()].test);
    out.push_back(zoo::sample_mixed_task(sources, config.mixed_q_n, rng, "mixed-" + std::to_string(t)));
  }
  return out;
}

json to_json(const MetricSummary& s) {
  return {{"tasks", s.tasks},
          {"r1", s.r1},
          {"r3", s.r3},
          {"top1_accuracy", s.top1_accuracy},
          {"pearson", s.pearson},
          {"spearman", s.spearman},
          {"pearson_per_task", s.pearson_per_task},
          {"spearman_per_task", s.spearman_per_task},
          {"undefined_correlations", s.undefined_correlations},
          {"runtime_seconds", s.runtime_seconds}};
}

MetricSummary summarize(const std::vector<Retrieval>& retrievals, const OracleTable& oracle) {
  const auto start = std::chrono::steady_clock::now();
  if (retrievals.size() != oracle.accuracy.size()) throw InvalidArgument("summarize: retrieval/oracle task mismatch");
  std::map<std::string, std::size_t> index;
  for (std::size_t j = 0; j < oracle.model_ids.size(); ++j) index[oracle.model_ids[j]] = j;
  const std::size_t m = oracle.model_ids.size();
  MetricSummary s;
  s.tasks = retrievals.size();
  std::vector<std::vector<std::size_t>> rankings;
  double corr_p = 0.0, corr_s = 0.0;
  std::size_t corr_n = 0;
  for (std::size_t t = 0; t < retrievals.size(); ++t) {
    if (retrievals[t].task_id != oracle.task_ids[t]) {
      throw InvalidArgument("summarize: task '" + retrievals[t].task_id + "' is not in the oracle at row " +
                            std::to_string(t));
    }
    std::vector<std::size_t> ranking;
    std::vector<double> score(m, 0.0);
    for (const auto& r : retrievals[t].ranking) {
      const auto it = index.find(r.model_id);
      if (it == index.end()) throw InvalidArgument("summarize: unknown model '" + r.model_id + "'");
      ranking.push_back(it->second);
      score[it->second] = -r.distance;
    }
    if (ranking.size() != m) throw InvalidArgument("summarize: rankings must cover every oracle model");
    s.top1_accuracy += oracle.accuracy[t][ranking.front()];
    try {
      const double p = pearson(score, oracle.accuracy[t]);
      const double r = spearman(score, oracle.accuracy[t]);
      s.pearson_per_task.push_back(p);
      s.spearman_per_task.push_back(r);
      corr_p += p;
      corr_s += r;
      ++corr_n;
    } catch (const UndefinedCorrelationError&) {
      ++s.undefined_correlations;
    }
    rankings.push_back(std::move(ranking));
  }
  s.r1 = recall_at_k(rankings, oracle.accuracy, 1);
  s.r3 = recall_at_k(rankings, oracle.accuracy, std::min<std::size_t>(3, m));
  s.top1_accuracy /= static_cast<double>(s.tasks);
  if (corr_n > 0) {
    s.pearson = corr_p / static_cast<double>(corr_n);
    s.spearman = corr_s / static_cast<double>(corr_n);
  }
  s.runtime_seconds = seconds_since(start);
  return s;
}

std::vector<Retrieval> retrieve_all(const std::vector<QueryTask>& tasks, const EmbeddingStore& store,
                                    const nn::ParameterSet& params, const encoders::EncoderConfig& encoder) {
  std::vector<const QueryTask*> ptrs;
  for (const auto& t : tasks) ptrs.push_back(&t);
  const auto vectors = encoders::encode_query_batch(ptrs, params, encoder);
  std::vector<Retrieval> out;
  for (std::size_t i = 0; i < tasks.size(); ++i) out.push_back(alignment::retrieve(vectors[i], store, 0, tasks[i].task_id));
  return out;
}

EmbeddingStore store_from_probes(const std::vector<ModelProbes>& probes, bool training_data,
                                 const nn::ParameterSet& params, const encoders::EncoderConfig& encoder) {
  std::vector<KnowledgeGraphSet> graphs;
  for (const auto& p : probes) graphs.push_back(probe::build_graph_set(training_data ? p.training_data : p.evaluation));
  std::vector<const KnowledgeGraphSet*> ptrs;
  for (const auto& g : graphs) ptrs.push_back(&g);
  EmbeddingStore store(encoder.embedding);
  for (auto& v : encoders::encode_model_batch(ptrs, params, encoder)) store.add(std::move(v));
  return store;
}

ParityReport probe_parity_experiment(const std::vector<QueryTask>& tasks, const OracleTable& oracle,
                                     const EmbeddingStore& external, const EmbeddingStore& training_data,
                                     const nn::ParameterSet& params, const encoders::EncoderConfig& encoder) {
  if (external.empty() || training_data.empty()) throw InvalidArgument("parity experiment needs both stores");
  const auto a = retrieve_all(tasks, external, params, encoder);
  const auto b = retrieve_all(tasks, training_data, params, encoder);
  ParityReport r;
  r.r1_external = summarize(a, oracle).r1;
  r.r1_training_data = summarize(b, oracle).r1;
  r.gap = std::abs(r.r1_external - r.r1_training_data);
  std::size_t same = 0;
  for (std::size_t i = 0; i < tasks.size(); ++i) same += a[i].chosen() == b[i].chosen();
  r.agreement = static_cast<double>(same) / static_cast<double>(tasks.size());
  return r;
}

ExperimentResult run_experiment(const ExperimentConfig& raw, const std::optional<std::filesystem::path>& log_path) {
  const ExperimentConfig config = raw.resolved();
  config.validate();
  ExperimentResult out;
  auto t0 = std::chrono::steady_clock::now();
  const zoo::Zoo zoo = zoo::build_zoo(config.zoo);
  const auto domains = zoo_domains(zoo);
  out.zoo_seconds = seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  const auto probes = probe_zoo(zoo, domains, config);
  out.probe_seconds = seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  const auto data = make_training_data(zoo, domains, probes, config);
  out.training = alignment::train_proxy(data, config.encoder, config.train, log_path);
  out.train_seconds = seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  const auto& params = out.training.params;
  std::vector<QueryTask> tasks;
  for (auto& q : benchmark_tasks(domains, config)) tasks.push_back(std::move(q.task));
  const OracleTable oracle = build_oracle(tasks, zoo, config.oracle);
  out.benchmark = summarize(retrieve_all(tasks, out.training.store, params, config.encoder), oracle);

  const auto mixed = mixed_domain_tasks(zoo, domains, config);
  const OracleTable mixed_oracle = build_oracle(mixed, zoo, config.mixed_oracle);
  out.mixed = summarize(retrieve_all(mixed, out.training.store, params, config.encoder), mixed_oracle);

  out.parity = probe_parity_experiment(tasks, oracle, out.training.store,
                                       store_from_probes(probes, true, params, config.encoder), params, config.encoder);
  out.eval_seconds = seconds_since(t0);
  return out;
}

}  // namespace k2v::eval
