#include "cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "k2v/alignment/store.hpp"
#include "k2v/alignment/train.hpp"
#include "k2v/eval/config.hpp"
#include "k2v/eval/experiment.hpp"
#include "k2v/eval/sweep.hpp"
#include "k2v/nn/checkpoint.hpp"
#include "k2v/zoo/zoo.hpp"

namespace k2v::cli {

namespace fs = std::filesystem;
using eval::ExperimentConfig;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingFileError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) { nn::write_file(path, j.dump(2) + "\n"); }

// Everything a stage needs to reproduce its output.
json config_record(const ExperimentConfig& c, const std::string& command) {
  const ExperimentConfig r = c.resolved();
  return {{"command", command},
          {"version", kVersion},
          {"config", eval::to_json(c)},
          {"config_digest", eval::config_digest(c)},
          {"derived_seeds",
           {{"zoo", r.zoo.seed}, {"encoder", r.encoder.seed}, {"train", r.train.seed},
            {"finetune", r.oracle.finetune.seed}}}};
}

struct Context {
  fs::path workdir;
  ExperimentConfig config;
  std::ostream& out;

  fs::path path(const std::string& rel) const {
    fs::path p(rel);
    return p.is_absolute() ? p : workdir / p;
  }
  fs::path stage(const std::string& name) const { return workdir / name; }
  void record(const std::string& stage_dir, const std::string& command) const {
    write_json(stage(stage_dir) / "config.json", config_record(config, command));
  }
};

zoo::Zoo load_checked_zoo(const Context& ctx) {
  const zoo::Zoo z = zoo::load_zoo(ctx.stage("zoo"));
  if (z.size() != ctx.config.zoo.model_count) {
    throw InvalidArgument("config has zoo.model_count=" + std::to_string(ctx.config.zoo.model_count) +
                          " but the zoo on disk holds " + std::to_string(z.size()) + " models");
  }
  if (z.model(0).input_dim() != ctx.config.zoo.feature_dim) {
    throw InvalidArgument("config feature_dim does not match the zoo on disk");
  }
  return z;
}

// ---- zoo-build -------------------------------------------------------------

void cmd_zoo_build(const Context& ctx) {
  const auto start = std::chrono::steady_clock::now();
  const zoo::Zoo z = zoo::build_zoo(ctx.config.resolved().zoo);
  const auto manifest = zoo::save_zoo(z, ctx.stage("zoo"));
  ctx.record("zoo", "zoo-build");
  ctx.out << "zoo " << manifest.zoo_id << ": " << manifest.models.size() << " models, digest " << manifest.digest()
          << "\n";
  for (const auto& m : manifest.models) {
    char line[128];
    std::snprintf(line, sizeof line, "  %-10s k=%zu d=%zu val_acc=%.3f\n", m.model_id.c_str(), m.k, m.d, m.val_acc);
    ctx.out << line;
  }
  ctx.out << "built in " << seconds_since(start) << " s\n";
}

// ---- probe -----------------------------------------------------------------

json coverage_entry(const probe::ProbeResult& r, const std::string& file) {
  const auto cov = r.coverage();
  std::size_t covered = 0;
  for (bool c : cov) covered += c;
  const std::size_t k = r.category_count;
  double gap_sum = 0.0;
  std::size_t boundaries = 0;
  for (const auto& b : r.boundary_list()) gap_sum += b.gap, ++boundaries;
  // Directed off-diagonal KRM entries without a boundary sample.
  const std::size_t masked = k * (k - 1) - r.boundaries.size();
  return {{"file", file},
          {"pool_id", r.pool_id},
          {"k", k},
          {"categories_covered", covered},
          {"coverage", static_cast<double>(covered) / static_cast<double>(k)},
          {"masked_krm_entries", masked},
          {"boundary_pairs", r.stats.pairs},
          {"mean_gap", boundaries == 0 ? 0.0 : gap_sum / static_cast<double>(boundaries)},
          {"max_gap", [&] {
             double g = 0.0;
             for (const auto& b : r.boundary_list()) g = std::max(g, b.gap);
             return g;
           }()},
          {"stats",
           {{"pairs", r.stats.pairs},
            {"direct", r.stats.direct},
            {"recovered", r.stats.recovered},
            {"masked", r.stats.masked},
            {"third_category_failures", r.stats.third_category_failures},
            {"non_converged", r.stats.non_converged}}}};
}

void cmd_probe(const Context& ctx, const std::string& source) {
  const auto which = eval::pool_set_from_string(source);
  const ExperimentConfig config = ctx.config.resolved();
  const zoo::Zoo z = load_checked_zoo(ctx);
  const auto domains = eval::zoo_domains(z);
  const auto start = std::chrono::steady_clock::now();
  const auto probes = eval::probe_zoo_unchecked(z, domains, config, which);

  const fs::path dir = ctx.stage("probes");
  json index = {{"source", source}, {"models", json::array()}};
  json coverage = {{"source", source}, {"models", json::array()}};
  double gap_sum = 0.0, own_cov = 0.0, ext_cov = 0.0;
  std::size_t gap_n = 0;
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const std::string id = z.model(i).model_id();
    ids.push_back(id);
    json entry = {{"model_id", id}}, cov = {{"model_id", id}};
    auto save = [&](const probe::ProbeResult& r, const std::string& name) {
      const std::string rel = id + "/" + name + ".k2v";
      probe::save_probe(dir / rel, r);
      for (const auto& b : r.boundary_list()) gap_sum += b.gap, ++gap_n;
      return coverage_entry(r, rel);
    };
    if (which != eval::PoolSet::training_data) {
      json files = json::array(), covs = json::array();
      for (std::size_t p = 0; p < probes[i].training.size(); ++p) {
        covs.push_back(save(probes[i].training[p], "ext-" + std::to_string(p)));
        files.push_back(covs.back()["file"]);
      }
      cov["training"] = covs;
      cov["evaluation"] = save(probes[i].evaluation, "ext-eval");
      ext_cov += cov["evaluation"]["coverage"].get<double>();
      entry["training"] = files;
      entry["evaluation"] = cov["evaluation"]["file"];
    }
    if (which != eval::PoolSet::external) {
      cov["training_data"] = save(probes[i].training_data, "train-data");
      own_cov += cov["training_data"]["coverage"].get<double>();
      entry["training_data"] = cov["training_data"]["file"];
    }
    index["models"].push_back(entry);
    coverage["models"].push_back(cov);
  }
  const double m = static_cast<double>(z.size());
  coverage["summary"] = {{"mean_gap", gap_n == 0 ? 0.0 : gap_sum / static_cast<double>(gap_n)},
                         {"boundaries", gap_n},
                         {"epsilon", config.probe.epsilon}};
  if (which != eval::PoolSet::training_data) coverage["summary"]["external_eval_coverage"] = ext_cov / m;
  if (which != eval::PoolSet::external) coverage["summary"]["training_data_coverage"] = own_cov / m;
  write_json(dir / "index.json", index);
  write_json(dir / "coverage.json", coverage);
  ctx.record("probes", "probe");
  ctx.out << "probed " << z.size() << " models (" << source << ") in " << seconds_since(start) << " s\n"
          << coverage["summary"].dump() << "\n";
  eval::require_coverage(ids, probes, which);
}

std::vector<eval::ModelProbes> load_probes(const Context& ctx, const zoo::Zoo& z, bool need_external,
                                           bool need_own) {
  const fs::path dir = ctx.stage("probes");
  const json index = read_json(dir / "index.json");
  const auto& models = index.at("models");
  if (models.size() != z.size()) throw FormatError("probe index does not match the zoo size");
  std::vector<eval::ModelProbes> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    const json& e = models[i];
    const std::string id = e.at("model_id").get<std::string>();
    if (id != z.model(i).model_id()) throw FormatError("probe index lists '" + id + "' at position " + std::to_string(i));
    if (need_external) {
      if (!e.contains("evaluation")) {
        throw MissingFileError("no external probe artifacts for " + id + "; run `probe --source=external`");
      }
      for (const auto& f : e.at("training")) out[i].training.push_back(probe::load_probe(dir / f.get<std::string>()));
      out[i].evaluation = probe::load_probe(dir / e.at("evaluation").get<std::string>());
    }
    if (need_own) {
      if (!e.contains("training_data")) {
        throw MissingFileError("no training-data probe artifacts for " + id + "; run `probe --source=training_data`");
      }
      out[i].training_data = probe::load_probe(dir / e.at("training_data").get<std::string>());
    }
  }
  return out;
}

// ---- train -----------------------------------------------------------------

void cmd_train(const Context& ctx) {
  const ExperimentConfig config = ctx.config.resolved();
  const zoo::Zoo z = load_checked_zoo(ctx);
  const auto domains = eval::zoo_domains(z);
  const auto probes = load_probes(ctx, z, true, false);
  const auto data = eval::make_training_data(z, domains, probes, config);
  const fs::path dir = ctx.stage("train");
  const auto start = std::chrono::steady_clock::now();
  const auto result = alignment::train_proxy(data, config.encoder, config.train, dir / "log.jsonl");
  encoders::save_encoder(dir / "encoder.k2v", result.params, result.encoder);
  alignment::save_store(dir / "store", result.store);
  json epochs = json::array();
  for (const auto& e : result.log) epochs.push_back(json::parse(alignment::to_json_line(e)));
  write_json(dir / "summary.json", {{"best_epoch", result.best_epoch},
                                    {"validation_r1", result.log.at(result.best_epoch - 1).val_r1},
                                    {"head_accuracy", result.head_accuracy},
                                    {"store_entries", result.store.size()},
                                    {"epochs", epochs}});
  ctx.record("train", "train");
  ctx.out << "trained " << result.log.size() << " epochs in " << seconds_since(start) << " s; best epoch "
          << result.best_epoch << " val R@1 " << result.log.at(result.best_epoch - 1).val_r1 << ", head accuracy "
          << result.head_accuracy << "\n";
}

struct Trained {
  nn::ParameterSet params;
  encoders::EncoderConfig encoder;
  alignment::EmbeddingStore store;
};

Trained load_trained(const Context& ctx) {
  Trained t;
  t.params = encoders::load_encoder(ctx.stage("train") / "encoder.k2v", &t.encoder);
  t.store = alignment::load_store(ctx.stage("train") / "store");
  if (t.store.dim() != t.encoder.embedding) throw FormatError("store and encoder disagree on the embedding size");
  return t;
}

// ---- retrieve --------------------------------------------------------------

json retrieval_json(const alignment::Retrieval& r, const std::string& digest) {
  json ranking = json::array();
  for (std::size_t i = 0; i < r.ranking.size(); ++i) {
    ranking.push_back({{"rank", i + 1}, {"model_id", r.ranking[i].model_id}, {"distance", r.ranking[i].distance}});
  }
  return {{"task_id", r.task_id}, {"task_digest", digest}, {"chosen", r.chosen()}, {"ranking", ranking}};
}

void cmd_retrieve(const Context& ctx, const std::string& task_file, std::size_t top, const std::string& out_file) {
  if (task_file.empty()) throw InvalidArgument("retrieve needs --task=<task file>");
  const Trained t = load_trained(ctx);
  const QueryTask task = load_task(ctx.path(task_file));
  if (task.dim() != t.encoder.feature_dim) {
    throw DimensionError("task has d=" + std::to_string(task.dim()) + " but the encoder expects d=" +
                         std::to_string(t.encoder.feature_dim));
  }
  const auto q = encoders::encode_query(task, t.params, t.encoder);
  const auto r = alignment::retrieve(q, t.store, top, task.task_id);
  for (std::size_t i = 0; i < r.ranking.size(); ++i) {
    char line[128];
    std::snprintf(line, sizeof line, "%3zu  %-12s %.6f\n", i + 1, r.ranking[i].model_id.c_str(), r.ranking[i].distance);
    ctx.out << line;
  }
  std::string name = task.task_id.empty() ? task.digest() : task.task_id;
  for (char& c : name) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
  }
  const fs::path path = out_file.empty() ? ctx.stage("retrieve") / (name + ".json") : ctx.path(out_file);
  write_json(path, retrieval_json(r, q.task_digest));
  if (out_file.empty()) ctx.record("retrieve", "retrieve");
}

// ---- eval ------------------------------------------------------------------

json without_runtime(const eval::MetricSummary& s) {
  json j = eval::to_json(s);
  j.erase("runtime_seconds");
  return j;
}

std::string metric_line(const std::string& name, const eval::MetricSummary& s) {
  char line[200];
  std::snprintf(line, sizeof line, "%-22s %5zu %7.3f %7.3f %9.3f %9.3f %9.3f %6zu\n", name.c_str(), s.tasks, s.r1, s.r3,
                s.top1_accuracy, s.pearson, s.spearman, s.undefined_correlations);
  return line;
}

void cmd_eval(const Context& ctx) {
  const ExperimentConfig config = ctx.config.resolved();
  const auto start = std::chrono::steady_clock::now();
  const zoo::Zoo z = load_checked_zoo(ctx);
  const auto domains = eval::zoo_domains(z);
  const Trained t = load_trained(ctx);
  const auto probes = load_probes(ctx, z, false, true);

  auto t0 = std::chrono::steady_clock::now();
  std::vector<QueryTask> tasks;
  for (auto& q : eval::benchmark_tasks(domains, config)) tasks.push_back(std::move(q.task));
  const auto oracle = eval::build_oracle(tasks, z, config.oracle);
  const auto benchmark = eval::summarize(eval::retrieve_all(tasks, t.store, t.params, t.encoder), oracle);
  const double benchmark_s = seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  const auto mixed = eval::mixed_domain_tasks(z, domains, config);
  const auto mixed_retrievals = eval::retrieve_all(mixed, t.store, t.params, t.encoder);
  const auto mixed_summary = eval::summarize(mixed_retrievals, eval::build_oracle(mixed, z, config.mixed_oracle));
  eval::OracleConfig alt = config.mixed_oracle;
  alt.mode = alt.mode == eval::OracleMode::direct ? eval::OracleMode::head_finetune : eval::OracleMode::direct;
  const auto mixed_alt = eval::summarize(mixed_retrievals, eval::build_oracle(mixed, z, alt));
  const double mixed_s = seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  const auto own_store = eval::store_from_probes(probes, true, t.params, t.encoder);
  const auto parity = eval::probe_parity_experiment(tasks, oracle, t.store, own_store, t.params, t.encoder);
  const double parity_s = seconds_since(t0);

  const ExperimentConfig resolved = config;
  json metrics = {
      {"config_digest", eval::config_digest(ctx.config)},
      {"seeds", {{"seed", resolved.seed}, {"encoder", resolved.encoder.seed}, {"train", resolved.train.seed}}},
      {"benchmark", without_runtime(benchmark)},
      {"mixed", without_runtime(mixed_summary)},
      {"mixed_oracle_mode", eval::to_string(config.mixed_oracle.mode)},
      {"mixed_alternate", without_runtime(mixed_alt)},
      {"mixed_alternate_oracle_mode", eval::to_string(alt.mode)},
      {"parity",
       {{"r1_external", parity.r1_external},
        {"r1_training_data", parity.r1_training_data},
        {"gap", parity.gap},
        {"agreement", parity.agreement}}},
      {"runtimes",
       {{"benchmark", benchmark_s}, {"mixed", mixed_s}, {"parity", parity_s}, {"total", seconds_since(start)}}}};
  const fs::path dir = ctx.stage("eval");
  write_json(dir / "metrics.json", metrics);

  char head[200];
  std::snprintf(head, sizeof head, "%-22s %5s %7s %7s %9s %9s %9s %6s\n", "experiment", "tasks", "R@1", "R@3",
                "top1-acc", "pearson", "spearman", "undef");
  std::string text = head;
  text += metric_line("benchmark", benchmark);
  text += metric_line("mixed/" + eval::to_string(config.mixed_oracle.mode), mixed_summary);
  text += metric_line("mixed/" + eval::to_string(alt.mode), mixed_alt);
  char line[200];
  std::snprintf(line, sizeof line, "parity: R@1 external %.3f, training data %.3f, gap %.3f, agreement %.3f\n",
                parity.r1_external, parity.r1_training_data, parity.gap, parity.agreement);
  text += line;
  nn::write_file(dir / "metrics.txt", text);
  ctx.record("eval", "eval");
  ctx.out << text;
}

// ---- sweep -----------------------------------------------------------------

std::vector<std::string> split_grid(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int cmd_sweep(const Context& ctx, const std::string& axis_name, const std::string& grid_text) {
  const auto axis = eval::sweep_axis_from_string(axis_name);
  const auto grid = grid_text.empty() ? eval::default_grid(axis) : split_grid(grid_text);
  const auto table = eval::sweep(ctx.config, axis, grid);
  const fs::path dir = ctx.stage("sweep");
  json j = eval::to_json(table);
  j["config_digest"] = eval::config_digest(ctx.config);
  write_json(dir / (axis_name + ".json"), j);
  const std::string text = eval::format_table(table);
  nn::write_file(dir / (axis_name + ".txt"), text);
  ctx.record("sweep", "sweep");
  ctx.out << text;
  if (!table.errors.empty()) {
    throw Error("sweep_partial", std::to_string(table.errors.size()) + " of " + std::to_string(grid.size()) +
                                     " grid points failed; see " + (dir / (axis_name + ".json")).string());
  }
  return 0;
}

bool is_override(const std::string& arg) {
  if (arg.rfind("--", 0) != 0) return false;
  const auto eq = arg.find('=');
  const auto dot = arg.find('.');
  return dot != std::string::npos && (eq == std::string::npos || dot < eq);
}

void print_error(std::ostream& err, const std::string& command, const std::string& code, const std::string& message) {
  err << json{{"error", {{"code", code}, {"message", message}, {"command", command}}}}.dump() << "\n";
}

}  // namespace

json resolve_config(const std::string& config_file, const std::string& env_seed,
                    const std::vector<std::string>& overrides) {
  json j = eval::to_json(ExperimentConfig{});
  if (!config_file.empty()) eval::merge_config(j, read_json(config_file));
  if (!env_seed.empty()) eval::set_dotted(j, "seed", env_seed);
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw InvalidArgument("override '" + o + "' must read --section.key=value");
    eval::set_dotted(j, o.substr(2, eq - 2), o.substr(eq + 1));
  }
  // Round trip through the typed struct to validate enum values.
  return eval::to_json(eval::experiment_config_from_json(j));
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<std::string> plain, overrides;
  for (const auto& a : args) (is_override(a) ? overrides : plain).push_back(a);

  CLI::App app{"Black-box model retrieval toolkit"};
  app.require_subcommand(1);
  std::string workdir = ".", config_file;
  app.add_option("--workdir", workdir, "Directory holding every artifact (created if needed)");
  app.add_option("--config", config_file, "JSON run configuration, relative to the workdir");
  app.set_version_flag("--version", kVersion);
  app.footer("Any --section.key=value flag overrides one config value, e.g. --train.epochs=20.\n"
             "K2V_SEED overrides the config seed.");

  std::string source = "all", task_file, out_file, axis, grid;
  std::size_t top = 0;
  app.add_subcommand("zoo-build", "Train and save the synthetic model zoo");
  auto* probe_cmd = app.add_subcommand("probe", "Probe every zoo model and save graph sets plus coverage");
  probe_cmd->add_option("--source", source, "external | training_data | all")->capture_default_str();
  app.add_subcommand("train", "Train the encoders and build the embedding store");
  auto* retrieve_cmd = app.add_subcommand("retrieve", "Rank the zoo models for one task file");
  retrieve_cmd->add_option("--task", task_file, "Task file (JSON header + K2V1 payload)")->required();
  retrieve_cmd->add_option("--top", top, "Keep the first N models (0 = all)");
  retrieve_cmd->add_option("--out", out_file, "Output JSON path (default retrieve/<task>.json)");
  app.add_subcommand("eval", "Benchmark, mixed-domain correlation and probe parity");
  auto* sweep_cmd = app.add_subcommand("sweep", "Ablation sweep over one axis");
  sweep_cmd->add_option("--axis", axis, "zoo_size | q_n | embedding_dim | encoder_variant | sal_variant")->required();
  sweep_cmd->add_option("--grid", grid, "Comma-separated grid values (default: the axis grid)");

  std::vector<std::string> reversed(plain.rbegin(), plain.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion& e) {
    out << kVersion << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    print_error(err, "", "usage", e.what());
    return 2;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  try {
    const char* env = std::getenv("K2V_SEED");
    const fs::path wd(workdir);
    fs::create_directories(wd);
    const fs::path cfg = config_file.empty() ? fs::path() : (fs::path(config_file).is_absolute() ? fs::path(config_file) : wd / config_file);
    const json resolved = resolve_config(cfg.string(), env ? env : "", overrides);
    ExperimentConfig config = eval::experiment_config_from_json(resolved);
    config.resolved().validate();
    Context ctx{wd, config, out};
    if (command == "zoo-build") cmd_zoo_build(ctx);
    if (command == "probe") cmd_probe(ctx, source);
    if (command == "train") cmd_train(ctx);
    if (command == "retrieve") cmd_retrieve(ctx, task_file, top, out_file);
    if (command == "eval") cmd_eval(ctx);
    if (command == "sweep") cmd_sweep(ctx, axis, grid);
    return 0;
  } catch (const InvalidArgument& e) {
    print_error(err, command, e.code(), e.what());
    return 2;
  } catch (const Error& e) {
    print_error(err, command, e.code(), e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error(err, command, "internal", e.what());
    return 1;
  }
}

}  // namespace k2v::cli
