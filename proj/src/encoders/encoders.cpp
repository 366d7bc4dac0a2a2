#include "k2v/encoders/encoders.hpp"

#include <algorithm>
#include <map>
#include <nlohmann/json.hpp>

#include "k2v/error.hpp"
#include "k2v/nn/checkpoint.hpp"

namespace k2v::encoders {

using nlohmann::json;
using nn::Tape;
using nn::Tensor;
using nn::Var;

std::string to_string(Variant v) {
  switch (v) {
    case Variant::lstm:
      return "lstm";
    case Variant::concat:
      return "concat";
    case Variant::avg:
      return "avg";
  }
  return "?";
}

Variant variant_from_string(const std::string& s) {
  if (s == "lstm") return Variant::lstm;
  if (s == "concat") return Variant::concat;
  if (s == "avg") return Variant::avg;
  throw InvalidArgument("unknown encoder variant '" + s + "' (expected lstm, concat or avg)");
}

void EncoderConfig::validate() const {
  if (feature_dim == 0 || hidden == 0 || embedding == 0) throw InvalidArgument("encoder dimensions must be positive");
  if (model_count < 1) throw InvalidArgument("encoder head needs at least one model");
  if (k_max < 2 || k_max > 10) throw InvalidArgument("k_max must lie in [2, 10]");
}

json to_json(const EncoderConfig& c) {
  return {{"d", c.feature_dim},
          {"H", c.hidden},
          {"E", c.embedding},
          {"m", c.model_count},
          {"k_max", c.k_max},
          {"variant", to_string(c.model_variant)},
          {"query_variant", to_string(c.query_variant)},
          {"seed", c.seed},
          {"format_version", kEncoderFormatVersion}};
}

EncoderConfig encoder_config_from_json(const json& j) {
  if (j.at("format_version").get<int>() != kEncoderFormatVersion) {
    throw VersionError("encoder format version " + j.at("format_version").dump());
  }
  EncoderConfig c;
  c.feature_dim = j.at("d");
  c.hidden = j.at("H");
  c.embedding = j.at("E");
  c.model_count = j.at("m");
  c.k_max = j.at("k_max");
  c.model_variant = variant_from_string(j.at("variant"));
  c.query_variant = variant_from_string(j.at("query_variant"));
  c.seed = j.at("seed");
  c.validate();
  return c;
}

nn::ParameterSet make_encoder_params(const EncoderConfig& c) {
  c.validate();
  nn::ParameterSet p(c.seed);
  const std::size_t d = c.feature_dim, H = c.hidden;
  switch (c.model_variant) {
    case Variant::lstm:
      nn::add_bilstm(p, "menc.inner", d, H);
      nn::add_bilstm(p, "menc.outer", 2 * H, H);
      break;
    case Variant::concat:
      nn::add_dense(p, "menc.inner", c.k_max * d, 2 * H);
      nn::add_dense(p, "menc.outer", c.k_max * 2 * H, 2 * H);
      break;
    case Variant::avg:
      nn::add_dense(p, "menc.inner", d, 2 * H);
      nn::add_dense(p, "menc.outer", 2 * H, 2 * H);
      break;
  }
  nn::add_dense(p, "menc.proj", 2 * H, c.embedding);
  nn::add_dense(p, "menc.head", c.embedding, c.model_count);
  switch (c.query_variant) {
    case Variant::lstm:
      nn::add_bilstm(p, "qenc.cell", d, H);
      break;
    case Variant::concat:
      nn::add_dense(p, "qenc.cell", c.k_max * d, 2 * H);
      break;
    case Variant::avg:
      nn::add_dense(p, "qenc.cell", d, 2 * H);
      break;
  }
  nn::add_dense(p, "qenc.proj", 2 * H, c.embedding);
  return p;
}

namespace {

// Reduces sequences to one [batch x 2H] summary with the chosen cell.
// `steps[t]` is [batch x width]; all steps share the batch.
Var summarize(Tape& tape, std::span<const Var> steps, nn::ParamSource params, const std::string& name,
              Variant variant, std::size_t k_max) {
  switch (variant) {
    case Variant::lstm:
      return nn::bilstm_forward(tape, steps, params, name).final;
    case Variant::concat: {
      if (steps.size() > k_max) {
        throw DimensionError("sequence of length " + std::to_string(steps.size()) + " exceeds k_max=" +
                             std::to_string(k_max));
      }
      std::vector<Var> parts(steps.begin(), steps.end());
      if (steps.size() < k_max) {
        parts.push_back(tape.constant(Tensor::zeros(steps[0].rows(), (k_max - steps.size()) * steps[0].cols())));
      }
      return nn::dense_forward(tape, nn::concat_cols(parts), params, name);
    }
    case Variant::avg: {
      Var acc = steps[0];
      for (std::size_t t = 1; t < steps.size(); ++t) acc = nn::add(acc, steps[t]);
      return nn::dense_forward(tape, nn::scale(acc, 1.0 / static_cast<double>(steps.size())), params, name);
    }
  }
  throw InvalidArgument("unreachable encoder variant");
}

void check_graph(const probe::KnowledgeGraphSet& g, const EncoderConfig& c) {
  if (g.subgraphs.size() < 2) {
    throw InvalidArgument("graph set of '" + g.model_id + "' has " + std::to_string(g.subgraphs.size()) +
                          " subgraphs; the encoder needs at least 2");
  }
  if (g.dim != c.feature_dim) {
    throw DimensionError("graph set of '" + g.model_id + "' has d=" + std::to_string(g.dim) + ", encoder expects " +
                         std::to_string(c.feature_dim));
  }
  if (g.category_count > c.k_max) throw DimensionError("graph set category count exceeds k_max");
}

}  // namespace

Var encode_models(Tape& tape, nn::ParamSource params, const EncoderConfig& c,
                  std::span<const probe::KnowledgeGraphSet* const> graphs) {
  if (graphs.empty()) throw InvalidArgument("encode_models: empty batch");
  for (const auto* g : graphs) check_graph(*g, c);

  // Inner pass: every subgraph of every model, grouped by sequence length k.
  struct Ref {
    std::size_t model, slot;
  };
  std::map<std::size_t, std::vector<Ref>> by_k;
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    for (std::size_t s = 0; s < graphs[i]->subgraphs.size(); ++s) by_k[graphs[i]->category_count].push_back({i, s});
  }
  std::vector<Var> theta_blocks;
  std::vector<std::vector<std::size_t>> theta_row(graphs.size());
  for (std::size_t i = 0; i < graphs.size(); ++i) theta_row[i].resize(graphs[i]->subgraphs.size());
  std::size_t next_row = 0;
  for (const auto& [k, refs] : by_k) {
    std::vector<Var> steps;
    for (std::size_t t = 0; t < k; ++t) {
      Tensor step({refs.size(), c.feature_dim});
      for (std::size_t r = 0; r < refs.size(); ++r) {
        std::ranges::copy(inner_sequence(*graphs[refs[r].model], refs[r].slot).row_span(t), step.row_span(r).begin());
      }
      steps.push_back(tape.constant(std::move(step)));
    }
    theta_blocks.push_back(summarize(tape, steps, params, "menc.inner", c.model_variant, c.k_max));
    for (const auto& ref : refs) theta_row[ref.model][ref.slot] = next_row++;
  }
  Var theta = theta_blocks.size() == 1 ? theta_blocks[0] : nn::concat_rows(theta_blocks);

  // Outer pass over (theta_1 .. theta_k), grouped by number of subgraphs.
  std::map<std::size_t, std::vector<std::size_t>> by_len;
  for (std::size_t i = 0; i < graphs.size(); ++i) by_len[graphs[i]->subgraphs.size()].push_back(i);
  std::vector<Var> outer_blocks;
  std::vector<std::size_t> out_row(graphs.size());
  next_row = 0;
  for (const auto& [len, models] : by_len) {
    std::vector<Var> steps;
    for (std::size_t t = 0; t < len; ++t) {
      std::vector<std::size_t> rows;
      for (std::size_t i : models) rows.push_back(theta_row[i][t]);
      steps.push_back(nn::gather_rows(theta, rows));
    }
    outer_blocks.push_back(summarize(tape, steps, params, "menc.outer", c.model_variant, c.k_max));
    for (std::size_t i : models) out_row[i] = next_row++;
  }
  Var outer = outer_blocks.size() == 1 ? outer_blocks[0] : nn::concat_rows(outer_blocks);
  bool ordered = true;
  for (std::size_t i = 0; i < out_row.size(); ++i) ordered = ordered && out_row[i] == i;
  if (!ordered) outer = nn::gather_rows(outer, out_row);
  return nn::dense_forward(tape, outer, params, "menc.proj");
}

Var subgraph_summaries(Tape& tape, nn::ParamSource params, const EncoderConfig& c,
                       const probe::KnowledgeGraphSet& graph) {
  check_graph(graph, c);
  std::vector<Var> steps;
  for (std::size_t t = 0; t < graph.category_count; ++t) {
    Tensor step({graph.subgraphs.size(), c.feature_dim});
    for (std::size_t s = 0; s < graph.subgraphs.size(); ++s) {
      std::ranges::copy(inner_sequence(graph, s).row_span(t), step.row_span(s).begin());
    }
    steps.push_back(tape.constant(std::move(step)));
  }
  return summarize(tape, steps, params, "menc.inner", c.model_variant, c.k_max);
}

const Tensor& inner_sequence(const probe::KnowledgeGraphSet& graph, std::size_t slot) {
  return graph.subgraphs.at(slot).nodes;
}

Tensor category_means(const QueryTask& task) {
  task.validate();
  const std::size_t k = task.category_count, d = task.dim();
  Tensor means({k, d});
  std::vector<std::size_t> count(k, 0);
  for (std::size_t r = 0; r < task.size(); ++r) {
    const std::size_t l = task.labels[r];
    auto row = task.samples.row_span(r);
    auto m = means.row_span(l);
    for (std::size_t j = 0; j < d; ++j) m[j] += row[j];
    ++count[l];
  }
  for (std::size_t l = 0; l < k; ++l) {
    if (count[l] == 0) throw InvalidArgument("task '" + task.task_id + "' has no samples of category " + std::to_string(l));
    auto m = means.row_span(l);
    for (double& v : m) v /= static_cast<double>(count[l]);
  }
  return means;
}

Var encode_queries(Tape& tape, nn::ParamSource params, const EncoderConfig& c, std::span<const QueryTask* const> tasks) {
  if (tasks.empty()) throw InvalidArgument("encode_queries: empty batch");
  std::vector<Tensor> means;
  std::map<std::size_t, std::vector<std::size_t>> by_k;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    means.push_back(category_means(*tasks[i]));
    if (tasks[i]->dim() != c.feature_dim) {
      throw DimensionError("task '" + tasks[i]->task_id + "' has d=" + std::to_string(tasks[i]->dim()) +
                           ", encoder expects " + std::to_string(c.feature_dim));
    }
    by_k[tasks[i]->category_count].push_back(i);
  }
  std::vector<Var> blocks;
  std::vector<std::size_t> out_row(tasks.size());
  std::size_t next_row = 0;
  for (const auto& [k, ids] : by_k) {
    std::vector<Var> steps;
    for (std::size_t t = 0; t < k; ++t) {
      Tensor step({ids.size(), c.feature_dim});
      for (std::size_t r = 0; r < ids.size(); ++r) std::ranges::copy(means[ids[r]].row_span(t), step.row_span(r).begin());
      steps.push_back(tape.constant(std::move(step)));
    }
    blocks.push_back(summarize(tape, steps, params, "qenc.cell", c.query_variant, c.k_max));
    for (std::size_t i : ids) out_row[i] = next_row++;
  }
  Var out = blocks.size() == 1 ? blocks[0] : nn::concat_rows(blocks);
  bool ordered = true;
  for (std::size_t i = 0; i < out_row.size(); ++i) ordered = ordered && out_row[i] == i;
  if (!ordered) out = nn::gather_rows(out, out_row);
  return nn::dense_forward(tape, out, params, "qenc.proj");
}

Var classifier_logits(Tape& tape, nn::ParamSource params, const EncoderConfig& c, Var h) {
  if (h.cols() != c.embedding) {
    throw DimensionError("classifier head expects E=" + std::to_string(c.embedding) + ", got " +
                         std::to_string(h.cols()));
  }
  return nn::dense_forward(tape, h, params, "menc.head");
}

std::vector<ModelVector> encode_model_batch(std::span<const probe::KnowledgeGraphSet* const> graphs,
                                            const nn::ParameterSet& params, const EncoderConfig& config) {
  Tape tape;
  const Tensor& h = encode_models(tape, params, config, graphs).value();
  std::vector<ModelVector> out;
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    const auto row = h.row_span(i);
    out.push_back({{row.begin(), row.end()}, graphs[i]->model_id, graphs[i]->pool_id});
  }
  return out;
}

ModelVector encode_model(const probe::KnowledgeGraphSet& graph, const nn::ParameterSet& params,
                         const EncoderConfig& config) {
  const probe::KnowledgeGraphSet* one[] = {&graph};
  return encode_model_batch(one, params, config).front();
}

std::vector<QueryVector> encode_query_batch(std::span<const QueryTask* const> tasks, const nn::ParameterSet& params,
                                            const EncoderConfig& config) {
  Tape tape;
  const Tensor& t = encode_queries(tape, params, config, tasks).value();
  std::vector<QueryVector> out;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const auto row = t.row_span(i);
    out.push_back({{row.begin(), row.end()}, tasks[i]->digest()});
  }
  return out;
}

QueryVector encode_query(const QueryTask& task, const nn::ParameterSet& params, const EncoderConfig& config) {
  const QueryTask* one[] = {&task};
  return encode_query_batch(one, params, config).front();
}

std::vector<double> classifier_logits(const ModelVector& h, const nn::ParameterSet& params,
                                      const EncoderConfig& config) {
  Tape tape;
  const Tensor& out = classifier_logits(tape, params, config, tape.constant(Tensor::row(h.h))).value();
  return out.data();
}

void save_encoder(const std::filesystem::path& path, const nn::ParameterSet& params, const EncoderConfig& config) {
  nn::save_parameters(path, params);
  nn::write_file(path.string() + ".json", to_json(config).dump(2) + "\n");
}

nn::ParameterSet load_encoder(const std::filesystem::path& path, EncoderConfig* config) {
  const EncoderConfig c = encoder_config_from_json(json::parse(nn::read_file(path.string() + ".json")));
  nn::ParameterSet loaded = nn::load_parameters(path, c.seed);
  const nn::ParameterSet expected = make_encoder_params(c);
  for (const auto& [name, p] : expected.entries()) {
    if (!loaded.contains(name) || loaded.at(name).value.shape() != p.value.shape()) {
      throw FormatError("encoder checkpoint " + path.string() + " lacks or misshapes '" + name + "'");
    }
  }
  if (config != nullptr) *config = c;
  return loaded;
}

}  // namespace k2v::encoders
