#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "k2v/model/task.hpp"
#include "k2v/nn/layers.hpp"
#include "k2v/nn/parameters.hpp"
#include "k2v/nn/tape.hpp"
#include "k2v/probe/probe.hpp"

namespace k2v::encoders {

/// lstm: bidirectional cells; concat: flatten a zero-padded k_max layout,
/// then linear; avg: mean of the inputs, then linear.
enum class Variant { lstm, concat, avg };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

inline constexpr int kEncoderFormatVersion = 1;

struct EncoderConfig {
  std::size_t feature_dim = 32;  // d
  std::size_t hidden = 128;      // H
  std::size_t embedding = 256;   // E
  std::size_t model_count = 12;  // m, size of the training head
  /// Largest category count the concat layouts accommodate.
  std::size_t k_max = 10;
  Variant model_variant = Variant::lstm;
  Variant query_variant = Variant::lstm;
  std::uint64_t seed = 1;

  void validate() const;
};

nlohmann::json to_json(const EncoderConfig& c);
EncoderConfig encoder_config_from_json(const nlohmann::json& j);

/// One set holding both encoders: "menc.*" (model side, including the
/// "menc.head" classifier used only by the consistency loss) and "qenc.*".
nn::ParameterSet make_encoder_params(const EncoderConfig& config);

/// Differentiable batch encoders. Rows follow the input order.
/// Model side: [n x E]; every graph set needs >= 2 subgraphs.
nn::Var encode_models(nn::Tape& tape, nn::ParamSource params, const EncoderConfig& config,
                      std::span<const probe::KnowledgeGraphSet* const> graphs);
/// Inner-cell summaries theta_j of one graph set, [subgraphs x 2H].
nn::Var subgraph_summaries(nn::Tape& tape, nn::ParamSource params, const EncoderConfig& config,
                           const probe::KnowledgeGraphSet& graph);
/// The node sequence fed to the inner cell for subgraph `slot`, [k x d].
const nn::Tensor& inner_sequence(const probe::KnowledgeGraphSet& graph, std::size_t slot);
/// Query side: [n x E].
nn::Var encode_queries(nn::Tape& tape, nn::ParamSource params, const EncoderConfig& config,
                       std::span<const QueryTask* const> tasks);
/// [n x E] -> [n x m]. Training only.
nn::Var classifier_logits(nn::Tape& tape, nn::ParamSource params, const EncoderConfig& config, nn::Var h);

struct ModelVector {
  std::vector<double> h;
  std::string model_id;
  std::string pool_id;

  friend bool operator==(const ModelVector&, const ModelVector&) = default;
};

struct QueryVector {
  std::vector<double> t;
  std::string task_digest;
};

ModelVector encode_model(const probe::KnowledgeGraphSet& graph, const nn::ParameterSet& params,
                         const EncoderConfig& config);
std::vector<ModelVector> encode_model_batch(std::span<const probe::KnowledgeGraphSet* const> graphs,
                                            const nn::ParameterSet& params, const EncoderConfig& config);
QueryVector encode_query(const QueryTask& task, const nn::ParameterSet& params, const EncoderConfig& config);
std::vector<QueryVector> encode_query_batch(std::span<const QueryTask* const> tasks, const nn::ParameterSet& params,
                                            const EncoderConfig& config);
std::vector<double> classifier_logits(const ModelVector& h, const nn::ParameterSet& params,
                                      const EncoderConfig& config);

/// Per-category means of a task in ascending label order, [k_T x d].
nn::Tensor category_means(const QueryTask& task);

/// `<path>` holds the K2V1 parameters, `<path>.json` the sidecar
/// {E, H, d, variant, query_variant, m, k_max, seed, format_version}.
void save_encoder(const std::filesystem::path& path, const nn::ParameterSet& params, const EncoderConfig& config);
nn::ParameterSet load_encoder(const std::filesystem::path& path, EncoderConfig* config);

}  // namespace k2v::encoders
