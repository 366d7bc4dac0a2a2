#include "k2v/eval/config.hpp"

#include <charconv>
#include <cstdio>

#include "k2v/util/random.hpp"

namespace k2v::eval {

using nlohmann::json;

namespace {

std::string sal_name(const alignment::TrainConfig& t) {
  return t.sal == alignment::SalVariant::cosine ? "cosine" : "contrastive";
}

alignment::SalVariant sal_from(const std::string& s) {
  if (s == "cosine") return alignment::SalVariant::cosine;
  if (s == "contrastive") return alignment::SalVariant::contrastive;
  throw InvalidArgument("unknown sal variant '" + s + "' (cosine|contrastive)");
}

json oracle_json(const OracleConfig& o) {
  return {{"mode", to_string(o.mode)},
          {"split_ratio", o.split_ratio},
          {"finetune_steps", o.finetune.steps},
          {"finetune_learning_rate", o.finetune.learning_rate},
          {"threads", o.threads}};
}

void oracle_from(const json& j, OracleConfig& o) {
  o.mode = oracle_mode_from_string(j.at("mode").get<std::string>());
  o.split_ratio = j.at("split_ratio").get<double>();
  o.finetune.steps = j.at("finetune_steps").get<std::size_t>();
  o.finetune.learning_rate = j.at("finetune_learning_rate").get<double>();
  o.threads = j.at("threads").get<std::size_t>();
}

json parse_scalar(const json& like, const std::string& path, const std::string& text) {
  auto fail = [&] { return InvalidArgument("config key '" + path + "': cannot parse '" + text + "'"); };
  if (like.is_string()) return text;
  if (like.is_boolean()) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw fail();
  }
  if (like.is_number_unsigned() || like.is_number_integer()) {
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || p != text.data() + text.size()) throw fail();
    return v;
  }
  if (like.is_number_float()) {
    try {
      std::size_t used = 0;
      const double v = std::stod(text, &used);
      if (used != text.size()) throw fail();
      return v;
    } catch (const std::logic_error&) {
      throw fail();
    }
  }
  throw InvalidArgument("config key '" + path + "' is a section, not a value");
}

}  // namespace

json to_json(const ExperimentConfig& c) {
  const auto& z = c.zoo;
  const auto& t = c.train;
  return {
      {"seed", c.seed},
      {"zoo",
       {{"zoo_id", z.zoo_id},
        {"model_count", z.model_count},
        {"k_min", z.k_min},
        {"k_max", z.k_max},
        {"feature_dim", z.feature_dim},
        {"spread", z.spread},
        {"samples",
         {{"train", z.samples.train},
          {"validation", z.samples.validation},
          {"query", z.samples.query},
          {"test", z.samples.test}}},
        {"classifier",
         {{"hidden", z.classifier.hidden},
          {"learning_rate", z.classifier.learning_rate},
          {"max_epochs", z.classifier.max_epochs},
          {"target_loss", z.classifier.target_loss},
          {"min_val_acc", z.classifier.min_val_acc}}},
        {"retries", z.retries},
        {"threads", z.threads}}},
      {"pools", {{"pool_size", c.pools.pool_size}, {"training_pools", c.pools.training_pools}}},
      {"probe",
       {{"tau", c.probe.tau},
        {"epsilon", c.probe.epsilon},
        {"max_iter", c.probe.max_iter},
        {"retries", c.probe.retries}}},
      {"encoder",
       {{"hidden", c.encoder.hidden},
        {"embedding", c.encoder.embedding},
        {"k_max", c.encoder.k_max},
        {"model_variant", encoders::to_string(c.encoder.model_variant)},
        {"query_variant", encoders::to_string(c.encoder.query_variant)}}},
      {"train",
       {{"alpha", t.alpha},
        {"margin", t.margin},
        {"batch_size", t.batch_size},
        {"learning_rate", t.learning_rate},
        {"epochs", t.epochs},
        {"sal", sal_name(t)},
        {"use_mkc", t.use_mkc},
        {"tasks_per_model", t.tasks_per_model},
        {"q_n_min", t.q_n_min},
        {"q_n_max", t.q_n_max},
        {"keep_best", t.keep_best},
        {"mean_pool_store", t.mean_pool_store}}},
      {"eval",
       {{"task_categories", c.task_categories},
        {"validation_tasks_per_model", c.validation_tasks_per_model},
        {"eval_tasks_per_model", c.eval_tasks_per_model},
        {"eval_q_n", c.eval_q_n},
        {"mixed_tasks", c.mixed_tasks},
        {"mixed_q_n", c.mixed_q_n},
        {"oracle", oracle_json(c.oracle)},
        {"mixed_oracle", oracle_json(c.mixed_oracle)}}},
  };
}

ExperimentConfig experiment_config_from_json(const json& patch) {
  json j = to_json(ExperimentConfig{});
  merge_config(j, patch);
  ExperimentConfig c;
  try {
    c.seed = j.at("seed").get<std::uint64_t>();
    const json& z = j.at("zoo");
    c.zoo.zoo_id = z.at("zoo_id").get<std::string>();
    c.zoo.model_count = z.at("model_count").get<std::size_t>();
    c.zoo.k_min = z.at("k_min").get<std::size_t>();
    c.zoo.k_max = z.at("k_max").get<std::size_t>();
    c.zoo.feature_dim = z.at("feature_dim").get<std::size_t>();
    c.zoo.spread = z.at("spread").get<double>();
    const json& s = z.at("samples");
    c.zoo.samples = {s.at("train").get<std::size_t>(), s.at("validation").get<std::size_t>(),
                     s.at("query").get<std::size_t>(), s.at("test").get<std::size_t>()};
    const json& cl = z.at("classifier");
    c.zoo.classifier.hidden = cl.at("hidden").get<std::size_t>();
    c.zoo.classifier.learning_rate = cl.at("learning_rate").get<double>();
    c.zoo.classifier.max_epochs = cl.at("max_epochs").get<std::size_t>();
    c.zoo.classifier.target_loss = cl.at("target_loss").get<double>();
    c.zoo.classifier.min_val_acc = cl.at("min_val_acc").get<double>();
    c.zoo.retries = z.at("retries").get<std::size_t>();
    c.zoo.threads = z.at("threads").get<std::size_t>();
    c.pools.pool_size = j.at("pools").at("pool_size").get<std::size_t>();
    c.pools.training_pools = j.at("pools").at("training_pools").get<std::size_t>();
    const json& p = j.at("probe");
    c.probe.tau = p.at("tau").get<double>();
    c.probe.epsilon = p.at("epsilon").get<double>();
    c.probe.max_iter = p.at("max_iter").get<std::size_t>();
    c.probe.retries = p.at("retries").get<std::size_t>();
    const json& e = j.at("encoder");
    c.encoder.hidden = e.at("hidden").get<std::size_t>();
    c.encoder.embedding = e.at("embedding").get<std::size_t>();
    c.encoder.k_max = e.at("k_max").get<std::size_t>();
    c.encoder.model_variant = encoders::variant_from_string(e.at("model_variant").get<std::string>());
    c.encoder.query_variant = encoders::variant_from_string(e.at("query_variant").get<std::string>());
    const json& t = j.at("train");
    c.train.alpha = t.at("alpha").get<double>();
    c.train.margin = t.at("margin").get<double>();
    c.train.batch_size = t.at("batch_size").get<std::size_t>();
    c.train.learning_rate = t.at("learning_rate").get<double>();
    c.train.epochs = t.at("epochs").get<std::size_t>();
    c.train.sal = sal_from(t.at("sal").get<std::string>());
    c.train.use_mkc = t.at("use_mkc").get<bool>();
    c.train.tasks_per_model = t.at("tasks_per_model").get<std::size_t>();
    c.train.q_n_min = t.at("q_n_min").get<std::size_t>();
    c.train.q_n_max = t.at("q_n_max").get<std::size_t>();
    c.train.keep_best = t.at("keep_best").get<bool>();
    c.train.mean_pool_store = t.at("mean_pool_store").get<bool>();
    const json& ev = j.at("eval");
    c.task_categories = ev.at("task_categories").get<std::size_t>();
    c.validation_tasks_per_model = ev.at("validation_tasks_per_model").get<std::size_t>();
    c.eval_tasks_per_model = ev.at("eval_tasks_per_model").get<std::size_t>();
    c.eval_q_n = ev.at("eval_q_n").get<std::size_t>();
    c.mixed_tasks = ev.at("mixed_tasks").get<std::size_t>();
    c.mixed_q_n = ev.at("mixed_q_n").get<std::size_t>();
    oracle_from(ev.at("oracle"), c.oracle);
    oracle_from(ev.at("mixed_oracle"), c.mixed_oracle);
  } catch (const json::exception& ex) {
    throw InvalidArgument(std::string("config: ") + ex.what());
  }
  return c;
}

void merge_config(json& base, const json& patch, const std::string& prefix) {
  if (!patch.is_object()) throw InvalidArgument("config " + (prefix.empty() ? "root" : "'" + prefix + "'") + " must be an object");
  for (const auto& [key, value] : patch.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!base.contains(key)) throw InvalidArgument("unknown config key '" + path + "'");
    json& target = base[key];
    if (target.is_object()) {
      merge_config(target, value, path);
    } else if (value.is_object() || value.is_array() || value.is_null() ||
               (target.is_string() != value.is_string()) || (target.is_boolean() != value.is_boolean())) {
      throw InvalidArgument("config key '" + path + "' has the wrong type");
    } else if ((target.is_number_unsigned() || target.is_number_integer()) && !value.is_number_integer()) {
      throw InvalidArgument("config key '" + path + "' must be an integer");
    } else if (target.is_number_unsigned() && value.is_number_integer() && value.get<std::int64_t>() < 0) {
      throw InvalidArgument("config key '" + path + "' must be non-negative");
    } else if (target.is_number_float()) {
      target = value.get<double>();
    } else {
      target = value;
    }
  }
}

void set_dotted(json& config, const std::string& path, const std::string& text) {
  json* node = &config;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(key)) throw InvalidArgument("unknown config key '" + path + "'");
    node = &(*node)[key];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  *node = parse_scalar(*node, path, text);
}

std::string config_digest(const ExperimentConfig& c) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(to_json(c).dump())));
  return buf;
}

}  // namespace k2v::eval
