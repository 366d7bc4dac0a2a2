#include "k2v/eval/sweep.hpp"

#include <chrono>
#include <cstdio>
#include <nlohmann/json.hpp>

namespace k2v::eval {

using nlohmann::json;

std::string to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::zoo_size: return "zoo_size";
    case SweepAxis::q_n: return "q_n";
    case SweepAxis::embedding_dim: return "embedding_dim";
    case SweepAxis::encoder_variant: return "encoder_variant";
    case SweepAxis::sal_variant: return "sal_variant";
  }
  return "?";
}

SweepAxis sweep_axis_from_string(const std::string& s) {
  for (SweepAxis a : {SweepAxis::zoo_size, SweepAxis::q_n, SweepAxis::embedding_dim, SweepAxis::encoder_variant,
                      SweepAxis::sal_variant}) {
    if (to_string(a) == s) return a;
  }
  throw InvalidArgument("unknown sweep axis '" + s +
                        "' (zoo_size|q_n|embedding_dim|encoder_variant|sal_variant)");
}

std::vector<std::string> default_grid(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::zoo_size: return {"4", "8", "12"};
    case SweepAxis::q_n: return {"2", "3", "4", "5", "6", "7", "8"};
    case SweepAxis::embedding_dim: return {"64", "128", "256"};
    case SweepAxis::encoder_variant: {
      std::vector<std::string> grid;
      for (const char* m : {"lstm", "concat", "avg"}) {
        for (const char* q : {"lstm", "concat", "avg"}) grid.push_back(std::string(m) + "/" + q);
      }
      return grid;
    }
    case SweepAxis::sal_variant: return {"cosine", "contrastive", "no_mkc"};
  }
  return {};
}

namespace {

std::size_t parse_count(const std::string& value) {
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(value, &used);
  } catch (const std::logic_error&) {
    used = 0;
  }
  if (used == 0 || used != value.size()) throw InvalidArgument("sweep value '" + value + "' is not a count");
  return static_cast<std::size_t>(v);
}

}  // namespace

ExperimentConfig apply_axis(const ExperimentConfig& base, SweepAxis axis, const std::string& value) {
  ExperimentConfig c = base;
  switch (axis) {
    case SweepAxis::zoo_size:
      c.zoo.model_count = parse_count(value);
      break;
    case SweepAxis::q_n: {
      const std::size_t q = parse_count(value);
      c.train.q_n_min = c.train.q_n_max = q;
      c.eval_q_n = q;
      break;
    }
    case SweepAxis::embedding_dim:
      c.encoder.embedding = parse_count(value);
      break;
    case SweepAxis::encoder_variant: {
      const auto slash = value.find('/');
      c.encoder.model_variant = encoders::variant_from_string(value.substr(0, slash));
      c.encoder.query_variant =
          encoders::variant_from_string(slash == std::string::npos ? value : value.substr(slash + 1));
      break;
    }
    case SweepAxis::sal_variant:
      if (value == "cosine" || value == "no_mkc") {
        c.train.sal = alignment::SalVariant::cosine;
        c.train.use_mkc = value == "cosine";
      } else if (value == "contrastive") {
        c.train.sal = alignment::SalVariant::contrastive;
        c.train.use_mkc = true;
      } else {
        throw InvalidArgument("unknown loss variant '" + value + "' (cosine|contrastive|no_mkc)");
      }
      break;
  }
  return c;
}

SweepTable sweep(const ExperimentConfig& base, SweepAxis axis, const std::vector<std::string>& grid) {
  if (grid.empty()) throw InvalidArgument("sweep grid is empty");
  SweepTable table;
  table.axis = axis;
  for (const auto& value : grid) {
    const auto start = std::chrono::steady_clock::now();
    try {
      const ExperimentConfig c = apply_axis(base, axis, value);
      const auto r = run_experiment(c);
      SweepRow row{value, r.benchmark, r.mixed, r.parity, 0.0, 0.0};
      if (!r.training.log.empty()) row.validation_r1 = r.training.log.at(r.training.best_epoch - 1).val_r1;
      row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      table.rows.push_back(std::move(row));
    } catch (const Error& e) {
      table.errors.push_back({value, e.code(), e.what()});
    } catch (const std::exception& e) {
      table.errors.push_back({value, "internal", e.what()});
    }
  }
  return table;
}

json to_json(const SweepTable& t) {
  json rows = json::array(), errors = json::array();
  for (const auto& r : t.rows) {
    rows.push_back({{"value", r.value},
                    {"benchmark", to_json(r.benchmark)},
                    {"mixed", to_json(r.mixed)},
                    {"parity",
                     {{"r1_external", r.parity.r1_external},
                      {"r1_training_data", r.parity.r1_training_data},
                      {"gap", r.parity.gap},
                      {"agreement", r.parity.agreement}}},
                    {"validation_r1", r.validation_r1},
                    {"runtime_seconds", r.seconds}});
  }
  for (const auto& e : t.errors) errors.push_back({{"value", e.value}, {"code", e.code}, {"message", e.message}});
  return {{"axis", to_string(t.axis)}, {"rows", rows}, {"errors", errors}};
}

std::string format_table(const SweepTable& t) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-16s %7s %7s %9s %9s %9s %8s\n", to_string(t.axis).c_str(), "R@1", "R@3",
                "top1-acc", "spearman", "parity", "seconds");
  out += line;
  for (const auto& r : t.rows) {
    std::snprintf(line, sizeof line, "%-16s %7.3f %7.3f %9.3f %9.3f %9.3f %8.1f\n", r.value.c_str(), r.benchmark.r1,
                  r.benchmark.r3, r.benchmark.top1_accuracy, r.mixed.spearman, r.parity.gap, r.seconds);
    out += line;
  }
  for (const auto& e : t.errors) out += e.value + ": error [" + e.code + "] " + e.message + "\n";
  return out;
}

}  // namespace k2v::eval
