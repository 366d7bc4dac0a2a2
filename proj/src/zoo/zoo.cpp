#include "k2v/zoo/zoo.hpp"

#include <atomic>
#include <cstdio>
#include <exception>
#include <nlohmann/json.hpp>
#include <optional>
#include <thread>

#include "k2v/nn/checkpoint.hpp"

namespace k2v::zoo {

namespace fs = std::filesystem;
using nlohmann::json;

void ZooConfig::validate() const {
  if (k_min < 2 || k_max > 10 || k_min > k_max) {
    throw InvalidArgument("zoo category range [" + std::to_string(k_min) + ", " + std::to_string(k_max) +
                          "] must lie within [2, 10]");
  }
  if (model_count < 1 || model_count > kMaxDomains) {
    throw InvalidArgument("zoo size must lie in [1, " + std::to_string(kMaxDomains) + "]");
  }
  if (!(spread > 0.0)) throw InvalidArgument("zoo spread must be positive");
  if (feature_dim <= kRegionBits) throw InvalidArgument("feature_dim must exceed " + std::to_string(kRegionBits));
  if (classifier.hidden == 0) throw InvalidArgument("classifier hidden width must be positive");
}

std::vector<const BlackBoxModel*> Zoo::black_boxes() const {
  std::vector<const BlackBoxModel*> out;
  for (const auto& e : entries) out.push_back(&e.model);
  return out;
}

std::string ZooManifest::digest() const {
  json j;
  j["zoo_id"] = zoo_id;
  j["format_version"] = format_version;
  for (const auto& m : models) {
    j["models"].push_back({{"model_id", m.model_id}, {"val_acc", m.val_acc}, {"domain_digest", m.domain_digest}, {"k", m.k}});
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(j.dump())));
  return buf;
}

std::string model_id_for(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "model-%02zu", index);
  return buf;
}

namespace {

ZooEntry build_entry(const ZooConfig& config, std::size_t index) {
  Rng krng(derive_seed(config.seed, {0x6b, index}));
  const std::size_t k = config.k_min + static_cast<std::size_t>(krng() % (config.k_max - config.k_min + 1));
  SyntheticDomainSpec spec = make_domain_spec(config.seed, index, k, config.feature_dim, config.spread, config.samples);
  const DomainData data = generate_domain(spec);
  const std::string id = model_id_for(index);
  std::optional<UnderTrainedError> last;
  for (std::size_t attempt = 0; attempt <= config.retries; ++attempt) {
    ClassifierConfig cc = config.classifier;
    cc.seed = derive_seed(config.seed, {0xc1, index, attempt});
    try {
      return ZooEntry{spec, train_classifier(id, spec, data, cc)};
    } catch (const UnderTrainedError& e) {
      last = e;
    }
  }
  throw *last;
}

}  // namespace

Zoo build_zoo(const ZooConfig& config) {
  config.validate();
  const std::size_t m = config.model_count;
  std::vector<std::optional<ZooEntry>> slots(m);
  std::vector<std::exception_ptr> errors(m);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < m; i = next++) {
      try {
        slots[i].emplace(build_entry(config, i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::size_t threads = config.threads != 0 ? config.threads : std::max(1U, std::thread::hardware_concurrency());
  threads = std::min(threads, m);
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  Zoo zoo;
  zoo.zoo_id = config.zoo_id;
  for (auto& s : slots) zoo.entries.push_back(std::move(*s));
  return zoo;
}

ZooManifest save_zoo(const Zoo& zoo, const fs::path& directory) {
  fs::create_directories(directory / "models");
  fs::create_directories(directory / "domains");
  ZooManifest manifest;
  manifest.zoo_id = zoo.zoo_id;
  json models = json::array();
  for (const auto& e : zoo.entries) {
    ZooManifestEntry m;
    m.model_id = e.model.model_id();
    m.checkpoint = "models/" + m.model_id + ".k2v";
    m.domain = "domains/" + m.model_id + ".json";
    m.k = e.model.category_count();
    m.d = e.model.input_dim();
    m.val_acc = e.model.validation_accuracy();
    m.domain_digest = e.domain.digest();
    nn::save_parameters(directory / m.checkpoint, e.model.parameters());
    nn::write_file(directory / m.domain, to_json(e.domain).dump(1));
    models.push_back({{"model_id", m.model_id},
                      {"checkpoint", m.checkpoint},
                      {"domain", m.domain},
                      {"k", m.k},
                      {"d", m.d},
                      {"val_acc", m.val_acc},
                      {"domain_digest", m.domain_digest}});
    manifest.models.push_back(std::move(m));
  }
  json doc = {{"zoo_id", manifest.zoo_id}, {"format_version", manifest.format_version}, {"models", models}};
  nn::write_file(directory / "manifest.json", doc.dump(2) + "\n");
  return manifest;
}

Zoo load_zoo(const fs::path& directory, ZooManifest* manifest_out) {
  const json doc = json::parse(nn::read_file(directory / "manifest.json"));
  ZooManifest manifest;
  manifest.zoo_id = doc.at("zoo_id").get<std::string>();
  manifest.format_version = doc.at("format_version").get<int>();
  if (manifest.format_version != kZooFormatVersion) {
    throw VersionError("zoo format version " + std::to_string(manifest.format_version) + ", expected " +
                       std::to_string(kZooFormatVersion));
  }
  Zoo zoo;
  zoo.zoo_id = manifest.zoo_id;
  for (const auto& jm : doc.at("models")) {
    ZooManifestEntry m;
    m.model_id = jm.at("model_id").get<std::string>();
    m.checkpoint = jm.at("checkpoint").get<std::string>();
    m.domain = jm.at("domain").get<std::string>();
    m.k = jm.at("k").get<std::size_t>();
    m.d = jm.at("d").get<std::size_t>();
    m.val_acc = jm.at("val_acc").get<double>();
    m.domain_digest = jm.at("domain_digest").get<std::string>();
    for (const auto& rel : {m.checkpoint, m.domain}) {
      if (!fs::exists(directory / rel)) throw MissingFileError("zoo file missing: " + (directory / rel).string());
    }
    SyntheticDomainSpec spec = domain_spec_from_json(json::parse(nn::read_file(directory / m.domain)));
    if (spec.digest() != m.domain_digest) {
      throw DigestMismatchError("domain digest mismatch for '" + m.model_id + "': manifest " + m.domain_digest +
                                ", regenerated " + spec.digest());
    }
    ZooModel model(m.model_id, nn::load_parameters(directory / m.checkpoint), m.domain_digest, m.val_acc);
    if (model.category_count() != m.k || model.input_dim() != m.d) {
      throw FormatError("checkpoint of '" + m.model_id + "' disagrees with manifest shape");
    }
    zoo.entries.push_back(ZooEntry{std::move(spec), std::move(model)});
    manifest.models.push_back(std::move(m));
  }
  if (manifest_out != nullptr) *manifest_out = std::move(manifest);
  return zoo;
}

}  // namespace k2v::zoo
