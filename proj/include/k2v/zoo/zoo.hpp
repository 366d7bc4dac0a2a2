#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "k2v/zoo/classifier.hpp"
#include "k2v/zoo/domain.hpp"

namespace k2v::zoo {

inline constexpr int kZooFormatVersion = 1;

struct ZooConfig {
  std::string zoo_id = "synthetic-zoo";
  std::uint64_t seed = 20240601;
  std::size_t model_count = 12;
  std::size_t k_min = 4;
  std::size_t k_max = 6;
  std::size_t feature_dim = 32;
  double spread = 0.15;
  SplitSizes samples;
  ClassifierConfig classifier;
  /// Extra classifier seeds tried after an under-trained attempt.
  std::size_t retries = 3;
  /// Worker threads for training; 0 = hardware concurrency.
  std::size_t threads = 0;

  void validate() const;
};

struct ZooEntry {
  SyntheticDomainSpec domain;
  ZooModel model;
};

struct Zoo {
  std::string zoo_id;
  std::vector<ZooEntry> entries;

  std::size_t size() const noexcept { return entries.size(); }
  const ZooModel& model(std::size_t i) const { return entries.at(i).model; }
  std::vector<const BlackBoxModel*> black_boxes() const;
};

struct ZooManifestEntry {
  std::string model_id;
  std::string checkpoint;
  std::string domain;
  std::size_t k = 0;
  std::size_t d = 0;
  double val_acc = 0.0;
  std::string domain_digest;
};

struct ZooManifest {
  std::string zoo_id;
  int format_version = kZooFormatVersion;
  std::vector<ZooManifestEntry> models;

  /// Hash of the manifest content; equal manifests give equal digests.
  std::string digest() const;
};

std::string model_id_for(std::size_t index);

/// Trains `model_count` classifiers on pairwise-disjoint domains. Models
/// train in parallel with RNG streams derived from (seed, model index), so
/// the result does not depend on the thread count.
Zoo build_zoo(const ZooConfig& config);

/// Writes manifest.json, models/<id>.k2v (K2V1) and domains/<id>.json.
ZooManifest save_zoo(const Zoo& zoo, const std::filesystem::path& directory);

/// Reads and verifies a zoo written by save_zoo. Throws VersionError,
/// MissingFileError or DigestMismatchError accordingly.
Zoo load_zoo(const std::filesystem::path& directory, ZooManifest* manifest = nullptr);

}  // namespace k2v::zoo
