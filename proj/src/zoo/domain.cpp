#include "k2v/zoo/domain.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <nlohmann/json.hpp>

#include "k2v/error.hpp"

namespace k2v::zoo {

namespace {

enum class Stream : std::uint64_t { train = 1, validation = 2, query = 3, test = 4, probe = 5 };

LabeledSet draw_split(const SyntheticDomainSpec& spec, Stream stream, std::size_t per_category) {
  Rng rng(derive_seed(spec.seed, {static_cast<std::uint64_t>(stream)}));
  std::normal_distribution<double> noise(0.0, 1.0);
  const std::size_t k = spec.category_count, d = spec.feature_dim;
  LabeledSet set;
  set.category_count = k;
  set.samples = nn::Tensor({k * per_category, d});
  set.labels.reserve(k * per_category);
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t i = 0; i < per_category; ++i) {
      auto row = set.samples.row_span(set.labels.size());
      for (std::size_t j = 0; j < d; ++j) row[j] = spec.centers(c, j) + spec.spreads[c] * noise(rng);
      set.labels.push_back(c);
    }
  }
  return set;
}

}  // namespace

void SyntheticDomainSpec::validate() const {
  if (category_count < 2) throw InvalidArgument("domain needs at least 2 categories, got " + std::to_string(category_count));
  if (feature_dim == 0) throw InvalidArgument("domain feature_dim must be positive");
  if (centers.rank() != 2 || centers.rows() != category_count || centers.cols() != feature_dim) {
    throw InvalidArgument("domain centers must be [k x d]");
  }
  if (spreads.size() != category_count) throw InvalidArgument("domain needs one spread per category");
  for (double s : spreads) {
    if (!(s > 0.0)) throw InvalidArgument("domain spreads must be positive");
  }
  for (std::size_t a = 0; a < category_count; ++a) {
    for (std::size_t b = a + 1; b < category_count; ++b) {
      if (std::ranges::equal(centers.row_span(a), centers.row_span(b))) {
        throw InvalidArgument("domain centers " + std::to_string(a) + " and " + std::to_string(b) + " coincide");
      }
    }
  }
}

std::string SyntheticDomainSpec::digest() const {
  std::uint64_t h = mix64(feature_dim) ^ mix64(category_count + 0x100);
  for (double v : centers.values()) h = mix64(h ^ std::bit_cast<std::uint64_t>(v));
  for (double v : spreads) h = mix64(h ^ std::bit_cast<std::uint64_t>(v));
  for (std::size_t n : {samples_per_category.train, samples_per_category.validation, samples_per_category.query,
                        samples_per_category.test}) {
    h = mix64(h ^ n);
  }
  h = mix64(h ^ seed);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

nlohmann::json to_json(const SyntheticDomainSpec& spec) {
  nlohmann::json centers = nlohmann::json::array();
  for (std::size_t c = 0; c < spec.category_count; ++c) {
    auto row = spec.centers.row_span(c);
    centers.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return {{"feature_dim", spec.feature_dim},
          {"category_count", spec.category_count},
          {"centers", centers},
          {"spreads", spec.spreads},
          {"samples_per_category",
           {{"train", spec.samples_per_category.train},
            {"validation", spec.samples_per_category.validation},
            {"query", spec.samples_per_category.query},
            {"test", spec.samples_per_category.test}}},
          {"seed", spec.seed}};
}

SyntheticDomainSpec domain_spec_from_json(const nlohmann::json& j) {
  SyntheticDomainSpec spec;
  spec.feature_dim = j.at("feature_dim").get<std::size_t>();
  spec.category_count = j.at("category_count").get<std::size_t>();
  spec.centers = nn::Tensor({spec.category_count, spec.feature_dim});
  const auto& centers = j.at("centers");
  if (centers.size() != spec.category_count) throw FormatError("domain spec: wrong number of centers");
  for (std::size_t c = 0; c < spec.category_count; ++c) {
    const auto row = centers[c].get<std::vector<double>>();
    if (row.size() != spec.feature_dim) throw FormatError("domain spec: center has wrong dimension");
    std::ranges::copy(row, spec.centers.row_span(c).begin());
  }
  spec.spreads = j.at("spreads").get<std::vector<double>>();
  const auto& s = j.at("samples_per_category");
  spec.samples_per_category = {s.at("train").get<std::size_t>(), s.at("validation").get<std::size_t>(),
                               s.at("query").get<std::size_t>(), s.at("test").get<std::size_t>()};
  spec.seed = j.at("seed").get<std::uint64_t>();
  spec.validate();
  return spec;
}

std::vector<std::size_t> LabeledSet::rows_of(std::size_t c) const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == c) rows.push_back(i);
  }
  return rows;
}

SyntheticDomainSpec make_domain_spec(std::uint64_t zoo_seed, std::size_t index, std::size_t k, std::size_t feature_dim,
                                     double spread, const SplitSizes& sizes) {
  if (index >= kMaxDomains) throw InvalidArgument("at most " + std::to_string(kMaxDomains) + " disjoint domains");
  if (k < 2) throw InvalidArgument("domain needs at least 2 categories, got " + std::to_string(k));
  if (!(spread > 0.0)) throw InvalidArgument("domain spreads must be positive");
  if (feature_dim <= kRegionBits) throw InvalidArgument("feature_dim must exceed " + std::to_string(kRegionBits));
  SyntheticDomainSpec spec;
  spec.feature_dim = feature_dim;
  spec.category_count = k;
  spec.spreads.assign(k, spread);
  spec.samples_per_category = sizes;
  spec.seed = derive_seed(zoo_seed, {0xd0, index});
  Rng rng(derive_seed(spec.seed, {0xce}));
  std::uniform_real_distribution<double> magnitude(0.4, 1.0);
  std::uniform_real_distribution<double> free(-1.0, 1.0);
  spec.centers = nn::Tensor({k, feature_dim});
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t j = 0; j < feature_dim; ++j) {
      if (j < kRegionBits) {
        const double sign = ((index >> j) & 1U) != 0 ? -1.0 : 1.0;
        spec.centers(c, j) = sign * magnitude(rng);
      } else {
        spec.centers(c, j) = free(rng);
      }
    }
  }
  spec.validate();
  return spec;
}

DomainData generate_domain(const SyntheticDomainSpec& spec) {
  spec.validate();
  const auto& n = spec.samples_per_category;
  return {draw_split(spec, Stream::train, n.train), draw_split(spec, Stream::validation, n.validation),
          draw_split(spec, Stream::query, n.query), draw_split(spec, Stream::test, n.test)};
}

nn::Tensor draw_unlabeled(const SyntheticDomainSpec& spec, std::uint64_t stream, std::size_t count) {
  spec.validate();
  Rng rng(derive_seed(spec.seed, {static_cast<std::uint64_t>(Stream::probe), stream}));
  std::normal_distribution<double> noise(0.0, 1.0);
  nn::Tensor out({count, spec.feature_dim});
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t c = i % spec.category_count;
    auto row = out.row_span(i);
    for (std::size_t j = 0; j < spec.feature_dim; ++j) row[j] = spec.centers(c, j) + spec.spreads[c] * noise(rng);
  }
  return out;
}

namespace {

void append_category(const LabeledSet& split, std::size_t source_category, std::size_t task_label, std::size_t q_n,
                     Rng& rng, std::vector<double>& data, std::vector<std::size_t>& labels) {
  auto rows = split.rows_of(source_category);
  if (rows.size() < q_n) {
    throw InvalidArgument("split has " + std::to_string(rows.size()) + " samples of category " +
                          std::to_string(source_category) + ", task needs " + std::to_string(q_n));
  }
  std::shuffle(rows.begin(), rows.end(), rng);
  rows.resize(q_n);
  std::sort(rows.begin(), rows.end());
  for (std::size_t r : rows) {
    auto s = split.samples.row_span(r);
    data.insert(data.end(), s.begin(), s.end());
    labels.push_back(task_label);
  }
}

}  // namespace

QueryTask sample_task(const LabeledSet& split, std::size_t k_T, std::size_t q_n, Rng& rng, std::string task_id) {
  if (k_T < 1 || k_T > split.category_count) {
    throw InvalidArgument("task k_T=" + std::to_string(k_T) + " exceeds split categories " +
                          std::to_string(split.category_count));
  }
  if (q_n < 1) throw InvalidArgument("q_n must be positive");
  std::vector<double> data;
  std::vector<std::size_t> labels;
  for (std::size_t c = 0; c < k_T; ++c) append_category(split, c, c, q_n, rng, data, labels);
  const std::size_t d = split.samples.cols();
  nn::Tensor samples({labels.size(), d}, std::move(data));
  return make_task(std::move(task_id), std::move(samples), std::move(labels));
}

QueryTask sample_mixed_task(const std::vector<const LabeledSet*>& sources, std::size_t q_n, Rng& rng,
                            std::string task_id) {
  if (sources.empty()) throw InvalidArgument("mixed task needs at least one category source");
  std::vector<double> data;
  std::vector<std::size_t> labels;
  for (std::size_t c = 0; c < sources.size(); ++c) {
    if (c >= sources[c]->category_count) throw InvalidArgument("mixed task source lacks category " + std::to_string(c));
    append_category(*sources[c], c, c, q_n, rng, data, labels);
  }
  const std::size_t d = sources.front()->samples.cols();
  nn::Tensor samples({labels.size(), d}, std::move(data));
  return make_task(std::move(task_id), std::move(samples), std::move(labels));
}

}  // namespace k2v::zoo
