#include "k2v/probe/probe.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>

#include "k2v/nn/checkpoint.hpp"
#include "k2v/nn/functional.hpp"

namespace k2v::probe {

using nlohmann::json;

std::string to_string(PoolSource s) { return s == PoolSource::external ? "external" : "training_data"; }

PoolSource pool_source_from_string(const std::string& s) {
  if (s == "external") return PoolSource::external;
  if (s == "training_data") return PoolSource::training_data;
  throw InvalidArgument("unknown pool source '" + s + "'");
}

void ProbePool::validate() const {
  if (size() == 0) throw InvalidArgument("probe pool '" + pool_id + "' is empty");
  if (samples.rank() != 2) throw DimensionError("probe pool samples must be [n x d]");
  nn::require_finite(samples, "probe pool '" + pool_id + "'");
}

std::vector<std::size_t> AnchorSelection::covered() const {
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < anchors.size(); ++c) {
    if (anchors[c]) out.push_back(c);
  }
  return out;
}

std::vector<std::size_t> AnchorSelection::uncovered() const {
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < anchors.size(); ++c) {
    if (!anchors[c]) out.push_back(c);
  }
  return out;
}

AnchorSelection select_anchors(const BlackBoxModel& model, const ProbePool& pool, double tau) {
  pool.validate();
  const std::size_t k = model.category_count();
  AnchorSelection sel;
  sel.category_count = k;
  sel.anchors.resize(k);
  sel.candidates.resize(k);
  for (std::size_t r = 0; r < pool.size(); ++r) {
    const auto x = pool.samples.row_span(r);
    const auto p = model.predict_proba(x);
    const std::size_t c = nn::argmax(p);
    if (p[c] >= tau) sel.candidates[c].push_back(ClassAnchor{c, {x.begin(), x.end()}, p[c]});
  }
  for (std::size_t c = 0; c < k; ++c) {
    // Stable sort keeps pool order among equal confidences.
    std::stable_sort(sel.candidates[c].begin(), sel.candidates[c].end(),
                     [](const ClassAnchor& a, const ClassAnchor& b) { return a.confidence > b.confidence; });
    if (!sel.candidates[c].empty()) sel.anchors[c] = sel.candidates[c].front();
  }
  if (sel.covered().empty()) {
    throw ProbePoolUnsuitableError("pool '" + pool.pool_id + "' covers no category of '" + model.model_id() +
                                   "' at tau=" + std::to_string(tau));
  }
  return sel;
}

namespace {

std::pair<std::size_t, std::size_t> top_two(const std::vector<double>& p) {
  std::size_t first = 0, second = p.size() > 1 ? 1 : 0;
  if (p.size() > 1 && p[1] > p[0]) std::swap(first, second);
  for (std::size_t c = 2; c < p.size(); ++c) {
    if (p[c] > p[first]) {
      second = first;
      first = c;
    } else if (p[c] > p[second]) {
      second = c;
    }
  }
  return {first, second};
}

void check_anchor(const BlackBoxModel& model, const ClassAnchor& z) {
  if (z.category >= model.category_count()) {
    throw InvalidArgument("anchor category " + std::to_string(z.category) + " outside model range");
  }
  const std::size_t pred = nn::argmax(model.predict_proba(z.sample));
  if (pred != z.category) {
    throw InvalidArgument("anchor for category " + std::to_string(z.category) + " is predicted as " +
                          std::to_string(pred));
  }
}

}  // namespace

BoundaryResult find_boundary_sample(const BlackBoxModel& model, const ClassAnchor& za, const ClassAnchor& zb,
                                    double eps, std::size_t max_iter) {
  if (za.category == zb.category) {
    throw InvalidArgument("boundary search needs anchors of two different categories, got " +
                          std::to_string(za.category) + " twice");
  }
  if (za.sample.size() != zb.sample.size()) throw DimensionError("anchor samples differ in dimension");
  check_anchor(model, za);
  check_anchor(model, zb);
  const std::size_t a = za.category, b = zb.category;
  const std::size_t d = za.sample.size();
  double lo = 0.0, hi = 1.0;
  double best_gap = 1.0;
  std::vector<double> x(d);
  for (std::size_t it = 1; it <= max_iter; ++it) {
    const double mid = 0.5 * (lo + hi);
    for (std::size_t j = 0; j < d; ++j) x[j] = (1.0 - mid) * za.sample[j] + mid * zb.sample[j];
    const auto p = model.predict_proba(x);
    const auto [first, second] = top_two(p);
    if (first != a && first != b) return ThirdCategoryInterposed{a, b, first, mid};
    const double gap = std::abs(p[a] - p[b]);
    best_gap = std::min(best_gap, gap);
    if (gap <= eps && (second == a || second == b)) return BoundarySample{a, b, x, gap, it};
    (first == a ? lo : hi) = mid;
  }
  throw NonConvergenceError("boundary search " + std::to_string(a) + "->" + std::to_string(b) + " on '" +
                                model.model_id() + "' did not reach gap " + std::to_string(eps) + " in " +
                                std::to_string(max_iter) + " steps",
                            best_gap);
}

std::vector<bool> ProbeResult::coverage() const {
  std::vector<bool> out(category_count);
  for (std::size_t c = 0; c < category_count; ++c) out[c] = anchors[c].has_value();
  return out;
}

std::vector<BoundarySample> ProbeResult::boundary_list() const {
  std::vector<BoundarySample> out;
  for (const auto& [key, s] : boundaries) out.push_back(s);
  return out;
}

std::vector<ClassAnchor> ProbeResult::anchor_list() const {
  std::vector<ClassAnchor> out;
  for (const auto& a : anchors) {
    if (a) out.push_back(*a);
  }
  return out;
}

ProbeResult probe_model(const BlackBoxModel& model, const ProbePool& pool, const ProbeConfig& config) {
  const AnchorSelection sel = select_anchors(model, pool, config.tau);
  ProbeResult out;
  out.model_id = model.model_id();
  out.pool_id = pool.pool_id;
  out.category_count = sel.category_count;
  out.dim = pool.dim();
  out.epsilon = config.epsilon;
  out.anchors = sel.anchors;
  const auto covered = sel.covered();
  for (std::size_t ia = 0; ia < covered.size(); ++ia) {
    for (std::size_t ib = ia + 1; ib < covered.size(); ++ib) {
      const std::size_t a = covered[ia], b = covered[ib];
      const auto& ca = sel.candidates[a];
      const auto& cb = sel.candidates[b];
      // Candidate index pairs by increasing combined rank; (0, 0) is the anchor pair.
      std::vector<std::pair<std::size_t, std::size_t>> order;
      for (std::size_t i = 0; i < ca.size(); ++i) {
        for (std::size_t j = 0; j < cb.size(); ++j) order.emplace_back(i, j);
      }
      std::stable_sort(order.begin(), order.end(),
                       [](auto l, auto r) { return l.first + l.second < r.first + r.second; });
      if (order.size() > config.retries + 1) order.resize(config.retries + 1);
      ++out.stats.pairs;
      bool found = false;
      for (std::size_t attempt = 0; attempt < order.size() && !found; ++attempt) {
        const auto [i, j] = order[attempt];
        try {
          auto res = find_boundary_sample(model, ca[i], cb[j], config.epsilon, config.max_iter);
          if (auto* s = std::get_if<BoundarySample>(&res)) {
            BoundarySample mirrored = *s;
            std::swap(mirrored.origin, mirrored.target);
            out.boundaries[{a, b}] = std::move(*s);
            out.boundaries[{b, a}] = std::move(mirrored);
            found = true;
            ++(attempt == 0 ? out.stats.direct : out.stats.recovered);
          } else {
            ++out.stats.third_category_failures;
          }
        } catch (const NonConvergenceError&) {
          ++out.stats.non_converged;
        }
      }
      if (!found) ++out.stats.masked;
    }
  }
  return out;
}

std::span<const double> Krm::r(std::size_t a, std::size_t b) const {
  if (a >= category_count || b >= category_count) throw IndexError("KRM index out of range");
  return vectors.row_span(a * category_count + b);
}

bool Krm::has(std::size_t a, std::size_t b) const {
  if (a >= category_count || b >= category_count) throw IndexError("KRM index out of range");
  return present[a * category_count + b];
}

std::size_t Krm::present_count() const { return static_cast<std::size_t>(std::count(present.begin(), present.end(), true)); }

namespace {

struct Layout {
  std::size_t dim = 0;
  std::vector<const ClassAnchor*> anchor;  // by category
  std::vector<const BoundarySample*> boundary;  // by a*k + b
};

Layout index_inputs(const std::vector<ClassAnchor>& anchors, const std::vector<BoundarySample>& boundaries,
                    std::size_t k) {
  if (k < 2) throw InvalidArgument("knowledge structures need k >= 2");
  Layout l;
  l.anchor.assign(k, nullptr);
  l.boundary.assign(k * k, nullptr);
  for (const auto& z : anchors) {
    if (z.category >= k) {
      throw InvalidArgument("anchor category " + std::to_string(z.category) + " inconsistent with k=" + std::to_string(k));
    }
    if (l.dim == 0) l.dim = z.sample.size();
    if (z.sample.size() != l.dim) throw DimensionError("anchors differ in dimension");
    l.anchor[z.category] = &z;
  }
  for (const auto& s : boundaries) {
    if (s.origin >= k || s.target >= k || s.origin == s.target) {
      throw InvalidArgument("boundary " + std::to_string(s.origin) + "->" + std::to_string(s.target) +
                            " inconsistent with k=" + std::to_string(k));
    }
    if (l.anchor[s.origin] == nullptr || l.anchor[s.target] == nullptr) {
      throw InvalidArgument("boundary " + std::to_string(s.origin) + "->" + std::to_string(s.target) +
                            " lacks an anchor");
    }
    if (s.sample.size() != l.dim) throw DimensionError("boundary sample dimension differs from anchors");
    l.boundary[s.origin * k + s.target] = &s;
  }
  return l;
}

}  // namespace

Krm build_krm(const std::vector<ClassAnchor>& anchors, const std::vector<BoundarySample>& boundaries, std::size_t k) {
  const Layout l = index_inputs(anchors, boundaries, k);
  Krm krm;
  krm.category_count = k;
  krm.dim = l.dim;
  krm.vectors = nn::Tensor({k * k, l.dim});
  krm.present.assign(k * k, false);
  for (std::size_t i = 0; i < k * k; ++i) {
    const BoundarySample* s = l.boundary[i];
    if (s == nullptr) continue;
    const auto& z = l.anchor[s->origin]->sample;
    auto row = krm.vectors.row_span(i);
    for (std::size_t j = 0; j < l.dim; ++j) row[j] = s->sample[j] - z[j];
    krm.present[i] = true;
  }
  return krm;
}

std::size_t Subgraph::node_count() const {
  return static_cast<std::size_t>(std::count(node_present.begin(), node_present.end(), true));
}

KnowledgeGraphSet build_graph_set(const std::vector<ClassAnchor>& anchors,
                                  const std::vector<BoundarySample>& boundaries, std::size_t k, std::string model_id,
                                  std::string pool_id) {
  const Layout l = index_inputs(anchors, boundaries, k);
  KnowledgeGraphSet g;
  g.model_id = std::move(model_id);
  g.pool_id = std::move(pool_id);
  g.category_count = k;
  g.dim = l.dim;
  for (std::size_t c = 0; c < k; ++c) {
    if (l.anchor[c] == nullptr) continue;
    const auto& z = l.anchor[c]->sample;
    Subgraph sg;
    sg.category = c;
    sg.nodes = nn::Tensor({k, l.dim});
    sg.edges = nn::Tensor({k, l.dim});
    sg.node_present.assign(k, false);
    for (std::size_t b = 0; b < k; ++b) {
      const BoundarySample* s = b == c ? nullptr : l.boundary[c * k + b];
      const auto& src = s != nullptr ? s->sample : z;
      auto node = sg.nodes.row_span(b);
      auto edge = sg.edges.row_span(b);
      for (std::size_t j = 0; j < l.dim; ++j) {
        node[j] = src[j];
        edge[j] = src[j] - z[j];
      }
      sg.node_present[b] = b == c || s != nullptr;
    }
    g.subgraphs.push_back(std::move(sg));
  }
  return g;
}

KnowledgeGraphSet build_graph_set(const ProbeResult& result) {
  return build_graph_set(result.anchor_list(), result.boundary_list(), result.category_count, result.model_id,
                         result.pool_id);
}

void save_probe(const std::filesystem::path& path, const ProbeResult& r) {
  const std::size_t k = r.category_count, d = r.dim;
  nn::Tensor anchors({k, d}), confidence({k}), boundary({k * k, d}), gap({k * k}), iters({k * k}), present({k * k});
  for (std::size_t c = 0; c < k; ++c) {
    if (!r.anchors[c]) continue;
    std::copy(r.anchors[c]->sample.begin(), r.anchors[c]->sample.end(), anchors.row_span(c).begin());
    confidence[c] = r.anchors[c]->confidence;
  }
  for (const auto& [key, s] : r.boundaries) {
    const std::size_t i = key.first * k + key.second;
    std::copy(s.sample.begin(), s.sample.end(), boundary.row_span(i).begin());
    gap[i] = s.gap;
    iters[i] = static_cast<double>(s.iterations);
    present[i] = 1.0;
  }
  json header = {{"model_id", r.model_id},
                 {"pool_id", r.pool_id},
                 {"k", k},
                 {"d", d},
                 {"epsilon", r.epsilon},
                 {"coverage", r.coverage()},
                 {"stats",
                  {{"pairs", r.stats.pairs},
                   {"direct", r.stats.direct},
                   {"recovered", r.stats.recovered},
                   {"masked", r.stats.masked},
                   {"third_category_failures", r.stats.third_category_failures},
                   {"non_converged", r.stats.non_converged}}}};
  nn::write_with_header(path, header.dump(),
                        {{"anchors", anchors},
                         {"anchor_confidence", confidence},
                         {"boundaries", boundary},
                         {"gaps", gap},
                         {"iterations", iters},
                         {"boundary_present", present}});
}

ProbeResult load_probe(const std::filesystem::path& path) {
  auto [header_line, tensors] = nn::read_with_header(path);
  const json h = json::parse(header_line);
  ProbeResult r;
  r.model_id = h.at("model_id").get<std::string>();
  r.pool_id = h.at("pool_id").get<std::string>();
  r.category_count = h.at("k").get<std::size_t>();
  r.dim = h.at("d").get<std::size_t>();
  r.epsilon = h.at("epsilon").get<double>();
  const auto coverage = h.at("coverage").get<std::vector<bool>>();
  const auto& st = h.at("stats");
  r.stats = {st.at("pairs"), st.at("direct"), st.at("recovered"), st.at("masked"), st.at("third_category_failures"),
             st.at("non_converged")};
  const std::size_t k = r.category_count, d = r.dim;
  const auto& anchors = nn::find_tensor(tensors, "anchors");
  const auto& confidence = nn::find_tensor(tensors, "anchor_confidence");
  const auto& boundary = nn::find_tensor(tensors, "boundaries");
  const auto& gap = nn::find_tensor(tensors, "gaps");
  const auto& iters = nn::find_tensor(tensors, "iterations");
  const auto& present = nn::find_tensor(tensors, "boundary_present");
  if (coverage.size() != k || anchors.shape() != nn::Shape{k, d} || boundary.shape() != nn::Shape{k * k, d} ||
      present.size() != k * k) {
    throw FormatError(path.string() + ": probe payload disagrees with header");
  }
  r.anchors.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    if (!coverage[c]) continue;
    const auto row = anchors.row_span(c);
    r.anchors[c] = ClassAnchor{c, {row.begin(), row.end()}, confidence[c]};
  }
  for (std::size_t i = 0; i < k * k; ++i) {
    if (present[i] == 0.0) continue;
    const auto row = boundary.row_span(i);
    r.boundaries[{i / k, i % k}] =
        BoundarySample{i / k, i % k, {row.begin(), row.end()}, gap[i], static_cast<std::size_t>(iters[i])};
  }
  return r;
}

}  // namespace k2v::probe
