// Acceptance suite: one PASS/FAIL line per criterion. Pipeline criteria run
// the k2v binary as a subprocess; batteries run in process.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "k2v/alignment/losses.hpp"
#include "k2v/encoders/encoders.hpp"
#include "k2v/eval/config.hpp"
#include "k2v/eval/experiment.hpp"
#include "k2v/eval/metrics.hpp"
#include "k2v/nn/checkpoint.hpp"
#include "k2v/nn/functional.hpp"
#include "k2v/nn/layers.hpp"
#include "k2v/probe/probe.hpp"
#include "k2v/zoo/zoo.hpp"
#include "support/gradcheck.hpp"
#include "support/naive_metrics.hpp"

namespace {

namespace fs = std::filesystem;
using namespace k2v;
using nlohmann::json;
using nn::Tape;
using nn::Tensor;
using nn::Var;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Suite {
  fs::path root;
  std::string cli;
  std::vector<std::pair<int, Outcome>> results;

  void report(int id, const std::string& name, const Outcome& o) {
    std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << "criterion " << id << " " << name << ": " << o.detail << std::endl;
    results.emplace_back(id, o);
  }
};

// ---- subprocess helpers ----------------------------------------------------

void run_cli(const Suite& s, const fs::path& workdir, const std::string& args) {
  fs::create_directories(workdir);
  const std::string log = (workdir / "cli.log").string();
  const std::string cmd = "'" + s.cli + "' --workdir='" + workdir.string() + "' " + args + " >>'" + log + "' 2>&1";
  if (std::system(cmd.c_str()) != 0) {
    throw std::runtime_error("`k2v " + args + "` failed; see " + log + "\n" + nn::read_file(log));
  }
}

json read_json(const fs::path& p) { return json::parse(nn::read_file(p)); }

double run_pipeline(const Suite& s, const fs::path& workdir) {
  fs::remove_all(workdir);
  const auto t0 = Clock::now();
  for (const char* cmd : {"zoo-build", "probe", "train", "eval"}) run_cli(s, workdir, cmd);
  return seconds_since(t0);
}

// ---- criterion 5: gradient battery -----------------------------------------

struct GradCase {
  std::string name;
  // Builds the parameters for one randomized trial and returns the loss.
  std::function<std::function<Var(Tape&)>(nn::ParameterSet&, std::mt19937_64&)> make;
};

Tensor away_from_zero(std::mt19937_64& rng, std::size_t r, std::size_t c) {
  // Keeps inputs of kinked ops outside the finite-difference stencil.
  Tensor t = testing::random_tensor(rng, r, c);
  for (double& v : t.values()) v += v >= 0 ? 0.05 : -0.05;
  return t;
}

// Contracts an op output with fixed random weights so every entry carries
// a distinct upstream gradient.
Var contract(Tape& tape, Var y, const Tensor& w) { return nn::sum(nn::mul(y, tape.constant(w))); }

std::vector<GradCase> gradient_cases() {
  using F = std::function<Var(Tape&)>;
  auto dims = [](std::mt19937_64& rng) { return std::pair<std::size_t, std::size_t>{1 + rng() % 4, 1 + rng() % 5}; };
  std::vector<GradCase> cases;
  auto unary = [&](std::string name, std::function<Var(Var)> op, bool kinked) {
    cases.push_back({name, [=](nn::ParameterSet& ps, std::mt19937_64& rng) -> F {
                       const auto [r, c] = dims(rng);
                       ps.add("a", kinked ? away_from_zero(rng, r, c) : testing::random_tensor(rng, r, c));
                       Tape shape_probe;
                       const Var y = op(shape_probe.constant(ps.at("a").value));
                       const Tensor w = testing::random_tensor(rng, y.rows(), y.cols());
                       return [&ps, w, op](Tape& t) { return contract(t, op(t.param(ps, "a")), w); };
                     }});
  };
  auto binary = [&](std::string name, std::function<Var(Var, Var)> op) {
    cases.push_back({name, [=](nn::ParameterSet& ps, std::mt19937_64& rng) -> F {
                       const auto [r, c] = dims(rng);
                       ps.add("a", testing::random_tensor(rng, r, c));
                       ps.add("b", testing::random_tensor(rng, r, c));
                       const Tensor w = testing::random_tensor(rng, r, c);
                       return [&ps, w, op](Tape& t) { return contract(t, op(t.param(ps, "a"), t.param(ps, "b")), w); };
                     }});
  };
  binary("add", nn::add);
  binary("sub", nn::sub);
  binary("mul", nn::mul);
  unary("scale", [](Var a) { return nn::scale(a, -1.7); }, false);
  unary("add_scalar", [](Var a) { return nn::add_scalar(a, 0.3); }, false);
  unary("sigmoid", nn::sigmoid, false);
  unary("tanh", nn::tanh, false);
  unary("relu", nn::relu, true);
  unary("square", nn::square, false);
  unary("flatten", nn::flatten, false);
  unary("mean_rows", nn::mean_rows, false);
  unary("sum", nn::sum, false);
  unary("mean", nn::mean, false);
  cases.push_back({"matmul", [](nn::ParameterSet& ps, std::mt19937_64& rng) -> F {
                     const std::size_t n = 1 + rng() % 4, k = 1 + rng() % 4, m = 1 + rng() % 4;
                     ps.add("a", testing::random_tensor(rng, n, k));
                     ps.add("b", testing::random_tensor(rng, k, m));
                     const Tensor w = testing::random_tensor(rng, n, m);
                     return [&ps, w](Tape& t) { return contract(t, nn::matmul(t.param(ps, "a"), t.param(ps, "b")), w); };
                   }});
  cases.push_back({"add_row", [](nn::ParameterSet& ps, std::mt19937_64& rng) -> F {
                     const std::size_t n = 1 + rng() % 4, c = 1 + rng() % 5;
                     ps.add("a", testing::random_tensor(rng, n, c));
                     ps.add("r", testing::random_tensor(rng, 1, c));
                     const Tensor w = testing::random_tensor(rng, n, c);
                     return [&ps, w](Tape& t) { return contract(t, nn::add_row(t.param(ps, "a"), t.param(ps, "r")), w); };
                   }});
  cases.push_back({"slice_cols", [](nn::ParameterSet& ps, std::mt19937_64& rng) -> F {
                     const std::size_t n = 1 + rng() % 4, c = 2 + rng() % 5, b = rng() % (c - 1), k = 1 + rng() % (c - b);
                     ps.add("a", testing::random_tensor(rng, n, c));
                     const Tensor w = testing::random_tensor(rng, n, k);
                     return [&ps, w, b, k](Tape& t) { return contract(t, nn::slice_cols(t.param(ps, "a"), b, k), w); };
                   }});
  cases.push_back({"concat_cols", [](nn::ParameterSet& ps, std::mt19937_64& rng) -> F {
                     const std::size_t n = 1 + rng() % 4, c1 = 1 + rng() % 3, c2 = 1 + rng() % 3;
                     ps.add("a", testing::random_tensor(rng, n, c1));
                     ps.add("b", testing::random_tensor(rng, n, c2));
                     const Tensor w = testing::random_tensor(rng, n, c1 + c2);
                     return [&ps, w](Tape& t) {
                       std::vector<Var> parts = {t.param(ps, "a"), t.param(ps, "b")};
                       return contract(t, nn::concat_cols(parts), w);
                     };
                   }});
  cases.push_back({"concat_rows", [](nn::ParameterSet& ps, std::mt19937_64& rng) -> F {
                     const std::size_t r1 = 1 + rng() % 3, r2 = 1 + rng() % 3, c = 1 + rng() % 4;
                     ps.add("a", testing::random_tensor(rng, r1, c));
                     ps.add("b", testing::random_tensor(rng, r2, c));
                     const Tensor w = testing::random_tensor(rng, r1 + r2, c);
                     return [&ps, w](Tape& t) {
                       std::vector<Var> parts = {t.param(ps, "a"), t.param(ps, "b")};
                       return contract(t, nn::concat_rows(parts), w);
                     };
                   }});
  cases.push_back({"gather_rows", [](nn::ParameterSet& ps, std::mt19937_64& rng) -> F {
                     const std::size_t n = 1 + rng() % 4, c = 1 + rng() % 4, picks = 1 + rng() % 6;
                     ps.add("a", testing::random_tensor(rng, n, c));
                     std::vector<std::size_t> rows(picks);
                     for (auto& r : rows) r = rng() % n;  // repeats exercise accumulation
                     const Tensor w = testing::random_tensor(rng, picks, c);
                     return [&ps, w, rows](Tape& t) { return contract(t, nn::gather_rows(t.param(ps, "a"), rows), w); };
                   }});
  cases.push_back({"cosine_rows", [](nn::ParameterSet& ps, std::mt19937_64& rng) -> F {
                     const std::size_t n = 1 + rng() % 4, c = 2 + rng() % 4;
                     ps.add("a", testing::random_tensor(rng, n, c));
                     ps.add("b", testing::random_tensor(rng, n, c));
                     const Tensor w = testing::random_tensor(rng, n, 1);
                     return [&ps, w](Tape& t) {
                       return contract(t, nn::cosine_rows(t.param(ps, "a"), t.param(ps, "b")), w);
                     };
                   }});
  cases.push_back({"softmax_cross_entropy", [](nn::ParameterSet& ps, std::mt19937_64& rng) -> F {
                     const std::size_t n = 1 + rng() % 4, k = 2 + rng() % 5;
                     ps.add("a", testing::random_tensor(rng, n, k, 2.0));
                     std::vector<std::size_t> targets(n);
                     for (auto& y : targets) y = rng() % k;
                     const Tensor w = testing::random_tensor(rng, n, 1);
                     return [&ps, w, targets](Tape& t) {
                       return contract(t, nn::softmax_cross_entropy(t.param(ps, "a"), targets), w);
                     };
                   }});
  cases.push_back({"dense", [](nn::ParameterSet& ps, std::mt19937_64& rng) -> F {
                     const std::size_t n = 1 + rng() % 4, in = 1 + rng() % 4, out = 1 + rng() % 4;
                     nn::add_dense(ps, "fc", in, out);
                     ps.at("fc.bias").value = testing::random_tensor(rng, 1, out);
                     const Tensor x = testing::random_tensor(rng, n, in), w = testing::random_tensor(rng, n, out);
                     return [&ps, x, w](Tape& t) { return contract(t, nn::dense_forward(t, t.constant(x), ps, "fc"), w); };
                   }});
  cases.push_back({"bilstm", [](nn::ParameterSet& ps, std::mt19937_64& rng) -> F {
                     const std::size_t batch = 1 + rng() % 2, in = 1 + rng() % 3, h = 1 + rng() % 3, steps = 1 + rng() % 3;
                     nn::add_bilstm(ps, "rnn", in, h);
                     std::vector<Tensor> xs;
                     for (std::size_t s = 0; s < steps; ++s) xs.push_back(testing::random_tensor(rng, batch, in));
                     const Tensor wf = testing::random_tensor(rng, batch, 2 * h), ws = testing::random_tensor(rng, batch, 2 * h);
                     return [&ps, xs, wf, ws](Tape& t) {
                       std::vector<Var> seq;
                       for (const auto& x : xs) seq.push_back(t.constant(x));
                       const auto out = nn::bilstm_forward(t, seq, ps, "rnn");
                       return nn::add(contract(t, out.final, wf), contract(t, out.per_step.front(), ws));
                     };
                   }});
  for (auto variant : {alignment::SalVariant::cosine, alignment::SalVariant::contrastive}) {
    const std::string name = variant == alignment::SalVariant::cosine ? "total_loss/cosine" : "total_loss/contrastive";
    cases.push_back({name, [variant](nn::ParameterSet& ps, std::mt19937_64& rng) -> F {
                       encoders::EncoderConfig c;
                       c.feature_dim = 3, c.hidden = 2, c.embedding = 3 + rng() % 3, c.model_count = 2 + rng() % 4, c.k_max = 3;
                       ps = encoders::make_encoder_params(c);
                       ps.add("h", testing::random_tensor(rng, c.model_count, c.embedding));
                       const std::size_t b = 1 + rng() % 4;
                       ps.add("t", testing::random_tensor(rng, b, c.embedding));
                       std::vector<std::size_t> truth(b);
                       for (auto& y : truth) y = rng() % c.model_count;
                       // A zero margin keeps random cosines clear of the hinge.
                       const alignment::LossWeights w{0.5 + (rng() % 100) / 50.0, 0.0, variant, true};
                       return [&ps, c, truth, w](Tape& t) {
                         return alignment::total_loss(t, ps, c, t.param(ps, "h"), t.param(ps, "t"), truth, w).total;
                       };
                     }});
  }
  return cases;
}

// Encoders end to end on real graph sets; entries are subsampled.
GradCase encoder_case(const std::vector<probe::KnowledgeGraphSet>* graphs, const std::vector<QueryTask>* tasks) {
  return {"encoders", [graphs, tasks](nn::ParameterSet& ps, std::mt19937_64& rng) -> std::function<Var(Tape&)> {
            encoders::EncoderConfig c;
            c.feature_dim = graphs->front().dim, c.hidden = 2, c.embedding = 3, c.model_count = 2, c.k_max = 6;
            const encoders::Variant vs[] = {encoders::Variant::lstm, encoders::Variant::concat, encoders::Variant::avg};
            c.model_variant = vs[rng() % 3];
            c.query_variant = vs[rng() % 3];
            c.seed = rng();
            ps = encoders::make_encoder_params(c);
            const std::size_t g0 = rng() % graphs->size(), g1 = rng() % graphs->size(), q = rng() % tasks->size();
            const Tensor wh = testing::random_tensor(rng, 2, 3), wt = testing::random_tensor(rng, 1, 3);
            return [&ps, c, graphs, tasks, g0, g1, q, wh, wt](Tape& t) {
              std::vector<const probe::KnowledgeGraphSet*> gs = {&(*graphs)[g0], &(*graphs)[g1]};
              std::vector<const QueryTask*> ts = {&(*tasks)[q]};
              return nn::add(contract(t, encoders::encode_models(t, ps, c, gs), wh),
                             contract(t, encoders::encode_queries(t, ps, c, ts), wt));
            };
          }};
}

Outcome gradient_battery(const std::vector<probe::KnowledgeGraphSet>& graphs, const std::vector<QueryTask>& tasks) {
  const auto t0 = Clock::now();
  auto cases = gradient_cases();
  cases.push_back(encoder_case(&graphs, &tasks));
  std::mt19937_64 rng(20240601);
  double worst = 0.0;
  std::string worst_case, failures;
  std::size_t trials = 0;
  for (const auto& gc : cases) {
    for (int trial = 0; trial < 100; ++trial) {
      nn::ParameterSet ps(rng());
      const auto loss = gc.make(ps, rng);
      const std::size_t sample = gc.name == "encoders" ? 6 : 0;
      const auto r = testing::gradient_check(ps, loss, 1e-5, sample, static_cast<unsigned>(rng()));
      ++trials;
      if (r.max_rel_error > worst) worst = r.max_rel_error, worst_case = gc.name + "/" + r.worst_param;
      if (!(r.max_rel_error <= 1e-4)) {
        failures += " " + gc.name + "#" + std::to_string(trial) + "(" + fmt("%.2e", r.max_rel_error) + ")";
      }
    }
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = failures.empty() && secs <= 120.0;
  o.detail = std::to_string(cases.size()) + " ops x 100 trials, worst rel err " + fmt("%.2e", worst) + " (" +
             worst_case + ", <=1e-4), " + fmt("%.1f", secs) + " s (<=120 s)";
  if (!failures.empty()) o.detail += "; failing:" + failures.substr(0, 400);
  return o;
}

// ---- criterion 6: boundary battery ------------------------------------------

// Binary linear model with logits (x1, x2): exact boundary x1 = x2.
class SymmetricLinear final : public BlackBoxModel {
 public:
  const std::string& model_id() const override { return id_; }
  std::size_t category_count() const override { return 2; }
  std::vector<double> predict_proba(std::span<const double> x) const override {
    return nn::softmax(std::vector<double>{x[0], x[1]});
  }

 private:
  std::string id_ = "symmetric-linear";
};

Outcome boundary_battery(const zoo::Zoo& z, const std::vector<eval::ModelProbes>& probes, const probe::ProbeConfig& pc) {
  std::size_t checked = 0, bad = 0, max_iter = 0;
  double max_gap = 0.0;
  std::string first_bad;
  for (std::size_t i = 0; i < z.size(); ++i) {
    std::vector<const probe::ProbeResult*> results = {&probes[i].evaluation, &probes[i].training_data};
    for (const auto& r : probes[i].training) results.push_back(&r);
    for (const auto* r : results) {
      for (const auto& b : r->boundary_list()) {
        ++checked;
        const auto p = z.model(i).predict_proba(b.sample);  // fresh query
        std::vector<std::size_t> order(p.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return p[x] > p[y]; });
        const std::set<std::size_t> top2 = {order[0], order[1]}, pair = {b.origin, b.target};
        const double gap = std::abs(p[b.origin] - p[b.target]);
        const bool ok = top2 == pair && gap <= pc.epsilon && b.gap <= pc.epsilon && b.iterations <= pc.max_iter;
        max_gap = std::max(max_gap, gap);
        max_iter = std::max(max_iter, b.iterations);
        if (!ok && bad++ == 0) {
          first_bad = r->model_id + " " + std::to_string(b.origin) + "->" + std::to_string(b.target);
        }
      }
    }
  }
  SymmetricLinear sym;
  const probe::ClassAnchor za{0, {1.0, 0.0}, sym.predict_proba(std::vector<double>{1.0, 0.0})[0]};
  const probe::ClassAnchor zb{1, {0.0, 1.0}, sym.predict_proba(std::vector<double>{0.0, 1.0})[1]};
  const auto res = probe::find_boundary_sample(sym, za, zb, 1e-3, 60);
  const auto* s = std::get_if<probe::BoundarySample>(&res);
  const bool sym_ok = s != nullptr && std::abs(s->sample[0] - 0.5) <= 1e-3 && std::abs(s->sample[1] - 0.5) <= 1e-3;
  Outcome o;
  o.pass = bad == 0 && checked > 0 && sym_ok;
  o.detail = std::to_string(checked) + " boundaries on " + std::to_string(z.size()) + " models, max fresh gap " +
             fmt("%.2e", max_gap) + " (<=1e-3), max iterations " + std::to_string(max_iter) +
             " (<=60), top-2 violations " + std::to_string(bad);
  if (!first_bad.empty()) o.detail += " (first: " + first_bad + ")";
  o.detail += s ? "; symmetric case (" + fmt("%.6f", s->sample[0]) + ", " + fmt("%.6f", s->sample[1]) + ")"
                : "; symmetric case did not return a boundary";
  return o;
}

// ---- criterion 7: loss identities -------------------------------------------

Outcome loss_identities() {
  using V = std::vector<double>;
  auto at = [](double c) { return V{c, std::sqrt(std::max(0.0, 1.0 - c * c))}; };
  const V e1 = {1.0, 0.0};
  std::vector<std::pair<std::string, bool>> checks;
  auto near = [](double a, double b) { return std::abs(a - b) <= 1e-9; };
  checks.emplace_back("sal matched parallel", near(alignment::loss_sal(V{2, 4}, V{0.5, 1}, true, 0.4), 0.0));
  checks.emplace_back("sal unmatched 0.2", near(alignment::loss_sal(e1, at(0.2), false, 0.4), 0.0));
  checks.emplace_back("sal unmatched 0.9", near(alignment::loss_sal(e1, at(0.9), false, 0.4), 0.5));
  checks.emplace_back("contrastive matched", near(alignment::loss_sal_contrastive(V{2, 4}, V{0.5, 1}, true, 0.4), 0.0));
  checks.emplace_back("contrastive 0.4", near(alignment::loss_sal_contrastive(e1, at(0.4), false, 0.4), 0.0));
  checks.emplace_back("contrastive 0.9", near(alignment::loss_sal_contrastive(e1, at(0.9), false, 0.4), 0.25));
  checks.emplace_back("dis identical", near(alignment::dis(V{1, 2, 3}, V{1, 2, 3}), 0.0));
  checks.emplace_back("dis opposite", near(alignment::dis(V{1, 0}, V{-1, 0}), 2.0));
  checks.emplace_back("dis orthogonal", near(alignment::dis(V{1, 0}, V{0, 1}), 1.0));
  {
    encoders::EncoderConfig c;
    c.feature_dim = 3, c.hidden = 3, c.embedding = 4, c.model_count = 12, c.k_max = 4;
    auto ps = encoders::make_encoder_params(c);
    ps.at("menc.head.weight").value.fill(0.0);
    const encoders::ModelVector h{{0.3, -1.0, 2.0, 0.5}, "m", "p"};
    checks.emplace_back("mkc uniform = ln 12", near(alignment::loss_mkc(h, 3, ps, c), std::log(12.0)));
    // Perfect configuration: orthonormal embeddings, queries on their model, large head.
    c.model_count = 4;
    ps = encoders::make_encoder_params(c);
    ps.at("menc.head.weight").value = Tensor::identity(4);
    for (double& v : ps.at("menc.head.weight").value.values()) v *= 100.0;
    Tape tape;
    Tensor tq({2, 4});
    tq(0, 2) = 1.0, tq(1, 0) = 3.0;
    const std::vector<std::size_t> truth = {2, 0};
    const auto terms =
        alignment::total_loss(tape, ps, c, tape.constant(Tensor::identity(4)), tape.constant(tq), truth, {});
    checks.emplace_back("total vanishes when both branches do", near(terms.total.scalar(), 0.0));
    Tape tape2;
    const auto a0 = alignment::total_loss(tape2, ps, c, tape2.constant(Tensor::identity(4)), tape2.constant(tq), truth,
                                          {0.0, 0.4, alignment::SalVariant::cosine, true});
    checks.emplace_back("alpha 0 is mkc", a0.total.scalar() == a0.mkc.scalar());
  }
  // Branch-zero conditions on a 1000-point cosine grid over [-1, 1].
  std::size_t grid_bad = 0;
  const double margin = 0.4;
  for (int i = 0; i < 1000; ++i) {
    const double c = -1.0 + 2.0 * i / 999.0;
    const V h = at(c);
    for (auto f : {&alignment::loss_sal, &alignment::loss_sal_contrastive}) {
      const double m = f(e1, h, true, margin), u = f(e1, h, false, margin);
      const double cos = nn::cosine_similarity(e1, h);
      grid_bad += !(m >= 0.0 && u >= 0.0);
      grid_bad += (m == 0.0) != (cos >= 1.0);
      grid_bad += (u == 0.0) != (cos <= margin);
    }
  }
  checks.emplace_back("branch-zero grid", grid_bad == 0);
  std::string failed;
  for (const auto& [name, ok] : checks) {
    if (!ok) failed += " " + name + ";";
  }
  return {failed.empty(), std::to_string(checks.size()) + " identity checks (incl. 1000-point grid, " +
                              std::to_string(grid_bad) + " grid violations)" +
                              (failed.empty() ? "" : ", failed:" + failed)};
}

// ---- criterion 8: metric oracles --------------------------------------------

Outcome metric_oracles() {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> small(0, 4);
  std::normal_distribution<double> g;
  std::size_t p_bad = 0, s_bad = 0, r_bad = 0, undefined = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng() % 14;
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = trial % 2 ? g(rng) : small(rng);
      y[i] = trial % 2 ? g(rng) : small(rng);
    }
    try {
      p_bad += std::abs(eval::pearson(x, y) - testing::naive_pearson(x, y)) > 1e-9;
      s_bad += std::abs(eval::spearman(x, y) - testing::naive_spearman(x, y)) > 1e-9;
    } catch (const eval::UndefinedCorrelationError&) {
      // Only acceptable when an input really is constant.
      const bool constant = std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; }) ||
                            std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; });
      ++undefined;
      p_bad += !constant;
    }
  }
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t m = 2 + rng() % 12, tasks = 1 + rng() % 6, k = 1 + rng() % m;
    std::vector<std::vector<std::size_t>> rankings(tasks);
    std::vector<std::vector<double>> oracle(tasks, std::vector<double>(m));
    for (std::size_t t = 0; t < tasks; ++t) {
      rankings[t].resize(m);
      std::iota(rankings[t].begin(), rankings[t].end(), 0);
      std::shuffle(rankings[t].begin(), rankings[t].end(), rng);
      for (double& v : oracle[t]) v = small(rng) / 4.0;
    }
    r_bad += eval::recall_at_k(rankings, oracle, k) != testing::naive_recall(rankings, oracle, k);
  }
  return {p_bad + s_bad + r_bad == 0,
          "1000 instances each; mismatches pearson " + std::to_string(p_bad) + ", spearman " + std::to_string(s_bad) +
              " (1e-9), R@k " + std::to_string(r_bad) + " (exact); " + std::to_string(undefined) +
              " constant inputs correctly rejected"};
}

// ---- criterion 10: KRM invariants ---------------------------------------------

Outcome krm_invariants(const std::vector<eval::ModelProbes>& probes) {
  std::size_t results = 0, entries = 0, bad = 0;
  std::string first;
  auto fail = [&](const std::string& what) {
    if (bad++ == 0) first = what;
  };
  for (const auto& mp : probes) {
    std::vector<const probe::ProbeResult*> rs = {&mp.evaluation, &mp.training_data};
    for (const auto& r : mp.training) rs.push_back(&r);
    for (const auto* r : rs) {
      ++results;
      const std::size_t k = r->category_count;
      const auto anchors = r->anchor_list();
      const auto krm = probe::build_krm(anchors, r->boundary_list(), k);
      const auto cov = r->coverage();
      std::vector<const probe::ClassAnchor*> by_cat(k, nullptr);
      for (const auto& a : anchors) by_cat[a.category] = &a;
      for (std::size_t a = 0; a < k; ++a) {
        if (cov[a] != (by_cat[a] != nullptr)) fail(r->pool_id + ": coverage mask of category " + std::to_string(a));
        for (std::size_t b = 0; b < k; ++b) {
          ++entries;
          const auto row = krm.r(a, b);
          const auto it = r->boundaries.find({a, b});
          const bool expect = a != b && it != r->boundaries.end();
          if (krm.has(a, b) != expect) fail(r->pool_id + ": mask at " + std::to_string(a) + "," + std::to_string(b));
          if (a == b || !expect) {
            if (std::any_of(row.begin(), row.end(), [](double v) { return v != 0.0; })) {
              fail(r->pool_id + ": non-zero absent entry " + std::to_string(a) + "," + std::to_string(b));
            }
            continue;
          }
          for (std::size_t j = 0; j < row.size(); ++j) {
            if (row[j] != it->second.sample[j] - by_cat[a]->sample[j]) {
              fail(r->pool_id + ": edge mismatch " + std::to_string(a) + "," + std::to_string(b));
              break;
            }
          }
        }
      }
      if (krm.present_count() != r->boundaries.size()) fail(r->pool_id + ": present count");
    }
  }
  return {bad == 0 && results > 0, std::to_string(results) + " probe results, " + std::to_string(entries) +
                                       " KRM entries, " + std::to_string(bad) + " violations" +
                                       (first.empty() ? "" : " (first: " + first + ")")};
}

bool same_bytes(const fs::path& a, const fs::path& b) { return nn::read_file(a) == nn::read_file(b); }

json strip_runtimes(json j) {
  j.erase("runtimes");
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  Suite s;
  s.cli = K2V_CLI_PATH;
  s.root = fs::temp_directory_path() / ("k2v_acceptance_" + std::to_string(::getpid()));
  bool keep = false;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a.rfind("--workdir=", 0) == 0) s.root = a.substr(10);
    if (a == "--keep") keep = true;
    if (a.rfind("--cli=", 0) == 0) s.cli = a.substr(6);
  }
  const auto t_all = Clock::now();
  std::cout << "acceptance workdir: " << s.root << std::endl;
  const fs::path run_a = s.root / "run-a", run_b = s.root / "run-b";

  json metrics_a;
  try {
    const double secs = run_pipeline(s, run_a);
    metrics_a = read_json(run_a / "eval" / "metrics.json");
    const double r1 = metrics_a["benchmark"]["r1"], r3 = metrics_a["benchmark"]["r3"];
    const std::size_t tasks = metrics_a["benchmark"]["tasks"];
    s.report(1, "end-to-end retrieval",
             {r1 >= 0.80 && r3 >= 0.95 && secs <= 900.0 && tasks == 60,
              std::to_string(tasks) + " tasks, R@1 " + fmt("%.3f", r1) + " (>=0.80), R@3 " + fmt("%.3f", r3) +
                  " (>=0.95), pipeline " + fmt("%.1f", secs) + " s (<=900 s)"});
    const auto& p = metrics_a["parity"];
    const double gap = p["gap"];
    s.report(2, "probe substitution",
             {gap <= 0.05, "R@1 external " + fmt("%.3f", p["r1_external"].get<double>()) + ", training data " +
                               fmt("%.3f", p["r1_training_data"].get<double>()) + ", gap " + fmt("%.3f", gap) +
                               " (<=0.05)"});
    const auto& mx = metrics_a["mixed"];
    const auto& alt = metrics_a["mixed_alternate"];
    const double rho = mx["spearman"];
    const std::size_t used = mx["tasks"].get<std::size_t>() - mx["undefined_correlations"].get<std::size_t>();
    s.report(3, "mixed-domain correlation",
             {used > 0 && rho >= 0.5,
              "mean Spearman " + fmt("%.3f", rho) + " (>=0.5) over " + std::to_string(used) + " of " +
                  std::to_string(mx["tasks"].get<std::size_t>()) + " tasks, oracle " +
                  metrics_a["mixed_oracle_mode"].get<std::string>() + "; " +
                  metrics_a["mixed_alternate_oracle_mode"].get<std::string>() + " oracle: " +
                  std::to_string(alt["undefined_correlations"].get<std::size_t>()) + " tasks with a constant row, " +
                  "Spearman " + fmt("%.3f", alt["spearman"].get<double>())});
  } catch (const std::exception& e) {
    for (int id : {1, 2, 3}) s.report(id, "pipeline", {false, e.what()});
  }

  try {
    run_cli(s, run_a, "sweep --axis=q_n --grid=2,8");
    const auto table = read_json(run_a / "sweep" / "q_n.json");
    if (table["rows"].size() != 2) throw std::runtime_error("sweep returned " + table.dump());
    const double r2 = table["rows"][0]["benchmark"]["r1"], r8 = table["rows"][1]["benchmark"]["r1"];
    const std::size_t e = read_json(run_a / "sweep" / "config.json")["config"]["encoder"]["embedding"];
    s.report(4, "ablation direction",
             {r8 >= r2 && e == 256, "R@1 q_n=8 " + fmt("%.3f", r8) + " >= q_n=2 " + fmt("%.3f", r2) + " at E=" + std::to_string(e)});
  } catch (const std::exception& e) {
    s.report(4, "ablation direction", {false, e.what()});
  }

  // In-process batteries over the zoo the pipeline built.
  struct Probed {
    zoo::Zoo zoo;
    std::vector<eval::ModelProbes> probes;
    std::vector<probe::KnowledgeGraphSet> graphs;
    std::vector<QueryTask> tasks;
  };
  const auto config = eval::ExperimentConfig{}.resolved();
  std::optional<Probed> probed;
  std::string setup_error;
  try {
    Probed p{zoo::load_zoo(run_a / "zoo"), {}, {}, {}};
    const auto domains = eval::zoo_domains(p.zoo);
    p.probes = eval::probe_zoo(p.zoo, domains, config);
    for (const auto& mp : p.probes) p.graphs.push_back(probe::build_graph_set(mp.evaluation));
    for (auto& q : eval::benchmark_tasks(domains, config)) p.tasks.push_back(std::move(q.task));
    probed = std::move(p);
  } catch (const std::exception& e) {
    setup_error = e.what();
  }
  auto guarded = [&](int id, const std::string& name, bool needs_zoo, const std::function<Outcome()>& f) {
    if (needs_zoo && !probed) return s.report(id, name, {false, "zoo unavailable: " + setup_error});
    try {
      s.report(id, name, f());
    } catch (const std::exception& e) {
      s.report(id, name, {false, e.what()});
    }
  };
  guarded(5, "gradient battery", true, [&] { return gradient_battery(probed->graphs, probed->tasks); });
  guarded(6, "boundary battery", true, [&] { return boundary_battery(probed->zoo, probed->probes, config.probe); });
  guarded(7, "loss identities", false, loss_identities);
  guarded(8, "metric oracles", false, metric_oracles);
  guarded(9, "determinism", false, [&]() -> Outcome {
    run_pipeline(s, run_b);
    const bool store_same = same_bytes(run_a / "train" / "store" / "store.k2v", run_b / "train" / "store" / "store.k2v") &&
                            same_bytes(run_a / "train" / "store" / "store.json", run_b / "train" / "store" / "store.json");
    const bool enc_same = same_bytes(run_a / "train" / "encoder.k2v", run_b / "train" / "encoder.k2v");
    const bool metrics_same = strip_runtimes(metrics_a) == strip_runtimes(read_json(run_b / "eval" / "metrics.json"));
    return {store_same && metrics_same && enc_same,
            std::string("store ") + (store_same ? "bitwise identical" : "DIFFERS") + ", encoder " +
                (enc_same ? "identical" : "DIFFERS") + ", metrics JSON " + (metrics_same ? "identical" : "DIFFERS") +
                " (runtimes excluded)"};
  });
  guarded(10, "KRM invariants", true, [&] { return krm_invariants(probed->probes); });

  std::sort(s.results.begin(), s.results.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::size_t passed = 0;
  json summary = json::array();
  for (const auto& [id, o] : s.results) {
    passed += o.pass;
    summary.push_back({{"criterion", id}, {"pass", o.pass}, {"detail", o.detail}});
  }
  std::cout << "acceptance: " << passed << "/" << s.results.size() << " criteria passed in "
            << fmt("%.1f", seconds_since(t_all)) << " s" << std::endl;
  nn::write_file(s.root / "acceptance.json", summary.dump(2) + "\n");
  if (!keep) {
    std::error_code ec;
    for (const auto& p : {run_a, run_b}) fs::remove_all(p, ec);
  }
  return passed == s.results.size() ? 0 : 1;
}
