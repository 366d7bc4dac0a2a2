#include "k2v/nn/tape.hpp"

#include <Eigen/Core>
#include <cmath>

#include "k2v/error.hpp"

namespace k2v::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

ConstMap view(const Tensor& t) { return ConstMap(t.data().data(), t.rows(), t.cols()); }
MutMap view(Tensor& t) { return MutMap(t.data().data(), t.rows(), t.cols()); }

constexpr double kNormFloor = 1e-12;

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

Tape& same_tape(Var a, Var b) {
  if (a.tape() == nullptr || a.tape() != b.tape()) throw StateError("operands recorded on different tapes");
  return *a.tape();
}

template <typename F>
Var unary(Var a, const char* op, F&& f, std::function<double(double x, double y)> dfdx) {
  Tape& tape = *a.tape();
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  const std::size_t ia = a.id();
  return tape.record(std::move(y), {ia},
                     [ia, dfdx = std::move(dfdx)](Tape& t, std::size_t self) {
                       const Tensor& g = t.upstream(self);
                       const Tensor& xv = t.value(ia);
                       const Tensor& yv = t.value(self);
                       Tensor& ga = t.grad_buffer(ia);
                       for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * dfdx(xv[i], yv[i]);
                     },
                     op);
}

}  // namespace

// ---- Var / Tape ------------------------------------------------------------

const Tensor& Var::value() const {
  if (tape_ == nullptr) throw StateError("use of an unbound variable");
  return tape_->value(id_);
}

double Var::scalar() const {
  const Tensor& v = value();
  if (v.size() != 1) throw DimensionError("scalar() on tensor of shape " + shape_string(v.shape()));
  return v[0];
}

Var Tape::constant(Tensor value) {
  if (value.rank() == 1) value = Tensor({1, value.size()}, std::move(value.data()));
  return record(std::move(value), {}, nullptr, "constant");
}

Var Tape::param(ParameterSet& params, const std::string& name) {
  auto key = std::make_pair(static_cast<const ParameterSet*>(&params), name);
  if (auto it = leaves_.find(key); it != leaves_.end()) {
    if (nodes_[it->second].param == nullptr) throw StateError("parameter '" + name + "' already bound as frozen");
    return Var(this, it->second);
  }
  Parameter& p = params.at(name);
  Node node;
  node.external = &p.value;
  node.requires_grad = true;
  node.param = &p;
  node.owner = &params;
  nodes_.push_back(std::move(node));
  leaves_.emplace(std::move(key), nodes_.size() - 1);
  return Var(this, nodes_.size() - 1);
}

Var Tape::frozen(const ParameterSet& params, const std::string& name) {
  auto key = std::make_pair(&params, name);
  if (auto it = leaves_.find(key); it != leaves_.end()) return Var(this, it->second);
  Node node;
  node.external = &params.at(name).value;
  nodes_.push_back(std::move(node));
  leaves_.emplace(std::move(key), nodes_.size() - 1);
  return Var(this, nodes_.size() - 1);
}

const Tensor& Tape::value(std::size_t id) const {
  const Node& n = nodes_.at(id);
  return n.external != nullptr ? *n.external : n.value;
}

Var Tape::record(Tensor value, std::vector<std::size_t> inputs, Pullback pullback, const char* op) {
  if (!value.all_finite()) throw NonFiniteError(std::string(op) + ": forward produced NaN or Inf");
  Node node;
  node.value = std::move(value);
  for (std::size_t in : inputs) node.requires_grad = node.requires_grad || nodes_[in].requires_grad;
  node.inputs = std::move(inputs);
  if (node.requires_grad) node.pullback = std::move(pullback);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Tensor& Tape::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    n.grad = Tensor(value(id).shape());
    n.has_grad = true;
  }
  return n.grad;
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_.at(v.id());
  return n.has_grad ? n.grad : Tensor(value(v.id()).shape());
}

void Tape::backward(Var loss) {
  if (loss.tape() != this) throw StateError("backward on a variable from another tape");
  if (backward_done_) throw StateError("backward called twice on the same tape without reset");
  if (loss.value().size() != 1) throw DimensionError("backward root must be a scalar, got " + shape_string(loss.value().shape()));
  for (const Node& n : nodes_) {
    if (n.owner != nullptr && n.owner->grad_pending()) {
      throw StateError("gradients already pending; reset before a second backward (double accumulation)");
    }
  }
  backward_done_ = true;
  grad_buffer(loss.id())[0] = 1.0;
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.has_grad || !n.pullback) continue;
    n.pullback(*this, id);
  }
  for (Node& n : nodes_) {
    if (n.param == nullptr) continue;
    n.owner->mark_grad_pending();
    if (!n.has_grad) continue;
    if (!n.grad.all_finite()) throw NonFiniteError("gradient contains NaN or Inf");
    auto& dst = n.param->grad.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += n.grad[i];
  }
}

// ---- operations ------------------------------------------------------------

Var matmul(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw DimensionError("matmul: " + shape_string(av.shape()) + " x " + shape_string(bv.shape()));
  }
  Tensor out({av.rows(), bv.cols()});
  view(out).noalias() = view(av) * view(bv);
  const std::size_t ia = a.id(), ib = b.id();
  return tape.record(std::move(out), {ia, ib},
                     [ia, ib](Tape& t, std::size_t self) {
                       auto g = view(t.upstream(self));
                       if (t.requires_grad(ia)) view(t.grad_buffer(ia)).noalias() += g * view(t.value(ib)).transpose();
                       if (t.requires_grad(ib)) view(t.grad_buffer(ib)).noalias() += view(t.value(ia)).transpose() * g;
                     },
                     "matmul");
}

Var add(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  view(out) += view(b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return tape.record(std::move(out), {ia, ib},
                     [ia, ib](Tape& t, std::size_t self) {
                       auto g = view(t.upstream(self));
                       if (t.requires_grad(ia)) view(t.grad_buffer(ia)) += g;
                       if (t.requires_grad(ib)) view(t.grad_buffer(ib)) += g;
                     },
                     "add");
}

Var sub(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  view(out) -= view(b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return tape.record(std::move(out), {ia, ib},
                     [ia, ib](Tape& t, std::size_t self) {
                       auto g = view(t.upstream(self));
                       if (t.requires_grad(ia)) view(t.grad_buffer(ia)) += g;
                       if (t.requires_grad(ib)) view(t.grad_buffer(ib)) -= g;
                     },
                     "sub");
}

Var mul(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  view(out).array() *= view(b.value()).array();
  const std::size_t ia = a.id(), ib = b.id();
  return tape.record(std::move(out), {ia, ib},
                     [ia, ib](Tape& t, std::size_t self) {
                       auto g = view(t.upstream(self)).array();
                       if (t.requires_grad(ia)) view(t.grad_buffer(ia)).array() += g * view(t.value(ib)).array();
                       if (t.requires_grad(ib)) view(t.grad_buffer(ib)).array() += g * view(t.value(ia)).array();
                     },
                     "mul");
}

Var add_row(Var x, Var row) {
  Tape& tape = same_tape(x, row);
  const Tensor& xv = x.value();
  const Tensor& rv = row.value();
  if (rv.rows() != 1 || rv.cols() != xv.cols()) {
    throw DimensionError("add_row: " + shape_string(xv.shape()) + " + " + shape_string(rv.shape()));
  }
  Tensor out = xv;
  view(out).rowwise() += view(rv).row(0);
  const std::size_t ix = x.id(), ir = row.id();
  return tape.record(std::move(out), {ix, ir},
                     [ix, ir](Tape& t, std::size_t self) {
                       auto g = view(t.upstream(self));
                       if (t.requires_grad(ix)) view(t.grad_buffer(ix)) += g;
                       if (t.requires_grad(ir)) view(t.grad_buffer(ir)) += g.colwise().sum();
                     },
                     "add_row");
}

Var scale(Var a, double s) {
  return unary(a, "scale", [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Var add_scalar(Var a, double s) {
  return unary(a, "add_scalar", [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Var sigmoid(Var a) {
  return unary(
      a, "sigmoid",
      [](double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var a) {
  return unary(a, "tanh", [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var relu(Var a) {
  return unary(a, "relu", [](double x) { return x > 0 ? x : 0.0; }, [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Var square(Var a) {
  return unary(a, "square", [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var slice_cols(Var a, std::size_t begin, std::size_t count) {
  Tape& tape = *a.tape();
  const Tensor& av = a.value();
  if (begin + count > av.cols()) {
    throw DimensionError("slice_cols: [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                         ") out of " + shape_string(av.shape()));
  }
  Tensor out({av.rows(), count});
  view(out) = view(av).middleCols(begin, count);
  const std::size_t ia = a.id();
  return tape.record(std::move(out), {ia},
                     [ia, begin, count](Tape& t, std::size_t self) {
                       view(t.grad_buffer(ia)).middleCols(begin, count) += view(t.upstream(self));
                     },
                     "slice_cols");
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw InvalidArgument("concat_cols of nothing");
  Tape& tape = *parts.front().tape();
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  for (const Var& p : parts) {
    if (p.tape() != &tape) throw StateError("operands recorded on different tapes");
    if (p.rows() != rows) throw DimensionError("concat_cols: row counts differ");
    cols += p.cols();
  }
  Tensor out({rows, cols});
  std::vector<std::size_t> ids;
  std::size_t offset = 0;
  for (const Var& p : parts) {
    view(out).middleCols(offset, p.cols()) = view(p.value());
    offset += p.cols();
    ids.push_back(p.id());
  }
  return tape.record(std::move(out), ids,
                     [ids](Tape& t, std::size_t self) {
                       auto g = view(t.upstream(self));
                       std::size_t off = 0;
                       for (std::size_t id : ids) {
                         const std::size_t c = t.value(id).cols();
                         if (t.requires_grad(id)) view(t.grad_buffer(id)) += g.middleCols(off, c);
                         off += c;
                       }
                     },
                     "concat_cols");
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw InvalidArgument("concat_rows of nothing");
  Tape& tape = *parts.front().tape();
  const std::size_t cols = parts.front().cols();
  std::size_t rows = 0;
  for (const Var& p : parts) {
    if (p.tape() != &tape) throw StateError("operands recorded on different tapes");
    if (p.cols() != cols) throw DimensionError("concat_rows: column counts differ");
    rows += p.rows();
  }
  Tensor out({rows, cols});
  std::vector<std::size_t> ids;
  std::size_t offset = 0;
  for (const Var& p : parts) {
    view(out).middleRows(offset, p.rows()) = view(p.value());
    offset += p.rows();
    ids.push_back(p.id());
  }
  return tape.record(std::move(out), ids,
                     [ids](Tape& t, std::size_t self) {
                       auto g = view(t.upstream(self));
                       std::size_t off = 0;
                       for (std::size_t id : ids) {
                         const std::size_t r = t.value(id).rows();
                         if (t.requires_grad(id)) view(t.grad_buffer(id)) += g.middleRows(off, r);
                         off += r;
                       }
                     },
                     "concat_rows");
}

Var gather_rows(Var a, std::span<const std::size_t> rows) {
  Tape& tape = *a.tape();
  const Tensor& av = a.value();
  Tensor out({rows.size(), av.cols()});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= av.rows()) throw IndexError("gather_rows: row " + std::to_string(rows[i]) + " out of range");
    view(out).row(i) = view(av).row(rows[i]);
  }
  const std::size_t ia = a.id();
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return tape.record(std::move(out), {ia},
                     [ia, idx](Tape& t, std::size_t self) {
                       auto g = view(t.upstream(self));
                       auto ga = view(t.grad_buffer(ia));
                       for (std::size_t i = 0; i < idx.size(); ++i) ga.row(idx[i]) += g.row(i);
                     },
                     "gather_rows");
}

Var mean_rows(Var a) {
  Tape& tape = *a.tape();
  const Tensor& av = a.value();
  if (av.rows() == 0) throw DimensionError("mean_rows of an empty tensor");
  Tensor out({1, av.cols()});
  view(out) = view(av).colwise().sum() / static_cast<double>(av.rows());
  const std::size_t ia = a.id();
  return tape.record(std::move(out), {ia},
                     [ia](Tape& t, std::size_t self) {
                       auto ga = view(t.grad_buffer(ia));
                       const double inv = 1.0 / static_cast<double>(ga.rows());
                       ga.rowwise() += view(t.upstream(self)).row(0) * inv;
                     },
                     "mean_rows");
}

Var flatten(Var a) {
  Tape& tape = *a.tape();
  const Tensor& av = a.value();
  Tensor out({1, av.size()}, av.data());
  const std::size_t ia = a.id();
  return tape.record(std::move(out), {ia},
                     [ia](Tape& t, std::size_t self) {
                       const Tensor& g = t.upstream(self);
                       Tensor& ga = t.grad_buffer(ia);
                       for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                     },
                     "flatten");
}

Var sum(Var a) {
  Tape& tape = *a.tape();
  Tensor out({1, 1});
  out[0] = view(a.value()).sum();
  const std::size_t ia = a.id();
  return tape.record(std::move(out), {ia},
                     [ia](Tape& t, std::size_t self) {
                       view(t.grad_buffer(ia)).array() += t.upstream(self)[0];
                     },
                     "sum");
}

Var mean(Var a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw DimensionError("mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var cosine_rows(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_same_shape(av, bv, "cosine_rows");
  const std::size_t n = av.rows();
  Tensor out({n, 1});
  std::vector<double> na(n), nb(n);
  for (std::size_t r = 0; r < n; ++r) {
    na[r] = view(av).row(r).norm();
    nb[r] = view(bv).row(r).norm();
    if (na[r] < kNormFloor || nb[r] < kNormFloor) {
      throw DegenerateVectorError("cosine similarity of a zero-norm vector");
    }
    const double c = view(av).row(r).dot(view(bv).row(r)) / (na[r] * nb[r]);
    out[r] = std::clamp(c, -1.0, 1.0);
  }
  const std::size_t ia = a.id(), ib = b.id();
  return tape.record(std::move(out), {ia, ib},
                     [ia, ib, na, nb](Tape& t, std::size_t self) {
                       const Tensor& g = t.upstream(self);
                       auto A = view(t.value(ia));
                       auto B = view(t.value(ib));
                       for (std::size_t r = 0; r < na.size(); ++r) {
                         // Unclamped cosine for the derivative.
                         const double c = A.row(r).dot(B.row(r)) / (na[r] * nb[r]);
                         if (t.requires_grad(ia)) {
                           view(t.grad_buffer(ia)).row(r) +=
                               g[r] * (B.row(r) / (na[r] * nb[r]) - c * A.row(r) / (na[r] * na[r]));
                         }
                         if (t.requires_grad(ib)) {
                           view(t.grad_buffer(ib)).row(r) +=
                               g[r] * (A.row(r) / (na[r] * nb[r]) - c * B.row(r) / (nb[r] * nb[r]));
                         }
                       }
                     },
                     "cosine_rows");
}

Var softmax_cross_entropy(Var logits, std::span<const std::size_t> targets) {
  Tape& tape = *logits.tape();
  const Tensor& z = logits.value();
  if (targets.size() != z.rows()) throw DimensionError("softmax_cross_entropy: one target per row required");
  const std::size_t n = z.rows(), m = z.cols();
  Tensor probs({n, m});
  Tensor out({n, 1});
  for (std::size_t r = 0; r < n; ++r) {
    if (targets[r] >= m) {
      throw IndexError("target index " + std::to_string(targets[r]) + " out of range for " + std::to_string(m) + " logits");
    }
    const double mx = view(z).row(r).maxCoeff();
    double s = 0.0;
    for (std::size_t c = 0; c < m; ++c) s += std::exp(z(r, c) - mx);
    const double lse = mx + std::log(s);
    for (std::size_t c = 0; c < m; ++c) probs(r, c) = std::exp(z(r, c) - lse);
    out[r] = lse - z(r, targets[r]);
  }
  const std::size_t iz = logits.id();
  std::vector<std::size_t> tg(targets.begin(), targets.end());
  return tape.record(std::move(out), {iz},
                     [iz, tg, probs = std::move(probs)](Tape& t, std::size_t self) {
                       const Tensor& g = t.upstream(self);
                       Tensor& gz = t.grad_buffer(iz);
                       for (std::size_t r = 0; r < tg.size(); ++r) {
                         for (std::size_t c = 0; c < probs.cols(); ++c) {
                           gz(r, c) += g[r] * (probs(r, c) - (c == tg[r] ? 1.0 : 0.0));
                         }
                       }
                     },
                     "softmax_cross_entropy");
}

}  // namespace k2v::nn
