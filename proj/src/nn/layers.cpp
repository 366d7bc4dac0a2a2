#include "k2v/nn/layers.hpp"

#include <cmath>

#include "k2v/error.hpp"

namespace k2v::nn {

void add_dense(ParameterSet& params, const std::string& name, std::size_t in, std::size_t out) {
  params.add_uniform(name + ".weight", {in, out}, 1.0 / std::sqrt(static_cast<double>(in)));
  params.add_constant(name + ".bias", {1, out}, 0.0);
}

Var dense_forward(Tape& tape, Var x, ParamSource params, const std::string& name) {
  const Tensor& w = params.set().at(name + ".weight").value;
  if (x.cols() != w.rows()) {
    throw DimensionError("dense '" + name + "': input " + shape_string(x.value().shape()) + " vs weight " +
                         shape_string(w.shape()));
  }
  require_finite(x.value(), "dense '" + name + "' input");
  return add_row(matmul(x, params.get(tape, name + ".weight")), params.get(tape, name + ".bias"));
}

void add_bilstm(ParameterSet& params, const std::string& name, std::size_t in, std::size_t hidden) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (const char* dir : {".fwd", ".bwd"}) {
    const std::string base = name + dir;
    params.add_uniform(base + ".wx", {in, 4 * hidden}, bound);
    params.add_uniform(base + ".wh", {hidden, 4 * hidden}, bound);
    Parameter& b = params.add_uniform(base + ".b", {1, 4 * hidden}, bound);
    for (std::size_t j = hidden; j < 2 * hidden; ++j) b.value[j] = 1.0;
  }
}

std::size_t bilstm_hidden(const ParameterSet& params, const std::string& name) {
  return params.at(name + ".fwd.wh").value.rows();
}

namespace {

struct CellState {
  Var h;
  Var c;
  bool zero = true;
};

CellState cell_step(Var x, const CellState& prev, Var wx, Var wh, Var b, std::size_t hidden) {
  Var gates = matmul(x, wx);
  if (!prev.zero) gates = add(gates, matmul(prev.h, wh));
  gates = add_row(gates, b);
  Var i = sigmoid(slice_cols(gates, 0, hidden));
  Var f = sigmoid(slice_cols(gates, hidden, hidden));
  Var g = tanh(slice_cols(gates, 2 * hidden, hidden));
  Var o = sigmoid(slice_cols(gates, 3 * hidden, hidden));
  Var c = mul(i, g);
  if (!prev.zero) c = add(mul(f, prev.c), c);
  Var h = mul(o, tanh(c));
  return {h, c, false};
}

}  // namespace

BiLstmOutput bilstm_forward(Tape& tape, std::span<const Var> steps, ParamSource params, const std::string& name) {
  if (steps.empty()) throw InvalidArgument("bilstm '" + name + "': empty sequence");
  const std::size_t in = params.set().at(name + ".fwd.wx").value.rows();
  const std::size_t hidden = bilstm_hidden(params.set(), name);
  const std::size_t batch = steps.front().rows();
  for (const Var& s : steps) {
    if (s.cols() != in || s.rows() != batch) {
      throw DimensionError("bilstm '" + name + "': step " + shape_string(s.value().shape()) + " but cell expects [" +
                           std::to_string(batch) + "x" + std::to_string(in) + "]");
    }
    require_finite(s.value(), "bilstm '" + name + "' input");
  }

  const std::size_t n = steps.size();
  std::vector<Var> fwd(n), bwd(n);
  {
    Var wx = params.get(tape, name + ".fwd.wx");
    Var wh = params.get(tape, name + ".fwd.wh");
    Var b = params.get(tape, name + ".fwd.b");
    CellState st;
    for (std::size_t t = 0; t < n; ++t) {
      st = cell_step(steps[t], st, wx, wh, b, hidden);
      fwd[t] = st.h;
    }
  }
  {
    Var wx = params.get(tape, name + ".bwd.wx");
    Var wh = params.get(tape, name + ".bwd.wh");
    Var b = params.get(tape, name + ".bwd.b");
    CellState st;
    for (std::size_t t = n; t-- > 0;) {
      st = cell_step(steps[t], st, wx, wh, b, hidden);
      bwd[t] = st.h;
    }
  }

  BiLstmOutput out;
  out.per_step.reserve(n);
  for (std::size_t t = 0; t < n; ++t) {
    const Var pair[2] = {fwd[t], bwd[t]};
    out.per_step.push_back(concat_cols(pair));
  }
  const Var fin[2] = {fwd[n - 1], bwd[0]};
  out.final = n == 1 ? out.per_step[0] : concat_cols(fin);
  return out;
}

}  // namespace k2v::nn
