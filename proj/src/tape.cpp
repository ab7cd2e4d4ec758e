#include "hubpath/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hubpath/error.hpp"

namespace hubpath {

const Tensor& Var::value() const { return tape_->value(id_); }

std::string_view op_name(OpKind op) {
  switch (op) {
    case OpKind::affine: return "affine";
    case OpKind::relu: return "relu";
    case OpKind::tanh: return "tanh";
    case OpKind::add: return "add";
    case OpKind::mul: return "mul";
    case OpKind::mul_const: return "mul_const";
    case OpKind::scale: return "scale";
    case OpKind::sum: return "sum";
    case OpKind::softmax: return "softmax";
    case OpKind::softplus: return "softplus";
    case OpKind::cross_entropy: return "cross_entropy";
    case OpKind::column_mean: return "column_mean";
    case OpKind::neg_entropy: return "neg_entropy";
    case OpKind::gather_rows: return "gather_rows";
    case OpKind::route_combine: return "route_combine";
  }
  return "?";
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), nullptr, false, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::leaf(Tensor value) {
  nodes_.push_back(Node{std::move(value), nullptr, true, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::param(Parameter& p) {
  nodes_.push_back(Node{Tensor{}, &p, true, {}});
  return Var(this, nodes_.size() - 1);
}

const Tensor& Tape::value(std::size_t id) const {
  const Node& n = nodes_[id];
  return n.param ? n.param->tensor : n.owned;
}

std::span<double> Tape::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad.assign(value(id).size(), 0.0);
  return n.grad;
}

std::size_t Tape::activation_bytes() const {
  std::size_t n = 0;
  for (const auto& node : nodes_)
    if (!node.param) n += node.owned.size() * sizeof(double);
  return n;
}

Var Tape::record(OpKind op, std::vector<std::size_t> inputs, Tensor out, std::function<void(Tape&)> backward) {
  bool needs = false;
  for (auto id : inputs) needs = needs || nodes_[id].requires_grad;
  nodes_.push_back(Node{std::move(out), nullptr, needs, {}});
  const std::size_t id = nodes_.size() - 1;
  if (needs) entries_.push_back(TapeEntry{op, std::move(inputs), id, std::move(backward)});
  return Var(this, id);
}

void Tape::backward(Var scalar) {
  if (value(scalar).size() != 1)
    throw ShapeError("backward needs a scalar output, got shape " + shape_string(value(scalar).shape()));
  for (auto& n : nodes_) n.grad.clear();
  if (!nodes_[scalar.id()].requires_grad) return;
  grad_buffer(scalar.id())[0] = 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (nodes_[it->output].grad.empty()) continue;
    it->backward(*this);
  }
  for (auto& n : nodes_) {
    if (!n.param || n.grad.empty()) continue;
    auto g = n.param->tensor.grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
  }
}

// ---- helpers -------------------------------------------------------------

double stable_softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

static double stable_sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void softmax_row(std::span<const double> z, std::span<double> out) {
  const double mx = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (std::size_t j = 0; j < z.size(); ++j) {
    out[j] = std::exp(z[j] - mx);
    total += out[j];
  }
  for (auto& v : out) v /= total;
}

static void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
}

// ---- primitives ----------------------------------------------------------

Var affine(Var x, Var w, Var b) {
  Tape& t = x.tape();
  const Tensor& X = x.value();
  const Tensor& W = w.value();
  const Tensor& Bv = b.value();
  if (X.rank() != 2 || W.rank() != 2 || X.shape()[1] != W.shape()[0])
    throw ShapeError("affine: input " + shape_string(X.shape()) + " does not conform to weight " +
                     shape_string(W.shape()));
  const std::size_t batch = X.shape()[0], din = W.shape()[0], dout = W.shape()[1];
  if (Bv.size() != dout)
    throw ShapeError("affine: bias " + shape_string(Bv.shape()) + " does not conform to weight " +
                     shape_string(W.shape()));
  Tensor out({batch, dout});
  for (std::size_t r = 0; r < batch; ++r) {
    double* o = &out.data()[r * dout];
    for (std::size_t j = 0; j < dout; ++j) o[j] = Bv[j];
    for (std::size_t i = 0; i < din; ++i) {
      const double xv = X.data()[r * din + i];
      if (xv == 0.0) continue;
      const double* wrow = &W.data()[i * dout];
      for (std::size_t j = 0; j < dout; ++j) o[j] += xv * wrow[j];
    }
  }
  const std::size_t xi = x.id(), wi = w.id(), bi = b.id();
  const std::size_t oi = t.node_count();
  return t.record(OpKind::affine, {xi, wi, bi}, std::move(out), [=](Tape& tp) {
    const Tensor& Xv = tp.value(xi);
    const Tensor& Wv = tp.value(wi);
    const auto g = tp.grad_buffer(oi);
    if (tp.requires_grad(wi)) {
      auto gw = tp.grad_buffer(wi);
      for (std::size_t r = 0; r < batch; ++r)
        for (std::size_t i = 0; i < din; ++i) {
          const double xv = Xv.data()[r * din + i];
          if (xv == 0.0) continue;
          double* gwrow = &gw[i * dout];
          const double* grow = &g[r * dout];
          for (std::size_t j = 0; j < dout; ++j) gwrow[j] += xv * grow[j];
        }
    }
    if (tp.requires_grad(bi)) {
      auto gb = tp.grad_buffer(bi);
      for (std::size_t r = 0; r < batch; ++r)
        for (std::size_t j = 0; j < dout; ++j) gb[j] += g[r * dout + j];
    }
    if (tp.requires_grad(xi)) {
      auto gx = tp.grad_buffer(xi);
      for (std::size_t r = 0; r < batch; ++r)
        for (std::size_t i = 0; i < din; ++i) {
          const double* wrow = &Wv.data()[i * dout];
          const double* grow = &g[r * dout];
          double acc = 0.0;
          for (std::size_t j = 0; j < dout; ++j) acc += grow[j] * wrow[j];
          gx[r * din + i] += acc;
        }
    }
  });
}

Var relu(Var x) {
  Tape& t = x.tape();
  const Tensor& in = x.value();
  Tensor out(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
  const std::size_t xi = x.id(), oi = t.node_count();
  return t.record(OpKind::relu, {xi}, std::move(out), [=](Tape& tp) {
    const Tensor& X = tp.value(xi);
    const auto g = tp.grad_buffer(oi);
    auto gx = tp.grad_buffer(xi);
    for (std::size_t i = 0; i < gx.size(); ++i)
      if (X[i] > 0.0) gx[i] += g[i];
  });
}

Var tanh(Var x) {
  Tape& t = x.tape();
  const Tensor& in = x.value();
  Tensor out(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::tanh(in[i]);
  const std::size_t xi = x.id(), oi = t.node_count();
  return t.record(OpKind::tanh, {xi}, std::move(out), [=](Tape& tp) {
    const Tensor& Y = tp.value(oi);
    const auto g = tp.grad_buffer(oi);
    auto gx = tp.grad_buffer(xi);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * (1.0 - Y[i] * Y[i]);
  });
}

Var add(Var a, Var b) {
  Tape& t = a.tape();
  require_same_shape(a.value(), b.value(), "add");
  Tensor out(a.value().shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
  const std::size_t ai = a.id(), bi = b.id(), oi = t.node_count();
  return t.record(OpKind::add, {ai, bi}, std::move(out), [=](Tape& tp) {
    const auto g = tp.grad_buffer(oi);
    for (auto id : {ai, bi}) {
      if (!tp.requires_grad(id)) continue;
      auto gi = tp.grad_buffer(id);
      for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += g[i];
    }
  });
}

Var mul(Var a, Var b) {
  Tape& t = a.tape();
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out(a.value().shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  const std::size_t ai = a.id(), bi = b.id(), oi = t.node_count();
  return t.record(OpKind::mul, {ai, bi}, std::move(out), [=](Tape& tp) {
    const auto g = tp.grad_buffer(oi);
    if (tp.requires_grad(ai)) {
      auto ga = tp.grad_buffer(ai);
      const Tensor& B = tp.value(bi);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * B[i];
    }
    if (tp.requires_grad(bi)) {
      auto gb = tp.grad_buffer(bi);
      const Tensor& A = tp.value(ai);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * A[i];
    }
  });
}

Var mul_const(Var a, const Tensor& c) {
  Tape& t = a.tape();
  require_same_shape(a.value(), c, "mul_const");
  Tensor out(a.value().shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * c[i];
  const std::size_t ai = a.id(), oi = t.node_count();
  return t.record(OpKind::mul_const, {ai}, std::move(out), [=, factor = c](Tape& tp) {
    const auto g = tp.grad_buffer(oi);
    auto ga = tp.grad_buffer(ai);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * factor[i];
  });
}

Var scale(Var a, double factor) {
  Tape& t = a.tape();
  Tensor out(a.value().shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * factor;
  const std::size_t ai = a.id(), oi = t.node_count();
  return t.record(OpKind::scale, {ai}, std::move(out), [=](Tape& tp) {
    const auto g = tp.grad_buffer(oi);
    auto ga = tp.grad_buffer(ai);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * factor;
  });
}

Var sum(Var a) {
  Tape& t = a.tape();
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  const std::size_t ai = a.id(), oi = t.node_count();
  return t.record(OpKind::sum, {ai}, Tensor({1}, s), [=](Tape& tp) {
    const double g = tp.grad_buffer(oi)[0];
    for (auto& v : tp.grad_buffer(ai)) v += g;
  });
}

Var softmax(Var z) {
  Tape& t = z.tape();
  const Tensor& Z = z.value();
  const std::size_t m = Z.last_dim(), rows = Z.size() / m;
  Tensor out(Z.shape());
  for (std::size_t r = 0; r < rows; ++r)
    softmax_row(Z.values().subspan(r * m, m), out.values().subspan(r * m, m));
  const std::size_t zi = z.id(), oi = t.node_count();
  return t.record(OpKind::softmax, {zi}, std::move(out), [=](Tape& tp) {
    const Tensor& Y = tp.value(oi);
    const auto g = tp.grad_buffer(oi);
    auto gz = tp.grad_buffer(zi);
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t j = 0; j < m; ++j) dot += g[r * m + j] * Y[r * m + j];
      for (std::size_t j = 0; j < m; ++j) gz[r * m + j] += Y[r * m + j] * (g[r * m + j] - dot);
    }
  });
}

Var softplus(Var z) {
  Tape& t = z.tape();
  const Tensor& Z = z.value();
  Tensor out(Z.shape());
  for (std::size_t i = 0; i < Z.size(); ++i) out[i] = stable_softplus(Z[i]);
  const std::size_t zi = z.id(), oi = t.node_count();
  return t.record(OpKind::softplus, {zi}, std::move(out), [=](Tape& tp) {
    const Tensor& Zv = tp.value(zi);
    const auto g = tp.grad_buffer(oi);
    auto gz = tp.grad_buffer(zi);
    for (std::size_t i = 0; i < gz.size(); ++i) gz[i] += g[i] * stable_sigmoid(Zv[i]);
  });
}

Var cross_entropy(Var logits, std::span<const int> labels, double divisor) {
  Tape& t = logits.tape();
  const Tensor& L = logits.value();
  if (L.rank() != 2) throw ShapeError("cross_entropy: logits must be [B,C], got " + shape_string(L.shape()));
  const std::size_t batch = L.shape()[0], classes = L.shape()[1];
  if (labels.size() != batch)
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for logits " +
                     shape_string(L.shape()));
  for (int y : labels)
    if (y < 0 || static_cast<std::size_t>(y) >= classes)
      throw UsageError("cross_entropy: label " + std::to_string(y) + " outside [0," + std::to_string(classes) + ")");
  if (divisor == 0.0) divisor = static_cast<double>(batch);

  Tensor probs({batch, classes});
  double total = 0.0;
  for (std::size_t r = 0; r < batch; ++r) {
    auto z = L.row(r);
    const double mx = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (double v : z) s += std::exp(v - mx);
    const double lse = mx + std::log(s);
    total += lse - z[static_cast<std::size_t>(labels[r])];
    for (std::size_t c = 0; c < classes; ++c) probs.at(r, c) = std::exp(z[c] - lse);
  }
  std::vector<int> ys(labels.begin(), labels.end());
  const std::size_t li = logits.id(), oi = t.node_count();
  return t.record(OpKind::cross_entropy, {li}, Tensor({1}, total / divisor),
                  [=, probs = std::move(probs), ys = std::move(ys)](Tape& tp) {
                    const double g = tp.grad_buffer(oi)[0] / divisor;
                    auto gl = tp.grad_buffer(li);
                    for (std::size_t r = 0; r < batch; ++r)
                      for (std::size_t c = 0; c < classes; ++c) {
                        const double onehot = static_cast<int>(c) == ys[r] ? 1.0 : 0.0;
                        gl[r * classes + c] += g * (probs.at(r, c) - onehot);
                      }
                  });
}

Var column_mean(Var x) {
  Tape& t = x.tape();
  const Tensor& X = x.value();
  if (X.rank() != 2) throw ShapeError("column_mean: expects [B,n], got " + shape_string(X.shape()));
  const std::size_t batch = X.shape()[0], n = X.shape()[1];
  Tensor out({n});
  for (std::size_t r = 0; r < batch; ++r)
    for (std::size_t j = 0; j < n; ++j) out[j] += X.at(r, j);
  for (std::size_t j = 0; j < n; ++j) out[j] /= static_cast<double>(batch);
  const std::size_t xi = x.id(), oi = t.node_count();
  return t.record(OpKind::column_mean, {xi}, std::move(out), [=](Tape& tp) {
    const auto g = tp.grad_buffer(oi);
    auto gx = tp.grad_buffer(xi);
    for (std::size_t r = 0; r < batch; ++r)
      for (std::size_t j = 0; j < n; ++j) gx[r * n + j] += g[j] / static_cast<double>(batch);
  });
}

Var neg_entropy(Var p) {
  Tape& t = p.tape();
  const Tensor& P = p.value();
  double s = 0.0;
  for (double v : P.values())
    if (v > 0.0) s += v * std::log(v);
  const std::size_t pi = p.id(), oi = t.node_count();
  return t.record(OpKind::neg_entropy, {pi}, Tensor({1}, s), [=](Tape& tp) {
    const double g = tp.grad_buffer(oi)[0];
    const Tensor& Pv = tp.value(pi);
    auto gp = tp.grad_buffer(pi);
    // d/dp (p ln p) diverges at 0; a zero entry contributes no gradient.
    for (std::size_t i = 0; i < gp.size(); ++i)
      if (Pv[i] > 0.0) gp[i] += g * (std::log(Pv[i]) + 1.0);
  });
}

Var gather_rows(Var x, std::span<const std::size_t> rows) {
  Tape& t = x.tape();
  const Tensor& X = x.value();
  const std::size_t cols = X.cols();
  Shape shape = X.shape();
  shape[0] = rows.size();
  if (rows.empty()) throw ShapeError("gather_rows: empty row set");
  Tensor out(shape);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= X.rows())
      throw ShapeError("gather_rows: row " + std::to_string(rows[r]) + " outside " + shape_string(X.shape()));
    std::copy_n(&X.data()[rows[r] * cols], cols, &out.data()[r * cols]);
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  const std::size_t xi = x.id(), oi = t.node_count();
  return t.record(OpKind::gather_rows, {xi}, std::move(out), [=, idx = std::move(idx)](Tape& tp) {
    const auto g = tp.grad_buffer(oi);
    auto gx = tp.grad_buffer(xi);
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t c = 0; c < cols; ++c) gx[idx[r] * cols + c] += g[r * cols + c];
  });
}

Var route_combine(std::span<const Var> expert_out, std::span<const std::vector<std::size_t>> rows, Var weights,
                  std::size_t classes) {
  Tape& t = weights.tape();
  const Tensor& W = weights.value();
  if (W.rank() != 2) throw ShapeError("route_combine: weights must be [B,m], got " + shape_string(W.shape()));
  const std::size_t batch = W.shape()[0], m = W.shape()[1];
  if (expert_out.size() != m || rows.size() != m)
    throw ShapeError("route_combine: " + std::to_string(expert_out.size()) + " expert outputs for weights " +
                     shape_string(W.shape()));
  std::vector<std::size_t> inputs{weights.id()};
  std::vector<std::size_t> out_ids(m, 0);
  Tensor out({batch, m * classes});
  for (std::size_t i = 0; i < m; ++i) {
    if (rows[i].empty()) continue;
    const Tensor& E = expert_out[i].value();
    if (E.rank() != 2 || E.shape()[0] != rows[i].size() || E.shape()[1] != classes)
      throw ShapeError("route_combine: expert " + std::to_string(i) + " output " + shape_string(E.shape()) +
                       " expected [" + std::to_string(rows[i].size()) + "," + std::to_string(classes) + "]");
    out_ids[i] = expert_out[i].id();
    inputs.push_back(out_ids[i]);
    for (std::size_t r = 0; r < rows[i].size(); ++r) {
      const std::size_t b = rows[i][r];
      const double w = W.at(b, i);
      for (std::size_t c = 0; c < classes; ++c) out.at(b, i * classes + c) = w * E.at(r, c);
    }
  }
  std::vector<std::vector<std::size_t>> routes(rows.begin(), rows.end());
  const std::size_t wi = weights.id(), oi = t.node_count();
  return t.record(OpKind::route_combine, std::move(inputs), std::move(out),
                  [=, routes = std::move(routes), out_ids = std::move(out_ids)](Tape& tp) {
                    const auto g = tp.grad_buffer(oi);
                    const Tensor& Wv = tp.value(wi);
                    const std::size_t width = m * classes;
                    for (std::size_t i = 0; i < m; ++i) {
                      if (routes[i].empty()) continue;
                      const Tensor& E = tp.value(out_ids[i]);
                      const bool need_e = tp.requires_grad(out_ids[i]);
                      const bool need_w = tp.requires_grad(wi);
                      for (std::size_t r = 0; r < routes[i].size(); ++r) {
                        const std::size_t b = routes[i][r];
                        const double* grow = &g[b * width + i * classes];
                        if (need_e) {
                          auto ge = tp.grad_buffer(out_ids[i]);
                          for (std::size_t c = 0; c < classes; ++c) ge[r * classes + c] += Wv.at(b, i) * grow[c];
                        }
                        if (need_w) {
                          double acc = 0.0;
                          for (std::size_t c = 0; c < classes; ++c) acc += E.at(r, c) * grow[c];
                          tp.grad_buffer(wi)[b * m + i] += acc;
                        }
                      }
                    }
                  });
}

}  // namespace hubpath
