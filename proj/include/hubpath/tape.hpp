#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "hubpath/tensor.hpp"

namespace hubpath {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

enum class OpKind {
  affine,
  relu,
  tanh,
  add,
  mul,
  mul_const,
  scale,
  sum,
  softmax,
  softplus,
  cross_entropy,
  column_mean,
  neg_entropy,
  gather_rows,
  route_combine,
};

std::string_view op_name(OpKind op);

struct TapeEntry {
  OpKind op;
  std::vector<std::size_t> inputs;
  std::size_t output;
  std::function<void(Tape&)> backward;
};

/// Flat recording of a forward computation. Backward replays the entries in
/// exact reverse order. Gradients are added into Parameter::tensor.grad();
/// zeroing between steps is the caller's job.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Data that never needs a gradient.
  Var constant(Tensor value);
  /// Leaf whose gradient can be read back with grad() after backward().
  Var leaf(Tensor value);
  /// Reads the parameter in place; the parameter must outlive the tape.
  Var param(Parameter& p);

  const Tensor& value(Var v) const { return value(v.id()); }
  const Tensor& value(std::size_t id) const;
  bool requires_grad(Var v) const { return nodes_[v.id()].requires_grad; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  /// Gradient buffer of a node; empty until backward() touched it.
  std::span<const double> grad(Var v) const { return nodes_[v.id()].grad; }
  std::span<double> grad_buffer(std::size_t id);

  /// Reverse sweep from a scalar output seeded with d(out)/d(out) = 1.
  void backward(Var scalar);

  std::span<const TapeEntry> entries() const noexcept { return entries_; }
  std::size_t node_count() const noexcept { return nodes_.size(); }
  /// Bytes held by recorded non-parameter values.
  std::size_t activation_bytes() const;

  // Used by the op implementations.
  Var record(OpKind op, std::vector<std::size_t> inputs, Tensor out, std::function<void(Tape&)> backward);

 private:
  struct Node {
    Tensor owned;
    Parameter* param = nullptr;
    bool requires_grad = false;
    std::vector<double> grad;
  };

  std::deque<Node> nodes_;  // stable references while recording
  std::vector<TapeEntry> entries_;
};

// ---- primitives ----------------------------------------------------------

/// out = x W + b, broadcast over the batch. x [B, in], W [in, out], b [out].
Var affine(Var x, Var w, Var b);
Var relu(Var x);
Var tanh(Var x);
Var add(Var a, Var b);
Var mul(Var a, Var b);
/// Elementwise product with a fixed tensor (mask, noise sample, ...).
Var mul_const(Var a, const Tensor& c);
Var scale(Var a, double factor);
Var sum(Var a);
/// Softmax over the last dimension, max-subtracted.
Var softmax(Var z);
/// log(1 + exp(z)) as max(z,0) + log1p(exp(-|z|)).
Var softplus(Var z);
/// sum_b -log softmax(logits_b)[label_b] / divisor. divisor defaults to the batch size.
Var cross_entropy(Var logits, std::span<const int> labels, double divisor = 0.0);
/// [B, n] -> [n] mean over the batch.
Var column_mean(Var x);
/// sum_i p_i ln p_i over a probability vector, with 0 ln 0 = 0.
Var neg_entropy(Var p);
Var gather_rows(Var x, std::span<const std::size_t> rows);

/// Builds the aggregator input [B, m*C]: slot i of row rows[i][r] holds
/// weights[rows[i][r], i] * expert_out[i][r, :]. Slots of experts that did
/// not run for a row stay exactly zero.
Var route_combine(std::span<const Var> expert_out, std::span<const std::vector<std::size_t>> rows, Var weights,
                  std::size_t classes);

// ---- numerically stable scalar helpers -----------------------------------

double stable_softplus(double z);
void softmax_row(std::span<const double> z, std::span<double> out);

}  // namespace hubpath
