#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "hubpath/hub.hpp"
#include "hubpath/rng.hpp"
#include "hubpath/tape.hpp"

namespace hubpath {

enum class GateMode { train, eval };

/// Data-dependent pathway generator: a shared ReLU trunk feeding two linear
/// heads, G_p (preference) and G_n (noise scale).
///   train: G(x) = softmax(G_p(x) + eps * softplus(G_n(x))), eps ~ N(0,1) per sample and expert
///   eval:  G(x) = softmax(G_p(x))
class Generator {
 public:
  Generator(std::size_t input_dim, std::size_t experts, std::uint64_t seed,
            std::vector<std::size_t> trunk_widths = {32, 32});

  struct Output {
    Var dense;       // [B, m]
    Tensor epsilon;  // [B, m], all zero in eval mode
  };

  /// Draws eps from the noise stream in train mode unless `epsilon` is given,
  /// in which case that exact sample is replayed.
  Output generate(Tape& tape, Var x, const Tensor* epsilon = nullptr);

  GateMode mode() const { return mode_; }
  void set_mode(GateMode mode) { mode_ = mode; }
  void reseed_noise(std::uint64_t seed) { noise_ = Rng(seed); }

  std::size_t input_dim() const { return input_dim_; }
  std::size_t experts() const { return experts_; }
  const std::vector<std::size_t>& trunk_widths() const { return trunk_widths_; }

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  std::size_t parameter_count() const;
  /// Trunk plus both heads.
  std::uint64_t macs_per_sample() const;
  FlopCounter& counter() { return counter_; }

  std::vector<AffineParams> trunk;
  AffineParams preference;  // G_p
  AffineParams noise;       // G_n

 private:
  std::size_t input_dim_;
  std::size_t experts_;
  std::vector<std::size_t> trunk_widths_;
  GateMode mode_ = GateMode::train;
  Rng noise_;
  FlopCounter counter_;
};

/// Dense gate, its top-k filtered form and the surviving expert indices.
struct PathwayWeights {
  Tensor dense;                                 // [B, m]
  Tensor sparse;                                // [B, m]
  std::vector<std::vector<std::size_t>> active; // per row, ascending
  std::size_t k = 0;

  std::size_t batch() const { return dense.rows(); }
  std::size_t experts() const { return dense.cols(); }
  /// 1 where the sparse weight survives, else 0.
  Tensor mask() const;
  /// Per expert, the rows routed to it (sparse weight > 0), ascending.
  std::vector<std::vector<std::size_t>> routes() const;
};

/// Keeps the min(k, m) largest entries of each row at their dense values and
/// zeroes the rest; no renormalization. Ties go to the lower index.
PathwayWeights topk_filter(const Tensor& dense, std::size_t k);

/// Output-level fusion: A(z) = z Ws + bs + relu(z Wh + bh) Wo + bo, where z is
/// the [B, m*C] concatenation of weighted expert logits.
class Aggregator {
 public:
  Aggregator(std::size_t experts, std::size_t classes, std::uint64_t seed);

  Var forward(Tape& tape, Var z);
  /// Ws = m stacked CxC identities, bs = 0, hidden path silenced (Wo = 0, bo = 0).
  void reset_to_block_sum();

  std::size_t experts() const { return experts_; }
  std::size_t classes() const { return classes_; }
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  std::size_t parameter_count() const;
  std::uint64_t macs_per_sample() const;
  FlopCounter& counter() { return counter_; }

  AffineParams skip;
  AffineParams hidden;
  AffineParams out;

 private:
  std::size_t experts_;
  std::size_t classes_;
  FlopCounter counter_;
};

struct RoutedOutput {
  Var logits;                                   // [B, C]
  std::vector<Var> expert_logits;               // expert i on its routed rows; invalid when idle
  std::vector<std::vector<std::size_t>> routes; // rows per expert
};

/// Runs each expert only on the rows whose sparse weight is positive, scales
/// its logits by that weight, zero-fills idle slots and aggregates.
RoutedOutput route_and_aggregate(Tape& tape, Hub& hub, Aggregator& agg, const PathwayWeights& pw, Var sparse, Var x);

struct Prediction {
  Tensor logits;
  PathwayWeights weights;
};

/// generate -> topk_filter -> route_and_aggregate, on a private tape.
Prediction predict(Generator& gen, Hub& hub, Aggregator& agg, const Tensor& x, std::size_t k);

/// One CSV row per sample: sample_index, w_1..w_m (dense), active_set
/// (1-based expert numbers joined by ';').
void write_weights_header(std::ostream& out, std::size_t experts);
void write_weights_rows(std::ostream& out, const PathwayWeights& pw, std::size_t first_index);

}  // namespace hubpath
