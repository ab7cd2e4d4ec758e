#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hubpath/dataset.hpp"
#include "hubpath/hub.hpp"
#include "hubpath/pathway.hpp"

namespace hubpath {

/// Training arms. `full` is the complete method; the others are ablations.
/// `dense` skips top-k filtering entirely (every expert runs on every sample).
enum class TrainMode { full, no_explore, no_exploit, random_path, dense };

std::string mode_name(TrainMode mode);
TrainMode parse_mode(const std::string& name);

struct TrainConfig {
  std::size_t k = 2;
  double lambda = 0.3;
  double lr = 0.01;
  double momentum = 0.9;
  std::size_t iterations = 1500;
  std::vector<std::size_t> milestones{600, 1200};
  double decay = 0.1;
  std::size_t batch = 48;
  std::uint64_t seed = 0;
  std::size_t log_interval = 100;
  TrainMode mode = TrainMode::full;

  void validate() const;
  /// Step learning rate: lr * decay^(number of milestones <= iter).
  double lr_at(std::size_t iter) const;
  bool uses_explore() const { return mode == TrainMode::full || mode == TrainMode::no_exploit || mode == TrainMode::dense; }
  bool uses_exploit() const { return mode != TrainMode::no_exploit; }
};

/// SGD with momentum (v = mu v + g; p -= lr v) over the parameters of the
/// groups it owns. Buffers exist only for those parameters.
class SgdMomentum {
 public:
  SgdMomentum(std::vector<Parameter*> params, std::vector<ParamGroup> owned, double momentum);

  void step(double lr);
  void zero_grad();
  std::size_t buffer_count() const { return buffers_.size(); }
  const std::vector<Parameter*>& params() const { return params_; }
  bool owns(ParamGroup g) const;

 private:
  std::vector<Parameter*> params_;
  std::vector<ParamGroup> owned_;
  std::vector<std::vector<double>> buffers_;
  double momentum_;
};

/// The trainable system: hub, pathway generator and aggregator.
struct PathwayModel {
  Hub hub;
  Generator generator;
  Aggregator aggregator;

  /// Adapts nothing; the hub must already emit `classes` logits per expert.
  static PathwayModel create(Hub hub, std::uint64_t seed);
  std::vector<Parameter*> gate_parameters();
  std::size_t parameter_count() const;
};

struct RouteOptions {
  std::size_t k = 2;
  TrainMode mode = TrainMode::full;
  Rng* random_path = nullptr;       // required for TrainMode::random_path
  const Tensor* epsilon = nullptr;  // replay a recorded noise sample
};

struct PathwayForward {
  Var dense;
  Tensor epsilon;
  PathwayWeights weights;
  Var sparse;
  RoutedOutput routed;
};

/// Gate (or random gate) -> top-k (unless dense) -> routed experts -> aggregator.
PathwayForward forward_pathway(Tape& tape, PathwayModel& model, Var x, const RouteOptions& opts);

/// Uniformly distributed point on the probability simplex for each row.
Tensor random_simplex(std::size_t rows, std::size_t experts, Rng& rng);

// ---- losses --------------------------------------------------------------

/// Cross-entropy of the aggregated prediction.
Var task_loss(Var logits, std::span<const int> labels);
/// sum_i pbar_i ln pbar_i where pbar is the batch mean of the dense gate rows.
Var explore_loss(Var dense);
/// sum_i mean_b 1[expert i active for b] * CE(expert_i(x_b), y_b), using the
/// expert's own logits. The indicator is a constant.
Var exploit_loss(Tape& tape, const RoutedOutput& routed, std::span<const int> labels, std::size_t batch);

/// Shannon entropy (nats) of a probability vector, 0 ln 0 = 0.
double entropy(std::span<const double> p);

struct MetricsRecord {
  std::size_t iter = 0;
  double task = 0.0;
  double explore = 0.0;
  double exploit = 0.0;
  double acc = 0.0;
  double usage_entropy = 0.0;
  std::uint64_t flops_cum = 0;   // expert forward FLOPs since training start
  std::uint64_t step_flops = 0;  // expert forward FLOPs of this step / interval
  std::vector<double> w_mean;
  std::vector<std::size_t> activations;
};

std::string metrics_header(std::size_t experts);
/// `iter,L_task,L_explore,L_exploit,acc,usage_entropy,flops_cum,w_mean_1..w_mean_m`
std::string format_metrics(const MetricsRecord& r);

struct Optimizers {
  SgdMomentum gate;    // generator + aggregator
  SgdMomentum expert;  // all hub experts

  static Optimizers create(PathwayModel& model, double momentum);
};

/// One dual-objective update: generator/aggregator descend
/// L_task + lambda L_explore, experts descend L_task + L_exploit. Throws
/// NumericError (parameters untouched) on a non-finite loss or gradient.
MetricsRecord train_step(PathwayModel& model, const Batch& batch, const TrainConfig& cfg, Optimizers& opt,
                         std::size_t iter, Rng* random_path = nullptr);

struct TrainResult {
  std::vector<MetricsRecord> log;  // one record per log interval
  MetricsRecord last;
};

/// Runs cfg.iterations steps over seeded shuffled minibatches. Writes one
/// metrics line per log interval to `metrics` when given.
TrainResult train(PathwayModel& model, const Dataset& data, const TrainConfig& cfg, std::ostream* metrics = nullptr);

struct EvalResult {
  double accuracy = 0.0;
  std::vector<double> w_mean;       // mean dense weight per expert
  double usage_entropy = 0.0;       // entropy of w_mean
  std::vector<std::size_t> activations;
  std::uint64_t expert_macs = 0;
  std::uint64_t generator_macs = 0;
  std::uint64_t aggregator_macs = 0;
  std::vector<std::size_t> top_expert;  // argmax dense weight per sample
  std::vector<int> predictions;
};

/// Noise-free evaluation in chunks; optionally dumps per-sample weights as CSV.
EvalResult evaluate(PathwayModel& model, const Dataset& data, std::size_t k, TrainMode mode = TrainMode::full,
                    std::uint64_t seed = 0, std::ostream* weights_csv = nullptr);

}  // namespace hubpath
