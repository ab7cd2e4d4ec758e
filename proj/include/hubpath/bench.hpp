#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "hubpath/dataset.hpp"
#include "hubpath/hub.hpp"
#include "hubpath/objectives.hpp"

namespace hubpath::bench {

// ---- synthetic tasks -----------------------------------------------------

/// Gaussian-mixture classification task. Each mode has a mean and a label;
/// a class may own several modes. Samples are x = mean + noise_std * N(0, I),
/// with the coordinates in `masked_dims` replaced by pure noise.
struct TaskSpec {
  std::string name;
  std::size_t dim = 0;
  std::size_t classes = 0;
  std::vector<std::vector<double>> means;
  std::vector<int> mode_label;
  double noise_std = 1.0;
  std::vector<std::size_t> masked_dims;

  void validate() const;
};

struct SyntheticTask {
  TaskSpec spec;
  std::string relevance;  // near | mid | unrelated | target
  Dataset train;
  Dataset test;
};

/// Class-balanced sample: label j % classes for the j-th draw, mode uniform
/// among that class's modes, rows then shuffled. Bit-identical for a fixed
/// (spec, n, seed).
Dataset sample_task(const TaskSpec& spec, std::size_t n, std::uint64_t seed);

enum class SuiteVariant { standard, redundant };

std::string variant_name(SuiteVariant v);
SuiteVariant parse_variant(const std::string& name);

struct Suite {
  std::vector<SyntheticTask> sources;
  SyntheticTask target;
  /// A second target from the same world with a different data mix, for
  /// comparing average pathway weights across tasks.
  SyntheticTask alt_target;
};

inline constexpr std::size_t kSuiteDim = 16;
inline constexpr std::size_t kTargetClasses = 8;
inline constexpr std::size_t kTargetTrain = 2000;
inline constexpr std::size_t kTargetTest = 1000;

/// The target world has four separated regions. standard: two near-target
/// sources (shifted copies of regions 1 and 2), two mid-relevance sources
/// (region 3 with coarsened labels, region 4 with most features masked) and
/// one unrelated source. redundant: four near-identical copies of the whole
/// target world plus the unrelated source. alt_target is region 1 alone.
Suite make_suite(std::uint64_t seed, SuiteVariant variant = SuiteVariant::standard);

/// Bayes-optimal class posteriors of `spec` evaluated at each row of x.
Tensor posterior_features(const TaskSpec& spec, const Tensor& x);

/// Softmax-regression probe trained on features(train) and scored on
/// features(test) of the target; features are the source's posteriors.
double probe_accuracy(const TaskSpec& source, const Dataset& target_train, const Dataset& target_test,
                      std::uint64_t seed);

// ---- hub manufacture -----------------------------------------------------

struct SupervisedConfig {
  double lr = 0.05;
  double momentum = 0.9;
  std::size_t batch = 64;
  std::size_t max_iterations = 3000;
  std::size_t check_every = 250;
  double target_accuracy = 0.95;  // stop once train accuracy reaches this
  std::vector<std::size_t> milestones;
  double decay = 0.1;
};

struct ExpertSpec {
  std::size_t source;  // index into Suite::sources
  ArchDescriptor arch; // source_head filled from the task
  SupervisedConfig pretrain;
};

struct HubSpec {
  std::vector<ExpertSpec> experts;
  void validate(const Suite& suite) const;
};

HubSpec default_hub_spec(const Suite& suite);

struct PretrainReport {
  std::vector<double> source_train_accuracy;
  std::vector<double> source_test_accuracy;
  std::vector<bool> converged;  // reached target accuracy before the cap
  double floor_over_chance = 2.0;        // floor = this multiple of chance accuracy
  std::vector<std::size_t> below_floor;  // experts flagged as non-convergent
};

struct PretrainedHub {
  Hub hub;  // source heads
  PretrainReport report;
};

PretrainedHub pretrain_hub(const Suite& suite, const HubSpec& spec, std::uint64_t seed);

/// Plain cross-entropy SGD of one expert on a dataset; returns final train accuracy.
double train_supervised(Expert& e, const Dataset& data, const SupervisedConfig& cfg, std::uint64_t seed);

/// Replaces every expert's head with a fresh `classes`-way head.
Hub adapt_hub(const Hub& hub, std::size_t classes, std::uint64_t seed);

// ---- experiments ---------------------------------------------------------

/// Desk-scale training schedule used by the analyses.
TrainConfig default_train_config(std::uint64_t seed);

/// The single-model fine-tuning schedule matched to a TrainConfig.
SupervisedConfig finetune_config(const TrainConfig& cfg);

struct ArmResult {
  TrainMode mode = TrainMode::full;
  std::size_t k = 0;
  double lambda = 0.0;
  std::uint64_t seed = 0;
  double accuracy = 0.0;
  double usage_entropy = 0.0;
  std::vector<double> w_mean;
  std::uint64_t expert_macs_per_sample_x1000 = 0;  // mean eval expert MACs per sample * 1000
  TrainResult training;
  EvalResult eval;
};

/// Fresh generator/aggregator on an adapted copy of `adapted`, trained on
/// target.train and evaluated on target.test.
ArmResult run_arm(const Hub& adapted, const Suite& suite, const TrainConfig& cfg);

struct AblationRow {
  TrainMode mode;
  std::vector<double> accuracies;  // one per seed
  double mean = 0.0;
  double sd = 0.0;
  double median = 0.0;
};

std::vector<AblationRow> summarize(const std::vector<ArmResult>& runs);

/// Individually fine-tuned copies of every expert (the Ensemble-I members).
std::vector<Expert> finetune_singles(const Hub& adapted, const Dataset& train, const TrainConfig& cfg);

struct WeightQuality {
  std::size_t subset_size = 0;
  double top_weight_accuracy = 0.0;
  double random_expert_accuracy = 0.0;
  bool skipped = false;
};

/// On test samples that at least one fine-tuned expert classifies correctly,
/// compares the expert with the highest pathway weight against a uniformly
/// random expert (averaged over `draws` draws).
WeightQuality weight_quality(const std::vector<Expert>& singles, const std::vector<std::size_t>& top_expert,
                             const Dataset& test, std::uint64_t seed, std::size_t draws = 100);

struct OracleTable {
  double best_single = 0.0;
  std::size_t best_single_index = 0;
  double ensemble_topk = 0.0;
  double oracle = 0.0;
  double hub_pathway = 0.0;
};

/// Best Single and Ensemble Top-k pick experts at the task level by test
/// accuracy; the oracle picks per sample using the test label.
OracleTable oracle_comparison(const std::vector<Expert>& singles, const Dataset& test, double hub_pathway_accuracy,
                              std::size_t ensemble_k = 2);

struct KSweepPoint {
  std::size_t k = 0;
  double accuracy = 0.0;
  double expert_macs_per_sample = 0.0;
};

struct ComplexityRow {
  std::string method;
  std::size_t parameters = 0;
  double expert_flops_per_sample = 0.0;
  double generator_flops_per_sample = 0.0;
  double aggregator_flops_per_sample = 0.0;
  double samples_per_second = 0.0;
  std::size_t peak_tensor_bytes = 0;
};

/// single (first expert), ensemble (all experts), and Hub-Pathway at top-k,
/// measured on `test`.
std::vector<ComplexityRow> complexity_report(PathwayModel& model, const Dataset& test, std::size_t k);

template <typename T>
double median(std::vector<T> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? static_cast<double>(v[n / 2]) : 0.5 * (static_cast<double>(v[n / 2 - 1]) + static_cast<double>(v[n / 2]));
}

}  // namespace hubpath::bench
