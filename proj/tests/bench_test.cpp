#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>

#include "hubpath/bench.hpp"
#include "hubpath/error.hpp"

using namespace hubpath;
using namespace hubpath::bench;
namespace fs = std::filesystem;

namespace {

bool same_dataset(const Dataset& a, const Dataset& b) {
  return a.labels == b.labels && a.features.shape() == b.features.shape() &&
         std::memcmp(a.features.values().data(), b.features.values().data(), a.features.size() * sizeof(double)) == 0;
}

TaskSpec two_class_spec() {
  TaskSpec s;
  s.name = "pair";
  s.dim = 3;
  s.classes = 2;
  s.means = {{2, 0, 0}, {-2, 0, 0}, {0, 3, 0}};
  s.mode_label = {0, 1, 1};
  s.noise_std = 0.5;
  return s;
}

Expert constant_expert(std::size_t dim, std::size_t classes, int favourite, std::uint64_t seed) {
  ArchDescriptor a;
  a.widths = {dim, 4};
  a.source_head = classes;
  Expert e = build_expert(a, seed);
  for (auto* p : {&e.head.weight, &e.head.bias}) std::fill(p->tensor.data().begin(), p->tensor.data().end(), 0.0);
  e.head.bias.tensor[static_cast<std::size_t>(favourite)] = 1.0;
  return e;
}

// Pretraining is the slow part; share one pretrained hub across tests.
const PretrainedHub& shared_hub() {
  static const Suite suite = make_suite(0);
  static const PretrainedHub hub = pretrain_hub(suite, default_hub_spec(suite), 0);
  return hub;
}

}  // namespace

TEST(SampleTask, SameSeedIsBitIdentical) {
  EXPECT_TRUE(same_dataset(sample_task(two_class_spec(), 101, 5), sample_task(two_class_spec(), 101, 5)));
  EXPECT_FALSE(same_dataset(sample_task(two_class_spec(), 101, 5), sample_task(two_class_spec(), 101, 6)));
}

TEST(SampleTask, ClassesBalancedWithinOne) {
  for (std::size_t n : {10, 11, 99, 1000}) {
    const auto counts = sample_task(two_class_spec(), n, 1).class_counts();
    const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
    EXPECT_LE(*hi - *lo, 1u) << n;
  }
}

TEST(SampleTask, MaskedDimensionsCarryNoSignal) {
  TaskSpec s = two_class_spec();
  s.masked_dims = {0};
  const Dataset d = sample_task(s, 4000, 3);
  double mean0[2] = {0, 0};
  for (std::size_t r = 0; r < d.size(); ++r) mean0[d.labels[r]] += d.features.at(r, 0) / 2000.0;
  EXPECT_NEAR(mean0[0], 0.0, 0.05);
  EXPECT_NEAR(mean0[1], 0.0, 0.05);
}

TEST(SampleTask, RejectsInvalidSpecs) {
  TaskSpec s = two_class_spec();
  s.mode_label = {0, 0, 0};
  EXPECT_THROW(sample_task(s, 10, 0), ConfigError);
  s = two_class_spec();
  s.masked_dims = {3};
  EXPECT_THROW(sample_task(s, 10, 0), ConfigError);
  EXPECT_THROW(sample_task(two_class_spec(), 0, 0), ConfigError);
}

TEST(Suite, DefaultLayout) {
  const Suite s = make_suite(4);
  ASSERT_EQ(s.sources.size(), 5u);
  std::vector<std::string> relevance;
  for (const auto& src : s.sources) {
    relevance.push_back(src.relevance);
    EXPECT_EQ(src.spec.dim, kSuiteDim);
  }
  EXPECT_EQ(relevance, (std::vector<std::string>{"near", "near", "mid", "mid", "unrelated"}));
  EXPECT_EQ(s.target.spec.classes, kTargetClasses);
  EXPECT_EQ(s.target.train.size(), kTargetTrain);
  EXPECT_EQ(s.target.test.size(), kTargetTest);
  EXPECT_EQ(s.target.train.dim(), kSuiteDim);
}

TEST(Suite, SameSeedIsBitIdentical) {
  const Suite a = make_suite(2);
  const Suite b = make_suite(2);
  EXPECT_TRUE(same_dataset(a.target.train, b.target.train));
  EXPECT_TRUE(same_dataset(a.alt_target.test, b.alt_target.test));
  for (std::size_t i = 0; i < a.sources.size(); ++i) EXPECT_TRUE(same_dataset(a.sources[i].train, b.sources[i].train));
  EXPECT_FALSE(same_dataset(a.target.train, make_suite(3).target.train));
}

TEST(Suite, TargetClassesBalanced) {
  const Suite s = make_suite(1);
  for (const Dataset* d : {&s.target.train, &s.target.test, &s.sources[2].train}) {
    const auto counts = d->class_counts();
    const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
    EXPECT_LE(*hi - *lo, 1u) << d->name;
  }
}

TEST(Suite, RedundantVariantRepeatsTheTargetWorld) {
  const Suite s = make_suite(1, SuiteVariant::redundant);
  ASSERT_EQ(s.sources.size(), 5u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(s.sources[i].relevance, "near");
    EXPECT_EQ(s.sources[i].spec.means.size(), s.target.spec.means.size());
  }
  EXPECT_EQ(s.sources[4].relevance, "unrelated");
  EXPECT_EQ(parse_variant(variant_name(SuiteVariant::redundant)), SuiteVariant::redundant);
  EXPECT_THROW(parse_variant("other"), ConfigError);
}

TEST(Suite, PosteriorsAreProbabilities) {
  const Suite s = make_suite(0);
  const Tensor p = posterior_features(s.sources[2].spec, s.target.test.features);
  EXPECT_EQ(p.shape(), (Shape{kTargetTest, s.sources[2].spec.classes}));
  for (std::size_t r = 0; r < p.rows(); ++r) {
    double total = 0.0;
    for (double v : p.row(r)) total += v;
    ASSERT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(Suite, RelevanceOrderingHoldsAcrossSeeds) {
  int holds = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Suite s = make_suite(seed);
    const double near = probe_accuracy(s.sources[0].spec, s.target.train, s.target.test, seed);
    const double unrelated = probe_accuracy(s.sources[4].spec, s.target.train, s.target.test, seed);
    holds += near > unrelated;
  }
  EXPECT_GE(holds, 9);
}

TEST(HubSpec, DefaultIsHeterogeneousAndValid) {
  const Suite s = make_suite(0);
  const HubSpec spec = default_hub_spec(s);
  EXPECT_NO_THROW(spec.validate(s));
  ASSERT_EQ(spec.experts.size(), 5u);
  EXPECT_NE(spec.experts[0].arch.widths, spec.experts[2].arch.widths);
  EXPECT_NE(spec.experts[2].arch.widths.size(), spec.experts[3].arch.widths.size());
}

TEST(HubSpec, RequiresOverlapAndNonOverlap) {
  const Suite s = make_suite(0);
  HubSpec spec = default_hub_spec(s);
  HubSpec single = spec;
  single.experts.resize(1);
  EXPECT_THROW(single.validate(s), ConfigError);
  HubSpec all_related = spec;
  all_related.experts.pop_back();
  EXPECT_THROW(all_related.validate(s), ConfigError);
  HubSpec only_unrelated = spec;
  only_unrelated.experts = {spec.experts[4], spec.experts[4]};
  EXPECT_THROW(only_unrelated.validate(s), ConfigError);
  HubSpec bad_source = spec;
  bad_source.experts[0].source = 9;
  EXPECT_THROW(bad_source.validate(s), ConfigError);
}

TEST(Pretrain, EveryExpertBeatsChanceOnItsSource) {
  const Suite s = make_suite(0);
  const auto& ph = shared_hub();
  ASSERT_EQ(ph.hub.size(), 5u);
  for (std::size_t i = 0; i < ph.hub.size(); ++i) {
    const double chance = 1.0 / static_cast<double>(s.sources[i].spec.classes);
    EXPECT_GT(ph.report.source_test_accuracy[i], chance) << i;
    EXPECT_EQ(ph.hub[i].arch.source_head, s.sources[i].spec.classes);
  }
  EXPECT_TRUE(ph.report.below_floor.empty());
}

TEST(Pretrain, AdaptedHubEmitsTargetClasses) {
  const Hub adapted = adapt_hub(shared_hub().hub, kTargetClasses, 0);
  EXPECT_EQ(adapted.classes(), kTargetClasses);
  for (std::size_t i = 0; i < adapted.size(); ++i) {
    EXPECT_EQ(adapted[i].arch.widths, shared_hub().hub[i].arch.widths);
    EXPECT_EQ(adapted[i].arch.head_width(), kTargetClasses);
  }
}

TEST(Pretrain, HubCheckpointsRoundTrip) {
  const fs::path dir = fs::temp_directory_path() / "hubpath_bench_hub";
  fs::remove_all(dir);
  save_hub(shared_hub().hub, dir);
  const Hub back = load_hub(dir / "manifest.txt");
  ASSERT_EQ(back.size(), shared_hub().hub.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    const auto a = back[i].parameters();
    const auto b = shared_hub().hub[i].parameters();
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t j = 0; j < a.size(); ++j)
      EXPECT_EQ(std::memcmp(a[j]->tensor.values().data(), b[j]->tensor.values().data(),
                            a[j]->tensor.size() * sizeof(double)),
                0);
    EXPECT_EQ(back[i].provenance, shared_hub().hub[i].provenance);
  }
  fs::remove_all(dir);
}

TEST(Pretrain, NonConvergentExpertIsFlaggedNotFatal) {
  const Suite s = make_suite(0);
  HubSpec spec = default_hub_spec(s);
  for (auto& e : spec.experts) {
    e.pretrain.max_iterations = 1;
    e.pretrain.lr = 1e-9;
  }
  const auto ph = pretrain_hub(s, spec, 0);
  EXPECT_EQ(ph.hub.size(), 5u);
  for (bool c : ph.report.converged) EXPECT_FALSE(c);
  EXPECT_FALSE(ph.report.below_floor.empty());
}

TEST(WeightQuality, SingleExpertHubCoincides) {
  const Suite s = make_suite(0);
  const std::vector<Expert> singles{adapt_hub(shared_hub().hub, kTargetClasses, 0)[0]};
  const std::vector<std::size_t> top(s.target.test.size(), 0);
  const auto q = weight_quality(singles, top, s.target.test, 1);
  EXPECT_FALSE(q.skipped);
  EXPECT_EQ(q.top_weight_accuracy, q.random_expert_accuracy);
  EXPECT_EQ(q.top_weight_accuracy, 1.0);
}

TEST(WeightQuality, RandomBaselineAtLeastOneOverM) {
  const Suite s = make_suite(0);
  std::vector<Expert> singles;
  for (int c = 0; c < 4; ++c) singles.push_back(constant_expert(kSuiteDim, kTargetClasses, c, c));
  std::vector<std::size_t> top(s.target.test.size());
  for (std::size_t r = 0; r < top.size(); ++r) top[r] = static_cast<std::size_t>(s.target.test.labels[r] % 4);
  const auto q = weight_quality(singles, top, s.target.test, 2);
  EXPECT_EQ(q.subset_size, s.target.test.size() / 2);
  EXPECT_NEAR(q.random_expert_accuracy, 0.25, 0.02);
  EXPECT_EQ(q.top_weight_accuracy, 1.0);
}

TEST(WeightQuality, EmptySubsetIsSkipped) {
  TaskSpec spec = two_class_spec();
  const Dataset d = sample_task(spec, 20, 1);
  std::vector<int> labels(d.size(), 1);
  Dataset ones = d;
  ones.labels = labels;
  const std::vector<Expert> singles{constant_expert(3, 2, 0, 1)};
  const auto q = weight_quality(singles, std::vector<std::size_t>(d.size(), 0), ones, 0);
  EXPECT_TRUE(q.skipped);
  EXPECT_EQ(q.subset_size, 0u);
}

TEST(OracleComparison, SingleExpertRowsAreEqual) {
  const Suite s = make_suite(0);
  const std::vector<Expert> singles{adapt_hub(shared_hub().hub, kTargetClasses, 0)[2]};
  const auto t = oracle_comparison(singles, s.target.test, 0.5);
  EXPECT_EQ(t.best_single, t.oracle);
  EXPECT_EQ(t.best_single, t.ensemble_topk);
  EXPECT_EQ(t.best_single_index, 0u);
}

TEST(OracleComparison, OracleDominatesBestSingle) {
  const Suite s = make_suite(0);
  std::vector<Expert> singles;
  for (int c = 0; c < 3; ++c) singles.push_back(constant_expert(kSuiteDim, kTargetClasses, c, c));
  const auto t = oracle_comparison(singles, s.target.test, 0.0);
  EXPECT_NEAR(t.best_single, 0.125, 0.002);
  EXPECT_NEAR(t.oracle, 0.375, 0.002);
  EXPECT_GE(t.oracle, t.best_single);
}

TEST(Complexity, EqualExpertsAtKTwoCostTwoFifths) {
  ArchDescriptor a;
  a.widths = {kSuiteDim, 64, 64};
  a.source_head = kTargetClasses;
  std::vector<Expert> experts;
  for (int i = 0; i < 5; ++i) experts.push_back(build_expert(a, static_cast<std::uint64_t>(i), i));
  PathwayModel model = PathwayModel::create(Hub(std::move(experts)), 0);
  const Suite s = make_suite(0);
  const auto rows = complexity_report(model, s.target.test, 2);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].method, "single");
  EXPECT_EQ(rows[1].method, "ensemble");
  EXPECT_EQ(rows[2].method, "hub_pathway");
  EXPECT_EQ(rows[2].expert_flops_per_sample / rows[1].expert_flops_per_sample, 0.4);
  EXPECT_LT(rows[0].expert_flops_per_sample, rows[2].expert_flops_per_sample);
  EXPECT_LT(rows[2].expert_flops_per_sample, rows[1].expert_flops_per_sample);
  EXPECT_GT(rows[2].generator_flops_per_sample, 0.0);
  EXPECT_GT(rows[2].aggregator_flops_per_sample, 0.0);
  for (const auto& r : rows) {
    EXPECT_GT(r.samples_per_second, 0.0);
    EXPECT_GT(r.peak_tensor_bytes, 0u);
  }
  EXPECT_GT(rows[1].parameters, rows[0].parameters);
}

TEST(Complexity, GeneratorIsCheapAtDefaultSizes) {
  const Suite s = make_suite(0);
  PathwayModel model = PathwayModel::create(adapt_hub(shared_hub().hub, kTargetClasses, 0), 0);
  const auto rows = complexity_report(model, s.target.test, 2);
  EXPECT_LT(rows[2].generator_flops_per_sample, 0.2 * rows[2].expert_flops_per_sample);
}

TEST(Summaries, MedianAndSpread) {
  EXPECT_EQ(median(std::vector<double>{3, 1, 2}), 2.0);
  EXPECT_EQ(median(std::vector<double>{4, 1, 2, 3}), 2.5);
  std::vector<ArmResult> runs(4);
  const double acc[4] = {0.5, 0.7, 0.6, 0.9};
  for (int i = 0; i < 4; ++i) {
    runs[i].mode = i < 3 ? TrainMode::full : TrainMode::random_path;
    runs[i].accuracy = acc[i];
  }
  const auto rows = summarize(runs);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].mode, TrainMode::full);
  EXPECT_NEAR(rows[0].mean, 0.6, 1e-12);
  EXPECT_NEAR(rows[0].sd, 0.1, 1e-12);
  EXPECT_EQ(rows[0].median, 0.6);
  EXPECT_EQ(rows[1].accuracies.size(), 1u);
  EXPECT_EQ(rows[1].sd, 0.0);
}

TEST(Schedules, FinetuneMatchesTrainConfig) {
  TrainConfig cfg = default_train_config(3);
  const SupervisedConfig s = finetune_config(cfg);
  EXPECT_EQ(s.lr, cfg.lr);
  EXPECT_EQ(s.momentum, cfg.momentum);
  EXPECT_EQ(s.batch, cfg.batch);
  EXPECT_EQ(s.max_iterations, cfg.iterations);
  EXPECT_EQ(s.milestones, cfg.milestones);
  EXPECT_EQ(cfg.seed, 3u);
}
