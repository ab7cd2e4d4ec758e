#include "hubpath/bench.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "hubpath/error.hpp"
#include "hubpath/rng.hpp"

namespace hubpath::bench {

namespace {

// World geometry. The target world has four well separated regions (two
// orthogonal axes, both signs); every class owns a few modes in each region.
constexpr std::size_t kRegions = 4;
constexpr double kRegionOffset = 5.0;
constexpr double kModeSpread = 1.6;
constexpr double kNoise = 1.5;
constexpr std::size_t kModesPerRegion = 3;  // per class
constexpr double kNearShift = 0.25;
constexpr double kRedundantShift = 0.1;
constexpr std::size_t kMaskedDims = 11;
constexpr std::size_t kSourceTrain = 4000;
constexpr std::size_t kSourceTest = 1000;
constexpr std::size_t kUnrelatedClasses = 6;

struct World {
  std::vector<std::vector<double>> means;
  std::vector<int> labels;
  std::vector<int> region;
};

std::vector<double> gaussian(Rng& rng, std::size_t d, double scale) {
  std::vector<double> v(d);
  for (auto& x : v) x = scale * rng.normal();
  return v;
}

void normalize(std::vector<double>& v) {
  const double norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
  for (auto& x : v) x /= norm;
}

World make_world(Rng& rng) {
  World w;
  auto axis = gaussian(rng, kSuiteDim, 1.0);
  normalize(axis);
  auto axis2 = gaussian(rng, kSuiteDim, 1.0);
  const double proj = std::inner_product(axis.begin(), axis.end(), axis2.begin(), 0.0);
  for (std::size_t d = 0; d < kSuiteDim; ++d) axis2[d] -= proj * axis[d];
  normalize(axis2);
  for (int r = 0; r < static_cast<int>(kRegions); ++r) {
    const double sign = r % 2 == 0 ? 1.0 : -1.0;
    const auto& ax = r < 2 ? axis : axis2;
    for (std::size_t c = 0; c < kTargetClasses; ++c)
      for (std::size_t j = 0; j < kModesPerRegion; ++j) {
        auto mu = gaussian(rng, kSuiteDim, kModeSpread);
        for (std::size_t d = 0; d < kSuiteDim; ++d) mu[d] += sign * kRegionOffset * ax[d];
        w.means.push_back(std::move(mu));
        w.labels.push_back(static_cast<int>(c));
        w.region.push_back(r);
      }
  }
  return w;
}

TaskSpec world_task(const World& w, const std::string& name, int region, double shift, Rng& rng) {
  TaskSpec s;
  s.name = name;
  s.dim = kSuiteDim;
  s.classes = kTargetClasses;
  s.noise_std = kNoise;
  for (std::size_t i = 0; i < w.means.size(); ++i) {
    if (region >= 0 && w.region[i] != region) continue;
    auto mu = w.means[i];
    if (shift > 0.0)
      for (auto& x : mu) x += shift * rng.normal();
    s.means.push_back(std::move(mu));
    s.mode_label.push_back(w.labels[i]);
  }
  return s;
}

SyntheticTask realize(TaskSpec spec, std::string relevance, std::size_t n_train, std::size_t n_test,
                      std::uint64_t seed, std::uint64_t slot) {
  spec.validate();
  SyntheticTask t;
  t.train = sample_task(spec, n_train, derive_seed(seed, seed_role::suite, 100 + 2 * slot));
  t.test = sample_task(spec, n_test, derive_seed(seed, seed_role::suite, 101 + 2 * slot));
  t.train.name = spec.name + "_train";
  t.test.name = spec.name + "_test";
  t.spec = std::move(spec);
  t.relevance = std::move(relevance);
  return t;
}

double sample_sd(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

std::vector<int> predictions(const Expert& e, const Dataset& data) {
  Expert copy = e;
  const Tensor logits = copy.infer(data.features);
  std::vector<int> out(data.size());
  for (std::size_t r = 0; r < data.size(); ++r) out[r] = static_cast<int>(argmax(logits.row(r)));
  return out;
}

}  // namespace

void TaskSpec::validate() const {
  if (dim == 0 || classes < 2) throw ConfigError("task " + name + ": needs dim >= 1 and at least 2 classes");
  if (means.empty() || means.size() != mode_label.size())
    throw ConfigError("task " + name + ": modes and labels disagree");
  std::vector<bool> seen(classes, false);
  for (std::size_t i = 0; i < means.size(); ++i) {
    if (means[i].size() != dim) throw ConfigError("task " + name + ": mode mean has wrong dimension");
    if (mode_label[i] < 0 || static_cast<std::size_t>(mode_label[i]) >= classes)
      throw ConfigError("task " + name + ": mode label out of range");
    seen[static_cast<std::size_t>(mode_label[i])] = true;
  }
  for (std::size_t c = 0; c < classes; ++c)
    if (!seen[c]) throw ConfigError("task " + name + ": class " + std::to_string(c) + " has no mode");
  for (auto d : masked_dims)
    if (d >= dim) throw ConfigError("task " + name + ": masked dimension out of range");
  if (!(noise_std > 0.0)) throw ConfigError("task " + name + ": noise_std must be positive");
}

Dataset sample_task(const TaskSpec& spec, std::size_t n, std::uint64_t seed) {
  spec.validate();
  if (n == 0) throw ConfigError("task " + spec.name + ": sample count must be positive");
  std::vector<std::vector<std::size_t>> modes(spec.classes);
  for (std::size_t i = 0; i < spec.means.size(); ++i) modes[static_cast<std::size_t>(spec.mode_label[i])].push_back(i);
  std::vector<bool> masked(spec.dim, false);
  for (auto d : spec.masked_dims) masked[d] = true;

  Rng rng(seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng.engine());

  Dataset out;
  out.name = spec.name;
  out.classes = spec.classes;
  out.features = Tensor({n, spec.dim});
  out.labels.assign(n, 0);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t c = j % spec.classes;
    const auto& mu = spec.means[modes[c][rng.index(modes[c].size())]];
    const std::size_t r = order[j];
    out.labels[r] = static_cast<int>(c);
    for (std::size_t d = 0; d < spec.dim; ++d)
      out.features.at(r, d) = (masked[d] ? 0.0 : mu[d]) + spec.noise_std * rng.normal();
  }
  return out;
}

std::string variant_name(SuiteVariant v) { return v == SuiteVariant::standard ? "standard" : "redundant"; }

SuiteVariant parse_variant(const std::string& name) {
  if (name == "standard") return SuiteVariant::standard;
  if (name == "redundant") return SuiteVariant::redundant;
  throw ConfigError("unknown suite variant '" + name + "' (expected standard or redundant)");
}

Suite make_suite(std::uint64_t seed, SuiteVariant variant) {
  Rng rng(derive_seed(seed, seed_role::suite));
  const World world = make_world(rng);

  TaskSpec unrelated;
  unrelated.name = "unrelated";
  unrelated.dim = kSuiteDim;
  unrelated.classes = kUnrelatedClasses;
  unrelated.noise_std = kNoise;
  for (std::size_t i = 0; i < kUnrelatedClasses * kModesPerRegion; ++i) {
    unrelated.means.push_back(gaussian(rng, kSuiteDim, kRegionOffset));
    unrelated.mode_label.push_back(static_cast<int>(i % kUnrelatedClasses));
  }

  std::vector<std::pair<TaskSpec, std::string>> specs;
  if (variant == SuiteVariant::standard) {
    specs.emplace_back(world_task(world, "near_a", 0, kNearShift, rng), "near");
    specs.emplace_back(world_task(world, "near_b", 1, kNearShift, rng), "near");

    TaskSpec coarse = world_task(world, "mid_coarse", 2, kNearShift, rng);
    coarse.classes = kTargetClasses / 2;
    for (auto& l : coarse.mode_label) l /= 2;
    specs.emplace_back(std::move(coarse), "mid");

    TaskSpec masked = world_task(world, "mid_masked", 3, kNearShift, rng);
    std::vector<std::size_t> dims(kSuiteDim);
    std::iota(dims.begin(), dims.end(), 0);
    std::shuffle(dims.begin(), dims.end(), rng.engine());
    masked.masked_dims.assign(dims.begin(), dims.begin() + kMaskedDims);
    std::sort(masked.masked_dims.begin(), masked.masked_dims.end());
    specs.emplace_back(std::move(masked), "mid");
  } else {
    for (int i = 0; i < 4; ++i)
      specs.emplace_back(world_task(world, "copy_" + std::to_string(i + 1), -1, kRedundantShift, rng), "near");
  }
  specs.emplace_back(std::move(unrelated), "unrelated");

  Suite suite;
  std::uint64_t slot = 0;
  for (auto& [spec, rel] : specs)
    suite.sources.push_back(realize(std::move(spec), rel, kSourceTrain, kSourceTest, seed, slot++));
  suite.target = realize(world_task(world, "target", -1, 0.0, rng), "target", kTargetTrain, kTargetTest, seed, slot++);
  suite.alt_target =
      realize(world_task(world, "target_region_a", 0, 0.0, rng), "target", kTargetTrain, kTargetTest, seed, slot++);
  return suite;
}

Tensor posterior_features(const TaskSpec& spec, const Tensor& x) {
  spec.validate();
  if (x.rank() != 2 || x.cols() != spec.dim)
    throw ShapeError("posterior features: expected [N," + std::to_string(spec.dim) + "], got " + shape_string(x.shape()));
  std::vector<bool> masked(spec.dim, false);
  for (auto d : spec.masked_dims) masked[d] = true;
  std::vector<double> modes_per_class(spec.classes, 0.0);
  for (int l : spec.mode_label) modes_per_class[static_cast<std::size_t>(l)] += 1.0;

  Tensor out({x.rows(), spec.classes});
  std::vector<double> logp(spec.means.size());
  const double inv = 1.0 / (2.0 * spec.noise_std * spec.noise_std);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto row = x.row(r);
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < spec.means.size(); ++i) {
      double sq = 0.0;
      for (std::size_t d = 0; d < spec.dim; ++d)
        if (!masked[d]) sq += (row[d] - spec.means[i][d]) * (row[d] - spec.means[i][d]);
      logp[i] = -sq * inv - std::log(modes_per_class[static_cast<std::size_t>(spec.mode_label[i])]);
      top = std::max(top, logp[i]);
    }
    double total = 0.0;
    for (std::size_t i = 0; i < spec.means.size(); ++i) {
      const double p = std::exp(logp[i] - top);
      out.at(r, static_cast<std::size_t>(spec.mode_label[i])) += p;
      total += p;
    }
    for (std::size_t c = 0; c < spec.classes; ++c) out.at(r, c) /= total;
  }
  return out;
}

double probe_accuracy(const TaskSpec& source, const Dataset& target_train, const Dataset& target_test,
                      std::uint64_t seed) {
  const Tensor f_train = posterior_features(source, target_train.features);
  const Tensor f_test = posterior_features(source, target_test.features);
  Rng rng(seed);
  AffineParams probe = make_affine("probe", ParamGroup::expert, source.classes, target_train.classes, rng);
  std::vector<Parameter*> params{&probe.weight, &probe.bias};
  SgdMomentum opt(params, {ParamGroup::expert}, 0.9);
  for (int it = 0; it < 400; ++it) {
    opt.zero_grad();
    Tape tape;
    Var logits = affine(tape.constant(f_train), tape.param(probe.weight), tape.param(probe.bias));
    tape.backward(cross_entropy(logits, target_train.labels));
    opt.step(0.5);
  }
  Tape tape;
  Var logits = affine(tape.constant(f_test), tape.param(probe.weight), tape.param(probe.bias));
  return accuracy(logits.value(), target_test.labels);
}

// ---- hub manufacture -----------------------------------------------------

void HubSpec::validate(const Suite& suite) const {
  if (experts.size() < 2) throw ConfigError("hub spec needs at least 2 experts");
  bool overlapping = false;
  bool disjoint = false;
  for (const auto& e : experts) {
    if (e.source >= suite.sources.size())
      throw ConfigError("hub spec references source " + std::to_string(e.source) + " of " +
                        std::to_string(suite.sources.size()));
    const auto& src = suite.sources[e.source];
    ArchDescriptor a = e.arch;
    a.source_head = src.spec.classes;
    a.validate();
    if (a.input_dim() != src.spec.dim)
      throw ConfigError("hub spec: expert input width " + std::to_string(a.input_dim()) + " does not match source " +
                        src.spec.name);
    (src.relevance == "unrelated" ? disjoint : overlapping) = true;
  }
  if (!overlapping || !disjoint)
    throw ConfigError("hub spec needs at least one source overlapping the target and one that does not");
}

HubSpec default_hub_spec(const Suite& suite) {
  HubSpec spec;
  SupervisedConfig pre;
  pre.milestones = {2000};
  for (std::size_t i = 0; i < suite.sources.size(); ++i) {
    ArchDescriptor a;
    const std::string& name = suite.sources[i].spec.name;
    if (name == "mid_coarse") {
      a.widths = {kSuiteDim, 96, 48};
    } else if (name == "mid_masked") {
      a.widths = {kSuiteDim, 48, 48, 48};
      a.activation = Activation::tanh;
    } else {
      a.widths = {kSuiteDim, 64, 64};
    }
    spec.experts.push_back({i, a, pre});
  }
  return spec;
}

double train_supervised(Expert& e, const Dataset& data, const SupervisedConfig& cfg, std::uint64_t seed) {
  if (cfg.batch == 0 || cfg.max_iterations == 0) throw ConfigError("supervised training needs batch and iterations > 0");
  if (data.dim() != e.arch.input_dim())
    throw ShapeError("expert expects " + std::to_string(e.arch.input_dim()) + " inputs, data has " +
                     std::to_string(data.dim()));
  SgdMomentum opt(e.parameters(), {ParamGroup::expert}, cfg.momentum);
  Rng rng(seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();
  const std::size_t b = std::min(cfg.batch, data.size());
  std::vector<std::size_t> rows(b);
  double lr = cfg.lr;
  for (std::size_t it = 0; it < cfg.max_iterations; ++it) {
    for (auto ms : cfg.milestones)
      if (ms == it) lr *= cfg.decay;
    for (auto& r : rows) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng.engine());
        cursor = 0;
      }
      r = order[cursor++];
    }
    const Batch batch = make_batch(data, rows);
    opt.zero_grad();
    Tape tape;
    Var loss = cross_entropy(e.forward(tape, tape.constant(batch.x)), batch.y);
    if (!std::isfinite(loss.value()[0])) throw NumericError("non-finite loss in supervised training at step " + std::to_string(it));
    tape.backward(loss);
    opt.step(lr);
    if (cfg.check_every && (it + 1) % cfg.check_every == 0 &&
        accuracy(e.infer(data.features), data.labels) >= cfg.target_accuracy)
      break;
  }
  return accuracy(e.infer(data.features), data.labels);
}

PretrainedHub pretrain_hub(const Suite& suite, const HubSpec& spec, std::uint64_t seed) {
  spec.validate(suite);
  PretrainedHub out;
  std::vector<Expert> experts;
  for (std::size_t i = 0; i < spec.experts.size(); ++i) {
    const auto& es = spec.experts[i];
    const auto& src = suite.sources[es.source];
    ArchDescriptor a = es.arch;
    a.source_head = src.spec.classes;
    a.target_head = 0;
    const std::uint64_t s = derive_seed(seed, seed_role::pretrain, i);
    Expert e = build_expert(a, s, static_cast<int>(i), src.spec.name + "/" + src.relevance);
    const double train_acc = train_supervised(e, src.train, es.pretrain, derive_seed(s, seed_role::shuffle));
    const double test_acc = accuracy(e.infer(src.test.features), src.test.labels);
    out.report.source_train_accuracy.push_back(train_acc);
    out.report.source_test_accuracy.push_back(test_acc);
    out.report.converged.push_back(train_acc >= es.pretrain.target_accuracy);
    if (test_acc < out.report.floor_over_chance / static_cast<double>(src.spec.classes))
      out.report.below_floor.push_back(i);
    e.counter().reset();
    experts.push_back(std::move(e));
  }
  out.hub = Hub(std::move(experts));
  return out;
}

Hub adapt_hub(const Hub& hub, std::size_t classes, std::uint64_t seed) {
  std::vector<Expert> experts;
  for (std::size_t i = 0; i < hub.size(); ++i)
    experts.push_back(replace_head(hub[i], classes, derive_seed(seed, seed_role::head, i)));
  Hub out(std::move(experts));
  out.validate_adapted();
  return out;
}

// ---- experiments ---------------------------------------------------------

TrainConfig default_train_config(std::uint64_t seed) {
  TrainConfig cfg;
  cfg.seed = seed;
  return cfg;
}

SupervisedConfig finetune_config(const TrainConfig& cfg) {
  SupervisedConfig s;
  s.lr = cfg.lr;
  s.momentum = cfg.momentum;
  s.batch = cfg.batch;
  s.max_iterations = cfg.iterations;
  s.check_every = 0;
  s.milestones = cfg.milestones;
  s.decay = cfg.decay;
  return s;
}

ArmResult run_arm(const Hub& adapted, const Suite& suite, const TrainConfig& cfg) {
  PathwayModel model = PathwayModel::create(adapted, cfg.seed);
  model.hub.reset_counters();
  ArmResult r;
  r.mode = cfg.mode;
  r.k = cfg.k;
  r.lambda = cfg.lambda;
  r.seed = cfg.seed;
  r.training = train(model, suite.target.train, cfg);
  r.eval = evaluate(model, suite.target.test, cfg.k, cfg.mode, cfg.seed);
  r.accuracy = r.eval.accuracy;
  r.usage_entropy = r.eval.usage_entropy;
  r.w_mean = r.eval.w_mean;
  r.expert_macs_per_sample_x1000 = r.eval.expert_macs * 1000 / suite.target.test.size();
  return r;
}

std::vector<AblationRow> summarize(const std::vector<ArmResult>& runs) {
  std::vector<AblationRow> rows;
  for (const auto& r : runs) {
    auto it = std::find_if(rows.begin(), rows.end(), [&](const AblationRow& a) { return a.mode == r.mode; });
    if (it == rows.end()) {
      rows.push_back(AblationRow{r.mode, {}, 0.0, 0.0, 0.0});
      it = rows.end() - 1;
    }
    it->accuracies.push_back(r.accuracy);
  }
  for (auto& row : rows) {
    row.mean = std::accumulate(row.accuracies.begin(), row.accuracies.end(), 0.0) /
               static_cast<double>(row.accuracies.size());
    row.sd = sample_sd(row.accuracies, row.mean);
    row.median = median(row.accuracies);
  }
  return rows;
}

std::vector<Expert> finetune_singles(const Hub& adapted, const Dataset& train, const TrainConfig& cfg) {
  const SupervisedConfig s = finetune_config(cfg);
  std::vector<Expert> out;
  for (std::size_t i = 0; i < adapted.size(); ++i) {
    Expert e = adapted[i];
    train_supervised(e, train, s, derive_seed(cfg.seed, seed_role::finetune, i));
    out.push_back(std::move(e));
  }
  return out;
}

WeightQuality weight_quality(const std::vector<Expert>& singles, const std::vector<std::size_t>& top_expert,
                             const Dataset& test, std::uint64_t seed, std::size_t draws) {
  if (singles.empty()) throw UsageError("weight quality needs at least one expert");
  if (top_expert.size() != test.size())
    throw UsageError("weight quality: " + std::to_string(top_expert.size()) + " top-expert entries for " +
                     std::to_string(test.size()) + " samples");
  std::vector<std::vector<int>> correct;
  for (const auto& e : singles) {
    const auto pred = predictions(e, test);
    std::vector<int> c(test.size());
    for (std::size_t r = 0; r < test.size(); ++r) c[r] = pred[r] == test.labels[r];
    correct.push_back(std::move(c));
  }
  std::vector<std::size_t> subset;
  for (std::size_t r = 0; r < test.size(); ++r)
    for (const auto& c : correct)
      if (c[r]) {
        subset.push_back(r);
        break;
      }

  WeightQuality q;
  q.subset_size = subset.size();
  if (subset.empty()) {
    q.skipped = true;
    return q;
  }
  const double n = static_cast<double>(subset.size());
  std::size_t hits = 0;
  for (auto r : subset) {
    if (top_expert[r] >= singles.size()) throw UsageError("weight quality: top expert index out of range");
    hits += static_cast<std::size_t>(correct[top_expert[r]][r]);
  }
  q.top_weight_accuracy = static_cast<double>(hits) / n;

  Rng rng(seed);
  double total = 0.0;
  for (std::size_t d = 0; d < draws; ++d) {
    std::size_t h = 0;
    for (auto r : subset) h += static_cast<std::size_t>(correct[rng.index(singles.size())][r]);
    total += static_cast<double>(h) / n;
  }
  q.random_expert_accuracy = draws ? total / static_cast<double>(draws) : 0.0;
  return q;
}

OracleTable oracle_comparison(const std::vector<Expert>& singles, const Dataset& test, double hub_pathway_accuracy,
                              std::size_t ensemble_k) {
  if (singles.empty()) throw UsageError("oracle comparison needs at least one expert");
  if (ensemble_k == 0) throw UsageError("ensemble size must be at least 1");
  std::vector<Tensor> logits;
  std::vector<double> acc;
  for (const auto& e : singles) {
    Expert copy = e;
    logits.push_back(copy.infer(test.features));
    acc.push_back(accuracy(logits.back(), test.labels));
  }
  OracleTable t;
  t.hub_pathway = hub_pathway_accuracy;
  std::vector<std::size_t> rank(singles.size());
  std::iota(rank.begin(), rank.end(), 0);
  std::stable_sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) { return acc[a] > acc[b]; });
  t.best_single_index = rank.front();
  t.best_single = acc[rank.front()];

  const std::size_t k = std::min(ensemble_k, singles.size());
  Tensor mean(logits.front().shape());
  for (std::size_t j = 0; j < k; ++j)
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += logits[rank[j]][i] / static_cast<double>(k);
  t.ensemble_topk = accuracy(mean, test.labels);

  std::size_t hits = 0;
  for (std::size_t r = 0; r < test.size(); ++r)
    for (const auto& l : logits)
      if (static_cast<int>(argmax(l.row(r))) == test.labels[r]) {
        ++hits;
        break;
      }
  t.oracle = static_cast<double>(hits) / static_cast<double>(test.size());
  return t;
}

std::vector<ComplexityRow> complexity_report(PathwayModel& model, const Dataset& test, std::size_t k) {
  using clock = std::chrono::steady_clock;
  constexpr std::size_t kChunk = 256;
  const double n = static_cast<double>(test.size());
  auto seconds = [](clock::time_point a, clock::time_point b) {
    return std::max(std::chrono::duration<double>(b - a).count(), 1e-9);
  };
  auto chunks = [&](auto&& body) {
    std::vector<std::size_t> rows;
    for (std::size_t start = 0; start < test.size(); start += kChunk) {
      rows.resize(std::min(kChunk, test.size() - start));
      std::iota(rows.begin(), rows.end(), start);
      body(make_batch(test, rows));
    }
  };

  std::vector<ComplexityRow> out;
  Hub& hub = model.hub;

  ComplexityRow single{"single"};
  single.parameters = hub[0].parameter_count();
  single.expert_flops_per_sample = 2.0 * static_cast<double>(hub[0].macs_per_sample());
  auto t0 = clock::now();
  chunks([&](const Batch& b) {
    Tape tape;
    hub[0].forward(tape, tape.constant(b.x));
    single.peak_tensor_bytes = std::max(single.peak_tensor_bytes, tape.activation_bytes());
  });
  single.samples_per_second = n / seconds(t0, clock::now());
  out.push_back(single);

  ComplexityRow ensemble{"ensemble"};
  for (std::size_t i = 0; i < hub.size(); ++i) {
    ensemble.parameters += hub[i].parameter_count();
    ensemble.expert_flops_per_sample += 2.0 * static_cast<double>(hub[i].macs_per_sample());
  }
  t0 = clock::now();
  chunks([&](const Batch& b) {
    Tape tape;
    Var x = tape.constant(b.x);
    Var total = scale(hub[0].forward(tape, x), 1.0 / static_cast<double>(hub.size()));
    for (std::size_t i = 1; i < hub.size(); ++i)
      total = add(total, scale(hub[i].forward(tape, x), 1.0 / static_cast<double>(hub.size())));
    ensemble.peak_tensor_bytes = std::max(ensemble.peak_tensor_bytes, tape.activation_bytes());
  });
  ensemble.samples_per_second = n / seconds(t0, clock::now());
  out.push_back(ensemble);

  ComplexityRow pathway{"hub_pathway"};
  pathway.parameters = model.parameter_count();
  const GateMode saved = model.generator.mode();
  model.generator.set_mode(GateMode::eval);
  const std::uint64_t e0 = hub.total_macs();
  const std::uint64_t g0 = model.generator.counter().macs();
  const std::uint64_t a0 = model.aggregator.counter().macs();
  t0 = clock::now();
  chunks([&](const Batch& b) {
    Tape tape;
    forward_pathway(tape, model, tape.constant(b.x), RouteOptions{k, TrainMode::full, nullptr, nullptr});
    pathway.peak_tensor_bytes = std::max(pathway.peak_tensor_bytes, tape.activation_bytes());
  });
  pathway.samples_per_second = n / seconds(t0, clock::now());
  model.generator.set_mode(saved);
  pathway.expert_flops_per_sample = 2.0 * static_cast<double>(hub.total_macs() - e0) / n;
  pathway.generator_flops_per_sample = 2.0 * static_cast<double>(model.generator.counter().macs() - g0) / n;
  pathway.aggregator_flops_per_sample = 2.0 * static_cast<double>(model.aggregator.counter().macs() - a0) / n;
  out.push_back(pathway);
  return out;
}

}  // namespace hubpath::bench
