#include "hubpath/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "hubpath/error.hpp"

namespace hubpath {

std::string mode_name(TrainMode mode) {
  switch (mode) {
    case TrainMode::full: return "full";
    case TrainMode::no_explore: return "no_explore";
    case TrainMode::no_exploit: return "no_exploit";
    case TrainMode::random_path: return "random_path";
    case TrainMode::dense: return "dense";
  }
  return "?";
}

TrainMode parse_mode(const std::string& name) {
  for (auto m : {TrainMode::full, TrainMode::no_explore, TrainMode::no_exploit, TrainMode::random_path,
                 TrainMode::dense})
    if (mode_name(m) == name) return m;
  throw ConfigError("unknown mode '" + name + "' (full|no_explore|no_exploit|random_path|dense)");
}

void TrainConfig::validate() const {
  if (k < 1) throw ConfigError("k must be >= 1");
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (!(decay > 0.0 && decay <= 1.0)) throw ConfigError("decay factor must lie in (0, 1]");
  if (batch < 1) throw ConfigError("batch size must be >= 1");
  if (log_interval < 1) throw ConfigError("log interval must be >= 1");
}

double TrainConfig::lr_at(std::size_t iter) const {
  double rate = lr;
  for (auto m : milestones)
    if (iter >= m) rate *= decay;
  return rate;
}

// ---- optimizer -----------------------------------------------------------

SgdMomentum::SgdMomentum(std::vector<Parameter*> params, std::vector<ParamGroup> owned, double momentum)
    : params_(std::move(params)), owned_(std::move(owned)), momentum_(momentum) {
  for (auto* p : params_) {
    if (!owns(p->group))
      throw UsageError("optimizer was handed parameter '" + p->name + "' of group " + group_name(p->group) +
                       " it does not own");
    buffers_.emplace_back(p->size(), 0.0);
  }
}

bool SgdMomentum::owns(ParamGroup g) const { return std::find(owned_.begin(), owned_.end(), g) != owned_.end(); }

void SgdMomentum::step(double lr) {
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto& values = params_[k]->tensor.data();
    const auto grad = params_[k]->tensor.grad();
    auto& v = buffers_[k];
    for (std::size_t i = 0; i < values.size(); ++i) {
      v[i] = momentum_ * v[i] + grad[i];
      values[i] -= lr * v[i];
    }
  }
}

void SgdMomentum::zero_grad() {
  for (auto* p : params_) {
    p->tensor.grad();
    p->tensor.zero_grad();
  }
}

Optimizers Optimizers::create(PathwayModel& model, double momentum) {
  return Optimizers{SgdMomentum(model.gate_parameters(), {ParamGroup::generator, ParamGroup::aggregator}, momentum),
                    SgdMomentum(model.hub.parameters(), {ParamGroup::expert}, momentum)};
}

// ---- model ---------------------------------------------------------------

PathwayModel PathwayModel::create(Hub hub, std::uint64_t seed) {
  hub.validate_adapted();
  const std::size_t m = hub.size();
  const std::size_t dim = hub.input_dim();
  const std::size_t classes = hub.classes();
  return PathwayModel{std::move(hub), Generator(dim, m, derive_seed(seed, seed_role::generator)),
                      Aggregator(m, classes, derive_seed(seed, seed_role::aggregator))};
}

std::vector<Parameter*> PathwayModel::gate_parameters() {
  auto out = generator.parameters();
  for (auto* p : aggregator.parameters()) out.push_back(p);
  return out;
}

std::size_t PathwayModel::parameter_count() const {
  std::size_t n = generator.parameter_count() + aggregator.parameter_count();
  for (const auto& e : hub.experts()) n += e.parameter_count();
  return n;
}

Tensor random_simplex(std::size_t rows, std::size_t experts, Rng& rng) {
  Tensor out({rows, experts});
  for (std::size_t r = 0; r < rows; ++r) {
    double total = 0.0;
    for (std::size_t i = 0; i < experts; ++i) {
      // Exp(1) draws normalized to a sum of one are Dirichlet(1, ..., 1).
      const double u = rng.uniform(0.0, 1.0);
      out.at(r, i) = -std::log1p(-u);
      total += out.at(r, i);
    }
    for (std::size_t i = 0; i < experts; ++i) out.at(r, i) /= total;
  }
  return out;
}

PathwayForward forward_pathway(Tape& tape, PathwayModel& model, Var x, const RouteOptions& opts) {
  PathwayForward f;
  const std::size_t m = model.hub.size();
  if (opts.mode == TrainMode::random_path) {
    if (!opts.random_path) throw UsageError("random-path routing needs a random stream");
    f.dense = tape.constant(random_simplex(x.value().rows(), m, *opts.random_path));
    f.epsilon = Tensor({x.value().rows(), m});
  } else {
    auto g = model.generator.generate(tape, x, opts.epsilon);
    f.dense = g.dense;
    f.epsilon = std::move(g.epsilon);
  }
  if (opts.mode == TrainMode::dense) {
    f.weights = PathwayWeights{f.dense.value(), f.dense.value(), {}, m};
    f.weights.active.assign(f.weights.batch(), std::vector<std::size_t>(m));
    for (auto& a : f.weights.active) std::iota(a.begin(), a.end(), 0);
    f.sparse = f.dense;
  } else {
    f.weights = topk_filter(f.dense.value(), opts.k);
    f.sparse = mul_const(f.dense, f.weights.mask());
  }
  f.routed = route_and_aggregate(tape, model.hub, model.aggregator, f.weights, f.sparse, x);
  return f;
}

// ---- losses --------------------------------------------------------------

Var task_loss(Var logits, std::span<const int> labels) { return cross_entropy(logits, labels); }

Var explore_loss(Var dense) {
  const Tensor& d = dense.value();
  if (d.rank() != 2) throw ShapeError("explore loss expects [B,m] weights, got " + shape_string(d.shape()));
  for (std::size_t r = 0; r < d.rows(); ++r) {
    double total = 0.0;
    for (double v : d.row(r)) {
      if (!(v >= 0.0)) throw UsageError("explore loss: row " + std::to_string(r) + " has a negative weight");
      total += v;
    }
    if (std::abs(total - 1.0) > 1e-9)
      throw UsageError("explore loss: row " + std::to_string(r) + " sums to " + std::to_string(total));
  }
  return neg_entropy(column_mean(dense));
}

Var exploit_loss(Tape& tape, const RoutedOutput& routed, std::span<const int> labels, std::size_t batch) {
  Var total;
  for (std::size_t i = 0; i < routed.routes.size(); ++i) {
    if (routed.routes[i].empty()) continue;
    std::vector<int> ys;
    ys.reserve(routed.routes[i].size());
    for (auto b : routed.routes[i]) ys.push_back(labels[b]);
    Var ce = cross_entropy(routed.expert_logits[i], ys, static_cast<double>(batch));
    total = total.valid() ? add(total, ce) : ce;
  }
  return total.valid() ? total : tape.constant(Tensor({1}, 0.0));
}

double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

std::string metrics_header(std::size_t experts) {
  std::string s = "iter,L_task,L_explore,L_exploit,acc,usage_entropy,flops_cum";
  for (std::size_t i = 1; i <= experts; ++i) s += ",w_mean_" + std::to_string(i);
  return s;
}

std::string format_metrics(const MetricsRecord& r) {
  char buf[64];
  std::string s = std::to_string(r.iter);
  for (double v : {r.task, r.explore, r.exploit, r.acc, r.usage_entropy}) {
    std::snprintf(buf, sizeof buf, ",%.17g", v);
    s += buf;
  }
  s += "," + std::to_string(r.flops_cum);
  for (double w : r.w_mean) {
    std::snprintf(buf, sizeof buf, ",%.17g", w);
    s += buf;
  }
  return s;
}

// ---- training ------------------------------------------------------------

namespace {

bool grads_finite(const std::vector<Parameter*>& params) {
  for (auto* p : params)
    for (double g : p->tensor.grad())
      if (!std::isfinite(g)) return false;
  return true;
}

}  // namespace

MetricsRecord train_step(PathwayModel& model, const Batch& batch, const TrainConfig& cfg, Optimizers& opt,
                         std::size_t iter, Rng* random_path) {
  opt.gate.zero_grad();
  opt.expert.zero_grad();
  model.generator.set_mode(GateMode::train);

  const std::uint64_t macs_before = model.hub.total_macs();
  const std::size_t n = batch.y.size();
  Tape tape;
  Var x = tape.constant(batch.x);
  auto f = forward_pathway(tape, model, x, RouteOptions{cfg.k, cfg.mode, random_path, nullptr});

  Var l_task = task_loss(f.routed.logits, batch.y);
  Var l_explore = explore_loss(f.dense);
  Var l_exploit = exploit_loss(tape, f.routed, batch.y, n);

  MetricsRecord rec;
  rec.iter = iter;
  rec.task = l_task.value()[0];
  rec.explore = l_explore.value()[0];
  rec.exploit = l_exploit.value()[0];
  if (!std::isfinite(rec.task) || !std::isfinite(rec.explore) || !std::isfinite(rec.exploit))
    throw NumericError("non-finite loss at iteration " + std::to_string(iter) + " (task " + std::to_string(rec.task) +
                       ", explore " + std::to_string(rec.explore) + ", exploit " + std::to_string(rec.exploit) + ")");

  // The three terms touch disjoint parameter sets: L_explore reaches only the
  // generator, L_exploit only the experts (its indicator is a constant), so a
  // single sweep over their sum yields both lines of the dual objective.
  Var objective = l_task;
  if (cfg.uses_explore() && cfg.lambda != 0.0) objective = add(objective, scale(l_explore, cfg.lambda));
  if (cfg.uses_exploit()) objective = add(objective, l_exploit);
  tape.backward(objective);

  if (!grads_finite(opt.gate.params()) || !grads_finite(opt.expert.params())) {
    opt.gate.zero_grad();
    opt.expert.zero_grad();
    throw NumericError("non-finite gradient at iteration " + std::to_string(iter));
  }
  const double lr = cfg.lr_at(iter);
  opt.gate.step(lr);
  opt.expert.step(lr);

  rec.acc = accuracy(f.routed.logits.value(), batch.y);
  rec.w_mean = column_mean(f.dense).value().data();
  rec.usage_entropy = entropy(rec.w_mean);
  rec.activations.resize(model.hub.size());
  for (std::size_t i = 0; i < model.hub.size(); ++i) rec.activations[i] = f.routed.routes[i].size();
  rec.step_flops = 2 * (model.hub.total_macs() - macs_before);
  return rec;
}

TrainResult train(PathwayModel& model, const Dataset& data, const TrainConfig& cfg, std::ostream* metrics) {
  cfg.validate();
  if (data.size() < cfg.batch) throw ConfigError("batch size exceeds the training set");
  model.hub.validate_adapted();
  if (data.dim() != model.hub.input_dim()) throw ShapeError("dataset dimension does not match the hub");
  if (data.classes > model.hub.classes()) throw ShapeError("dataset has more classes than the hub heads emit");

  Optimizers opt = Optimizers::create(model, cfg.momentum);
  model.generator.reseed_noise(derive_seed(cfg.seed, seed_role::noise));
  Rng shuffle(derive_seed(cfg.seed, seed_role::shuffle));
  Rng random_path(derive_seed(cfg.seed, seed_role::random_path));

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();

  const std::size_t m = model.hub.size();
  TrainResult result;
  MetricsRecord window;
  std::size_t window_steps = 0;
  std::uint64_t flops_cum = 0;
  if (metrics) *metrics << metrics_header(m) << '\n';

  for (std::size_t iter = 0; iter < cfg.iterations; ++iter) {
    if (cursor + cfg.batch > order.size()) {
      std::shuffle(order.begin(), order.end(), shuffle.engine());
      cursor = 0;
    }
    const std::span<const std::size_t> rows(order.data() + cursor, cfg.batch);
    cursor += cfg.batch;
    const Batch batch = make_batch(data, rows);

    MetricsRecord rec = train_step(model, batch, cfg, opt, iter, &random_path);
    flops_cum += rec.step_flops;
    rec.flops_cum = flops_cum;
    result.last = rec;

    if (window_steps == 0) {
      window = MetricsRecord{};
      window.w_mean.assign(m, 0.0);
      window.activations.assign(m, 0);
    }
    ++window_steps;
    window.task += rec.task;
    window.explore += rec.explore;
    window.exploit += rec.exploit;
    window.acc += rec.acc;
    window.step_flops += rec.step_flops;
    for (std::size_t i = 0; i < m; ++i) {
      window.w_mean[i] += rec.w_mean[i];
      window.activations[i] += rec.activations[i];
    }
    if (window_steps == cfg.log_interval || iter + 1 == cfg.iterations) {
      const double s = static_cast<double>(window_steps);
      window.iter = iter + 1;
      window.task /= s;
      window.explore /= s;
      window.exploit /= s;
      window.acc /= s;
      for (auto& w : window.w_mean) w /= s;
      window.usage_entropy = entropy(window.w_mean);
      window.flops_cum = flops_cum;
      if (metrics) *metrics << format_metrics(window) << '\n';
      result.log.push_back(window);
      window_steps = 0;
    }
  }
  return result;
}

EvalResult evaluate(PathwayModel& model, const Dataset& data, std::size_t k, TrainMode mode, std::uint64_t seed,
                    std::ostream* weights_csv) {
  const GateMode saved = model.generator.mode();
  model.generator.set_mode(GateMode::eval);
  Rng random_path(derive_seed(seed, seed_role::random_path, 1));
  const std::size_t m = model.hub.size();

  EvalResult res;
  res.w_mean.assign(m, 0.0);
  res.activations.assign(m, 0);
  const std::uint64_t expert_before = model.hub.total_macs();
  const std::uint64_t gen_before = model.generator.counter().macs();
  const std::uint64_t agg_before = model.aggregator.counter().macs();
  if (weights_csv) write_weights_header(*weights_csv, m);

  constexpr std::size_t kChunk = 256;
  std::size_t hits = 0;
  std::vector<std::size_t> rows;
  for (std::size_t start = 0; start < data.size(); start += kChunk) {
    rows.resize(std::min(kChunk, data.size() - start));
    std::iota(rows.begin(), rows.end(), start);
    const Batch batch = make_batch(data, rows);
    Tape tape;
    auto f = forward_pathway(tape, model, tape.constant(batch.x), RouteOptions{k, mode, &random_path, nullptr});
    const Tensor& logits = f.routed.logits.value();
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const int pred = static_cast<int>(argmax(logits.row(r)));
      res.predictions.push_back(pred);
      if (pred == batch.y[r]) ++hits;
      const auto w = f.weights.dense.row(r);
      for (std::size_t i = 0; i < m; ++i) res.w_mean[i] += w[i];
      res.top_expert.push_back(argmax(w));
    }
    for (std::size_t i = 0; i < m; ++i) res.activations[i] += f.routed.routes[i].size();
    if (weights_csv) write_weights_rows(*weights_csv, f.weights, start);
  }
  model.generator.set_mode(saved);

  const double n = static_cast<double>(data.size());
  res.accuracy = static_cast<double>(hits) / n;
  for (auto& w : res.w_mean) w /= n;
  res.usage_entropy = entropy(res.w_mean);
  res.expert_macs = model.hub.total_macs() - expert_before;
  res.generator_macs = model.generator.counter().macs() - gen_before;
  res.aggregator_macs = model.aggregator.counter().macs() - agg_before;
  return res;
}

}  // namespace hubpath
