// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero when any criterion fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hubpath/bench.hpp"
#include "hubpath/commands.hpp"
#include "hubpath/error.hpp"
#include "hubpath/grad_check.hpp"

using namespace hubpath;
namespace fs = std::filesystem;
using clock_type = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int id, bool pass, const std::string& detail) {
  std::printf("criterion %2d: %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double seconds_since(clock_type::time_point t0) {
  return std::chrono::duration<double>(clock_type::now() - t0).count();
}

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -2.0, double hi = 2.0) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto& v : t.data()) v = u(rng);
  return t;
}

Tensor random_x(std::size_t rows, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  Tensor x({rows, dim});
  for (auto& v : x.data()) v = n(rng);
  return x;
}

Var project(Var v, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sum(mul_const(v, random_tensor(v.value().shape(), rng)));
}

bool bit_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && std::memcmp(a.values().data(), b.values().data(), a.size() * sizeof(double)) == 0;
}

void randomize(Parameter& p, std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  for (auto& v : p.tensor.data()) v = n(rng);
}

Hub small_hub(std::size_t m, std::size_t dim, std::size_t classes, std::uint64_t seed,
              std::vector<std::size_t> hidden = {6}) {
  std::vector<Expert> experts;
  for (std::size_t i = 0; i < m; ++i) {
    ArchDescriptor a;
    a.widths = {dim};
    a.widths.insert(a.widths.end(), hidden.begin(), hidden.end());
    a.source_head = classes + 1;
    experts.push_back(replace_head(build_expert(a, seed + i, static_cast<int>(i)), classes, seed + 100 + i));
  }
  return Hub(std::move(experts));
}

double direct_ce(std::span<const double> z, int y) {
  const double mx = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z) s += std::exp(v - mx);
  return mx + std::log(s) - z[static_cast<std::size_t>(y)];
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(HUBPATH_EXE) + " " + args + " >" + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// ---- 1 ---------------------------------------------------------------------

void gradient_suite() {
  const auto t0 = clock_type::now();
  double worst_primitive = 0.0, worst_composed = 0.0;
  bool ok = true;
  auto check = [&](const ScalarFn& f, Parameter& p, double tol, double& worst) {
    const auto r = grad_check(f, p, 1e-5, tol);
    worst = std::max(worst, r.max_rel_error);
    if (!r.pass) {
      ok = false;
      std::printf("    grad_check failed: %s %s\n", p.name.c_str(), r.diagnostic.c_str());
    }
  };
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    Parameter a("a", ParamGroup::generator, random_tensor({3, 4}, rng));
    Parameter w("w", ParamGroup::generator, random_tensor({4, 5}, rng));
    Parameter b("b", ParamGroup::generator, random_tensor({5}, rng));
    Parameter positive("p", ParamGroup::generator, random_tensor({6}, rng, 0.05, 1.0));
    const Tensor other = random_tensor({3, 4}, rng);
    const int labels[] = {1, 3, 0};
    const std::size_t rows[] = {2, 0, 2};
    const std::vector<ScalarFn> on_a = {
        [&](Tape& t) { return project(affine(t.param(a), t.param(w), t.param(b)), 20); },
        [&](Tape& t) { return project(relu(t.param(a)), 1); },
        [&](Tape& t) { return project(tanh(t.param(a)), 2); },
        [&](Tape& t) { return project(softmax(t.param(a)), 3); },
        [&](Tape& t) { return project(softplus(t.param(a)), 4); },
        [&](Tape& t) { return cross_entropy(t.param(a), labels); },
        [&](Tape& t) { return project(column_mean(t.param(a)), 5); },
        [&](Tape& t) { return project(gather_rows(t.param(a), rows), 6); },
        [&](Tape& t) { return project(add(t.param(a), t.constant(other)), 7); },
        [&](Tape& t) { return project(mul(t.param(a), t.param(a)), 8); },
        [&](Tape& t) { return project(mul_const(t.param(a), other), 9); },
        [&](Tape& t) { return project(scale(t.param(a), -1.5), 10); },
        [&](Tape& t) { return sum(t.param(a)); },
    };
    for (const auto& f : on_a) check(f, a, 1e-6, worst_primitive);
    check([&](Tape& t) { return project(affine(t.param(a), t.param(w), t.param(b)), 20); }, w, 1e-6, worst_primitive);
    check([&](Tape& t) { return project(affine(t.param(a), t.param(w), t.param(b)), 20); }, b, 1e-6, worst_primitive);
    check([&](Tape& t) { return neg_entropy(t.param(positive)); }, positive, 1e-6, worst_primitive);

    const std::size_t classes = 3;
    Parameter weights("rw", ParamGroup::generator, random_tensor({4, 2}, rng, 0.1, 1.0));
    Parameter e0("e0", ParamGroup::generator, random_tensor({2, classes}, rng));
    Parameter e1("e1", ParamGroup::generator, random_tensor({3, classes}, rng));
    const std::vector<std::vector<std::size_t>> routes{{0, 3}, {1, 2, 3}};
    const ScalarFn combine = [&](Tape& t) {
      const Var outs[] = {t.param(e0), t.param(e1)};
      return project(route_combine(outs, routes, t.param(weights), classes), 12);
    };
    for (Parameter* p : {&weights, &e0, &e1}) check(combine, *p, 1e-6, worst_primitive);
  }

  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const std::size_t m = 5, dim = 4, classes = 3;
    Hub hub = small_hub(m, dim, classes, seed);
    Generator g(dim, m, seed + 1, {8, 8});
    Aggregator agg(m, classes, seed + 2);
    randomize(agg.out.weight, seed + 3, 0.3);
    randomize(agg.out.bias, seed + 4, 0.3);
    const Tensor x = random_x(6, dim, seed + 5);
    std::vector<int> y;
    for (std::size_t r = 0; r < x.rows(); ++r) y.push_back(static_cast<int>(r % classes));
    Tape probe;
    const Tensor eps = g.generate(probe, probe.constant(x)).epsilon;
    const ScalarFn f = [&](Tape& t) {
      Var xv = t.constant(x);
      auto gen = g.generate(t, xv, &eps);
      const auto pw = topk_filter(gen.dense.value(), 2);
      auto routed = route_and_aggregate(t, hub, agg, pw, mul_const(gen.dense, pw.mask()), xv);
      return add(task_loss(routed.logits, y), scale(explore_loss(gen.dense), 0.3));
    };
    std::vector<Parameter*> params = g.parameters();
    for (auto* p : agg.parameters()) params.push_back(p);
    for (auto* p : params) check(f, *p, 1e-4, worst_composed);
  }
  const double secs = seconds_since(t0);
  report(1, ok && secs < 60.0,
         "gradient checks: primitives max rel err " + fmt("%.2e", worst_primitive) + " (<=1e-6), composed gate " +
             fmt("%.2e", worst_composed) + " (<=1e-4), " + fmt("%.1f", secs) + " s");
}

// ---- 2 ---------------------------------------------------------------------

void sparsity_and_isolation() {
  const auto t0 = clock_type::now();
  const std::size_t m = 5, dim = 6, classes = 3, n = 10000;
  const Tensor x = random_x(n, dim, 77);
  bool counts_ok = true;
  {
    Generator g(dim, m, 5);
    Tape t;
    const Tensor dense = g.generate(t, t.constant(x)).dense.value();
    for (std::size_t k = 1; k <= m + 1 && counts_ok; ++k) {
      const auto pw = topk_filter(dense, k);
      for (std::size_t r = 0; r < n; ++r) {
        std::size_t nz = 0;
        for (std::size_t i = 0; i < m; ++i) nz += pw.sparse.at(r, i) != 0.0;
        if (nz != std::min(k, m)) {
          counts_ok = false;
          break;
        }
      }
    }
  }

  Hub hub = small_hub(m, dim, classes, 31);
  Generator g(dim, m, 8);
  Aggregator agg(m, classes, 9);
  randomize(agg.out.weight, 10, 0.3);
  bool isolated = true, zero_grad = true;
  std::size_t perturbed = 0;
  for (std::size_t r = 0; r < n && isolated && zero_grad; ++r) {
    const Tensor xr({1, dim}, std::vector<double>(x.row(r).begin(), x.row(r).end()));
    const std::vector<int> y{static_cast<int>(r % classes)};

    g.set_mode(GateMode::eval);
    const auto before = predict(g, hub, agg, xr, 2);
    Hub shaken = hub;
    for (std::size_t i = 0; i < m; ++i) {
      if (before.weights.sparse[i] > 0.0) continue;
      for (auto* p : shaken[i].parameters()) randomize(*p, 1000 * r + i, 3.0);
      ++perturbed;
    }
    const auto after = predict(g, shaken, agg, xr, 2);
    isolated = bit_equal(before.logits, after.logits);

    g.set_mode(GateMode::train);
    for (auto* p : hub.parameters()) p->tensor.zero_grad();
    Tape t;
    Var xv = t.constant(xr);
    auto gen = g.generate(t, xv);
    const auto pw = topk_filter(gen.dense.value(), 2);
    auto routed = route_and_aggregate(t, hub, agg, pw, mul_const(gen.dense, pw.mask()), xv);
    t.backward(add(task_loss(routed.logits, y), exploit_loss(t, routed, y, 1)));
    for (std::size_t i = 0; i < m; ++i) {
      if (pw.sparse[i] > 0.0) continue;
      for (const auto* p : hub[i].parameters())
        if (p->tensor.has_grad())
          for (double v : p->tensor.grad()) zero_grad = zero_grad && v == 0.0;
    }
  }
  const double secs = seconds_since(t0);
  report(2, counts_ok && isolated && zero_grad && secs < 60.0,
         std::string("10000 inputs: nonzeros == min(k,m) for k=1..6 ") + (counts_ok ? "yes" : "NO") +
             ", inactive perturbation (" + std::to_string(perturbed) + " expert edits) invisible " +
             (isolated ? "yes" : "NO") + ", inactive gradients exactly zero " + (zero_grad ? "yes" : "NO") + ", " +
             fmt("%.1f", secs) + " s");
}

// ---- 3 ---------------------------------------------------------------------

void loss_analytics() {
  Tape t;
  const double uniform = explore_loss(t.constant(Tensor({7, 5}, 0.2))).value()[0];
  const double onehot =
      explore_loss(t.constant(Tensor::matrix({{0, 0, 1, 0, 0}, {0, 0, 1, 0, 0}, {0, 0, 1, 0, 0}}))).value()[0];
  const bool explore_ok = std::abs(uniform + std::log(5.0)) <= 1e-9 && std::abs(uniform + 1.609438) < 5e-7 &&
                          onehot == 0.0;

  const std::size_t m = 5, dim = 4, classes = 3, n = 16;
  PathwayModel model = PathwayModel::create(small_hub(m, dim, classes, 3), 4);
  const Tensor x = random_x(n, dim, 12);
  std::vector<int> y;
  for (std::size_t r = 0; r < n; ++r) y.push_back(static_cast<int>((r * 7) % classes));
  Tape tape;
  auto f = forward_pathway(tape, model, tape.constant(x), RouteOptions{m});
  const double got = exploit_loss(tape, f.routed, y, n).value()[0];
  double oracle = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const Tensor logits = model.hub[i].infer(x);
    double total = 0.0;
    for (std::size_t r = 0; r < n; ++r) total += direct_ce(logits.row(r), y[r]);
    oracle += total / static_cast<double>(n);
  }
  const double diff = std::abs(got - oracle);
  report(3, explore_ok && diff <= 1e-10,
         "explore(uniform, m=5) = " + fmt("%.10f", uniform) + ", explore(one-hot mean) = " + fmt("%g", onehot) +
             ", exploit at k=m vs dense-sum oracle |diff| = " + fmt("%.2e", diff));
}

// ---- 4 ---------------------------------------------------------------------

void gate_semantics() {
  const std::size_t dim = 6, m = 5;
  Generator g(dim, m, 7);
  g.set_mode(GateMode::eval);
  const Tensor x = random_x(64, dim, 2);
  Tape t;
  const Tensor w = g.generate(t, t.constant(x)).dense.value();
  Tape ref;
  Var h = ref.constant(x);
  for (auto& l : g.trunk) h = relu(affine(h, ref.param(l.weight), ref.param(l.bias)));
  const Tensor gp = softmax(affine(h, ref.param(g.preference.weight), ref.param(g.preference.bias))).value();
  const bool eval_exact = bit_equal(w, gp);

  Generator hand(dim, 2, 0);
  for (auto* p : {&hand.preference.weight, &hand.preference.bias, &hand.noise.weight, &hand.noise.bias})
    std::fill(p->tensor.data().begin(), p->tensor.data().end(), 0.0);
  const Tensor eps = Tensor::matrix({{1.0, -1.0}});
  Tape th;
  const Tensor hw = hand.generate(th, th.constant(random_x(1, dim, 4)), &eps).dense.value();
  const double hand_err = std::max(std::abs(hw[0] - 0.8), std::abs(hw[1] - 0.2));

  PathwayModel model = PathwayModel::create(small_hub(m, dim, 3, 40), 41);
  const Tensor xb = random_x(32, dim, 42);
  Tape a;
  const auto first = forward_pathway(a, model, a.constant(xb), RouteOptions{2});
  RouteOptions replay{2};
  replay.epsilon = &first.epsilon;
  Tape b;
  const auto second = forward_pathway(b, model, b.constant(xb), replay);
  const bool replay_exact = bit_equal(first.dense.value(), second.dense.value()) &&
                            bit_equal(first.routed.logits.value(), second.routed.logits.value());
  report(4, eval_exact && hand_err <= 1e-10 && replay_exact,
         std::string("eval == softmax(Gp) bit-exact ") + (eval_exact ? "yes" : "NO") + ", hand oracle err " +
             fmt("%.1e", hand_err) + ", recorded-noise replay bit-exact " + (replay_exact ? "yes" : "NO"));
}

// ---- 5 ---------------------------------------------------------------------

void compute_bound() {
  const std::size_t m = 5, batch = 256;
  const bench::Suite suite = bench::make_suite(0);
  const Tensor x = random_x(batch, bench::kSuiteDim, 5);

  Hub hub = small_hub(m, bench::kSuiteDim, bench::kTargetClasses, 60, {64, 64});
  Generator g(bench::kSuiteDim, m, 61);
  g.set_mode(GateMode::eval);
  Aggregator agg(m, bench::kTargetClasses, 62);
  predict(g, hub, agg, x, 2);
  const std::uint64_t routed = hub.total_macs();
  hub.reset_counters();
  for (std::size_t i = 0; i < m; ++i) hub[i].infer(x);
  const std::uint64_t ensemble = hub.total_macs();
  const bool exact = routed * 5 == ensemble * 2;

  // Default hub architecture, untrained weights: costs depend only on shapes.
  const bench::HubSpec spec = bench::default_hub_spec(suite);
  std::vector<Expert> experts;
  for (std::size_t i = 0; i < spec.experts.size(); ++i) {
    ArchDescriptor a = spec.experts[i].arch;
    a.source_head = suite.sources[spec.experts[i].source].spec.classes;
    experts.push_back(replace_head(build_expert(a, i, static_cast<int>(i)), bench::kTargetClasses, 70 + i));
  }
  PathwayModel model = PathwayModel::create(Hub(std::move(experts)), 3);
  model.generator.counter().reset();
  Tape t;
  forward_pathway(t, model, t.constant(suite.target.test.features), RouteOptions{2});  // train mode: both heads
  const double gen_flops = 2.0 * static_cast<double>(model.generator.counter().macs());
  const double expert_flops = 2.0 * static_cast<double>(model.hub.total_macs());
  const double ratio = gen_flops / expert_flops;
  report(5, exact && ratio < 0.2,
         "equal experts k=2: routed/ensemble expert MACs = " + std::to_string(routed) + "/" +
             std::to_string(ensemble) + " = " + fmt("%.6f", static_cast<double>(routed) / ensemble) +
             "; default sizes: generator/activated-expert FLOPs = " + fmt("%.4f", ratio) + " (<0.2)");
}

// ---- 6-10 ------------------------------------------------------------------

struct SeedResult {
  std::vector<double> acc_by_mode;   // full, no_explore, no_exploit, random_path
  std::vector<double> acc_by_k;      // k = 1..5
  std::vector<double> flops_by_k;    // expert FLOPs per sample
  double top_weight = 0.0, random_expert = 0.0;
  bench::OracleTable oracle;
  std::vector<double> w_target, w_alt;
};

SeedResult run_seed(std::uint64_t seed) {
  SeedResult out;
  const bench::Suite suite = bench::make_suite(seed);
  const auto ph = bench::pretrain_hub(suite, bench::default_hub_spec(suite), seed);
  const Hub adapted = bench::adapt_hub(ph.hub, bench::kTargetClasses, seed);

  bench::ArmResult full;
  for (TrainMode mode : {TrainMode::full, TrainMode::no_explore, TrainMode::no_exploit, TrainMode::random_path}) {
    TrainConfig cfg = bench::default_train_config(seed);
    cfg.mode = mode;
    const auto arm = bench::run_arm(adapted, suite, cfg);
    out.acc_by_mode.push_back(arm.accuracy);
    if (mode == TrainMode::full) full = arm;
  }
  for (std::size_t k = 1; k <= adapted.size(); ++k) {
    bench::ArmResult arm = full;
    if (k != full.k) {
      TrainConfig cfg = bench::default_train_config(seed);
      cfg.k = k;
      arm = bench::run_arm(adapted, suite, cfg);
    }
    out.acc_by_k.push_back(arm.accuracy);
    out.flops_by_k.push_back(2.0 * static_cast<double>(arm.eval.expert_macs) /
                             static_cast<double>(suite.target.test.size()));
  }

  const auto singles = bench::finetune_singles(adapted, suite.target.train, bench::default_train_config(seed));
  const auto q = bench::weight_quality(singles, full.eval.top_expert, suite.target.test,
                                       derive_seed(seed, seed_role::analysis));
  out.top_weight = q.top_weight_accuracy;
  out.random_expert = q.random_expert_accuracy;
  out.oracle = bench::oracle_comparison(singles, suite.target.test, full.accuracy);

  // Same hub, a second target drawn from one region of the world.
  bench::Suite alt = suite;
  alt.target = suite.alt_target;
  out.w_target = full.w_mean;
  out.w_alt = bench::run_arm(adapted, alt, bench::default_train_config(seed)).w_mean;
  return out;
}

std::pair<double, double> collapse_seed(std::uint64_t seed) {
  const bench::Suite suite = bench::make_suite(seed, bench::SuiteVariant::redundant);
  const auto ph = bench::pretrain_hub(suite, bench::default_hub_spec(suite), seed);
  const Hub adapted = bench::adapt_hub(ph.hub, bench::kTargetClasses, seed);
  TrainConfig cfg = bench::default_train_config(seed);
  const double with = bench::run_arm(adapted, suite, cfg).usage_entropy;
  cfg.lambda = 0.0;
  const double without = bench::run_arm(adapted, suite, cfg).usage_entropy;
  return {with, without};
}

std::string list(const std::vector<double>& v, const char* f = "%.3f") {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt(f, v[i]);
  return s + "]";
}

void benchmarks() {
  const auto t0 = clock_type::now();
  const std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::vector<SeedResult> results;
  for (auto s : seeds) {
    results.push_back(run_seed(s));
    std::printf("    seed %llu done (%.0f s)\n", static_cast<unsigned long long>(s), seconds_since(t0));
    std::fflush(stdout);
  }
  auto column = [&](auto get) {
    std::vector<double> v;
    for (const auto& r : results) v.push_back(get(r));
    return v;
  };

  std::vector<double> med(4);
  for (std::size_t a = 0; a < 4; ++a) med[a] = bench::median(column([&](const SeedResult& r) { return r.acc_by_mode[a]; }));
  const double ablation_secs = seconds_since(t0);
  report(6, med[0] > med[1] && med[0] > med[2] && med[0] > med[3] && ablation_secs < 1800.0,
         "median acc full " + fmt("%.4f", med[0]) + " > no_explore " + fmt("%.4f", med[1]) + ", no_exploit " +
             fmt("%.4f", med[2]) + ", random_path " + fmt("%.4f", med[3]) + " (seeds 0-4, all analyses " +
             fmt("%.0f", ablation_secs) + " s)");

  std::vector<double> h_with, h_without;
  for (auto s : seeds) {
    const auto [a, b] = collapse_seed(s);
    h_with.push_back(a);
    h_without.push_back(b);
  }
  const double hw = bench::median(h_with), hwo = bench::median(h_without);
  report(7, hw > hwo,
         "redundant hub usage entropy median: lambda=0.3 " + fmt("%.4f", hw) + " > lambda=0 " + fmt("%.4f", hwo) +
             " " + list(h_with) + " vs " + list(h_without));

  const double k1 = bench::median(column([](const SeedResult& r) { return r.acc_by_k[0]; }));
  const double k2 = bench::median(column([](const SeedResult& r) { return r.acc_by_k[1]; }));
  bool increasing = true;
  for (const auto& r : results)
    for (std::size_t k = 1; k < r.flops_by_k.size(); ++k) increasing = increasing && r.flops_by_k[k] > r.flops_by_k[k - 1];
  std::vector<double> kmed;
  for (std::size_t k = 0; k < results.front().acc_by_k.size(); ++k)
    kmed.push_back(bench::median(column([&](const SeedResult& r) { return r.acc_by_k[k]; })));
  report(8, k1 < k2 && increasing,
         "median acc k=1 " + fmt("%.4f", k1) + " < k=2 " + fmt("%.4f", k2) + "; k=1..5 medians " + list(kmed) +
             "; expert FLOPs strictly increasing in k for every seed " + (increasing ? "yes" : "NO") + " " +
             list(results.front().flops_by_k, "%.0f"));

  const auto gaps = column([](const SeedResult& r) { return 100.0 * (r.top_weight - r.random_expert); });
  const double gap = bench::median(gaps);
  report(9, gap >= 5.0,
         "top-weight minus random-expert accuracy, median " + fmt("%.2f", gap) + " points (>=5) " + list(gaps, "%.1f"));

  const double oracle = bench::median(column([](const SeedResult& r) { return r.oracle.oracle; }));
  const double hp = bench::median(column([](const SeedResult& r) { return r.oracle.hub_pathway; }));
  const double best = bench::median(column([](const SeedResult& r) { return r.oracle.best_single; }));
  const double ens = bench::median(column([](const SeedResult& r) { return r.oracle.ensemble_topk; }));
  report(10, oracle > hp && hp > best,
         "median oracle " + fmt("%.4f", oracle) + " > hub-pathway " + fmt("%.4f", hp) + " > best single " +
             fmt("%.4f", best) + " (ensemble top-2 " + fmt("%.4f", ens) + ")");

  const auto l1 = column([](const SeedResult& r) {
    double d = 0.0;
    for (std::size_t i = 0; i < r.w_target.size(); ++i) d += std::abs(r.w_target[i] - r.w_alt[i]);
    return d;
  });
  const double l1_med = bench::median(l1);
  std::printf("  invariant: average pathway weights differ across targets, median L1 %.4f (>0.05) %s  %s\n", l1_med,
              list(l1).c_str(), l1_med > 0.05 ? "PASS" : "FAIL");
  if (!(l1_med > 0.05)) ++failures;
}

// ---- 11 --------------------------------------------------------------------

void reproducibility() {
  const fs::path root = fs::temp_directory_path() / "hubpath_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);
  const fs::path log = root / "cli.log";

  bool ok = run_cli("pretrain --out-dir " + (root / "base").string(), log) == 0;
  const std::string manifest = (root / "base" / "hub" / "manifest.txt").string();
  ok = ok && run_cli("train --hub-manifest " + manifest + " --out-dir " + (root / "a").string(), log) == 0;
  ok = ok && run_cli("train --hub-manifest " + manifest + " --out-dir " + (root / "b").string(), log) == 0;
  const std::string ma = slurp(root / "a" / "metrics.log");
  const bool metrics_same = ok && !ma.empty() && ma == slurp(root / "b" / "metrics.log");

  bool roundtrip = true;
  const Hub hub = load_hub(manifest);
  save_hub(hub, root / "resaved");
  for (const auto& e : read_manifest(manifest))
    roundtrip = roundtrip && slurp(e.checkpoint) == slurp(root / "resaved" / e.checkpoint.filename());
  const Hub again = load_hub(root / "resaved" / "manifest.txt");
  for (std::size_t i = 0; i < hub.size(); ++i) {
    const auto pa = hub[i].parameters();
    const auto pb = again[i].parameters();
    for (std::size_t j = 0; j < pa.size(); ++j) roundtrip = roundtrip && bit_equal(pa[j]->tensor, pb[j]->tensor);
  }
  PathwayModel model = cli::load_pathway(root / "a" / "model");
  cli::save_pathway(model, root / "model_copy");
  for (const char* f : {"generator.ckpt", "aggregator.ckpt", "expert_3.ckpt"})
    roundtrip = roundtrip && slurp(root / "model_copy" / f) == slurp(root / "a" / "model" / f);

  fs::copy(root / "base" / "hub", root / "corrupt");
  {
    std::fstream f(root / "corrupt" / "expert_2.ckpt", std::ios::in | std::ios::out | std::ios::binary);
    f.seekg(300);
    const char c = static_cast<char>(f.get());
    f.seekp(300);
    f.put(static_cast<char>(c ^ 0x10));
  }
  const int flipped = run_cli(
      "train --hub-manifest " + (root / "corrupt" / "manifest.txt").string() + " --out-dir " + (root / "c").string(),
      log);
  fs::resize_file(root / "a" / "model" / "generator.ckpt", 64);
  const int truncated = run_cli("eval --out-dir " + (root / "a").string(), log);

  report(11, metrics_same && roundtrip && flipped == 2 && truncated == 2,
         std::string("metrics.log bit-identical across reruns ") + (metrics_same ? "yes" : "NO") +
             ", checkpoints round-trip bit-exact " + (roundtrip ? "yes" : "NO") +
             ", flipped-byte exit " + std::to_string(flipped) + ", truncated exit " + std::to_string(truncated));
  fs::remove_all(root);
}

}  // namespace

int main() {
  const auto t0 = clock_type::now();
  const std::vector<std::pair<int, std::function<void()>>> steps = {
      {1, gradient_suite}, {2, sparsity_and_isolation}, {3, loss_analytics}, {4, gate_semantics},
      {5, compute_bound},  {6, benchmarks},            {11, reproducibility}};
  for (const auto& [id, step] : steps) {
    try {
      step();
    } catch (const std::exception& e) {
      report(id, false, std::string("threw: ") + e.what());
    }
  }
  std::printf("acceptance: %d failure(s), %.0f s total\n", failures, seconds_since(t0));
  return failures == 0 ? 0 : 1;
}
