#include "hubpath/commands.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "hubpath/bench.hpp"
#include "hubpath/checkpoint.hpp"
#include "hubpath/error.hpp"

namespace hubpath::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::ostream& out_of(const CommandOptions& o) { return o.out ? *o.out : std::cout; }
std::ostream& warn_of(const CommandOptions& o) { return o.warn ? *o.warn : std::cerr; }

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot read '" + p.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& content, bool force) {
  if (fs::exists(p)) {
    if (read_file(p) == content) return;
    if (!force) throw UsageError("'" + p.string() + "' exists with different contents; pass --force to overwrite");
  }
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << content;
  if (!out) throw DataError("cannot write '" + p.string() + "'");
}

bool same_tree(const fs::path& a, const fs::path& b) {
  std::set<fs::path> names_a, names_b;
  for (const auto& e : fs::directory_iterator(a)) names_a.insert(e.path().filename());
  for (const auto& e : fs::directory_iterator(b)) names_b.insert(e.path().filename());
  if (names_a != names_b) return false;
  for (const auto& n : names_a)
    if (read_file(a / n) != read_file(b / n)) return false;
  return true;
}

// Artifacts are first written to a staging directory and only replace an
// existing directory when identical or forced.
template <typename Fn>
void write_dir(const fs::path& target, bool force, Fn&& fill) {
  const fs::path staging = target.string() + ".staging";
  fs::remove_all(staging);
  fs::create_directories(staging);
  try {
    fill(staging);
  } catch (...) {
    fs::remove_all(staging);
    throw;
  }
  if (fs::exists(target)) {
    if (!same_tree(staging, target) && !force) {
      fs::remove_all(staging);
      throw UsageError("'" + target.string() + "' exists with different contents; pass --force to overwrite");
    }
    fs::remove_all(target);
  }
  fs::rename(staging, target);
}

void write_snapshot(const RunConfig& cfg, bool force) {
  fs::create_directories(cfg.out());
  write_text(cfg.out() / "config.snapshot", cfg.snapshot(), force);
}

RunConfig resolved(RunConfig cfg) {
  cfg.resolve();
  return cfg;
}

bench::Suite suite_for(const RunConfig& cfg) { return bench::make_suite(cfg.seed, bench::parse_variant(cfg.suite)); }

bench::HubSpec hub_spec_for(const RunConfig& cfg, const bench::Suite& suite) {
  bench::HubSpec spec = bench::default_hub_spec(suite);
  if (cfg.m < spec.experts.size()) {
    const auto unrelated = spec.experts.back();
    spec.experts.resize(cfg.m - 1);
    spec.experts.push_back(unrelated);
  }
  spec.validate(suite);
  return spec;
}

std::string csv_list(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
  return s;
}

std::string weight_columns(std::size_t m) {
  std::string s;
  for (std::size_t i = 1; i <= m; ++i) s += ",w_" + std::to_string(i);
  return s;
}

double per_sample(std::uint64_t macs, std::size_t n) { return 2.0 * static_cast<double>(macs) / static_cast<double>(n); }

}  // namespace

// ---- persistence ---------------------------------------------------------

void save_pathway(const PathwayModel& model, const fs::path& dir) {
  save_hub(model.hub, dir);
  std::string trunk;
  for (std::size_t i = 0; i < model.generator.trunk_widths().size(); ++i)
    trunk += (i ? "," : "") + std::to_string(model.generator.trunk_widths()[i]);
  write_blob(dir / "generator.ckpt",
             "generator input=" + std::to_string(model.generator.input_dim()) +
                 " experts=" + std::to_string(model.generator.experts()) + " trunk=" + trunk,
             model.generator.parameters());
  write_blob(dir / "aggregator.ckpt",
             "aggregator experts=" + std::to_string(model.aggregator.experts()) +
                 " classes=" + std::to_string(model.aggregator.classes()),
             model.aggregator.parameters());
}

PathwayModel load_pathway(const fs::path& dir) {
  Hub hub = load_hub(dir / "manifest.txt");
  hub.validate_adapted();
  const CheckpointBlob g = read_blob(dir / "generator.ckpt");
  const CheckpointBlob a = read_blob(dir / "aggregator.ckpt");
  std::vector<std::size_t> trunk;
  std::size_t g_input = 0, g_experts = 0, a_experts = 0, a_classes = 0;
  try {
    std::stringstream ss(descriptor_field(g.descriptor, "trunk"));
    std::string w;
    while (std::getline(ss, w, ',')) trunk.push_back(std::stoul(w));
    g_input = std::stoul(descriptor_field(g.descriptor, "input"));
    g_experts = std::stoul(descriptor_field(g.descriptor, "experts"));
    a_experts = std::stoul(descriptor_field(a.descriptor, "experts"));
    a_classes = std::stoul(descriptor_field(a.descriptor, "classes"));
  } catch (const std::logic_error&) {
    throw FormatError("malformed pathway descriptor in '" + dir.string() + "'");
  }
  if (g_input != hub.input_dim() || g_experts != hub.size() || a_experts != hub.size() || a_classes != hub.classes())
    throw FormatError("pathway checkpoints in '" + dir.string() + "' do not match the hub");
  PathwayModel model{std::move(hub), Generator(g_input, g_experts, 0, trunk), Aggregator(a_experts, a_classes, 0)};
  scatter_blob(g, model.generator.parameters());
  scatter_blob(a, model.aggregator.parameters());
  return model;
}

// ---- commands ------------------------------------------------------------

void cmd_pretrain(const RunConfig& raw, const CommandOptions& opts) {
  const RunConfig cfg = resolved(raw);
  write_snapshot(cfg, opts.force);
  const bench::Suite suite = suite_for(cfg);
  const bench::HubSpec spec = hub_spec_for(cfg, suite);
  const bench::PretrainedHub ph = bench::pretrain_hub(suite, spec, cfg.seed);
  write_dir(cfg.out() / "hub", opts.force, [&](const fs::path& dir) { save_hub(ph.hub, dir); });

  std::ostringstream table;
  std::string lines;
  table << "expert,source,relevance,classes,widths,train_accuracy,test_accuracy,converged,below_floor\n";
  for (std::size_t i = 0; i < ph.hub.size(); ++i) {
    const auto& task = suite.sources[spec.experts[i].source];
    const bool flagged = std::find(ph.report.below_floor.begin(), ph.report.below_floor.end(), i) !=
                         ph.report.below_floor.end();
    std::string widths;
    for (auto w : ph.hub[i].arch.widths) widths += (widths.empty() ? "" : "x") + std::to_string(w);
    table << i << ',' << task.spec.name << ',' << task.relevance << ',' << task.spec.classes << ',' << widths << ','
          << format_double(ph.report.source_train_accuracy[i]) << ','
          << format_double(ph.report.source_test_accuracy[i]) << ',' << (ph.report.converged[i] ? 1 : 0) << ','
          << (flagged ? 1 : 0) << '\n';
    json j{{"command", "pretrain"},
           {"seed", cfg.seed},
           {"expert", i},
           {"source", task.spec.name},
           {"relevance", task.relevance},
           {"train_accuracy", ph.report.source_train_accuracy[i]},
           {"test_accuracy", ph.report.source_test_accuracy[i]},
           {"converged", static_cast<bool>(ph.report.converged[i])},
           {"below_floor", flagged}};
    lines += j.dump() + "\n";
    if (flagged)
      warn_of(opts) << "warning: expert " << i << " (" << task.spec.name << ") is below the accuracy floor\n";
  }
  write_text(cfg.out() / "report" / "pretrain.csv", table.str(), opts.force);
  write_text(cfg.out() / "report" / "pretrain.json", lines, opts.force);
  out_of(opts) << "pretrained " << ph.hub.size() << " experts into " << (cfg.out() / "hub").string() << '\n';
}

void cmd_train(const RunConfig& raw, const CommandOptions& opts) {
  const RunConfig cfg = resolved(raw);
  const Hub pretrained = load_hub(cfg.hub_manifest);
  if (pretrained.size() != cfg.m)
    throw ConfigError("hub '" + cfg.hub_manifest + "' has " + std::to_string(pretrained.size()) +
                      " experts but m = " + std::to_string(cfg.m));
  write_snapshot(cfg, opts.force);
  const bench::Suite suite = suite_for(cfg);
  if (pretrained.input_dim() != suite.target.train.dim())
    throw ShapeError("hub input dimension does not match the target task");

  const fs::path own_manifest = cfg.out() / "hub" / "manifest.txt";
  if (!(fs::exists(own_manifest) && fs::equivalent(own_manifest, cfg.hub_manifest)))
    write_dir(cfg.out() / "hub", opts.force, [&](const fs::path& dir) { save_hub(pretrained, dir); });
  write_dir(cfg.out() / "data", opts.force, [&](const fs::path& dir) {
    write_csv(suite.target.train, dir / "target_train.csv");
    write_csv(suite.target.test, dir / "target_test.csv");
  });

  const TrainConfig tc = cfg.train_config();
  PathwayModel model = PathwayModel::create(bench::adapt_hub(pretrained, suite.target.spec.classes, cfg.seed), cfg.seed);
  std::ostringstream metrics;
  const TrainResult result = train(model, suite.target.train, tc, &metrics);
  write_text(cfg.out() / "metrics.log", metrics.str(), opts.force);
  write_dir(cfg.out() / "model", opts.force, [&](const fs::path& dir) { save_pathway(model, dir); });

  const MetricsRecord& last = result.last;
  json j{{"command", "train"},  {"seed", cfg.seed},       {"mode", cfg.mode},
         {"k", cfg.k},          {"lambda", cfg.lambda},   {"iters", cfg.iters},
         {"L_task", last.task}, {"L_explore", last.explore}, {"L_exploit", last.exploit},
         {"train_acc", last.acc}, {"usage_entropy", last.usage_entropy}, {"flops_cum", last.flops_cum},
         {"w_mean", last.w_mean}};
  write_text(cfg.out() / "report" / "train.json", j.dump() + "\n", opts.force);
  out_of(opts) << "trained " << mode_name(tc.mode) << " k=" << cfg.k << " for " << cfg.iters
               << " iterations; metrics in " << (cfg.out() / "metrics.log").string() << '\n';
}

double cmd_eval(const RunConfig& raw, const CommandOptions& opts) {
  const RunConfig cfg = resolved(raw);
  PathwayModel model = load_pathway(cfg.out() / "model");
  if (cfg.k > model.hub.size()) throw ConfigError("k exceeds the number of experts in the trained model");
  const Dataset test = read_csv(cfg.out() / "data" / "target_test.csv", model.hub.classes());
  std::ostringstream weights;
  const EvalResult r = evaluate(model, test, cfg.k, parse_mode(cfg.mode), cfg.seed, &weights);
  write_text(cfg.out() / "weights_dump.csv", weights.str(), opts.force);

  const std::size_t n = test.size();
  std::ostringstream table;
  table << "seed,mode,k,accuracy,usage_entropy,expert_flops_per_sample,generator_flops_per_sample,"
           "aggregator_flops_per_sample"
        << weight_columns(model.hub.size()) << '\n';
  table << cfg.seed << ',' << cfg.mode << ',' << cfg.k << ',' << format_double(r.accuracy) << ','
        << format_double(r.usage_entropy) << ',' << format_double(per_sample(r.expert_macs, n)) << ','
        << format_double(per_sample(r.generator_macs, n)) << ',' << format_double(per_sample(r.aggregator_macs, n))
        << ',' << csv_list(r.w_mean) << '\n';
  write_text(cfg.out() / "report" / "eval.csv", table.str(), opts.force);
  json j{{"command", "eval"},
         {"seed", cfg.seed},
         {"mode", cfg.mode},
         {"k", cfg.k},
         {"accuracy", r.accuracy},
         {"usage_entropy", r.usage_entropy},
         {"expert_flops_per_sample", per_sample(r.expert_macs, n)},
         {"generator_flops_per_sample", per_sample(r.generator_macs, n)},
         {"aggregator_flops_per_sample", per_sample(r.aggregator_macs, n)},
         {"w_mean", r.w_mean},
         {"activations", r.activations}};
  write_text(cfg.out() / "report" / "eval.json", j.dump() + "\n", opts.force);
  out_of(opts) << "accuracy " << format_double(r.accuracy) << '\n';
  return r.accuracy;
}

// ---- analysis ------------------------------------------------------------

namespace {

struct RunRecord {
  fs::path dir;
  RunConfig cfg;
  EvalResult eval;
  double expert_flops = 0.0;
};

bool complete_run(const fs::path& dir, std::string& missing) {
  for (const char* rel : {"config.snapshot", "metrics.log", "hub/manifest.txt", "model/manifest.txt",
                          "model/generator.ckpt", "model/aggregator.ckpt", "data/target_train.csv",
                          "data/target_test.csv"})
    if (!fs::exists(dir / rel)) {
      missing = rel;
      return false;
    }
  return true;
}

std::string singles_key(const RunRecord& r) {
  RunConfig c = r.cfg;
  c.k = 2;
  c.mode = "full";
  c.lambda = 0.0;
  c.out_dir = r.dir.string();
  c.hub_manifest.clear();
  return c.snapshot();
}

}  // namespace

void cmd_analyze(const std::vector<fs::path>& run_dirs, const fs::path& out_dir, const CommandOptions& opts) {
  std::vector<RunRecord> runs;
  for (const auto& dir : run_dirs) {
    std::string missing;
    if (!complete_run(dir, missing)) {
      warn_of(opts) << "warning: skipping incomplete run '" << dir.string() << "' (missing " << missing << ")\n";
      continue;
    }
    RunRecord r;
    r.dir = dir;
    r.cfg = load_config(dir / "config.snapshot");
    PathwayModel model = load_pathway(dir / "model");
    const Dataset test = read_csv(dir / "data" / "target_test.csv", model.hub.classes());
    r.eval = evaluate(model, test, r.cfg.k, parse_mode(r.cfg.mode), r.cfg.seed);
    r.expert_flops = per_sample(r.eval.expert_macs, test.size());
    runs.push_back(std::move(r));
  }
  if (runs.empty()) throw DataError("no complete run directories to analyze");
  std::stable_sort(runs.begin(), runs.end(), [](const RunRecord& a, const RunRecord& b) {
    if (a.cfg.mode != b.cfg.mode) return a.cfg.mode < b.cfg.mode;
    if (a.cfg.k != b.cfg.k) return a.cfg.k < b.cfg.k;
    return a.cfg.seed < b.cfg.seed;
  });
  const std::size_t m = runs.front().eval.w_mean.size();
  for (const auto& r : runs)
    if (r.eval.w_mean.size() != m) throw DataError("runs disagree on the number of experts");
  const fs::path report = out_dir / "report";
  std::string summary;

  std::ostringstream runs_csv, weights_csv;
  runs_csv << "run,seed,mode,k,lambda,accuracy,usage_entropy,expert_flops_per_sample\n";
  weights_csv << "run,seed,mode,k,usage_entropy" << weight_columns(m) << '\n';
  for (const auto& r : runs) {
    runs_csv << r.dir.filename().string() << ',' << r.cfg.seed << ',' << r.cfg.mode << ',' << r.cfg.k << ','
             << format_double(r.cfg.lambda) << ',' << format_double(r.eval.accuracy) << ','
             << format_double(r.eval.usage_entropy) << ',' << format_double(r.expert_flops) << '\n';
    weights_csv << r.dir.filename().string() << ',' << r.cfg.seed << ',' << r.cfg.mode << ',' << r.cfg.k << ','
                << format_double(r.eval.usage_entropy) << ',' << csv_list(r.eval.w_mean) << '\n';
    summary += json{{"table", "run"},       {"run", r.dir.string()},        {"seed", r.cfg.seed},
                    {"mode", r.cfg.mode},   {"k", r.cfg.k},                 {"accuracy", r.eval.accuracy},
                    {"usage_entropy", r.eval.usage_entropy}, {"expert_flops_per_sample", r.expert_flops},
                    {"w_mean", r.eval.w_mean}}
                   .dump() +
               "\n";
  }

  // Ablations: one row per (mode, k).
  std::ostringstream ablation;
  ablation << "mode,k,runs,mean,sd,median\n";
  std::map<std::pair<std::string, std::size_t>, std::vector<double>> arms;
  std::vector<std::pair<std::string, std::size_t>> arm_order;
  for (const auto& r : runs) {
    auto key = std::make_pair(r.cfg.mode, r.cfg.k);
    if (!arms.count(key)) arm_order.push_back(key);
    arms[key].push_back(r.eval.accuracy);
  }
  for (const auto& key : arm_order) {
    const auto& acc = arms[key];
    double mean = 0.0, var = 0.0;
    for (double a : acc) mean += a / static_cast<double>(acc.size());
    for (double a : acc) var += (a - mean) * (a - mean);
    const double sd = acc.size() > 1 ? std::sqrt(var / static_cast<double>(acc.size() - 1)) : 0.0;
    const double med = bench::median(acc);
    ablation << key.first << ',' << key.second << ',' << acc.size() << ',' << format_double(mean) << ','
             << format_double(sd) << ',' << format_double(med) << '\n';
    summary += json{{"table", "ablation"}, {"mode", key.first}, {"k", key.second}, {"runs", acc.size()},
                    {"mean", mean},         {"sd", sd},          {"median", med}}
                   .dump() +
               "\n";
  }

  // k-sweep over full-mode runs.
  std::ostringstream ksweep;
  ksweep << "k,runs,median_accuracy,expert_flops_per_sample\n";
  std::map<std::size_t, std::pair<std::vector<double>, double>> by_k;
  for (const auto& r : runs)
    if (r.cfg.mode == "full") {
      auto& slot = by_k[r.cfg.k];
      slot.first.push_back(r.eval.accuracy);
      slot.second += r.expert_flops;
    }
  for (auto& [k, slot] : by_k) {
    const double flops = slot.second / static_cast<double>(slot.first.size());
    const double med = bench::median(slot.first);
    ksweep << k << ',' << slot.first.size() << ',' << format_double(med) << ',' << format_double(flops) << '\n';
    summary += json{{"table", "k_sweep"}, {"k", k}, {"runs", slot.first.size()}, {"median_accuracy", med},
                    {"expert_flops_per_sample", flops}}
                   .dump() +
               "\n";
  }

  // Weight quality and oracle comparison over full-mode runs.
  std::ostringstream quality, oracle;
  quality << "run,seed,k,subset_size,top_weight_accuracy,random_expert_accuracy,skipped\n";
  oracle << "run,seed,k,best_single,best_single_index,ensemble_top2,hub_pathway,oracle\n";
  std::map<std::string, std::vector<Expert>> singles_cache;
  for (const auto& r : runs) {
    if (r.cfg.mode != "full") continue;
    const std::string key = singles_key(r);
    if (!singles_cache.count(key)) {
      const Hub pretrained = load_hub(r.dir / "hub" / "manifest.txt");
      const std::size_t classes = load_pathway(r.dir / "model").hub.classes();
      const Dataset train = read_csv(r.dir / "data" / "target_train.csv", classes);
      singles_cache[key] =
          bench::finetune_singles(bench::adapt_hub(pretrained, classes, r.cfg.seed), train, r.cfg.train_config());
    }
    const auto& singles = singles_cache[key];
    const Dataset test = read_csv(r.dir / "data" / "target_test.csv", singles.front().arch.head_width());
    const auto q = bench::weight_quality(singles, r.eval.top_expert, test,
                                         derive_seed(r.cfg.seed, seed_role::analysis));
    const auto t = bench::oracle_comparison(singles, test, r.eval.accuracy);
    const std::string name = r.dir.filename().string();
    quality << name << ',' << r.cfg.seed << ',' << r.cfg.k << ',' << q.subset_size << ','
            << format_double(q.top_weight_accuracy) << ',' << format_double(q.random_expert_accuracy) << ','
            << (q.skipped ? 1 : 0) << '\n';
    oracle << name << ',' << r.cfg.seed << ',' << r.cfg.k << ',' << format_double(t.best_single) << ','
           << t.best_single_index << ',' << format_double(t.ensemble_topk) << ',' << format_double(t.hub_pathway)
           << ',' << format_double(t.oracle) << '\n';
    if (q.skipped) warn_of(opts) << "warning: weight quality skipped for '" << name << "' (empty subset)\n";
    summary += json{{"table", "weight_quality"},   {"run", r.dir.string()},
                    {"subset_size", q.subset_size}, {"top_weight_accuracy", q.top_weight_accuracy},
                    {"random_expert_accuracy", q.random_expert_accuracy}, {"skipped", q.skipped}}
                   .dump() +
               "\n";
    summary += json{{"table", "oracle"},          {"run", r.dir.string()},       {"best_single", t.best_single},
                    {"ensemble_top2", t.ensemble_topk}, {"hub_pathway", t.hub_pathway}, {"oracle", t.oracle}}
                   .dump() +
               "\n";
  }

  // Complexity, measured on a full-mode run at the default k when available.
  const RunRecord* ref = &runs.front();
  for (const auto& r : runs)
    if (r.cfg.mode == "full" && (ref->cfg.mode != "full" || r.cfg.k == RunConfig{}.k)) {
      ref = &r;
      if (r.cfg.k == RunConfig{}.k) break;
    }
  PathwayModel model = load_pathway(ref->dir / "model");
  const Dataset test = read_csv(ref->dir / "data" / "target_test.csv", model.hub.classes());
  std::ostringstream complexity;
  complexity << "method,parameters,expert_flops_per_sample,generator_flops_per_sample,aggregator_flops_per_sample,"
                "samples_per_second,peak_tensor_bytes\n";
  for (const auto& row : bench::complexity_report(model, test, ref->cfg.k)) {
    complexity << row.method << ',' << row.parameters << ',' << format_double(row.expert_flops_per_sample) << ','
               << format_double(row.generator_flops_per_sample) << ','
               << format_double(row.aggregator_flops_per_sample) << ',' << format_double(row.samples_per_second)
               << ',' << row.peak_tensor_bytes << '\n';
  }

  // Reports are regenerated in full; only throughput differs between reruns.
  write_text(report / "runs.csv", runs_csv.str(), true);
  write_text(report / "pathway_weights.csv", weights_csv.str(), true);
  write_text(report / "ablation.csv", ablation.str(), true);
  write_text(report / "k_sweep.csv", ksweep.str(), true);
  write_text(report / "weight_quality.csv", quality.str(), true);
  write_text(report / "oracle.csv", oracle.str(), true);
  write_text(report / "complexity.csv", complexity.str(), true);
  write_text(report / "summary.json", summary, true);
  out_of(opts) << "analyzed " << runs.size() << " runs into " << report.string() << '\n';
}

void cmd_sweep(const RunConfig& raw, const SweepPlan& plan, const CommandOptions& opts) {
  const RunConfig base = resolved(raw);
  std::vector<std::uint64_t> seeds = plan.seeds;
  if (seeds.empty())
    for (std::uint64_t s = 0; s < 5; ++s) seeds.push_back(base.seed + s);
  std::vector<std::string> modes = plan.modes;
  if (modes.empty()) modes = {"full", "no_explore", "no_exploit", "random_path"};
  std::vector<std::pair<std::string, std::size_t>> arms;
  for (const auto& mode : modes) {
    parse_mode(mode);
    arms.emplace_back(mode, base.k);
  }
  for (auto k : plan.ks) {
    if (k < 1 || k > base.m) throw ConfigError("sweep k values must lie in 1..m");
    if (std::find(arms.begin(), arms.end(), std::make_pair(std::string("full"), k)) == arms.end())
      arms.emplace_back("full", k);
  }

  write_snapshot(base, opts.force);
  std::vector<fs::path> run_dirs;
  for (auto seed : seeds) {
    RunConfig pre = base;
    pre.seed = seed;
    pre.out_dir = (base.out() / ("seed_" + std::to_string(seed))).string();
    pre.hub_manifest.clear();
    pre.resolve();
    cmd_pretrain(pre, opts);
    for (const auto& [mode, k] : arms) {
      RunConfig arm = pre;
      arm.mode = mode;
      arm.k = k;
      arm.out_dir = (pre.out() / (mode + "_k" + std::to_string(k))).string();
      arm.resolve();
      cmd_train(arm, opts);
      cmd_eval(arm, opts);
      run_dirs.push_back(arm.out());
    }
  }
  cmd_analyze(run_dirs, base.out(), opts);
}

int exit_code(const std::exception& e) {
  if (dynamic_cast<const NumericError*>(&e)) return 3;
  if (dynamic_cast<const DataError*>(&e)) return 2;
  if (dynamic_cast<const fs::filesystem_error*>(&e)) return 2;
  if (dynamic_cast<const UsageError*>(&e)) return 1;
  return 2;
}

}  // namespace hubpath::cli
