#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "hubpath/objectives.hpp"
#include "hubpath/run_config.hpp"

namespace hubpath::cli {

// Run directory layout:
//   config.snapshot      effective configuration
//   hub/                 pretrained hub (manifest.txt + expert_<id>.ckpt)
//   model/               trained pathway: adapted experts, generator.ckpt, aggregator.ckpt
//   data/                target_train.csv, target_test.csv
//   metrics.log          training log
//   weights_dump.csv     per-sample pathway weights from eval
//   report/              CSV tables and line-JSON summaries

struct CommandOptions {
  bool force = false;        // overwrite outputs whose contents would change
  std::ostream* out = nullptr;   // progress and results
  std::ostream* warn = nullptr;  // warnings
};

void cmd_pretrain(const RunConfig& cfg, const CommandOptions& opts);
void cmd_train(const RunConfig& cfg, const CommandOptions& opts);
/// Returns target test accuracy.
double cmd_eval(const RunConfig& cfg, const CommandOptions& opts);
/// Writes report tables for the given run directories under out_dir/report.
void cmd_analyze(const std::vector<std::filesystem::path>& runs, const std::filesystem::path& out_dir,
                 const CommandOptions& opts);

struct SweepPlan {
  std::vector<std::uint64_t> seeds;   // empty: cfg.seed .. cfg.seed + 4
  std::vector<std::string> modes;     // empty: full, no_explore, no_exploit, random_path
  std::vector<std::size_t> ks;        // extra k values run in full mode
};

/// Pretrains one hub per seed, trains and evaluates every arm in
/// out_dir/seed_<s>/<mode>_k<k>, then analyzes all of them into out_dir/report.
void cmd_sweep(const RunConfig& cfg, const SweepPlan& plan, const CommandOptions& opts);

void save_pathway(const PathwayModel& model, const std::filesystem::path& dir);
PathwayModel load_pathway(const std::filesystem::path& dir);

/// 1 usage/config, 2 data/artifact, 3 numeric.
int exit_code(const std::exception& e);

}  // namespace hubpath::cli
