#include <algorithm>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hubpath/commands.hpp"
#include "hubpath/error.hpp"
#include "hubpath/run_config.hpp"

using namespace hubpath;

namespace {

const char* kPrecedence =
    "\nConfiguration precedence: command-line flags override the --config file, which overrides\n"
    "built-in defaults. eval reads <out_dir>/config.snapshot as its file when --config is absent.\n"
    "Exit codes: 0 success, 1 usage/config error, 2 data/artifact error, 3 numerical failure.\n";

struct ConfigFlags {
  std::string file;
  bool force = false;
  std::vector<std::pair<std::string, CLI::Option*>> options;
  std::vector<std::string> values;
};

std::string help_for(const std::string& key) {
  if (key == "seed") return "run seed; every random stream derives from it (default 0)";
  if (key == "m") return "number of hub experts, 2..5 (default 5)";
  if (key == "k") return "experts activated per sample (default 2)";
  if (key == "lambda") return "exploration loss weight (default 0.3)";
  if (key == "lr") return "learning rate (default 0.01)";
  if (key == "momentum") return "SGD momentum (default 0.9)";
  if (key == "iters") return "training iterations (default 1500)";
  if (key == "batch") return "minibatch size (default 48)";
  if (key == "decay_milestones") return "comma-separated iterations where lr decays, or none (default 600,1200)";
  if (key == "decay_factor") return "lr multiplier at each milestone (default 0.1)";
  if (key == "suite") return "synthetic suite: standard|redundant (default standard)";
  if (key == "hub_manifest") return "pretrained hub manifest (default <out_dir>/hub/manifest.txt)";
  if (key == "out_dir") return "run directory (default run)";
  return "full|no_explore|no_exploit|random_path|dense (default full)";
}

void add_config_flags(CLI::App* app, ConfigFlags& flags, bool with_file = true) {
  if (with_file) app->add_option("-c,--config", flags.file, "config file of `key = value` lines");
  app->add_flag("--force", flags.force, "overwrite outputs whose contents would change");
  flags.values.resize(RunConfig::keys().size());
  std::size_t i = 0;
  for (const auto& key : RunConfig::keys()) {
    std::string dashed = key;
    std::replace(dashed.begin(), dashed.end(), '_', '-');
    std::string names = "--" + dashed;
    if (dashed != key) names += ",--" + key;
    flags.options.emplace_back(key, app->add_option(names, flags.values[i++], help_for(key)));
  }
}

RunConfig effective(const ConfigFlags& flags, bool eval_defaults = false) {
  std::vector<std::pair<std::string, std::string>> given;
  std::string out_dir = RunConfig{}.out_dir;
  for (std::size_t i = 0; i < flags.options.size(); ++i) {
    if (!flags.options[i].second->count()) continue;
    given.emplace_back(flags.options[i].first, flags.values[i]);
    if (flags.options[i].first == "out_dir") out_dir = flags.values[i];
  }
  std::filesystem::path file = flags.file;
  if (file.empty() && eval_defaults) {
    file = std::filesystem::path(out_dir) / "config.snapshot";
    if (!std::filesystem::exists(file))
      throw DataError("no config.snapshot in '" + out_dir + "'; train first or pass --config");
  }
  return layer_config(file, given);
}

template <typename T>
std::vector<T> parse_csv_list(const std::string& text, const char* what) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if constexpr (std::is_same_v<T, std::string>) {
      out.push_back(item);
    } else {
      try {
        std::size_t used = 0;
        const unsigned long long v = std::stoull(item, &used);
        if (used != item.size()) throw std::invalid_argument(item);
        out.push_back(static_cast<T>(v));
      } catch (const std::logic_error&) {
        throw ConfigError(std::string("bad ") + what + " list entry '" + item + "'");
      }
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hubpath: route inputs through a hub of pretrained experts and train the pathway."};
  app.footer(kPrecedence);
  app.require_subcommand(1);

  ConfigFlags pre, tr, ev, sw;
  auto* pretrain = app.add_subcommand("pretrain", "build the synthetic suite and pretrain the expert hub");
  add_config_flags(pretrain, pre);
  auto* train = app.add_subcommand("train", "train generator, aggregator and experts on the target task");
  add_config_flags(train, tr);
  auto* eval = app.add_subcommand("eval", "evaluate a trained run and dump per-sample pathway weights");
  add_config_flags(eval, ev);

  std::vector<std::string> run_dirs;
  std::string analyze_out = "analysis";
  auto* analyze = app.add_subcommand("analyze", "write report tables for completed run directories");
  analyze->add_option("runs", run_dirs, "run directories")->required();
  analyze->add_option("--out-dir,--out_dir", analyze_out, "report root; tables go to <out-dir>/report");

  std::string seeds, modes, ks;
  auto* sweep = app.add_subcommand("sweep", "pretrain, train, evaluate and analyze a grid of seeds and arms");
  add_config_flags(sweep, sw);
  sweep->add_option("--seeds", seeds, "comma-separated seeds (default seed..seed+4)");
  sweep->add_option("--modes", modes, "comma-separated modes (default full,no_explore,no_exploit,random_path)");
  sweep->add_option("--ks", ks, "extra comma-separated k values trained in full mode");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*pretrain) {
      cli::cmd_pretrain(effective(pre), {pre.force});
    } else if (*train) {
      cli::cmd_train(effective(tr), {tr.force});
    } else if (*eval) {
      cli::cmd_eval(effective(ev, true), {ev.force});
    } else if (*analyze) {
      std::vector<std::filesystem::path> dirs(run_dirs.begin(), run_dirs.end());
      cli::cmd_analyze(dirs, analyze_out, {});
    } else if (*sweep) {
      cli::SweepPlan plan;
      if (!seeds.empty()) plan.seeds = parse_csv_list<std::uint64_t>(seeds, "seed");
      if (!modes.empty()) plan.modes = parse_csv_list<std::string>(modes, "mode");
      if (!ks.empty()) plan.ks = parse_csv_list<std::size_t>(ks, "k");
      cli::cmd_sweep(effective(sw), plan, {sw.force});
    }
  } catch (const std::exception& e) {
    std::cerr << "hubpath: error: " << e.what() << '\n';
    return cli::exit_code(e);
  }
  return 0;
}
