#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "hubpath/objectives.hpp"

namespace hubpath {

/// Effective configuration of one run. Text form is `key = value` per line;
/// blank lines and lines starting with '#' are ignored.
struct RunConfig {
  std::uint64_t seed = 0;
  std::size_t m = 5;
  std::size_t k = 2;
  double lambda = 0.3;
  double lr = 0.01;
  double momentum = 0.9;
  std::size_t iters = 1500;
  std::size_t batch = 48;
  std::vector<std::size_t> decay_milestones{600, 1200};
  double decay_factor = 0.1;
  std::string suite = "standard";
  std::string hub_manifest;  // empty: <out_dir>/hub/manifest.txt
  std::string out_dir = "run";
  std::string mode = "full";

  static const std::vector<std::string>& keys();

  /// Throws ConfigError on an unknown key or a malformed value.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;

  /// Fills derived defaults (hub_manifest) and checks every value.
  void resolve();
  void validate() const;

  /// Every key in canonical order, one `key = value` line each.
  std::string snapshot() const;

  TrainConfig train_config() const;
  std::filesystem::path out() const { return out_dir; }
};

/// Applies `key = value` lines on top of `base`.
RunConfig parse_config(const std::string& text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});

/// Defaults, then the config file (when `file` is non-empty), then `flags`
/// in order: later layers win.
RunConfig layer_config(const std::filesystem::path& file, const std::vector<std::pair<std::string, std::string>>& flags,
                       RunConfig base = {});

/// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

}  // namespace hubpath
