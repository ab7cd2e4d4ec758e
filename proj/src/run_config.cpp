#include "hubpath/run_config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "hubpath/bench.hpp"
#include "hubpath/error.hpp"

namespace hubpath {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_unsigned(const std::string& key, const std::string& text) {
  T v{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (text.empty() || ec != std::errc() || ptr != end)
    throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" + text + "'");
  return v;
}

double parse_real(const std::string& key, const std::string& text) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (text.empty() || ec != std::errc() || ptr != end || !std::isfinite(v))
    throw ConfigError("config key '" + key + "': expected a finite number, got '" + text + "'");
  return v;
}

std::vector<std::size_t> parse_list(const std::string& key, const std::string& text) {
  std::vector<std::size_t> out;
  if (text.empty() || text == "none") return out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_unsigned<std::size_t>(key, trim(item)));
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k{"seed",       "m",            "k",     "lambda",       "lr",
                                          "momentum",   "iters",        "batch", "decay_milestones",
                                          "decay_factor", "suite",      "hub_manifest", "out_dir", "mode"};
  return k;
}

void RunConfig::set(const std::string& key, const std::string& raw) {
  const std::string value = trim(raw);
  if (key == "seed") seed = parse_unsigned<std::uint64_t>(key, value);
  else if (key == "m") m = parse_unsigned<std::size_t>(key, value);
  else if (key == "k") k = parse_unsigned<std::size_t>(key, value);
  else if (key == "lambda") lambda = parse_real(key, value);
  else if (key == "lr") lr = parse_real(key, value);
  else if (key == "momentum") momentum = parse_real(key, value);
  else if (key == "iters") iters = parse_unsigned<std::size_t>(key, value);
  else if (key == "batch") batch = parse_unsigned<std::size_t>(key, value);
  else if (key == "decay_milestones") decay_milestones = parse_list(key, value);
  else if (key == "decay_factor") decay_factor = parse_real(key, value);
  else if (key == "suite") suite = value;
  else if (key == "hub_manifest") hub_manifest = value;
  else if (key == "out_dir") out_dir = value;
  else if (key == "mode") mode = value;
  else throw ConfigError("unknown config key '" + key + "'");
}

std::string RunConfig::get(const std::string& key) const {
  if (key == "seed") return std::to_string(seed);
  if (key == "m") return std::to_string(m);
  if (key == "k") return std::to_string(k);
  if (key == "lambda") return format_double(lambda);
  if (key == "lr") return format_double(lr);
  if (key == "momentum") return format_double(momentum);
  if (key == "iters") return std::to_string(iters);
  if (key == "batch") return std::to_string(batch);
  if (key == "decay_milestones") {
    if (decay_milestones.empty()) return "none";
    std::string s;
    for (std::size_t i = 0; i < decay_milestones.size(); ++i)
      s += (i ? "," : "") + std::to_string(decay_milestones[i]);
    return s;
  }
  if (key == "decay_factor") return format_double(decay_factor);
  if (key == "suite") return suite;
  if (key == "hub_manifest") return hub_manifest;
  if (key == "out_dir") return out_dir;
  if (key == "mode") return mode;
  throw ConfigError("unknown config key '" + key + "'");
}

void RunConfig::resolve() {
  if (out_dir.empty()) throw ConfigError("out_dir must not be empty");
  if (hub_manifest.empty()) hub_manifest = (std::filesystem::path(out_dir) / "hub" / "manifest.txt").string();
  validate();
}

void RunConfig::validate() const {
  if (m < 2 || m > 5) throw ConfigError("m must lie in 2..5 (the synthetic suite has 5 sources)");
  if (k < 1 || k > m) throw ConfigError("k must lie in 1..m");
  if (iters < 1) throw ConfigError("iters must be >= 1");
  for (std::size_t i = 1; i < decay_milestones.size(); ++i)
    if (decay_milestones[i] <= decay_milestones[i - 1]) throw ConfigError("decay_milestones must increase");
  bench::parse_variant(suite);
  parse_mode(mode);
  train_config().validate();
}

std::string RunConfig::snapshot() const {
  std::string out;
  for (const auto& key : keys()) out += key + " = " + get(key) + "\n";
  return out;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig cfg;
  cfg.k = k;
  cfg.lambda = lambda;
  cfg.lr = lr;
  cfg.momentum = momentum;
  cfg.iterations = iters;
  cfg.milestones = decay_milestones;
  cfg.decay = decay_factor;
  cfg.batch = batch;
  cfg.seed = seed;
  cfg.mode = parse_mode(mode);
  return cfg;
}

RunConfig parse_config(const std::string& text, RunConfig base) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    base.set(trim(t.substr(0, eq)), t.substr(eq + 1));
  }
  return base;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

RunConfig layer_config(const std::filesystem::path& file, const std::vector<std::pair<std::string, std::string>>& flags,
                       RunConfig base) {
  RunConfig cfg = file.empty() ? std::move(base) : load_config(file, std::move(base));
  for (const auto& [key, value] : flags) cfg.set(key, value);
  return cfg;
}

}  // namespace hubpath
