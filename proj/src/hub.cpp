#include "hubpath/hub.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "hubpath/checkpoint.hpp"
#include "hubpath/error.hpp"

namespace hubpath {

std::string activation_name(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  throw UsageError("unknown activation '" + name + "' (expected relu or tanh)");
}

void ArchDescriptor::validate() const {
  if (widths.size() < 2) throw UsageError("architecture needs an input width and at least one body layer");
  for (auto w : widths)
    if (w == 0) throw UsageError("architecture widths must be positive");
  if (source_head == 0) throw UsageError("source head width must be positive");
}

std::uint64_t ArchDescriptor::macs_per_sample() const {
  std::uint64_t macs = 0;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) macs += widths[i] * widths[i + 1];
  return macs + body_width() * head_width();
}

std::size_t ArchDescriptor::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) n += widths[i] * widths[i + 1] + widths[i + 1];
  return n + body_width() * head_width() + head_width();
}

AffineParams make_affine(const std::string& name, ParamGroup group, std::size_t fan_in, std::size_t fan_out,
                         Rng& rng, int expert_index) {
  const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  Tensor w({fan_in, fan_out});
  for (auto& v : w.data()) v = rng.uniform(-bound, bound);
  Tensor b({fan_out});
  for (auto& v : b.data()) v = rng.uniform(-bound, bound);
  return AffineParams{Parameter(name + ".weight", group, std::move(w), expert_index),
                      Parameter(name + ".bias", group, std::move(b), expert_index)};
}

Expert build_expert(const ArchDescriptor& arch, std::uint64_t seed, int id, std::string provenance) {
  arch.validate();
  Rng rng(seed);
  Expert e;
  e.id = id;
  e.arch = arch;
  e.provenance = std::move(provenance);
  const std::string prefix = "expert" + std::to_string(id);
  for (std::size_t i = 0; i + 1 < arch.widths.size(); ++i)
    e.body.push_back(make_affine(prefix + ".body" + std::to_string(i), ParamGroup::expert, arch.widths[i],
                                 arch.widths[i + 1], rng, id));
  e.head = make_affine(prefix + ".head", ParamGroup::expert, arch.body_width(), arch.head_width(), rng, id);
  return e;
}

Expert replace_head(const Expert& e, std::size_t classes, std::uint64_t seed) {
  if (classes == 0) throw UsageError("target class count must be positive");
  Expert out = e;
  out.arch.target_head = classes;
  Rng rng(seed);
  out.head = make_affine("expert" + std::to_string(e.id) + ".head", ParamGroup::expert, e.arch.body_width(), classes,
                         rng, e.id);
  out.counter().reset();
  return out;
}

Var Expert::forward(Tape& tape, Var x) {
  const Tensor& in = x.value();
  if (in.rank() != 2 || in.shape()[1] != arch.input_dim())
    throw ShapeError("expert " + std::to_string(id) + " expects [B," + std::to_string(arch.input_dim()) +
                     "] input, got " + shape_string(in.shape()));
  const std::size_t batch = in.shape()[0];
  Var h = x;
  for (auto& layer : body) {
    h = affine(h, tape.param(layer.weight), tape.param(layer.bias));
    h = arch.activation == Activation::relu ? relu(h) : tanh(h);
  }
  Var logits = affine(h, tape.param(head.weight), tape.param(head.bias));
  counter_.add_macs(batch * macs_per_sample());
  return logits;
}

Tensor Expert::infer(const Tensor& x) {
  Tape tape;
  return forward(tape, tape.constant(x)).value();
}

std::vector<Parameter*> Expert::parameters() {
  std::vector<Parameter*> out;
  for (auto& layer : body) {
    out.push_back(&layer.weight);
    out.push_back(&layer.bias);
  }
  out.push_back(&head.weight);
  out.push_back(&head.bias);
  return out;
}

std::vector<const Parameter*> Expert::parameters() const {
  std::vector<const Parameter*> out;
  for (const auto* p : const_cast<Expert*>(this)->parameters()) out.push_back(p);
  return out;
}

std::size_t Expert::parameter_count() const {
  std::size_t n = 0;
  for (const auto* p : parameters()) n += p->size();
  return n;
}

void Expert::relabel() {
  for (auto* p : parameters()) p->expert_index = id;
}

// ---- hub -----------------------------------------------------------------

void Hub::validate_adapted() const {
  if (experts_.empty()) throw UsageError("hub is empty");
  const auto dim = experts_.front().arch.input_dim();
  const auto classes = experts_.front().arch.head_width();
  for (const auto& e : experts_) {
    if (e.arch.input_dim() != dim)
      throw ShapeError("expert " + std::to_string(e.id) + " input dim " + std::to_string(e.arch.input_dim()) +
                       " differs from hub input dim " + std::to_string(dim));
    if (e.arch.head_width() != classes)
      throw ShapeError("expert " + std::to_string(e.id) + " emits " + std::to_string(e.arch.head_width()) +
                       " logits, hub expects " + std::to_string(classes));
  }
}

std::size_t Hub::input_dim() const { return experts_.at(0).arch.input_dim(); }
std::size_t Hub::classes() const { return experts_.at(0).arch.head_width(); }

std::uint64_t Hub::total_macs() const {
  std::uint64_t n = 0;
  for (const auto& e : experts_) n += e.counter().macs();
  return n;
}

void Hub::reset_counters() {
  for (auto& e : experts_) e.counter().reset();
}

std::vector<Parameter*> Hub::parameters() {
  std::vector<Parameter*> out;
  for (auto& e : experts_)
    for (auto* p : e.parameters()) out.push_back(p);
  return out;
}

// ---- persistence ---------------------------------------------------------

namespace {

std::string join_widths(const std::vector<std::size_t>& widths) {
  std::string s;
  for (std::size_t i = 0; i < widths.size(); ++i) s += (i ? "," : "") + std::to_string(widths[i]);
  return s;
}

std::vector<std::size_t> parse_widths(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stoul(item));
    } catch (const std::logic_error&) {
      throw FormatError("malformed width list '" + text + "'");
    }
  }
  return out;
}

}  // namespace

void save_checkpoint(const Expert& e, const std::filesystem::path& path) {
  const std::string descriptor = "expert id=" + std::to_string(e.id) + " widths=" + join_widths(e.arch.widths) +
                                 " activation=" + activation_name(e.arch.activation) +
                                 " source_head=" + std::to_string(e.arch.source_head) +
                                 " target_head=" + std::to_string(e.arch.target_head) +
                                 " provenance=" + (e.provenance.empty() ? "-" : e.provenance);
  const auto params = e.parameters();
  write_blob(path, descriptor, params);
}

Expert load_checkpoint(const std::filesystem::path& path) {
  const CheckpointBlob blob = read_blob(path);
  ArchDescriptor arch;
  int id = 0;
  try {
    arch.widths = parse_widths(descriptor_field(blob.descriptor, "widths"));
    arch.activation = parse_activation(descriptor_field(blob.descriptor, "activation"));
    arch.source_head = std::stoul(descriptor_field(blob.descriptor, "source_head"));
    arch.target_head = std::stoul(descriptor_field(blob.descriptor, "target_head"));
    id = std::stoi(descriptor_field(blob.descriptor, "id"));
    arch.validate();
  } catch (const UsageError& err) {
    throw FormatError("checkpoint '" + path.string() + "': " + err.what());
  } catch (const std::logic_error&) {
    throw FormatError("checkpoint '" + path.string() + "' has a malformed descriptor");
  }
  std::string provenance = descriptor_field(blob.descriptor, "provenance");
  if (provenance == "-") provenance.clear();
  Expert e = build_expert(arch, 0, id, provenance);
  const auto params = e.parameters();
  scatter_blob(blob, params);
  return e;
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write manifest '" + path.string() + "'");
  for (const auto& e : entries)
    out << e.id << ' ' << e.checkpoint.generic_string() << ' ' << (e.provenance.empty() ? "-" : e.provenance) << '\n';
  if (!out) throw DataError("write failed for manifest '" + path.string() + "'");
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open hub manifest '" + path.string() + "'");
  std::vector<ManifestEntry> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    ManifestEntry e;
    std::string ckpt;
    if (!(ls >> e.id >> ckpt >> e.provenance))
      throw FormatError("manifest '" + path.string() + "' line " + std::to_string(lineno) +
                        ": expected '<id> <checkpoint-path> <provenance-tag>'");
    if (e.provenance == "-") e.provenance.clear();
    e.checkpoint = ckpt;
    if (e.checkpoint.is_relative()) e.checkpoint = path.parent_path() / e.checkpoint;
    entries.push_back(std::move(e));
  }
  return entries;
}

void save_hub(const Hub& hub, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<ManifestEntry> entries;
  for (const auto& e : hub.experts()) {
    const std::string name = "expert_" + std::to_string(e.id) + ".ckpt";
    save_checkpoint(e, dir / name);
    entries.push_back({e.id, name, e.provenance});
  }
  write_manifest(dir / "manifest.txt", entries);
}

Hub load_hub(const std::filesystem::path& manifest) {
  std::vector<Expert> experts;
  for (const auto& entry : read_manifest(manifest)) {
    Expert e = load_checkpoint(entry.checkpoint);
    e.id = entry.id;
    e.provenance = entry.provenance;
    e.relabel();
    experts.push_back(std::move(e));
  }
  if (experts.empty()) throw DataError("hub manifest '" + manifest.string() + "' lists no experts");
  return Hub(std::move(experts));
}

}  // namespace hubpath
