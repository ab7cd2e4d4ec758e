#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hubpath/rng.hpp"
#include "hubpath/tape.hpp"

namespace hubpath {

enum class Activation { relu, tanh };

std::string activation_name(Activation a);
Activation parse_activation(const std::string& name);

/// Shape of one expert: widths[0] is the input dimension, the remaining
/// entries are hidden (body) widths. The head maps the last body width to
/// source_head logits, or target_head once adapted.
struct ArchDescriptor {
  std::vector<std::size_t> widths;
  Activation activation = Activation::relu;
  std::size_t source_head = 0;
  std::size_t target_head = 0;

  void validate() const;
  std::size_t input_dim() const { return widths.front(); }
  std::size_t body_width() const { return widths.back(); }
  std::size_t head_width() const { return target_head ? target_head : source_head; }
  /// Multiply-accumulates of one sample through body and head.
  std::uint64_t macs_per_sample() const;
  std::size_t parameter_count() const;

  bool operator==(const ArchDescriptor&) const = default;
};

/// Accumulates multiply-accumulate counts; safe to bump from several threads.
class FlopCounter {
 public:
  FlopCounter() = default;
  FlopCounter(const FlopCounter& other) : macs_(other.macs()) {}
  FlopCounter& operator=(const FlopCounter& other) {
    macs_.store(other.macs());
    return *this;
  }

  void add_macs(std::uint64_t n) { macs_.fetch_add(n, std::memory_order_relaxed); }
  std::uint64_t macs() const { return macs_.load(std::memory_order_relaxed); }
  /// Two floating-point operations per multiply-accumulate.
  std::uint64_t flops() const { return 2 * macs(); }
  void reset() { macs_.store(0); }

 private:
  std::atomic<std::uint64_t> macs_{0};
};

class Expert {
 public:
  int id = 0;
  ArchDescriptor arch;
  std::string provenance;
  std::vector<AffineParams> body;
  AffineParams head;

  /// Logits for x [B, input_dim]; bumps the FLOP counter by B * macs_per_sample().
  Var forward(Tape& tape, Var x);
  /// Convenience forward without keeping a tape around.
  Tensor infer(const Tensor& x);

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  std::size_t parameter_count() const;
  std::uint64_t macs_per_sample() const { return arch.macs_per_sample(); }

  FlopCounter& counter() { return counter_; }
  const FlopCounter& counter() const { return counter_; }

  /// Re-tags every parameter with this expert's id.
  void relabel();

 private:
  FlopCounter counter_;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialized dense layer.
AffineParams make_affine(const std::string& name, ParamGroup group, std::size_t fan_in, std::size_t fan_out,
                         Rng& rng, int expert_index = -1);

Expert build_expert(const ArchDescriptor& arch, std::uint64_t seed, int id = 0, std::string provenance = {});

/// Keeps the body bit-exactly and swaps in a freshly initialized
/// [body_width, classes] head.
Expert replace_head(const Expert& e, std::size_t classes, std::uint64_t seed);

/// m experts adapted to a common target class count.
class Hub {
 public:
  Hub() = default;
  explicit Hub(std::vector<Expert> experts) : experts_(std::move(experts)) {}

  std::size_t size() const { return experts_.size(); }
  Expert& operator[](std::size_t i) { return experts_[i]; }
  const Expert& operator[](std::size_t i) const { return experts_[i]; }
  std::vector<Expert>& experts() { return experts_; }
  const std::vector<Expert>& experts() const { return experts_; }

  /// Throws unless all experts share an input dimension and emit the same number of logits.
  void validate_adapted() const;
  std::size_t input_dim() const;
  std::size_t classes() const;

  std::uint64_t total_macs() const;
  void reset_counters();
  std::vector<Parameter*> parameters();

 private:
  std::vector<Expert> experts_;
};

// ---- persistence ---------------------------------------------------------

void save_checkpoint(const Expert& e, const std::filesystem::path& path);
Expert load_checkpoint(const std::filesystem::path& path);

struct ManifestEntry {
  int id = 0;
  std::filesystem::path checkpoint;
  std::string provenance;
};

/// One line per expert: `<id> <checkpoint-path> <provenance-tag>`. Relative
/// checkpoint paths resolve against the manifest's directory.
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);

/// Writes every expert as expert_<id>.ckpt next to a manifest.txt in dir.
void save_hub(const Hub& hub, const std::filesystem::path& dir);
Hub load_hub(const std::filesystem::path& manifest);

}  // namespace hubpath
