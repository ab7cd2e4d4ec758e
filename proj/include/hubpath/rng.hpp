#pragma once

#include <cstdint>
#include <random>

namespace hubpath {

// All randomness derives from one run seed. Each consumer draws from its own
// stream seeded with seed + role offset (+ index for per-expert roles), so
// components stay reproducible independently of each other.
namespace seed_role {
inline constexpr std::uint64_t suite = 1000;
inline constexpr std::uint64_t pretrain = 2000;     // + expert index
inline constexpr std::uint64_t head = 3000;         // + expert index
inline constexpr std::uint64_t generator = 4000;
inline constexpr std::uint64_t aggregator = 5000;
inline constexpr std::uint64_t noise = 6000;
inline constexpr std::uint64_t shuffle = 7000;
inline constexpr std::uint64_t random_path = 8000;
inline constexpr std::uint64_t finetune = 9000;     // + expert index
inline constexpr std::uint64_t analysis = 10000;
}  // namespace seed_role

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t role, std::uint64_t index = 0) {
  return seed + role + index;
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  double normal() { return normal_(engine_); }
  std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_); }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace hubpath
