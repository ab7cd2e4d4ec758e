#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hubpath/tensor.hpp"

namespace hubpath {

inline constexpr char kCheckpointMagic[] = "HUBPATH1";

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::span<const unsigned char> bytes);

/// Raw container contents: the descriptor text line and the parameter values
/// in declaration order.
struct CheckpointBlob {
  std::string descriptor;
  std::vector<double> values;
};

// Layout:
//   "HUBPATH1"
//   descriptor line, terminated by '\n'; must contain `params=<count>`
//   count little-endian IEEE-754 doubles
//   little-endian FNV-1a 64 digest of the double bytes
void write_blob(const std::filesystem::path& path, const std::string& descriptor,
                std::span<const Parameter* const> params);
CheckpointBlob read_blob(const std::filesystem::path& path);

/// Copies blob values into params in order; sizes must match exactly.
void scatter_blob(const CheckpointBlob& blob, std::span<Parameter* const> params);

/// `key=value` lookup inside a descriptor line.
std::string descriptor_field(const std::string& descriptor, const std::string& key);

}  // namespace hubpath
