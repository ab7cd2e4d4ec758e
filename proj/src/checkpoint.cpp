#include "hubpath/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "hubpath/error.hpp"

namespace hubpath {

std::uint64_t fnv1a64(std::span<const unsigned char> bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 1099511628211ull;
  }
  return h;
}

namespace {

void put_u64(std::vector<unsigned char>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

}  // namespace

std::string descriptor_field(const std::string& descriptor, const std::string& key) {
  const std::string needle = key + "=";
  std::size_t pos = 0;
  while ((pos = descriptor.find(needle, pos)) != std::string::npos) {
    if (pos == 0 || descriptor[pos - 1] == ' ') {
      const std::size_t start = pos + needle.size();
      const std::size_t end = descriptor.find(' ', start);
      return descriptor.substr(start, end == std::string::npos ? std::string::npos : end - start);
    }
    pos += needle.size();
  }
  throw FormatError("checkpoint descriptor lacks '" + key + "': " + descriptor);
}

void write_blob(const std::filesystem::path& path, const std::string& descriptor,
                std::span<const Parameter* const> params) {
  if (descriptor.find('\n') != std::string::npos) throw UsageError("descriptor must be a single line");
  std::size_t count = 0;
  for (const auto* p : params) count += p->size();

  std::vector<unsigned char> blob;
  blob.reserve(count * 8);
  for (const auto* p : params)
    for (double v : p->tensor.values()) put_u64(blob, std::bit_cast<std::uint64_t>(v));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  const std::string header = std::string(kCheckpointMagic) + descriptor + " params=" + std::to_string(count) + "\n";
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
  std::vector<unsigned char> digest;
  put_u64(digest, fnv1a64(blob));
  out.write(reinterpret_cast<const char*>(digest.data()), 8);
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

CheckpointBlob read_blob(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path.string() + "'");
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  const std::size_t magic_len = sizeof(kCheckpointMagic) - 1;
  if (bytes.size() < magic_len) throw TruncatedError("checkpoint '" + path.string() + "' is truncated (no header)");
  if (std::memcmp(bytes.data(), kCheckpointMagic, magic_len) != 0)
    throw FormatError("'" + path.string() + "' is not a HUBPATH1 checkpoint (bad magic)");

  std::size_t eol = magic_len;
  while (eol < bytes.size() && bytes[eol] != '\n') ++eol;
  if (eol == bytes.size()) throw TruncatedError("checkpoint '" + path.string() + "' is truncated (descriptor)");

  CheckpointBlob blob;
  blob.descriptor.assign(bytes.begin() + static_cast<std::ptrdiff_t>(magic_len),
                         bytes.begin() + static_cast<std::ptrdiff_t>(eol));
  std::size_t count = 0;
  try {
    count = std::stoull(descriptor_field(blob.descriptor, "params"));
  } catch (const std::logic_error&) {
    throw FormatError("checkpoint '" + path.string() + "' has a malformed parameter count");
  }

  const std::size_t start = eol + 1;
  const std::size_t need = start + count * 8 + 8;
  if (bytes.size() < need)
    throw TruncatedError("checkpoint '" + path.string() + "' is truncated: " + std::to_string(bytes.size()) +
                         " bytes, expected " + std::to_string(need));
  if (bytes.size() > need) throw FormatError("checkpoint '" + path.string() + "' has trailing bytes");

  const std::span<const unsigned char> payload(bytes.data() + start, count * 8);
  const std::uint64_t stored = get_u64(bytes.data() + start + count * 8);
  if (fnv1a64(payload) != stored) throw DigestError("checkpoint '" + path.string() + "' failed digest verification");

  blob.values.resize(count);
  for (std::size_t i = 0; i < count; ++i) blob.values[i] = std::bit_cast<double>(get_u64(payload.data() + 8 * i));
  return blob;
}

void scatter_blob(const CheckpointBlob& blob, std::span<Parameter* const> params) {
  std::size_t offset = 0;
  for (auto* p : params) {
    if (offset + p->size() > blob.values.size()) throw FormatError("checkpoint holds too few parameters");
    std::copy_n(blob.values.begin() + static_cast<std::ptrdiff_t>(offset), p->size(), p->tensor.data().begin());
    offset += p->size();
  }
  if (offset != blob.values.size()) throw FormatError("checkpoint holds too many parameters");
}

}  // namespace hubpath
