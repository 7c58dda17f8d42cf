#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace reposer {

/// Checkpoint container, version 1. Layout (all integers little-endian):
///
///   bytes 0..7    magic "RPSCKPT1"
///   bytes 8..11   uint32 format version (1)
///   bytes 12..15  uint32 reserved (0)
///   bytes 16..23  uint64 manifest length L
///   next L bytes  UTF-8 JSON manifest
///   remainder     tensor data
///
/// The manifest's "tensors" array lists {name, dtype, shape, offset, nbytes};
/// offsets are relative to the start of the tensor data. dtype is "f32" or
/// "f64", stored little-endian and row-major. Everything else in the manifest
/// is metadata (hyperparameters, step counters, RNG keys, config).
struct Tensor {
  std::string name;
  std::vector<std::int64_t> shape;
  std::vector<float> f32;
  std::vector<double> f64;
  bool is_f64 = false;

  std::size_t numel() const;
};

struct Checkpoint {
  nlohmann::ordered_json manifest = nlohmann::ordered_json::object();
  std::vector<Tensor> tensors;

  const Tensor& tensor(const std::string& name) const;
  bool has(const std::string& name) const;
  void add(std::string name, std::vector<std::int64_t> shape, std::vector<float> data);
  void add(std::string name, std::vector<std::int64_t> shape, std::vector<double> data);
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Writes to a temporary sibling and renames, so a crash never leaves a
/// truncated checkpoint behind.
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// 64-bit FNV-1a of the file contents, hex encoded.
std::string file_hash(const std::filesystem::path& path);
std::string string_hash(const std::string& s);

}  // namespace reposer
