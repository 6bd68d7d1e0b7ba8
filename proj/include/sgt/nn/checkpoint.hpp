#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sgt/nn/tensor.hpp"

namespace sgt::nn {

// Checkpoint layout:
//
//   SGTCKPT <version>\n
//   meta <key> <value>\n          (zero or more)
//   tensor <name> <rows> <cols>\n (manifest, one per tensor)
//   data\n
//   <rows*cols little-endian IEEE-754 doubles per tensor, manifest order>
inline constexpr int kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NamedTensor {
  std::string name;
  Matrix value;
};

struct Checkpoint {
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<NamedTensor> tensors;

  const std::string* find_meta(const std::string& key) const;
};

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

Checkpoint snapshot(std::span<Param* const> params);
// Copies tensor values into params; names and shapes must agree with the manifest.
void restore(const Checkpoint& ckpt, std::span<Param* const> params);

}  // namespace sgt::nn
