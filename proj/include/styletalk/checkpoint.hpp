#pragma once

// Single-file checkpoint container:
//   "STCK" | u32 version | u64 manifest bytes | JSON manifest | f64 LE blob
// The manifest lists every tensor with name, shape, dtype and byte offset into
// the blob, plus the echoed config and training-state scalars.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "styletalk/nn.hpp"

namespace styletalk {

struct CheckpointTensor {
  std::string name;
  MatrixD value;

  bool operator==(const CheckpointTensor&) const = default;
};

struct Checkpoint {
  std::string kind;  // "model", "sync", "style"
  bool frozen = false;
  nlohmann::json config = nlohmann::json::object();
  nlohmann::json state = nlohmann::json::object();
  std::vector<CheckpointTensor> tensors;

  const CheckpointTensor* find(const std::string& name) const;
  /// Appends every tensor of `store` under its full name.
  void add(const nn::ParamStore& store);
  /// Copies tensors into `store`; CheckpointError names a missing or misshapen tensor.
  void restore(nn::ParamStore& store) const;

  bool operator==(const Checkpoint& o) const {
    return kind == o.kind && frozen == o.frozen && config == o.config && state == o.state &&
           tensors == o.tensors;
  }
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace styletalk
