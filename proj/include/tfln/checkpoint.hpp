#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tfln/tensor.hpp"

namespace tfln {

/// A snapshot of named parameter tensors plus the global step. Round-trips
/// bit-exactly through the on-disk format:
///
///   magic "TFLN" | version u32 LE (=1) | global_step u64 LE |
///   tensor count u32 LE |
///   per tensor: name length u16 LE, name bytes, rows u32 LE, cols u32 LE,
///               rows*cols f64 LE |
///   CRC32 (u32 LE) of all preceding bytes
///
/// Tensors are written in name order, so identical contents produce
/// byte-identical files.
struct Checkpoint {
  std::int64_t global_step = 0;
  std::map<std::string, Tensor> tensors;

  bool operator==(const Checkpoint&) const = default;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void checkpoint_save(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint checkpoint_restore(const std::filesystem::path& path);

/// Conventional file name for a step's checkpoint: "ckpt-<step>".
std::string checkpoint_file_name(std::int64_t global_step);

/// Highest-step "ckpt-*" file in a directory, if any.
std::optional<std::filesystem::path> find_latest_checkpoint(
    const std::filesystem::path& dir);

}  // namespace tfln
