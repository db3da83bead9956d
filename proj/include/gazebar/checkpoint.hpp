#pragma once

#include <cstdint>
#include <filesystem>

#include "gazebar/binary_io.hpp"
#include "gazebar/model.hpp"

namespace gazebar {

inline constexpr char kCheckpointMagic[4] = {'G', 'B', 'C', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Checkpoint file, all integers and floats little-endian:
///
///   "GBC1"  u32 version
///   u32 layer_count, then per layer: u32 kind (0 conv2d, 1 dense), u32 in, u32 out
///   u32 feature_dim
///   per layer: weights (f64 x numel), bias (f64 x out)
///   u64 training step, u64 master seed
struct Checkpoint {
  GazeNet net;
  std::uint64_t step = 0;
  std::uint64_t seed = 0;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);

/// Throws FormatError: bad_magic, bad_version, truncated, architecture_mismatch,
/// trailing_data or io.
Checkpoint load_checkpoint(const std::filesystem::path& path);
Checkpoint decode_checkpoint(std::vector<std::uint8_t> bytes);

}  // namespace gazebar
