#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

#include "gazebar/binary_io.hpp"
#include "gazebar/gaze.hpp"
#include "gazebar/tensor.hpp"

namespace gazebar {

inline constexpr char kDatasetMagic[4] = {'G', 'B', 'D', '1'};
inline constexpr std::uint32_t kDatasetVersion = 1;

/// In-memory dataset shard: images [3,32,32] in [0,1], labels, subject ids.
struct Dataset {
  std::vector<Tensor> images;
  std::vector<GazeLabel> labels;
  std::vector<std::uint64_t> subject_ids;
  nlohmann::json manifest = nlohmann::json::object();

  std::size_t size() const noexcept { return images.size(); }
  void validate() const;
};

/// Shard file, little-endian:
///
///   "GBD1"  u32 version
///   u64 N   u32 C  u32 H  u32 W
///   u64 manifest_len, manifest (UTF-8 JSON, carries "n_samples" == N)
///   images  f64 x N*C*H*W
///   labels  f64 x N*2 (pitch, yaw)
///   subject_ids u64 x N
std::vector<std::uint8_t> encode_dataset(const Dataset& data);
Dataset decode_dataset(std::vector<std::uint8_t> bytes);

void save_dataset(const Dataset& data, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace gazebar
