#include "gazebar/checkpoint.hpp"

#include <string>

namespace gazebar {

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  ByteWriter w;
  w.put_bytes(std::string_view(kCheckpointMagic, 4));
  w.put_u32(kCheckpointVersion);
  const auto layers = ckpt.net.layers();
  w.put_u32(static_cast<std::uint32_t>(layers.size()));
  for (const LayerParams* l : layers) {
    w.put_u32(static_cast<std::uint32_t>(l->kind));
    w.put_u32(static_cast<std::uint32_t>(l->in_dim()));
    w.put_u32(static_cast<std::uint32_t>(l->out_dim()));
  }
  w.put_u32(static_cast<std::uint32_t>(ckpt.net.feature_dim));
  for (const LayerParams* l : layers) {
    w.put_f64s(l->weights.values());
    w.put_f64s(l->bias.values());
  }
  w.put_u64(ckpt.step);
  w.put_u64(ckpt.seed);
  return w.bytes();
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_file_bytes(path, encode_checkpoint(ckpt));
}

Checkpoint decode_checkpoint(std::vector<std::uint8_t> bytes) {
  ByteReader r(std::move(bytes));
  if (r.remaining() < 4 || r.get_bytes(4) != std::string_view(kCheckpointMagic, 4)) {
    throw FormatError(FormatErrc::bad_magic, "not a GBC1 checkpoint");
  }
  const std::uint32_t version = r.get_u32();
  if (version != kCheckpointVersion) {
    throw FormatError(FormatErrc::bad_version, "checkpoint version " + std::to_string(version));
  }

  Checkpoint ckpt;
  ckpt.net = GazeNet::zeros();
  auto layers = ckpt.net.layers();
  const std::uint32_t count = r.get_u32();
  if (count != layers.size()) {
    throw FormatError(FormatErrc::architecture_mismatch,
                      "expected " + std::to_string(layers.size()) + " layers, file has " + std::to_string(count));
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::uint32_t kind = r.get_u32();
    const std::uint32_t in = r.get_u32();
    const std::uint32_t out = r.get_u32();
    if (kind != static_cast<std::uint32_t>(layers[i]->kind) || in != layers[i]->in_dim() ||
        out != layers[i]->out_dim()) {
      throw FormatError(FormatErrc::architecture_mismatch, "layer " + std::to_string(i) + " descriptor (" +
                                                               std::to_string(kind) + "," + std::to_string(in) +
                                                               "," + std::to_string(out) + ") does not match");
    }
  }
  const std::uint32_t feature_dim = r.get_u32();
  if (feature_dim != ckpt.net.feature_dim) {
    throw FormatError(FormatErrc::architecture_mismatch, "feature_dim " + std::to_string(feature_dim));
  }
  for (LayerParams* l : layers) {
    r.get_f64s(l->weights.values());
    r.get_f64s(l->bias.values());
  }
  ckpt.step = r.get_u64();
  ckpt.seed = r.get_u64();
  r.expect_end();
  return ckpt;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file_bytes(path));
}

}  // namespace gazebar
