#include "gazebar/shard.hpp"

#include <string>

#include "gazebar/model.hpp"

namespace gazebar {

void Dataset::validate() const {
  if (labels.size() != images.size() || subject_ids.size() != images.size()) {
    throw std::invalid_argument("dataset: images, labels and subject_ids differ in length");
  }
  for (const auto& img : images) require_image_shape(img);
}

std::vector<std::uint8_t> encode_dataset(const Dataset& data) {
  data.validate();
  nlohmann::json manifest = data.manifest;
  manifest["n_samples"] = data.size();
  const std::string manifest_text = manifest.dump();

  ByteWriter w;
  w.put_bytes(std::string_view(kDatasetMagic, 4));
  w.put_u32(kDatasetVersion);
  w.put_u64(data.size());
  w.put_u32(static_cast<std::uint32_t>(kImageChannels));
  w.put_u32(static_cast<std::uint32_t>(kImageSize));
  w.put_u32(static_cast<std::uint32_t>(kImageSize));
  w.put_u64(manifest_text.size());
  w.put_bytes(manifest_text);
  for (const auto& img : data.images) w.put_f64s(img.values());
  for (const auto& g : data.labels) {
    w.put_f64(g.pitch);
    w.put_f64(g.yaw);
  }
  for (std::uint64_t s : data.subject_ids) w.put_u64(s);
  return w.bytes();
}

Dataset decode_dataset(std::vector<std::uint8_t> bytes) {
  ByteReader r(std::move(bytes));
  if (r.remaining() < 4 || r.get_bytes(4) != std::string_view(kDatasetMagic, 4)) {
    throw FormatError(FormatErrc::bad_magic, "not a GBD1 dataset shard");
  }
  const std::uint32_t version = r.get_u32();
  if (version != kDatasetVersion) throw FormatError(FormatErrc::bad_version, "dataset version " + std::to_string(version));
  const std::uint64_t n = r.get_u64();
  const std::uint32_t c = r.get_u32(), h = r.get_u32(), w = r.get_u32();
  if (c != kImageChannels || h != kImageSize || w != kImageSize) {
    throw FormatError(FormatErrc::architecture_mismatch, "image shape [" + std::to_string(c) + "," + std::to_string(h) +
                                                             "," + std::to_string(w) + "] unsupported");
  }
  const std::uint64_t manifest_len = r.get_u64();
  if (manifest_len > r.remaining()) throw FormatError(FormatErrc::truncated, "manifest extends past end of file");
  Dataset data;
  try {
    data.manifest = nlohmann::json::parse(r.get_bytes(manifest_len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(FormatErrc::bad_manifest, e.what());
  }
  if (!data.manifest.is_object() || !data.manifest.contains("n_samples") ||
      data.manifest["n_samples"] != n) {
    throw FormatError(FormatErrc::bad_manifest, "manifest n_samples disagrees with header count " + std::to_string(n));
  }

  const std::size_t per_image = kImageChannels * kImageSize * kImageSize;
  const std::uint64_t need = n * (per_image * 8 + 2 * 8 + 8);
  if (r.remaining() < need) {
    throw FormatError(FormatErrc::truncated, "expected " + std::to_string(need) + " payload bytes, found " +
                                                 std::to_string(r.remaining()));
  }
  data.images.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    Tensor img(Shape{kImageChannels, kImageSize, kImageSize});
    r.get_f64s(img.values());
    data.images.push_back(std::move(img));
  }
  data.labels.resize(n);
  for (auto& g : data.labels) {
    g.pitch = r.get_f64();
    g.yaw = r.get_f64();
  }
  data.subject_ids.resize(n);
  for (auto& s : data.subject_ids) s = r.get_u64();
  r.expect_end();
  return data;
}

void save_dataset(const Dataset& data, const std::filesystem::path& path) {
  write_file_bytes(path, encode_dataset(data));
}

Dataset load_dataset(const std::filesystem::path& path) { return decode_dataset(read_file_bytes(path)); }

}  // namespace gazebar
