#include "gazebar/binary_io.hpp"

#include <bit>
#include <fstream>
#include <iterator>

namespace gazebar {

const char* to_string(FormatErrc code) noexcept {
  switch (code) {
    case FormatErrc::io: return "io error";
    case FormatErrc::bad_magic: return "bad magic";
    case FormatErrc::bad_version: return "unsupported version";
    case FormatErrc::truncated: return "truncated";
    case FormatErrc::architecture_mismatch: return "architecture mismatch";
    case FormatErrc::trailing_data: return "trailing data";
    case FormatErrc::bad_manifest: return "bad manifest";
  }
  return "format error";
}

void ByteWriter::put_bytes(std::string_view bytes) { buf_.insert(buf_.end(), bytes.begin(), bytes.end()); }

void ByteWriter::put_u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::put_u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::put_f64(double v) { put_u64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::put_f64s(std::span<const double> values) {
  for (double v : values) put_f64(v);
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(FormatErrc::io, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError(FormatErrc::io, "write failed for " + path.string());
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatErrc::io, "cannot open " + path.string());
  return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void ByteReader::need(std::size_t n) const {
  if (remaining() < n) {
    throw FormatError(FormatErrc::truncated, "needed " + std::to_string(n) + " bytes at offset " +
                                                 std::to_string(pos_) + ", " + std::to_string(remaining()) +
                                                 " available");
  }
}

std::string ByteReader::get_bytes(std::size_t n) {
  need(n);
  std::string s(buf_.begin() + static_cast<std::ptrdiff_t>(pos_), buf_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
  pos_ += n;
  return s;
}

std::uint32_t ByteReader::get_u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf_[pos_ + i]) << (8 * i);
  pos_ += 4;
  return v;
}

std::uint64_t ByteReader::get_u64() {
  need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf_[pos_ + i]) << (8 * i);
  pos_ += 8;
  return v;
}

double ByteReader::get_f64() { return std::bit_cast<double>(get_u64()); }

void ByteReader::get_f64s(std::span<double> out) {
  need(8 * out.size());
  for (double& v : out) v = get_f64();
}

void ByteReader::expect_end() const {
  if (remaining() != 0) {
    throw FormatError(FormatErrc::trailing_data, std::to_string(remaining()) + " unexpected bytes at end of file");
  }
}

}  // namespace gazebar
