#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gazebar {

enum class FormatErrc {
  io,
  bad_magic,
  bad_version,
  truncated,
  architecture_mismatch,
  trailing_data,
  bad_manifest,
};

const char* to_string(FormatErrc code) noexcept;

/// Raised for unreadable, unwritable or malformed checkpoint/dataset files.
class FormatError : public std::runtime_error {
 public:
  FormatError(FormatErrc code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}
  FormatErrc code() const noexcept { return code_; }

 private:
  FormatErrc code_;
};

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

/// Little-endian byte sink.
class ByteWriter {
 public:
  void put_bytes(std::string_view bytes);
  void put_u32(std::uint32_t v);
  void put_u64(std::uint64_t v);
  void put_f64(double v);
  void put_f64s(std::span<const double> values);

  const std::vector<std::uint8_t>& bytes() const noexcept { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

/// Little-endian byte source; any short read raises FormatErrc::truncated.
class ByteReader {
 public:
  explicit ByteReader(std::vector<std::uint8_t> bytes) : buf_(std::move(bytes)) {}

  std::string get_bytes(std::size_t n);
  std::uint32_t get_u32();
  std::uint64_t get_u64();
  double get_f64();
  void get_f64s(std::span<double> out);

  std::size_t remaining() const noexcept { return buf_.size() - pos_; }
  void expect_end() const;

 private:
  void need(std::size_t n) const;

  std::vector<std::uint8_t> buf_;
  std::size_t pos_ = 0;
};

}  // namespace gazebar
