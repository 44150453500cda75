#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace accel2grf::io {

namespace fs = std::filesystem;

/// Shortest decimal text that parses back to the identical double.
std::string format_double(double v);
/// Strict parse of a full field; nullopt on trailing garbage, empty or non-finite text.
std::optional<double> parse_double(std::string_view text);

std::string read_text(const fs::path& path);
std::vector<std::uint8_t> read_bytes(const fs::path& path);
void write_text(const fs::path& path, std::string_view text);
void write_bytes(const fs::path& path, std::span<const std::uint8_t> bytes);
void ensure_directory(const fs::path& dir);

std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::string_view text);
std::string sha256_file(const fs::path& path);

/// Little-endian byte sink used for canonical encodings and flat binary files.
class ByteWriter {
 public:
  void put_u32(std::uint32_t v);
  void put_u64(std::uint64_t v);
  void put_f64(double v);
  void put_string(std::string_view s);
  const std::vector<std::uint8_t>& bytes() const { return bytes_; }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
  std::uint32_t get_u32();
  std::uint64_t get_u64();
  double get_f64();
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const;
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

/// Splits one CSV line on commas; no quoting (the track formats never need it).
std::vector<std::string_view> split_csv_line(std::string_view line);

}  // namespace accel2grf::io
