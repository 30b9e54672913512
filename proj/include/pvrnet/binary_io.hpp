#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pvrnet/params.hpp"

namespace pvr {

/// Little-endian encoder shared by checkpoints and dataset blobs.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void raw(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  /// rank u32, dims u32[], values f64[]
  void tensor(std::span<const std::size_t> dims, std::span<const double> values);

  const std::vector<std::uint8_t>& bytes() const { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

/// Bounds-checked decoder; running past the end raises FormatError.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::string raw(std::size_t n);
  void tensor(std::vector<std::size_t>& dims, std::vector<double>& values);

  bool at_end() const { return pos_ == bytes_.size(); }
  std::size_t position() const { return pos_; }

 private:
  void need(std::size_t n) const;
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_atomic(const std::filesystem::path& path, std::string_view text);

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// "PVRF", version u32, then (path length u32, path bytes, tensor)* until EOF.
std::vector<std::uint8_t> encode_checkpoint(const ParameterStore& store);
ParameterStore decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const ParameterStore& store, const std::filesystem::path& path);
ParameterStore load_checkpoint(const std::filesystem::path& path);

}  // namespace pvr
