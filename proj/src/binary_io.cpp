#include "pvrnet/binary_io.hpp"

#include <bit>
#include <fstream>
#include <iterator>

#include "pvrnet/errors.hpp"

namespace pvr {

void ByteWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::tensor(std::span<const std::size_t> dims, std::span<const double> values) {
  u32(static_cast<std::uint32_t>(dims.size()));
  for (std::size_t d : dims) u32(static_cast<std::uint32_t>(d));
  for (double v : values) f64(v);
}

void ByteReader::need(std::size_t n) const {
  if (bytes_.size() - pos_ < n) {
    throw FormatError("unexpected end of data at byte " + std::to_string(pos_) + " (needed " +
                      std::to_string(n) + " more)");
  }
}

std::uint8_t ByteReader::u8() {
  need(1);
  return bytes_[pos_++];
}

std::uint32_t ByteReader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
  return v;
}

std::uint64_t ByteReader::u64() {
  need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
  return v;
}

double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::string ByteReader::raw(std::size_t n) {
  need(n);
  std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
  pos_ += n;
  return s;
}

void ByteReader::tensor(std::vector<std::size_t>& dims, std::vector<double>& values) {
  const std::uint32_t rank = u32();
  if (rank > 8) throw FormatError("implausible tensor rank " + std::to_string(rank));
  dims.resize(rank);
  const std::size_t max_values = (bytes_.size() - pos_) / 8;
  std::size_t n = 1;
  for (auto& d : dims) {
    d = u32();
    if (d != 0 && n > max_values / d + 1) throw FormatError("tensor larger than remaining data");
    n *= d;
  }
  need(n * 8);
  values.resize(n);
  for (double& v : values) v = f64();
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 1099511628211ull;
  }
  return h;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write '" + tmp.string() + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

void write_text_atomic(const std::filesystem::path& path, std::string_view text) {
  write_file_atomic(path, std::span<const std::uint8_t>(
                              reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<std::uint8_t> encode_checkpoint(const ParameterStore& store) {
  ByteWriter w;
  w.raw("PVRF");
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(store.size()));
  for (const auto& [path, t] : store.entries()) {
    w.u32(static_cast<std::uint32_t>(path.size()));
    w.raw(path);
    w.tensor(t.shape(), t.values());
  }
  // Trailing checksum over everything before it.
  w.u64(fnv1a64(w.bytes()));
  return w.bytes();
}

ParameterStore decode_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (bytes.size() < 4 || r.raw(4) != "PVRF") throw FormatError("not a checkpoint (bad magic)");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  if (bytes.size() < 20) throw FormatError("checkpoint truncated");
  const auto body = bytes.first(bytes.size() - 8);
  ByteReader tail(bytes.last(8));
  if (tail.u64() != fnv1a64(body)) throw FormatError("checkpoint checksum mismatch");
  ByteReader entries(body.subspan(8));
  const std::uint32_t count = entries.u32();
  ParameterStore store;
  std::vector<std::size_t> dims;
  std::vector<double> values;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t len = entries.u32();
    std::string path = entries.raw(len);
    entries.tensor(dims, values);
    if (store.contains(path)) throw FormatError("duplicate parameter '" + path + "' in checkpoint");
    store.add(path, Tensor::from(Shape(dims.begin(), dims.end()), values));
  }
  if (!entries.at_end()) throw FormatError("trailing bytes in checkpoint");
  return store;
}

void save_checkpoint(const ParameterStore& store, const std::filesystem::path& path) {
  write_file_atomic(path, encode_checkpoint(store));
}

ParameterStore load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path));
}

}  // namespace pvr
