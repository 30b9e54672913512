#include <cstdio>

#include <json.hpp>

#include "pvrnet/binary_io.hpp"
#include "pvrnet/config.hpp"
#include "pvrnet/errors.hpp"
#include "pvrnet/synth.hpp"

namespace pvr {

namespace {

constexpr std::uint32_t kDatasetVersion = 1;
constexpr const char* kDatasetMagic = "PVRD";

void write_sample(ByteWriter& w, const ShapeSample& s, bool test) {
  w.u8(test ? 1 : 0);
  w.u64(s.sample_id);
  w.u32(s.class_id);
  w.u64(s.generator_seed);
  w.f64(s.elevation_deg);
  w.u32(static_cast<std::uint32_t>(s.azimuths_deg.size()));
  for (double a : s.azimuths_deg) w.f64(a);
  const std::size_t pdims[2] = {s.points.rows, s.points.cols};
  w.tensor(pdims, s.points.data);
  const std::size_t vdims[2] = {s.views.rows, s.views.cols};
  w.tensor(vdims, s.views.data);
}

Matrix read_matrix(ByteReader& r) {
  std::vector<std::size_t> dims;
  Matrix m;
  r.tensor(dims, m.data);
  if (dims.size() != 2) throw FormatError("dataset matrix must have rank 2");
  m.rows = dims[0];
  m.cols = dims[1];
  return m;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::filesystem::path manifest_path(const std::filesystem::path& stem) {
  auto p = stem;
  p += ".manifest.json";
  return p;
}

std::filesystem::path blob_path(const std::filesystem::path& stem) {
  auto p = stem;
  p += ".bin";
  return p;
}

void save_dataset(const DatasetSplit& split, const std::filesystem::path& stem) {
  ByteWriter w;
  w.raw(kDatasetMagic);
  w.u32(kDatasetVersion);
  w.u32(static_cast<std::uint32_t>(split.train.size() + split.test.size()));
  for (const auto& s : split.train) write_sample(w, s, false);
  for (const auto& s : split.test) write_sample(w, s, true);
  const std::uint64_t checksum = fnv1a64(w.bytes());
  w.u64(checksum);

  std::vector<std::size_t> train_counts(split.class_names.size(), 0);
  std::vector<std::size_t> test_counts(split.class_names.size(), 0);
  for (const auto& s : split.train) {
    if (s.class_id < train_counts.size()) ++train_counts[s.class_id];
  }
  for (const auto& s : split.test) {
    if (s.class_id < test_counts.size()) ++test_counts[s.class_id];
  }

  nlohmann::json manifest = {
      {"format", "pvrnet-dataset"},
      {"version", kDatasetVersion},
      {"blob", blob_path(stem).filename().string()},
      {"blob_bytes", w.bytes().size()},
      {"blob_fnv1a64", hex64(checksum)},
      {"seed", split.config.seed},
      {"config", to_json(split.config)},
      {"class_names", split.class_names},
      {"train_counts", train_counts},
      {"test_counts", test_counts},
  };
  write_file_atomic(blob_path(stem), w.bytes());
  write_text_atomic(manifest_path(stem), dump_json(manifest));
}

DatasetSplit load_dataset(const std::filesystem::path& stem) {
  nlohmann::json manifest;
  try {
    const auto text = read_file(manifest_path(stem));
    manifest = nlohmann::json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("dataset manifest is not valid JSON: " + std::string(e.what()));
  }

  DatasetSplit split;
  std::size_t expected_bytes = 0;
  std::string expected_checksum;
  try {
    if (manifest.at("format") != "pvrnet-dataset") throw FormatError("not a dataset manifest");
    if (manifest.at("version").get<std::uint32_t>() != kDatasetVersion) {
      throw FormatError("unsupported dataset version " + manifest.at("version").dump());
    }
    split.config = synth_config_from_json(manifest.at("config"));
    split.class_names = manifest.at("class_names").get<std::vector<std::string>>();
    expected_bytes = manifest.at("blob_bytes").get<std::size_t>();
    expected_checksum = manifest.at("blob_fnv1a64").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("dataset manifest is incomplete: " + std::string(e.what()));
  } catch (const ConfigError& e) {
    throw FormatError(std::string("dataset manifest config: ") + e.what());
  }

  const auto bytes = read_file(blob_path(stem));
  if (bytes.size() != expected_bytes) {
    throw FormatError("dataset blob has " + std::to_string(bytes.size()) + " bytes, manifest says " +
                      std::to_string(expected_bytes) + " (truncated or replaced)");
  }
  if (bytes.size() < 16) throw FormatError("dataset blob too short");
  const std::span<const std::uint8_t> body(bytes.data(), bytes.size() - 8);
  ByteReader trailer(std::span<const std::uint8_t>(bytes.data() + body.size(), 8));
  const std::uint64_t stored = trailer.u64();
  const std::uint64_t actual = fnv1a64(body);
  if (stored != actual || hex64(actual) != expected_checksum) {
    throw FormatError("dataset checksum mismatch");
  }

  ByteReader r(body);
  if (r.raw(4) != kDatasetMagic) throw FormatError("dataset blob has bad magic");
  const std::uint32_t version = r.u32();
  if (version != kDatasetVersion) {
    throw FormatError("unsupported dataset blob version " + std::to_string(version));
  }
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    ShapeSample s;
    const bool test = r.u8() != 0;
    s.sample_id = r.u64();
    s.class_id = r.u32();
    s.generator_seed = r.u64();
    s.elevation_deg = r.f64();
    const std::uint32_t n_az = r.u32();
    for (std::uint32_t a = 0; a < n_az; ++a) s.azimuths_deg.push_back(r.f64());
    s.points = read_matrix(r);
    s.views = read_matrix(r);
    if (s.class_id >= split.class_names.size()) {
      throw FormatError("sample class " + std::to_string(s.class_id) + " out of range");
    }
    (test ? split.test : split.train).push_back(std::move(s));
  }
  if (!r.at_end()) throw FormatError("trailing bytes in dataset blob");
  return split;
}

}  // namespace pvr
