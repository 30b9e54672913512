#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace pvr {

/// Row-major real matrix used for raw data (points, descriptors).
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  const double* row(std::size_t r) const { return data.data() + r * cols; }
  double* row(std::size_t r) { return data.data() + r * cols; }

  bool operator==(const Matrix&) const = default;
};

inline constexpr std::size_t kShapeFamilies = 8;

/// sphere, box, cylinder, cone, torus, capsule, l_bracket, plate
std::string_view family_name(std::size_t class_id);

struct SynthConfig {
  std::size_t classes = 8;
  std::size_t train_per_class = 100;
  std::size_t test_per_class = 25;
  std::size_t points = 1024;
  std::size_t views = 12;
  std::size_t resolution = 10;
  double elevation_deg = 30.0;
  double jitter = 0.01;
  /// Per-axis scale factors are drawn from [1 - scale_range, 1 + scale_range].
  double scale_range = 0.3;
  bool random_rotation = true;
  std::uint64_t seed = 1;

  std::size_t descriptor_size() const { return 3 * resolution * resolution; }
  /// Throws ConfigError on out-of-range values.
  void validate() const;
  bool operator==(const SynthConfig&) const = default;
};

struct Camera {
  double azimuth_deg = 0.0;
  double elevation_deg = 0.0;
};

/// Ring of cameras evenly spaced in azimuth at a common elevation.
struct CameraRig {
  std::size_t resolution = 10;
  double elevation_deg = 30.0;
  std::vector<double> azimuths_deg;

  static CameraRig ring(std::size_t view_count, double elevation_deg, std::size_t resolution);
  Camera camera(std::size_t i) const { return {azimuths_deg.at(i), elevation_deg}; }
  std::size_t view_count() const { return azimuths_deg.size(); }
};

struct ShapeSample {
  std::uint32_t class_id = 0;
  Matrix points;  ///< N x 3, centred, max norm 1
  Matrix views;   ///< V x Dv, one descriptor per camera
  std::vector<double> azimuths_deg;
  double elevation_deg = 0.0;
  std::uint64_t sample_id = 0;
  std::uint64_t generator_seed = 0;

  bool operator==(const ShapeSample&) const = default;
};

struct DatasetSplit {
  SynthConfig config;
  std::vector<std::string> class_names;
  std::vector<ShapeSample> train;
  std::vector<ShapeSample> test;
};

/// Surface samples of one parametric family, randomly scaled, rotated about
/// the vertical axis, jittered, then centred and scaled to max norm 1.
Matrix generate_shape(std::size_t class_id, std::uint64_t seed, const SynthConfig& config);

/// Orthographic depth/occupancy descriptor on an R x R grid: channels are
/// (count / max count, (min depth + 1) / 2, (max depth + 1) / 2), laid out
/// channel-major. Empty cells are zero in every channel.
std::vector<double> render_view_descriptor(const Matrix& points, const Camera& camera,
                                           std::size_t resolution);

Matrix render_views(const Matrix& points, const CameraRig& rig);

ShapeSample make_sample(std::size_t class_id, std::uint64_t sample_id, std::uint64_t seed,
                        const SynthConfig& config);

/// Seed of one sample, derived from the global seed; train and test use
/// disjoint streams.
std::uint64_t sample_seed(std::uint64_t global_seed, bool test_split, std::size_t class_id,
                          std::size_t index);

DatasetSplit make_dataset(const SynthConfig& config);

/// Camera indices kept when reducing a 12-view ring to 4, 8, 10 or 12 views:
/// the indices nearest to an evenly spaced sub-ring starting at camera 0.
std::vector<std::size_t> view_subset(std::size_t total, std::size_t keep);

ShapeSample subsample_views(const ShapeSample& sample, std::size_t keep);
/// Deterministic uniform subset of `keep` point rows (seeded by sample_id),
/// original row order preserved.
ShapeSample subsample_points(const ShapeSample& sample, std::size_t keep);

// Dataset files: <stem>.manifest.json + <stem>.bin
std::filesystem::path manifest_path(const std::filesystem::path& stem);
std::filesystem::path blob_path(const std::filesystem::path& stem);
void save_dataset(const DatasetSplit& split, const std::filesystem::path& stem);
DatasetSplit load_dataset(const std::filesystem::path& stem);

}  // namespace pvr
