#include "pvrnet/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <span>

#include "pvrnet/errors.hpp"

namespace pvr {

namespace {

using Vec3 = std::array<double, 3>;
constexpr double kPi = std::numbers::pi;

constexpr std::array<std::string_view, kShapeFamilies> kFamilyNames = {
    "sphere", "box", "cylinder", "cone", "torus", "capsule", "l_bracket", "plate"};

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}
  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(rng_);
  }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(rng_); }
  Vec3 unit_vector() {
    for (;;) {
      Vec3 g{normal(), normal(), normal()};
      const double n = std::sqrt(g[0] * g[0] + g[1] * g[1] + g[2] * g[2]);
      if (n > 1e-12) return {g[0] / n, g[1] / n, g[2] / n};
    }
  }
  /// Index drawn proportionally to the given weights.
  std::size_t pick(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double u = uniform(0.0, total);
    for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
      if (u < weights[i]) return i;
      u -= weights[i];
    }
    return weights.size() - 1;
  }
  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

struct Box {
  Vec3 center;
  Vec3 half;
  double area() const {
    return 8.0 * (half[1] * half[2] + half[0] * half[2] + half[0] * half[1]);
  }
  bool strictly_inside(const Vec3& p) const {
    for (int a = 0; a < 3; ++a) {
      if (std::abs(p[a] - center[a]) >= half[a] - 1e-12) return false;
    }
    return true;
  }
  Vec3 sample_surface(Sampler& s) const {
    const std::array<double, 3> face_area = {half[1] * half[2], half[0] * half[2],
                                             half[0] * half[1]};
    const std::size_t axis = s.pick(face_area);
    const double side = s.uniform() < 0.5 ? -1.0 : 1.0;
    Vec3 p;
    for (std::size_t a = 0; a < 3; ++a) {
      p[a] = a == axis ? center[a] + side * half[a] : center[a] + s.uniform(-half[a], half[a]);
    }
    return p;
  }
};

Vec3 sample_cylinder(Sampler& s, double radius, double half_height) {
  const std::array<double, 2> area = {2.0 * kPi * radius * 2.0 * half_height,
                                      2.0 * kPi * radius * radius};
  const double theta = s.uniform(0.0, 2.0 * kPi);
  if (s.pick(area) == 0) {
    return {radius * std::cos(theta), radius * std::sin(theta), s.uniform(-half_height, half_height)};
  }
  const double r = radius * std::sqrt(s.uniform());
  const double z = s.uniform() < 0.5 ? -half_height : half_height;
  return {r * std::cos(theta), r * std::sin(theta), z};
}

Vec3 sample_cone(Sampler& s, double radius, double height) {
  const double base_z = -0.4 * height;
  const double slant = std::sqrt(radius * radius + height * height);
  const std::array<double, 2> area = {kPi * radius * slant, kPi * radius * radius};
  const double theta = s.uniform(0.0, 2.0 * kPi);
  if (s.pick(area) == 0) {
    const double t = std::sqrt(s.uniform());  // distance fraction from the apex
    const double r = t * radius;
    return {r * std::cos(theta), r * std::sin(theta), base_z + height * (1.0 - t)};
  }
  const double r = radius * std::sqrt(s.uniform());
  return {r * std::cos(theta), r * std::sin(theta), base_z};
}

Vec3 sample_torus(Sampler& s, double major, double minor) {
  for (;;) {
    const double u = s.uniform(0.0, 2.0 * kPi);
    const double v = s.uniform(0.0, 2.0 * kPi);
    if (s.uniform() * (major + minor) <= major + minor * std::cos(v)) {
      const double ring = major + minor * std::cos(v);
      return {ring * std::cos(u), ring * std::sin(u), minor * std::sin(v)};
    }
  }
}

Vec3 sample_capsule(Sampler& s, double radius, double half_height) {
  const std::array<double, 2> area = {2.0 * kPi * radius * 2.0 * half_height,
                                      4.0 * kPi * radius * radius};
  if (s.pick(area) == 0) {
    const double theta = s.uniform(0.0, 2.0 * kPi);
    return {radius * std::cos(theta), radius * std::sin(theta), s.uniform(-half_height, half_height)};
  }
  const Vec3 d = s.unit_vector();
  const double cz = d[2] >= 0.0 ? half_height : -half_height;
  return {radius * d[0], radius * d[1], cz + radius * d[2]};
}

// Surface of the union of two overlapping boxes.
Vec3 sample_l_bracket(Sampler& s) {
  static const Box foot{{0.0, 0.0, -0.45}, {0.6, 0.2, 0.15}};
  static const Box upright{{-0.45, 0.0, 0.15}, {0.15, 0.2, 0.6}};
  const std::array<double, 2> area = {foot.area(), upright.area()};
  for (;;) {
    if (s.pick(area) == 0) {
      const Vec3 p = foot.sample_surface(s);
      if (!upright.strictly_inside(p)) return p;
    } else {
      const Vec3 p = upright.sample_surface(s);
      if (!foot.strictly_inside(p)) return p;
    }
  }
}

Matrix raw_surface(std::size_t class_id, std::size_t n, Sampler& s) {
  Matrix pts(n, 3);
  auto put = [&](std::size_t i, const Vec3& p) {
    for (int a = 0; a < 3; ++a) pts(i, a) = p[a];
  };
  if (class_id == 0) {
    // Antithetic pairs keep the sample mean exactly at the origin.
    for (std::size_t i = 0; i + 1 < n; i += 2) {
      const Vec3 d = s.unit_vector();
      put(i, d);
      put(i + 1, {-d[0], -d[1], -d[2]});
    }
    if (n % 2) put(n - 1, s.unit_vector());
    return pts;
  }
  static const Box cube{{0.0, 0.0, 0.0}, {0.6, 0.6, 0.6}};
  static const Box plate{{0.0, 0.0, 0.0}, {0.8, 0.8, 0.06}};
  for (std::size_t i = 0; i < n; ++i) {
    switch (class_id) {
      case 1: put(i, cube.sample_surface(s)); break;
      case 2: put(i, sample_cylinder(s, 0.5, 0.7)); break;
      case 3: put(i, sample_cone(s, 0.6, 1.2)); break;
      case 4: put(i, sample_torus(s, 0.6, 0.22)); break;
      case 5: put(i, sample_capsule(s, 0.35, 0.5)); break;
      case 6: put(i, sample_l_bracket(s)); break;
      default: put(i, plate.sample_surface(s)); break;
    }
  }
  return pts;
}

}  // namespace

std::string_view family_name(std::size_t class_id) {
  if (class_id >= kShapeFamilies) {
    throw InputError("unknown shape class " + std::to_string(class_id));
  }
  return kFamilyNames[class_id];
}

void SynthConfig::validate() const {
  if (classes == 0 || classes > kShapeFamilies) {
    throw ConfigError("dataset.classes must be in [1, " + std::to_string(kShapeFamilies) + "]");
  }
  if (train_per_class < 2 || test_per_class < 2) {
    throw ConfigError("dataset per-class counts must be at least 2");
  }
  if (points < 64) throw ConfigError("dataset.points must be at least 64");
  if (views == 0) throw ConfigError("dataset.views must be positive");
  if (resolution < 4) throw ConfigError("dataset.resolution must be at least 4");
  if (!(jitter >= 0.0)) throw ConfigError("dataset.jitter must be non-negative");
  if (!(scale_range >= 0.0 && scale_range < 1.0)) {
    throw ConfigError("dataset.scale_range must be in [0, 1)");
  }
  if (!(elevation_deg > -90.0 && elevation_deg < 90.0)) {
    throw ConfigError("dataset.elevation_deg must be in (-90, 90)");
  }
}

CameraRig CameraRig::ring(std::size_t view_count, double elevation_deg, std::size_t resolution) {
  CameraRig rig;
  rig.resolution = resolution;
  rig.elevation_deg = elevation_deg;
  for (std::size_t i = 0; i < view_count; ++i) {
    rig.azimuths_deg.push_back(360.0 * static_cast<double>(i) / static_cast<double>(view_count));
  }
  return rig;
}

Matrix generate_shape(std::size_t class_id, std::uint64_t seed, const SynthConfig& config) {
  if (class_id >= config.classes || class_id >= kShapeFamilies) {
    throw InputError("unknown shape class " + std::to_string(class_id));
  }
  if (config.points < 64) throw InputError("point count must be at least 64");
  Sampler s(seed);
  Matrix pts = raw_surface(class_id, config.points, s);

  Vec3 axis_scale{1.0, 1.0, 1.0};
  for (double& a : axis_scale) a = s.uniform(1.0 - config.scale_range, 1.0 + config.scale_range);
  const double theta = config.random_rotation ? s.uniform(0.0, 2.0 * kPi) : 0.0;
  const double c = std::cos(theta), sn = std::sin(theta);
  for (std::size_t i = 0; i < pts.rows; ++i) {
    const double x = pts(i, 0) * axis_scale[0];
    const double y = pts(i, 1) * axis_scale[1];
    const double z = pts(i, 2) * axis_scale[2];
    pts(i, 0) = c * x - sn * y;
    pts(i, 1) = sn * x + c * y;
    pts(i, 2) = z;
  }
  if (config.jitter > 0.0) {
    for (double& v : pts.data) v += config.jitter * s.normal();
  }

  Vec3 mean{0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < pts.rows; ++i) {
    for (int a = 0; a < 3; ++a) mean[a] += pts(i, a);
  }
  for (double& m : mean) m /= static_cast<double>(pts.rows);
  double max_norm = 0.0;
  for (std::size_t i = 0; i < pts.rows; ++i) {
    double n2 = 0.0;
    for (int a = 0; a < 3; ++a) {
      pts(i, a) -= mean[a];
      n2 += pts(i, a) * pts(i, a);
    }
    max_norm = std::max(max_norm, std::sqrt(n2));
  }
  if (max_norm > 0.0) {
    for (double& v : pts.data) v /= max_norm;
  }
  return pts;
}

std::vector<double> render_view_descriptor(const Matrix& points, const Camera& camera,
                                           std::size_t resolution) {
  if (resolution < 4) throw InputError("descriptor resolution must be at least 4");
  if (points.cols != 3) throw InputError("points must have 3 columns");
  const double az = camera.azimuth_deg * kPi / 180.0;
  const double el = camera.elevation_deg * kPi / 180.0;
  const Vec3 forward{std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)};
  const Vec3 right{-std::sin(az), std::cos(az), 0.0};
  const Vec3 up{-std::sin(el) * std::cos(az), -std::sin(el) * std::sin(az), std::cos(el)};

  const std::size_t cells = resolution * resolution;
  std::vector<double> count(cells, 0.0);
  std::vector<double> near(cells, INFINITY), far(cells, -INFINITY);
  const double r = static_cast<double>(resolution);
  auto cell_of = [&](double t) {
    const double f = std::floor((t + 1.0) * 0.5 * r);
    return static_cast<std::size_t>(std::clamp(f, 0.0, r - 1.0));
  };
  for (std::size_t i = 0; i < points.rows; ++i) {
    const double* p = points.row(i);
    const double u = p[0] * right[0] + p[1] * right[1] + p[2] * right[2];
    const double v = p[0] * up[0] + p[1] * up[1] + p[2] * up[2];
    const double depth = -(p[0] * forward[0] + p[1] * forward[1] + p[2] * forward[2]);
    const std::size_t cell = cell_of(v) * resolution + cell_of(u);
    count[cell] += 1.0;
    near[cell] = std::min(near[cell], depth);
    far[cell] = std::max(far[cell], depth);
  }
  const double max_count = *std::max_element(count.begin(), count.end());
  std::vector<double> out(3 * cells, 0.0);
  for (std::size_t c = 0; c < cells; ++c) {
    if (count[c] == 0.0) continue;
    out[c] = count[c] / max_count;
    out[cells + c] = std::clamp((near[c] + 1.0) * 0.5, 0.0, 1.0);
    out[2 * cells + c] = std::clamp((far[c] + 1.0) * 0.5, 0.0, 1.0);
  }
  return out;
}

Matrix render_views(const Matrix& points, const CameraRig& rig) {
  const std::size_t dv = 3 * rig.resolution * rig.resolution;
  Matrix views(rig.view_count(), dv);
  for (std::size_t v = 0; v < rig.view_count(); ++v) {
    const auto d = render_view_descriptor(points, rig.camera(v), rig.resolution);
    std::copy(d.begin(), d.end(), views.row(v));
  }
  return views;
}

ShapeSample make_sample(std::size_t class_id, std::uint64_t sample_id, std::uint64_t seed,
                        const SynthConfig& config) {
  ShapeSample s;
  s.class_id = static_cast<std::uint32_t>(class_id);
  s.sample_id = sample_id;
  s.generator_seed = seed;
  s.points = generate_shape(class_id, seed, config);
  const CameraRig rig = CameraRig::ring(config.views, config.elevation_deg, config.resolution);
  s.views = render_views(s.points, rig);
  s.azimuths_deg = rig.azimuths_deg;
  s.elevation_deg = rig.elevation_deg;
  return s;
}

std::uint64_t sample_seed(std::uint64_t global_seed, bool test_split, std::size_t class_id,
                          std::size_t index) {
  std::uint64_t h = splitmix64(global_seed);
  h = splitmix64(h ^ (test_split ? 0x7465737400000000ull : 0x747261696e000000ull));
  h = splitmix64(h ^ static_cast<std::uint64_t>(class_id));
  return splitmix64(h ^ static_cast<std::uint64_t>(index));
}

DatasetSplit make_dataset(const SynthConfig& config) {
  config.validate();
  DatasetSplit split;
  split.config = config;
  for (std::size_t c = 0; c < config.classes; ++c) split.class_names.emplace_back(family_name(c));
  std::uint64_t next_id = 0;
  for (std::size_t c = 0; c < config.classes; ++c) {
    for (std::size_t i = 0; i < config.train_per_class; ++i) {
      split.train.push_back(make_sample(c, next_id++, sample_seed(config.seed, false, c, i), config));
    }
  }
  for (std::size_t c = 0; c < config.classes; ++c) {
    for (std::size_t i = 0; i < config.test_per_class; ++i) {
      split.test.push_back(make_sample(c, next_id++, sample_seed(config.seed, true, c, i), config));
    }
  }
  return split;
}

std::vector<std::size_t> view_subset(std::size_t total, std::size_t keep) {
  if (total != 12 || (keep != 4 && keep != 8 && keep != 10 && keep != 12)) {
    throw InputError("unsupported view subsample: keep " + std::to_string(keep) + " of " +
                     std::to_string(total) + " (supported: 4, 8, 10, 12 of 12)");
  }
  // Nearest index to j * total / keep, halves rounded down:
  // ceil((2 j total - keep) / (2 keep)).
  std::vector<std::size_t> out;
  const auto t = static_cast<long long>(total);
  const auto k = static_cast<long long>(keep);
  for (long long j = 0; j < k; ++j) {
    const long long num = 2 * j * t - k;
    const long long den = 2 * k;
    const long long idx = num >= 0 ? (num + den - 1) / den : -((-num) / den);
    out.push_back(static_cast<std::size_t>(idx));
  }
  return out;
}

ShapeSample subsample_views(const ShapeSample& sample, std::size_t keep) {
  const auto idx = view_subset(sample.views.rows, keep);
  ShapeSample out = sample;
  out.views = Matrix(idx.size(), sample.views.cols);
  out.azimuths_deg.clear();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    std::copy(sample.views.row(idx[i]), sample.views.row(idx[i]) + sample.views.cols,
              out.views.row(i));
    if (idx[i] < sample.azimuths_deg.size()) out.azimuths_deg.push_back(sample.azimuths_deg[idx[i]]);
  }
  return out;
}

ShapeSample subsample_points(const ShapeSample& sample, std::size_t keep) {
  const std::size_t n = sample.points.rows;
  if (keep < 1 || keep > n) {
    throw InputError("cannot keep " + std::to_string(keep) + " of " + std::to_string(n) +
                     " points");
  }
  if (keep == n) return sample;
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  std::mt19937_64 rng(splitmix64(sample.sample_id ^ 0x706f696e7473ull));
  for (std::size_t i = 0; i < keep; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng() % (n - i));
    std::swap(perm[i], perm[j]);
  }
  std::vector<std::size_t> chosen(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(keep));
  std::sort(chosen.begin(), chosen.end());
  ShapeSample out = sample;
  out.points = Matrix(keep, 3);
  for (std::size_t i = 0; i < keep; ++i) {
    std::copy(sample.points.row(chosen[i]), sample.points.row(chosen[i]) + 3, out.points.row(i));
  }
  return out;
}

}  // namespace pvr
