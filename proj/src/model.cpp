#include "pvrnet/model.hpp"

#include <random>

#include "pvrnet/encoders.hpp"
#include "pvrnet/errors.hpp"
#include "pvrnet/ops.hpp"

namespace pvr {

std::string model_label(const ModelSpec& spec) {
  switch (spec.kind) {
    case ModelKind::kPoint:
      return "point_only";
    case ModelKind::kView:
      return "view_only";
    case ModelKind::kLate:
      return "late_fusion";
    case ModelKind::kFusion:
      return spec.use_mfusion ? "sm_fusion_k" + std::to_string(spec.top_k) : "sfusion_only";
  }
  return "unknown";
}

ModelKind parse_model_kind(const std::string& name) {
  if (name == "point") return ModelKind::kPoint;
  if (name == "view") return ModelKind::kView;
  if (name == "late") return ModelKind::kLate;
  if (name == "fusion") return ModelKind::kFusion;
  throw UsageError("unknown model kind '" + name + "' (expected point, view, fusion or late)");
}

bool uses_points(ModelKind kind) { return kind != ModelKind::kView; }
bool uses_views(ModelKind kind) { return kind != ModelKind::kPoint; }

PreparedSet::PreparedSet(std::span<const ShapeSample> samples, std::size_t knn) : knn_(knn) {
  if (samples.empty()) throw InputError("PreparedSet: no samples");
  points_ = samples.front().points.rows;
  views_ = samples.front().views.rows;
  descriptor_ = samples.front().views.cols;
  coords_.reserve(samples.size() * points_ * 3);
  neighbors_.reserve(samples.size() * points_ * knn);
  descriptors_.reserve(samples.size() * views_ * descriptor_);
  for (const auto& s : samples) {
    if (s.points.rows != points_ || s.points.cols != 3 || s.views.rows != views_ ||
        s.views.cols != descriptor_) {
      throw InputError("PreparedSet: sample " + std::to_string(s.sample_id) +
                       " differs in point or view layout from the first sample");
    }
    coords_.insert(coords_.end(), s.points.data.begin(), s.points.data.end());
    const auto nbr = knn_graph(s.points, knn);
    neighbors_.insert(neighbors_.end(), nbr.begin(), nbr.end());
    descriptors_.insert(descriptors_.end(), s.views.data.begin(), s.views.data.end());
    labels_.push_back(s.class_id);
  }
}

PreparedSet::Batch PreparedSet::batch(std::span<const std::size_t> indices, bool with_points,
                                      bool with_views) const {
  Batch b;
  b.size = indices.size();
  if (with_points) {
    std::vector<double> coords;
    coords.reserve(indices.size() * points_ * 3);
    b.neighbors.reserve(indices.size() * points_ * knn_);
    for (std::size_t slot = 0; slot < indices.size(); ++slot) {
      const std::size_t i = indices[slot];
      coords.insert(coords.end(), coords_.begin() + i * points_ * 3,
                    coords_.begin() + (i + 1) * points_ * 3);
      const auto offset = static_cast<std::uint32_t>(slot * points_);
      for (std::size_t t = i * points_ * knn_; t < (i + 1) * points_ * knn_; ++t) {
        b.neighbors.push_back(neighbors_[t] + offset);
      }
    }
    b.points = Tensor::from({indices.size() * points_, 3}, std::move(coords));
  }
  if (with_views) {
    std::vector<double> desc;
    desc.reserve(indices.size() * views_ * descriptor_);
    for (std::size_t i : indices) {
      desc.insert(desc.end(), descriptors_.begin() + i * views_ * descriptor_,
                  descriptors_.begin() + (i + 1) * views_ * descriptor_);
    }
    b.views = Tensor::from({indices.size() * views_, descriptor_}, std::move(desc));
  }
  for (std::size_t i : indices) b.labels.push_back(labels_[i]);
  return b;
}

Model::Model(const ModelSpec& spec, const ModelConfig& config, std::size_t classes,
             std::size_t descriptor_size, std::uint64_t seed)
    : spec_(spec), config_(config), classes_(classes), descriptor_(descriptor_size) {
  if (classes == 0) throw ConfigError("model needs at least one class");
  std::mt19937_64 rng(seed);
  if (uses_points(spec.kind)) init_point_encoder(params_, config, rng);
  if (uses_views(spec.kind)) init_view_encoder(params_, config, descriptor_size, rng);
  switch (spec.kind) {
    case ModelKind::kPoint:
      init_linear(params_, "point_cls", config.point_dim, classes, InitKind::kLinear, rng);
      break;
    case ModelKind::kView:
      init_linear(params_, "view_cls", config.view_dim, classes, InitKind::kLinear, rng);
      break;
    case ModelKind::kLate:
      init_late_fusion(params_, config, classes, rng);
      break;
    case ModelKind::kFusion:
      if (spec.use_mfusion && spec.top_k < 2) {
        throw ConfigError("multi-view fusion needs top_k >= 2");
      }
      init_relation(params_, config, rng);
      init_sfusion(params_, config, rng);
      if (spec.use_mfusion) init_mfusion(params_, config, rng);
      init_fusion_head(params_, config, spec.use_mfusion ? 2 * config.fusion_dim : config.fusion_dim,
                       classes, rng);
      break;
  }
}

EncodedBatch Model::encode(const PreparedSet::Batch& batch) const {
  EncodedBatch e;
  if (uses_points(spec_.kind)) {
    e.p = point_encode(params_, batch.points, batch.neighbors, batch.size, config_.knn);
  }
  if (uses_views(spec_.kind)) {
    e.v = view_encode(params_, batch.views);
    e.views = batch.views.dim(0) / batch.size;
  }
  return e;
}

ModelOutput Model::head(const EncodedBatch& f) const {
  switch (spec_.kind) {
    case ModelKind::kPoint:
      return {f.p, linear(params_, "point_cls", f.p)};
    case ModelKind::kView: {
      const Tensor pooled = pool_views(f.v, f.views);
      return {pooled, linear(params_, "view_cls", pooled)};
    }
    case ModelKind::kLate: {
      auto out = late_fusion_baseline(params_, f.p, f.v, f.views);
      return {out.embedding, out.logits};
    }
    case ModelKind::kFusion: {
      FusionOptions opt;
      opt.use_mfusion = spec_.use_mfusion;
      opt.top_k = spec_.top_k;
      auto out = fuse(params_, f.p, f.v, f.views, opt);
      return {out.embedding, out.logits};
    }
  }
  throw UsageError("unknown model kind");
}

void Model::load_encoder(const ParameterStore& source, const std::string& prefix) {
  params_.load_values(source, prefix);
}

std::size_t Model::head_parameter_count() const {
  return params_.parameter_count() - params_.parameter_count("point.") -
         params_.parameter_count("view.");
}

}  // namespace pvr
