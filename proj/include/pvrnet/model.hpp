#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pvrnet/config.hpp"
#include "pvrnet/params.hpp"
#include "pvrnet/relation_fusion.hpp"
#include "pvrnet/synth.hpp"
#include "pvrnet/tensor.hpp"

namespace pvr {

enum class ModelKind { kPoint, kView, kLate, kFusion };

struct ModelSpec {
  ModelKind kind = ModelKind::kFusion;
  bool use_mfusion = true;  ///< fusion only: false gives the SFusion-only variant
  std::size_t top_k = 4;    ///< fusion only

  bool operator==(const ModelSpec&) const = default;
};

/// Short identifier used in reports and tables, e.g. "point_only", "sm_fusion_k4".
std::string model_label(const ModelSpec& spec);
ModelKind parse_model_kind(const std::string& name);

bool uses_points(ModelKind kind);
bool uses_views(ModelKind kind);

/// Samples flattened for batched forward passes, with the kNN table of every
/// cloud computed once. All samples must share the point and view counts.
class PreparedSet {
 public:
  PreparedSet() = default;
  PreparedSet(std::span<const ShapeSample> samples, std::size_t knn);

  std::size_t size() const { return labels_.size(); }
  std::size_t points_per_sample() const { return points_; }
  std::size_t views_per_sample() const { return views_; }
  std::size_t descriptor_size() const { return descriptor_; }
  std::size_t knn() const { return knn_; }
  std::span<const std::uint32_t> labels() const { return labels_; }

  struct Batch {
    std::size_t size = 0;
    Tensor points;                         ///< (size * N) x 3
    std::vector<std::uint32_t> neighbors;  ///< row indices into `points`
    Tensor views;                          ///< (size * V) x Dv
    std::vector<std::uint32_t> labels;
  };
  Batch batch(std::span<const std::size_t> indices, bool with_points = true,
              bool with_views = true) const;

 private:
  std::size_t points_ = 0, views_ = 0, descriptor_ = 0, knn_ = 0;
  std::vector<double> coords_;
  std::vector<std::uint32_t> neighbors_;  ///< per-sample local indices, N x k each
  std::vector<double> descriptors_;
  std::vector<std::uint32_t> labels_;
};

/// Encoder features of a batch: p is B x Dp (empty for view-only models), v is
/// (B * V) x Dh (empty for point-only models).
struct EncodedBatch {
  Tensor p;
  Tensor v;
  std::size_t views = 0;
};

struct ModelOutput {
  Tensor embedding;  ///< input of the last linear layer, used for retrieval
  Tensor logits;
};

/// One of the compared networks together with its parameters.
///
/// Parameter paths: encoders under "point." and "view.", unimodal classifiers
/// "point_cls" / "view_cls", fusion under "relation", "sfusion", "mfusion",
/// "head", and the late-fusion head under "late".
class Model {
 public:
  Model(const ModelSpec& spec, const ModelConfig& config, std::size_t classes,
        std::size_t descriptor_size, std::uint64_t seed);

  const ModelSpec& spec() const { return spec_; }
  const ModelConfig& config() const { return config_; }
  std::size_t classes() const { return classes_; }
  std::size_t descriptor_size() const { return descriptor_; }
  ParameterStore& params() { return params_; }
  const ParameterStore& params() const { return params_; }

  EncodedBatch encode(const PreparedSet::Batch& batch) const;
  /// Everything after the encoders.
  ModelOutput head(const EncodedBatch& features) const;
  ModelOutput forward(const PreparedSet::Batch& batch) const { return head(encode(batch)); }

  /// Copies the encoder of a pretrained unimodal model ("point." or "view.").
  /// Missing paths or mismatched shapes raise FormatError.
  void load_encoder(const ParameterStore& source, const std::string& prefix);

  /// Scalars outside the encoders.
  std::size_t head_parameter_count() const;

 private:
  ModelSpec spec_;
  ModelConfig config_;
  std::size_t classes_ = 0;
  std::size_t descriptor_ = 0;
  ParameterStore params_;
};

}  // namespace pvr
