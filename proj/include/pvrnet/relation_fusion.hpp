#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "pvrnet/config.hpp"
#include "pvrnet/params.hpp"
#include "pvrnet/tensor.hpp"

namespace pvr {

// Batched layout used throughout: `p` is (B x Dp); view features are stacked
// sample-major as (B * V) x Dh, so rows b*V .. b*V+V-1 belong to sample b.

/// View indices of one sample ordered by descending score, ties by ascending
/// index. The top-k set is the first k entries, so the sets are nested.
struct PVSetSelection {
  std::vector<std::uint32_t> order;

  std::span<const std::uint32_t> top(std::size_t k) const {
    return std::span<const std::uint32_t>(order).first(k);
  }
};

PVSetSelection rank_views(std::span<const double> scores);
/// The k highest-scoring view indices, descending. InputError unless 1 <= k <= V.
std::vector<std::uint32_t> select_top_k(std::span<const double> scores, std::size_t k);

void init_relation(ParameterStore& store, const ModelConfig& config, std::mt19937_64& rng);
void init_sfusion(ParameterStore& store, const ModelConfig& config, std::mt19937_64& rng);
void init_mfusion(ParameterStore& store, const ModelConfig& config, std::mt19937_64& rng);
/// Classifier head `head.fc1` (fusion width -> De) and `head.fc2` (De -> C).
void init_fusion_head(ParameterStore& store, const ModelConfig& config, std::size_t fusion_width,
                      std::size_t classes, std::mt19937_64& rng);

/// Relation score of every (point cloud, view) pair: sigmoid of a shared MLP
/// over concat(p, v_i). Returns a vector of B * V scores in (0, 1).
Tensor relation_scores(const ParameterStore& store, const Tensor& p, const Tensor& v,
                       std::size_t views_per_sample);

/// Residual enhancement v_i * (1 + s_i), differentiable in both arguments.
Tensor enhance_views(const Tensor& v, const Tensor& scores);

/// Point-single-view fusion: shared MLP over concat(p, v'_i) for every view,
/// then an elementwise max over the views of each sample. Returns B x Df.
Tensor sfusion(const ParameterStore& store, const Tensor& p, const Tensor& enhanced,
               std::size_t views_per_sample);

/// Point-multi-view fusion over the nested top-k sets, k = 2..top_k. Each set
/// is max-pooled into one view vector, fused with p by a shared MLP, and the
/// per-set outputs are averaged. `scores` supplies the ranking (no gradient
/// through the ranking itself). Returns B x Df.
Tensor mfusion(const ParameterStore& store, const Tensor& p, const Tensor& enhanced,
               std::span<const double> scores, std::size_t views_per_sample, std::size_t top_k);

struct FusionOptions {
  bool use_mfusion = true;
  std::size_t top_k = 4;
};

struct FusedFeature {
  Tensor scores;     ///< B * V
  Tensor enhanced;   ///< (B * V) x Dh
  Tensor sfusion;    ///< B x Df
  Tensor mfusion;    ///< B x Df (empty scalar when disabled)
  Tensor fusion;     ///< B x 2Df, or B x Df without multi-view fusion
  Tensor embedding;  ///< B x De, input of the last linear layer
  Tensor logits;     ///< B x C
};

FusedFeature fuse(const ParameterStore& store, const Tensor& p, const Tensor& v,
                  std::size_t views_per_sample, const FusionOptions& options);

/// Number of scalars in the relation, fusion and head parameters.
std::size_t fusion_module_parameter_count(const ModelConfig& config, std::size_t classes,
                                          bool use_mfusion);

/// Hidden width of the late-fusion head chosen so that its parameter count
/// matches the full fusion modules.
std::size_t late_fusion_hidden(const ModelConfig& config, std::size_t classes);

void init_late_fusion(ParameterStore& store, const ModelConfig& config, std::size_t classes,
                      std::mt19937_64& rng);

struct HeadOutput {
  Tensor embedding;
  Tensor logits;
};

/// concat(p, max over views) -> late.fc1 -> late.fc2 (embedding) -> late.fc3.
HeadOutput late_fusion_baseline(const ParameterStore& store, const Tensor& p, const Tensor& v,
                                std::size_t views_per_sample);

/// Elementwise max over the V rows of every sample: (B * V) x D -> B x D.
Tensor pool_views(const Tensor& v, std::size_t views_per_sample);

}  // namespace pvr
