#include "pvrnet/relation_fusion.hpp"

#include <algorithm>
#include <numeric>

#include "pvrnet/errors.hpp"
#include "pvrnet/ops.hpp"

namespace pvr {

namespace {

void check_views(const Tensor& p, const Tensor& v, std::size_t views, const char* who) {
  if (p.rank() != 2 || v.rank() != 2) {
    throw InputError(std::string(who) + ": features must be rank 2, got p " + shape_str(p.shape()) +
                     " and v " + shape_str(v.shape()));
  }
  if (views == 0) throw InputError(std::string(who) + ": need at least one view");
  if (v.dim(0) != p.dim(0) * views) {
    throw InputError(std::string(who) + ": " + std::to_string(v.dim(0)) + " view rows for " +
                     std::to_string(p.dim(0)) + " samples of " + std::to_string(views) + " views");
  }
}

// Row b*V+i of the result is row b of p.
Tensor repeat_rows(const Tensor& p, std::size_t views) {
  std::vector<std::uint32_t> idx(p.dim(0) * views);
  for (std::size_t r = 0; r < idx.size(); ++r) idx[r] = static_cast<std::uint32_t>(r / views);
  return gather_rows(p, idx);
}

Tensor mlp2(const ParameterStore& store, const std::string& prefix, const Tensor& x) {
  return linear_relu(store, prefix + ".fc2", linear_relu(store, prefix + ".fc1", x));
}

std::size_t linear_count(std::size_t in, std::size_t out) { return in * out + out; }

}  // namespace

PVSetSelection rank_views(std::span<const double> scores) {
  PVSetSelection sel;
  sel.order.resize(scores.size());
  std::iota(sel.order.begin(), sel.order.end(), 0u);
  std::stable_sort(sel.order.begin(), sel.order.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return scores[a] > scores[b]; });
  return sel;
}

std::vector<std::uint32_t> select_top_k(std::span<const double> scores, std::size_t k) {
  if (k == 0 || k > scores.size()) {
    throw InputError("select_top_k: k = " + std::to_string(k) + " outside [1, " +
                     std::to_string(scores.size()) + "]");
  }
  auto order = rank_views(scores).order;
  order.resize(k);
  return order;
}

void init_relation(ParameterStore& store, const ModelConfig& c, std::mt19937_64& rng) {
  init_linear(store, "relation.fc1", c.point_dim + c.view_dim, c.relation_hidden, InitKind::kRelu,
              rng);
  init_linear(store, "relation.fc2", c.relation_hidden, 1, InitKind::kLinear, rng);
}

void init_sfusion(ParameterStore& store, const ModelConfig& c, std::mt19937_64& rng) {
  init_linear(store, "sfusion.fc1", c.point_dim + c.view_dim, c.fusion_hidden, InitKind::kRelu,
              rng);
  init_linear(store, "sfusion.fc2", c.fusion_hidden, c.fusion_dim, InitKind::kRelu, rng);
}

void init_mfusion(ParameterStore& store, const ModelConfig& c, std::mt19937_64& rng) {
  init_linear(store, "mfusion.fc1", c.point_dim + c.view_dim, c.fusion_hidden, InitKind::kRelu,
              rng);
  init_linear(store, "mfusion.fc2", c.fusion_hidden, c.fusion_dim, InitKind::kRelu, rng);
}

void init_fusion_head(ParameterStore& store, const ModelConfig& c, std::size_t fusion_width,
                      std::size_t classes, std::mt19937_64& rng) {
  init_linear(store, "head.fc1", fusion_width, c.embed_dim, InitKind::kRelu, rng);
  init_linear(store, "head.fc2", c.embed_dim, classes, InitKind::kLinear, rng);
}

Tensor relation_scores(const ParameterStore& store, const Tensor& p, const Tensor& v,
                       std::size_t views_per_sample) {
  check_views(p, v, views_per_sample, "relation_scores");
  const Tensor pairs = concat({repeat_rows(p, views_per_sample), v}, 1);
  const Tensor hidden = linear_relu(store, "relation.fc1", pairs);
  const Tensor logit = linear(store, "relation.fc2", hidden);
  return reshape(sigmoid(logit), {v.dim(0)});
}

Tensor enhance_views(const Tensor& v, const Tensor& scores) {
  return scale_rows(v, add_scalar(scores, 1.0));
}

Tensor pool_views(const Tensor& v, std::size_t views_per_sample) {
  if (v.rank() != 2 || views_per_sample == 0 || v.dim(0) % views_per_sample != 0) {
    throw InputError("pool_views: " + shape_str(v.shape()) + " does not split into groups of " +
                     std::to_string(views_per_sample));
  }
  return max_over_axis(reshape(v, {v.dim(0) / views_per_sample, views_per_sample, v.dim(1)}), 1);
}

Tensor sfusion(const ParameterStore& store, const Tensor& p, const Tensor& enhanced,
               std::size_t views_per_sample) {
  check_views(p, enhanced, views_per_sample, "sfusion");
  const Tensor pairs = concat({repeat_rows(p, views_per_sample), enhanced}, 1);
  return pool_views(mlp2(store, "sfusion", pairs), views_per_sample);
}

Tensor mfusion(const ParameterStore& store, const Tensor& p, const Tensor& enhanced,
               std::span<const double> scores, std::size_t views_per_sample, std::size_t top_k) {
  check_views(p, enhanced, views_per_sample, "mfusion");
  if (top_k < 2 || top_k > views_per_sample) {
    throw InputError("mfusion: K = " + std::to_string(top_k) + " outside [2, " +
                     std::to_string(views_per_sample) + "]; use sfusion alone for K < 2");
  }
  if (scores.size() != enhanced.dim(0)) {
    throw InputError("mfusion: " + std::to_string(scores.size()) + " scores for " +
                     std::to_string(enhanced.dim(0)) + " view rows");
  }
  const std::size_t batch = p.dim(0);
  const std::size_t dh = enhanced.dim(1);
  std::vector<PVSetSelection> ranked;
  ranked.reserve(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    ranked.push_back(rank_views(scores.subspan(b * views_per_sample, views_per_sample)));
  }

  std::vector<Tensor> terms;
  std::vector<std::uint32_t> rows;
  for (std::size_t k = 2; k <= top_k; ++k) {
    rows.clear();
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::uint32_t i : ranked[b].top(k)) {
        rows.push_back(static_cast<std::uint32_t>(b * views_per_sample + i));
      }
    }
    const Tensor m_k = max_over_axis(reshape(gather_rows(enhanced, rows), {batch, k, dh}), 1);
    terms.push_back(mlp2(store, "mfusion", concat({p, m_k}, 1)));
  }
  const std::size_t df = terms.front().dim(1);
  return mean_over_axis(reshape(concat(terms, 0), {terms.size(), batch, df}), 0);
}

FusedFeature fuse(const ParameterStore& store, const Tensor& p, const Tensor& v,
                  std::size_t views_per_sample, const FusionOptions& options) {
  FusedFeature out;
  out.scores = relation_scores(store, p, v, views_per_sample);
  out.enhanced = enhance_views(v, out.scores);
  out.sfusion = sfusion(store, p, out.enhanced, views_per_sample);
  if (options.use_mfusion) {
    out.mfusion = mfusion(store, p, out.enhanced, out.scores.values(), views_per_sample,
                          options.top_k);
    out.fusion = concat({out.sfusion, out.mfusion}, 1);
  } else {
    out.fusion = out.sfusion;
  }
  out.embedding = linear_relu(store, "head.fc1", out.fusion);
  out.logits = linear(store, "head.fc2", out.embedding);
  return out;
}

std::size_t fusion_module_parameter_count(const ModelConfig& c, std::size_t classes,
                                          bool use_mfusion) {
  const std::size_t pair = c.point_dim + c.view_dim;
  const std::size_t branch =
      linear_count(pair, c.fusion_hidden) + linear_count(c.fusion_hidden, c.fusion_dim);
  std::size_t n = linear_count(pair, c.relation_hidden) + linear_count(c.relation_hidden, 1);
  n += branch;
  if (use_mfusion) n += branch;
  const std::size_t width = use_mfusion ? 2 * c.fusion_dim : c.fusion_dim;
  n += linear_count(width, c.embed_dim) + linear_count(c.embed_dim, classes);
  return n;
}

std::size_t late_fusion_hidden(const ModelConfig& c, std::size_t classes) {
  // Late head: pair -> H -> De -> C, so count = H * (pair + 1 + De) + fixed.
  const std::size_t target = fusion_module_parameter_count(c, classes, true);
  const std::size_t pair = c.point_dim + c.view_dim;
  const std::size_t fixed = c.embed_dim + linear_count(c.embed_dim, classes);
  const std::size_t per_unit = pair + 1 + c.embed_dim;
  if (target <= fixed + per_unit) return 1;
  return (target - fixed + per_unit / 2) / per_unit;
}

void init_late_fusion(ParameterStore& store, const ModelConfig& c, std::size_t classes,
                      std::mt19937_64& rng) {
  const std::size_t hidden = late_fusion_hidden(c, classes);
  init_linear(store, "late.fc1", c.point_dim + c.view_dim, hidden, InitKind::kRelu, rng);
  init_linear(store, "late.fc2", hidden, c.embed_dim, InitKind::kRelu, rng);
  init_linear(store, "late.fc3", c.embed_dim, classes, InitKind::kLinear, rng);
}

HeadOutput late_fusion_baseline(const ParameterStore& store, const Tensor& p, const Tensor& v,
                                std::size_t views_per_sample) {
  check_views(p, v, views_per_sample, "late_fusion_baseline");
  const Tensor joint = concat({p, pool_views(v, views_per_sample)}, 1);
  HeadOutput out;
  out.embedding =
      linear_relu(store, "late.fc2", linear_relu(store, "late.fc1", joint));
  out.logits = linear(store, "late.fc3", out.embedding);
  return out;
}

}  // namespace pvr
