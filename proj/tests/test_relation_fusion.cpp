#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "pvrnet/errors.hpp"
#include "pvrnet/relation_fusion.hpp"
#include "test_support.hpp"

namespace pvr {
namespace {

using test::fd_error;
using test::randn;
using test::to_vec;

ModelConfig small_model() {
  ModelConfig c;
  c.point_dim = 5;
  c.view_dim = 4;
  c.fusion_dim = 6;
  c.embed_dim = 3;
  c.relation_hidden = 7;
  c.fusion_hidden = 8;
  return c;
}

void randomize(ParameterStore& st, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 0.7);
  for (const auto& p : st.paths()) {
    for (double& v : st.get(p).mutable_values()) v = n(rng);
  }
}

ParameterStore fusion_store(const ModelConfig& c, std::size_t classes, std::mt19937_64& rng) {
  ParameterStore st;
  init_relation(st, c, rng);
  init_sfusion(st, c, rng);
  init_mfusion(st, c, rng);
  init_fusion_head(st, c, 2 * c.fusion_dim, classes, rng);
  randomize(st, rng);
  return st;
}

// Loop-level two-layer relu MLP, independent of the tensor ops.
std::vector<double> mlp_ref(const ParameterStore& st, const std::string& prefix,
                            const std::vector<double>& x) {
  auto layer = [&](const std::string& name, const std::vector<double>& in) {
    const Tensor& w = st.get(prefix + name + ".w");
    const Tensor& b = st.get(prefix + name + ".b");
    std::vector<double> out(w.dim(1));
    for (std::size_t o = 0; o < out.size(); ++o) {
      double s = b[o];
      for (std::size_t i = 0; i < in.size(); ++i) s += in[i] * w.at(i, o);
      out[o] = std::max(0.0, s);
    }
    return out;
  };
  return layer(".fc2", layer(".fc1", x));
}

std::vector<double> row(const Tensor& t, std::size_t r) {
  const std::size_t w = t.dim(1);
  return {t.values().begin() + r * w, t.values().begin() + (r + 1) * w};
}

std::vector<double> joined(std::vector<double> a, const std::vector<double>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

// Straight-line MFusion for one sample.
std::vector<double> mfusion_ref(const ParameterStore& st, const std::vector<double>& p,
                                const std::vector<std::vector<double>>& views,
                                const std::vector<double>& scores, std::size_t top_k) {
  std::vector<std::size_t> order(views.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
  });
  std::vector<double> acc;
  for (std::size_t k = 2; k <= top_k; ++k) {
    std::vector<double> m(views[0].size(), -INFINITY);
    for (std::size_t j = 0; j < k; ++j) {
      for (std::size_t c = 0; c < m.size(); ++c) m[c] = std::max(m[c], views[order[j]][c]);
    }
    const auto out = mlp_ref(st, "mfusion", joined(p, m));
    if (acc.empty()) acc.assign(out.size(), 0.0);
    for (std::size_t c = 0; c < out.size(); ++c) acc[c] += out[c];
  }
  for (double& x : acc) x /= static_cast<double>(top_k - 1);
  return acc;
}

TEST(SelectTopK, Examples) {
  EXPECT_EQ(select_top_k(std::vector<double>{0.9, 0.1, 0.5}, 2),
            (std::vector<std::uint32_t>{0, 2}));
  EXPECT_EQ(select_top_k(std::vector<double>{0.3, 0.3, 0.3}, 2),
            (std::vector<std::uint32_t>{0, 1}));
  EXPECT_THROW(select_top_k(std::vector<double>{0.3, 0.2}, 3), InputError);
  EXPECT_THROW(select_top_k(std::vector<double>{0.3, 0.2}, 0), InputError);
}

TEST(SelectTopK, MatchesFullSortWithTiesAndNests) {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> coarse(0, 5);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t v = 1 + trial % 12;
    std::vector<double> s(v);
    for (double& x : s) x = coarse(rng) / 5.0;  // frequent ties
    std::vector<std::pair<double, std::uint32_t>> keyed;
    for (std::uint32_t i = 0; i < v; ++i) keyed.emplace_back(-s[i], i);
    std::sort(keyed.begin(), keyed.end());
    const PVSetSelection sel = rank_views(s);
    for (std::size_t k = 1; k <= v; ++k) {
      std::vector<std::uint32_t> expected;
      for (std::size_t j = 0; j < k; ++j) expected.push_back(keyed[j].second);
      ASSERT_EQ(select_top_k(s, k), expected);
      ASSERT_TRUE(std::equal(sel.top(k).begin(), sel.top(k).end(), expected.begin()));
    }
  }
}

TEST(RelationScores, ZeroFinalLayerGivesOneHalf) {
  std::mt19937_64 rng(32);
  const ModelConfig c = small_model();
  ParameterStore st;
  init_relation(st, c, rng);
  randomize(st, rng);
  for (const char* p : {"relation.fc2.w", "relation.fc2.b"}) {
    for (double& x : st.get(p).mutable_values()) x = 0.0;
  }
  const Tensor s = relation_scores(st, randn({2, 5}, rng), randn({6, 4}, rng), 3);
  ASSERT_EQ(s.numel(), 6u);
  for (double x : s.values()) EXPECT_EQ(x, 0.5);
}

TEST(RelationScores, SwappingViewsSwapsScores) {
  std::mt19937_64 rng(33);
  ParameterStore st;
  init_relation(st, small_model(), rng);
  randomize(st, rng);
  const Tensor p = randn({1, 5}, rng);
  const Tensor v = randn({4, 4}, rng);
  const auto s = to_vec(relation_scores(st, p, v, 4));
  const auto t = to_vec(relation_scores(st, p, gather_rows(v, std::vector<std::uint32_t>{2, 1, 0, 3}), 4));
  EXPECT_EQ(t, (std::vector<double>{s[2], s[1], s[0], s[3]}));
  for (double x : s) {
    EXPECT_GT(x, 0.0);
    EXPECT_LT(x, 1.0);
  }
}

TEST(RelationScores, GradientMatchesCentralDifferences) {
  std::mt19937_64 rng(34);
  ParameterStore st;
  init_relation(st, small_model(), rng);
  randomize(st, rng);
  Tensor p = randn({2, 5}, rng), v = randn({6, 4}, rng);
  EXPECT_LT(fd_error([&] { return sum(relation_scores(st, p, v, 3)); },
                     {p, v, st.get("relation.fc1.w"), st.get("relation.fc2.w")}),
            1e-5);
}

TEST(EnhanceViews, Examples) {
  const Tensor v = Tensor::from({2, 2}, {1, 2, -3, 0.5});
  EXPECT_EQ(to_vec(enhance_views(v, Tensor::from({2}, {1.0, 0.0}))),
            (std::vector<double>{2, 4, -3, 0.5}));
  std::mt19937_64 rng(35);
  std::uniform_real_distribution<double> u(1e-6, 1.0 - 1e-6);
  for (int trial = 0; trial < 100; ++trial) {
    const Tensor x = randn({1, 7}, rng);
    const double s = u(rng);
    const Tensor e = enhance_views(x, Tensor::from({1}, {s}));
    double nx = 0, ne = 0;
    for (std::size_t i = 0; i < 7; ++i) {
      EXPECT_EQ(e[i], x[i] * (1.0 + s));
      nx += x[i] * x[i];
      ne += e[i] * e[i];
    }
    EXPECT_NEAR(std::sqrt(ne) / std::sqrt(nx), 1.0 + s, 1e-12);
  }
}

TEST(SFusion, MatchesReferenceAndSingleViewCase) {
  std::mt19937_64 rng(36);
  const ModelConfig c = small_model();
  ParameterStore st = fusion_store(c, 3, rng);
  const Tensor p = randn({2, 5}, rng), v = randn({6, 4}, rng);
  const Tensor out = sfusion(st, p, v, 3);
  for (std::size_t b = 0; b < 2; ++b) {
    std::vector<double> expected(c.fusion_dim, -INFINITY);
    for (std::size_t i = 0; i < 3; ++i) {
      const auto f = mlp_ref(st, "sfusion", joined(row(p, b), row(v, b * 3 + i)));
      for (std::size_t d = 0; d < f.size(); ++d) expected[d] = std::max(expected[d], f[d]);
    }
    for (std::size_t d = 0; d < expected.size(); ++d) EXPECT_NEAR(out.at(b, d), expected[d], 1e-12);
  }
  const Tensor single = sfusion(st, p, gather_rows(v, std::vector<std::uint32_t>{0, 3}), 1);
  for (std::size_t b = 0; b < 2; ++b) {
    const auto f = mlp_ref(st, "sfusion", joined(row(p, b), row(v, b * 3)));
    for (std::size_t d = 0; d < f.size(); ++d) EXPECT_NEAR(single.at(b, d), f[d], 1e-12);
  }
}

TEST(SFusion, DuplicateOrPermutedViewsLeaveOutputUnchanged) {
  std::mt19937_64 rng(37);
  ParameterStore st = fusion_store(small_model(), 3, rng);
  const Tensor p = randn({1, 5}, rng), v = randn({3, 4}, rng);
  const auto base = to_vec(sfusion(st, p, v, 3));
  EXPECT_EQ(to_vec(sfusion(st, p, gather_rows(v, std::vector<std::uint32_t>{0, 1, 2, 1}), 4)), base);
  EXPECT_EQ(to_vec(sfusion(st, p, gather_rows(v, std::vector<std::uint32_t>{2, 0, 1}), 3)), base);
}

TEST(MFusion, MatchesStraightLineReference) {
  std::mt19937_64 rng(38);
  const ModelConfig c = small_model();
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    ParameterStore st = fusion_store(c, 3, rng);
    const std::size_t views = 2 + trial % 5, batch = 1 + trial % 3;
    const std::size_t top_k = 2 + trial % (views - 1);
    const Tensor p = randn({batch, 5}, rng), v = randn({batch * views, 4}, rng);
    std::vector<double> scores(batch * views);
    for (double& s : scores) s = u(rng);
    const Tensor out = mfusion(st, p, v, scores, views, top_k);
    for (std::size_t b = 0; b < batch; ++b) {
      std::vector<std::vector<double>> vs;
      for (std::size_t i = 0; i < views; ++i) vs.push_back(row(v, b * views + i));
      const std::vector<double> sb(scores.begin() + b * views, scores.begin() + (b + 1) * views);
      const auto expected = mfusion_ref(st, row(p, b), vs, sb, top_k);
      for (std::size_t d = 0; d < expected.size(); ++d) {
        ASSERT_NEAR(out.at(b, d), expected[d], 1e-12);
      }
    }
  }
}

TEST(MFusion, HandSetScoresAndSpecialCases) {
  std::mt19937_64 rng(39);
  const ModelConfig c = small_model();
  ParameterStore st = fusion_store(c, 3, rng);
  const Tensor p = randn({1, 5}, rng), v = randn({3, 4}, rng);
  const std::vector<double> scores{0.9, 0.5, 0.1};
  // (MF_2 + MF_3) / 2 with sets {0, 1} and {0, 1, 2}.
  auto mf = [&](std::vector<std::size_t> set) {
    std::vector<double> m(4, -INFINITY);
    for (std::size_t j : set) {
      for (std::size_t d = 0; d < 4; ++d) m[d] = std::max(m[d], v.at(j, d));
    }
    return mlp_ref(st, "mfusion", joined(row(p, 0), m));
  };
  const auto mf2 = mf({0, 1}), mf3 = mf({0, 1, 2});
  const Tensor k3 = mfusion(st, p, v, scores, 3, 3);
  for (std::size_t d = 0; d < mf2.size(); ++d) EXPECT_NEAR(k3[d], (mf2[d] + mf3[d]) / 2.0, 1e-12);

  const Tensor k2 = mfusion(st, p, v, scores, 3, 2);
  const Tensor mf2_t = mfusion(st, p, gather_rows(v, std::vector<std::uint32_t>{0, 1}),
                               std::vector<double>{0.9, 0.5}, 2, 2);
  EXPECT_EQ(to_vec(k2), to_vec(mf2_t));
  for (std::size_t d = 0; d < mf2.size(); ++d) EXPECT_NEAR(k2[d], mf2[d], 1e-12);

  // Identical views: every m_k is the same row, so K does not matter.
  const Tensor same = gather_rows(v, std::vector<std::uint32_t>{1, 1, 1});
  EXPECT_EQ(to_vec(mfusion(st, p, same, scores, 3, 3)), to_vec(mfusion(st, p, same, scores, 3, 2)));

  EXPECT_THROW(mfusion(st, p, v, scores, 3, 1), InputError);
  EXPECT_THROW(mfusion(st, p, v, scores, 3, 4), InputError);
}

TEST(Fuse, ConcatenationWidthsAndViewPermutationSymmetry) {
  std::mt19937_64 rng(40);
  const ModelConfig c = small_model();
  ParameterStore st = fusion_store(c, 3, rng);
  const Tensor p = randn({2, 5}, rng), v = randn({8, 4}, rng);
  const FusedFeature f = fuse(st, p, v, 4, {.use_mfusion = true, .top_k = 3});
  ASSERT_EQ(f.fusion.shape(), (Shape{2, 2 * c.fusion_dim}));
  EXPECT_EQ(to_vec(f.fusion), to_vec(concat({f.sfusion, f.mfusion}, 1)));
  EXPECT_EQ(f.logits.shape(), (Shape{2, 3}));
  EXPECT_EQ(f.embedding.shape(), (Shape{2, c.embed_dim}));

  const std::vector<std::uint32_t> perm{3, 1, 0, 2, 6, 7, 5, 4};
  const FusedFeature g = fuse(st, p, gather_rows(v, perm), 4, {.use_mfusion = true, .top_k = 3});
  EXPECT_EQ(to_vec(g.sfusion), to_vec(f.sfusion));
  EXPECT_EQ(to_vec(g.mfusion), to_vec(f.mfusion));
  EXPECT_EQ(to_vec(g.logits), to_vec(f.logits));
}

TEST(Fuse, EndToEndGradient) {
  std::mt19937_64 rng(41);
  ParameterStore st = fusion_store(small_model(), 3, rng);
  Tensor p = randn({2, 5}, rng), v = randn({8, 4}, rng);
  std::vector<Tensor> inputs{p, v};
  for (const auto& path : st.paths()) inputs.push_back(st.get(path));
  const std::vector<std::uint32_t> labels{0, 2};
  EXPECT_LT(fd_error([&] {
              return softmax_cross_entropy(fuse(st, p, v, 4, {.top_k = 3}).logits, labels);
            },
                     inputs),
            1e-5);
}

TEST(LateFusion, ParameterAuditAndPoolingProperties) {
  const ModelConfig defaults;
  std::mt19937_64 rng(42);
  ParameterStore late;
  init_late_fusion(late, defaults, 8, rng);
  const double fused = static_cast<double>(fusion_module_parameter_count(defaults, 8, true));
  const double ratio = static_cast<double>(late.parameter_count()) / fused;
  EXPECT_GT(ratio, 0.9);
  EXPECT_LT(ratio, 1.1);

  // The audit counts what init actually registers.
  ParameterStore full;
  init_relation(full, defaults, rng);
  init_sfusion(full, defaults, rng);
  init_mfusion(full, defaults, rng);
  init_fusion_head(full, defaults, 2 * defaults.fusion_dim, 8, rng);
  EXPECT_EQ(full.parameter_count(), fusion_module_parameter_count(defaults, 8, true));

  const ModelConfig c = small_model();
  ParameterStore st;
  init_late_fusion(st, c, 3, rng);
  randomize(st, rng);
  const Tensor p = randn({1, 5}, rng), v = randn({3, 4}, rng);
  const auto base = to_vec(late_fusion_baseline(st, p, v, 3).logits);
  EXPECT_EQ(to_vec(late_fusion_baseline(st, p, gather_rows(v, std::vector<std::uint32_t>{1, 2, 0}), 3)
                       .logits),
            base);
  EXPECT_EQ(to_vec(pool_views(v, 1)), to_vec(v));
}

}  // namespace
}  // namespace pvr
