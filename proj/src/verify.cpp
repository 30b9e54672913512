#include "pvrnet/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>

#include "pvrnet/encoders.hpp"
#include "pvrnet/errors.hpp"
#include "pvrnet/grad_check.hpp"
#include "pvrnet/metrics.hpp"
#include "pvrnet/ops.hpp"
#include "pvrnet/relation_fusion.hpp"
#include "pvrnet/synth.hpp"

namespace pvr {

bool VerifyReport::all_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

namespace {

constexpr double kGradTolerance = 1e-5;

using Rng = std::mt19937_64;

Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = n(rng);
  return Tensor::from(std::move(shape), std::move(v));
}

// Weighted sum with fixed random weights keeps every output coordinate in
// play with O(1) gradients.
Tensor probe(const Tensor& out, const Tensor& weights) { return sum(mul(out, weights)); }

ModelConfig tiny_config() {
  ModelConfig c;
  c.point_dim = 6;
  c.view_dim = 5;
  c.fusion_dim = 5;
  c.embed_dim = 4;
  c.knn = 3;
  c.top_k = 3;
  c.point_hidden = 4;
  c.edge_hidden1 = 4;
  c.edge_hidden2 = 4;
  c.view_hidden = 6;
  c.relation_hidden = 4;
  c.fusion_hidden = 6;
  return c;
}

// Every parameter, redrawn from N(0, 0.5^2). Zero-initialised biases would put
// relu inputs of dead rows exactly on the kink.
std::vector<Tensor> store_tensors(ParameterStore& store, Rng& rng) {
  std::normal_distribution<double> n(0.0, 0.5);
  std::vector<Tensor> out;
  for (const auto& path : store.paths()) {
    Tensor& t = store.get(path);
    for (double& x : t.mutable_values()) x = n(rng);
    out.push_back(t);
  }
  return out;
}

Matrix random_cloud(std::size_t n, Rng& rng) {
  std::normal_distribution<double> d(0.0, 1.0);
  Matrix m(n, 3);
  for (double& x : m.data) x = d(rng);
  return m;
}

class Suite {
 public:
  explicit Suite(const std::function<void(const CheckResult&)>& cb) : cb_(cb) {}

  void record(CheckResult r) {
    if (cb_) cb_(r);
    report.checks.push_back(std::move(r));
  }

  // Gradient check of `build` over `inputs`. Any exception fails the check.
  void grad(const std::string& name, const std::function<Tensor()>& build,
            std::vector<Tensor> inputs) {
    CheckResult r{"grad/" + name, false, 0.0, kGradTolerance, ""};
    try {
      const GradCheckResult g = grad_check_detailed(build, inputs);
      r.measured = g.max_rel_error;
      r.passed = g.max_rel_error < kGradTolerance;
      std::ostringstream os;
      os << "worst input " << g.worst_input << "[" << g.worst_index << "] analytic "
         << g.analytic << " numeric " << g.numeric;
      r.detail = os.str();
    } catch (const std::exception& e) {
      r.measured = INFINITY;
      r.detail = e.what();
    }
    record(std::move(r));
  }

  void check(const std::string& name, bool passed, double measured, double tolerance,
             std::string detail) {
    record({name, passed, measured, tolerance, std::move(detail)});
  }

  VerifyReport report;

 private:
  const std::function<void(const CheckResult&)>& cb_;
};

void op_gradients(Suite& s, Rng& rng) {
  auto unary = [&](const std::string& name, Shape shape, auto fn) {
    Tensor x = random_tensor(shape, rng);
    Tensor w = random_tensor(fn(x).shape(), rng);
    s.grad(name, [=] { return probe(fn(x), w); }, {x});
  };
  auto binary = [&](const std::string& name, Shape sa, Shape sb, auto fn) {
    Tensor a = random_tensor(sa, rng);
    Tensor b = random_tensor(sb, rng);
    Tensor w = random_tensor(fn(a, b).shape(), rng);
    s.grad(name, [=] { return probe(fn(a, b), w); }, {a, b});
  };

  binary("matmul", {3, 4}, {4, 5}, [](auto& a, auto& b) { return matmul(a, b); });
  binary("add", {3, 4}, {3, 4}, [](auto& a, auto& b) { return add(a, b); });
  binary("sub", {3, 4}, {1}, [](auto& a, auto& b) { return sub(a, b); });
  binary("mul", {3, 4}, {3, 4}, [](auto& a, auto& b) { return mul(a, b); });
  binary("mul_broadcast", {1}, {2, 3}, [](auto& a, auto& b) { return mul(a, b); });
  unary("scale", {2, 5}, [](auto& x) { return scale(x, -1.7); });
  unary("add_scalar", {2, 5}, [](auto& x) { return add_scalar(x, 0.3); });
  unary("relu", {4, 5}, [](auto& x) { return relu(x); });
  unary("sigmoid", {4, 5}, [](auto& x) { return sigmoid(x); });
  binary("add_bias", {3, 4}, {4}, [](auto& a, auto& b) { return add_bias(a, b); });
  binary("scale_rows", {3, 4}, {3}, [](auto& a, auto& b) { return scale_rows(a, b); });
  {
    Tensor x = random_tensor({3, 4}, rng);
    s.grad("sum", [=] { return scale(sum(x), 1.3); }, {x});
  }
  unary("max_over_axis", {3, 4, 5}, [](auto& x) { return max_over_axis(x, 1); });
  unary("mean_over_axis", {3, 4, 5}, [](auto& x) { return mean_over_axis(x, 2); });
  binary("concat", {3, 2}, {3, 4}, [](auto& a, auto& b) { return concat({a, b}, 1); });
  binary("concat_rows", {2, 3}, {4, 3}, [](auto& a, auto& b) { return concat({a, b}, 0); });
  unary("reshape", {3, 4}, [](auto& x) { return reshape(x, {2, 6}); });
  {
    const std::vector<std::uint32_t> rows{4, 0, 4, 2};
    unary("gather_rows", {5, 3}, [rows](auto& x) { return gather_rows(x, rows); });
    const std::vector<std::uint32_t> groups{0, 3, 5, 1, 2, 2, 4, 0};
    unary("gather_max_rows", {6, 3}, [groups](auto& x) { return gather_max_rows(x, groups, 2); });
    const std::vector<std::uint32_t> edges{1, 3, 0, 2, 3, 3, 1, 0};
    binary("edge_max_relu", {4, 6}, {3},
           [edges](auto& p, auto& b) { return edge_max_relu(p, edges, 2, b); });
  }
  {
    Tensor x = random_tensor({5, 3}, rng);
    Tensor w = random_tensor({3, 4}, rng);
    Tensor b = random_tensor({4}, rng);
    Tensor probe_w = random_tensor({5, 4}, rng);
    s.grad("linear_relu", [=] { return probe(linear_relu(x, w, b), probe_w); }, {x, w, b});
  }
  {
    Tensor logits = random_tensor({4, 5}, rng);
    const std::vector<std::uint32_t> labels{0, 3, 4, 3};
    s.grad("softmax_cross_entropy", [=] { return softmax_cross_entropy(logits, labels); },
           {logits});
  }
}

void module_gradients(Suite& s, Rng& rng) {
  const ModelConfig cfg = tiny_config();
  {
    ParameterStore st;
    init_edge_conv(st, "ec", 3, 4, 5, rng);
    const Matrix cloud = random_cloud(10, rng);
    const auto nbr = knn_graph(cloud, 3);
    Tensor x = matrix_tensor(cloud);
    Tensor w = random_tensor({10, 5}, rng);
    auto inputs = store_tensors(st, rng);
    inputs.push_back(x);
    s.grad("edge_conv", [&st, x, w, nbr] { return probe(edge_conv(st, "ec", x, nbr, 3), w); },
           inputs);
  }
  {
    ParameterStore st;
    init_point_encoder(st, cfg, rng);
    const Matrix cloud = random_cloud(16, rng);
    const auto nbr = knn_graph(cloud, cfg.knn);
    Tensor x = matrix_tensor(cloud);
    Tensor w = random_tensor({1, cfg.point_dim}, rng);
    auto inputs = store_tensors(st, rng);
    inputs.push_back(x);
    s.grad("point_encode",
           [&st, x, w, nbr, k = cfg.knn] { return probe(point_encode(st, x, nbr, 1, k), w); },
           inputs);
  }
  {
    ParameterStore st;
    init_view_encoder(st, cfg, 12, rng);
    Tensor d = random_tensor({4, 12}, rng);
    Tensor w = random_tensor({4, cfg.view_dim}, rng);
    auto inputs = store_tensors(st, rng);
    inputs.push_back(d);
    s.grad("view_encode", [&st, d, w] { return probe(view_encode(st, d), w); }, inputs);
  }

  const std::size_t views = 4, batch = 2;
  ParameterStore st;
  init_relation(st, cfg, rng);
  init_sfusion(st, cfg, rng);
  init_mfusion(st, cfg, rng);
  init_fusion_head(st, cfg, 2 * cfg.fusion_dim, 3, rng);
  Tensor p = random_tensor({batch, cfg.point_dim}, rng);
  Tensor v = random_tensor({batch * views, cfg.view_dim}, rng);
  {
    Tensor w = random_tensor({batch * views}, rng);
    auto inputs = store_tensors(st, rng);
    inputs.push_back(p);
    inputs.push_back(v);
    s.grad("relation_scores", [&st, p, v, w] { return probe(relation_scores(st, p, v, 4), w); },
           inputs);
  }
  {
    Tensor sc = sigmoid(random_tensor({batch * views}, rng)).detach();
    Tensor w = random_tensor({batch * views, cfg.view_dim}, rng);
    s.grad("enhance_views", [v, sc, w] { return probe(enhance_views(v, sc), w); }, {v, sc});
  }
  {
    Tensor w = random_tensor({batch, cfg.fusion_dim}, rng);
    auto inputs = store_tensors(st, rng);
    inputs.push_back(p);
    inputs.push_back(v);
    s.grad("sfusion", [&st, p, v, w] { return probe(sfusion(st, p, v, 4), w); }, inputs);
    std::vector<double> scores(batch * views);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (double& x : scores) x = u(rng);
    s.grad("mfusion",
           [&st, p, v, w, scores] { return probe(mfusion(st, p, v, scores, 4, 3), w); }, inputs);
  }

  // Full pipeline from raw inputs: N = 16 points, V = 4 views, K = 3.
  {
    ParameterStore full;
    init_point_encoder(full, cfg, rng);
    init_view_encoder(full, cfg, 12, rng);
    init_relation(full, cfg, rng);
    init_sfusion(full, cfg, rng);
    init_mfusion(full, cfg, rng);
    init_fusion_head(full, cfg, 2 * cfg.fusion_dim, 3, rng);
    const Matrix cloud = random_cloud(16, rng);
    const auto nbr = knn_graph(cloud, cfg.knn);
    Tensor x = matrix_tensor(cloud);
    Tensor d = random_tensor({views, 12}, rng);
    const std::vector<std::uint32_t> label{1};
    auto inputs = store_tensors(full, rng);
    inputs.push_back(x);
    inputs.push_back(d);
    FusionOptions opt;
    opt.top_k = 3;
    s.grad("fuse_end_to_end",
           [&full, x, d, nbr, label, opt, k = cfg.knn] {
             const Tensor pf = point_encode(full, x, nbr, 1, k);
             const Tensor vf = view_encode(full, d);
             return softmax_cross_entropy(fuse(full, pf, vf, 4, opt).logits, label);
           },
           inputs);
  }
  {
    ParameterStore late;
    init_late_fusion(late, cfg, 3, rng);
    Tensor w = random_tensor({batch, 3}, rng);
    auto inputs = store_tensors(late, rng);
    inputs.push_back(p);
    inputs.push_back(v);
    s.grad("late_fusion",
           [&late, p, v, w] { return probe(late_fusion_baseline(late, p, v, 4).logits, w); },
           inputs);
  }
}

void fusion_invariants(Suite& s, Rng& rng) {
  ModelConfig cfg;
  std::uniform_int_distribution<std::size_t> nviews(1, 12);
  double worst_ratio = 0.0;
  double min_score = 1.0, max_score = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    ParameterStore st;
    init_relation(st, cfg, rng);
    const std::size_t views = nviews(rng);
    const double spread = trial % 10 == 0 ? 40.0 : 1.0;  // some saturated instances
    const Tensor p = random_tensor({1, cfg.point_dim}, rng, spread);
    const Tensor v = random_tensor({views, cfg.view_dim}, rng, spread);
    const Tensor sc = relation_scores(st, p, v, views);
    const Tensor enh = enhance_views(v, sc);
    for (std::size_t i = 0; i < views; ++i) {
      min_score = std::min(min_score, sc[i]);
      max_score = std::max(max_score, sc[i]);
      double nv = 0.0, ne = 0.0;
      for (std::size_t j = 0; j < cfg.view_dim; ++j) {
        nv += v.at(i, j) * v.at(i, j);
        ne += enh.at(i, j) * enh.at(i, j);
      }
      worst_ratio = std::max(worst_ratio, std::abs(std::sqrt(ne) / std::sqrt(nv) - (1.0 + sc[i])));
    }
  }
  s.check("invariant/score_range", min_score > 0.0 && max_score < 1.0,
          std::max(max_score, 1.0 - min_score), 1.0, "scores within (0, 1) over 1000 instances");
  s.check("invariant/enhancement_norm", worst_ratio <= 1e-12, worst_ratio, 1e-12,
          "max |norm(v')/norm(v) - (1 + s)|");

  // View permutation symmetry with pairwise-distinct scores.
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 50; ++trial) {
    ParameterStore st;
    init_relation(st, cfg, rng);
    init_sfusion(st, cfg, rng);
    init_mfusion(st, cfg, rng);
    init_fusion_head(st, cfg, 2 * cfg.fusion_dim, 8, rng);
    const std::size_t views = 12;
    const Tensor p = random_tensor({1, cfg.point_dim}, rng);
    const Tensor v = random_tensor({views, cfg.view_dim}, rng);
    std::vector<std::uint32_t> perm(views);
    std::iota(perm.begin(), perm.end(), 0u);
    std::shuffle(perm.begin(), perm.end(), rng);
    FusionOptions opt;
    const FusedFeature a = fuse(st, p, v, views, opt);
    const FusedFeature b = fuse(st, p, gather_rows(v, perm), views, opt);
    auto same = [](const Tensor& x, const Tensor& y) {
      return std::equal(x.values().begin(), x.values().end(), y.values().begin(), y.values().end());
    };
    if (!same(a.sfusion, b.sfusion) || !same(a.mfusion, b.mfusion) || !same(a.fusion, b.fusion) ||
        !same(a.logits, b.logits)) {
      ++mismatches;
    }
  }
  s.check("symmetry/view_permutation", mismatches == 0, static_cast<double>(mismatches), 0.0,
          "instances whose fused outputs changed under a view permutation");
}

std::vector<std::uint32_t> top_k_by_sorting(const std::vector<double>& s, std::size_t k) {
  std::vector<std::pair<double, std::uint32_t>> keyed;
  for (std::uint32_t i = 0; i < s.size(); ++i) keyed.emplace_back(-s[i], i);
  std::sort(keyed.begin(), keyed.end());
  std::vector<std::uint32_t> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(keyed[i].second);
  return out;
}

void selection_oracles(Suite& s, Rng& rng) {
  std::size_t mismatches = 0;
  std::uniform_int_distribution<std::size_t> len(1, 16);
  std::uniform_int_distribution<int> coarse(0, 4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> sc(len(rng));
    // Every third vector draws from a few levels so ties are common.
    for (double& x : sc) x = trial % 3 == 0 ? coarse(rng) / 4.0 : u(rng);
    for (std::size_t k = 1; k <= sc.size(); ++k) {
      if (select_top_k(sc, k) != top_k_by_sorting(sc, k)) ++mismatches;
    }
  }
  s.check("oracle/top_k", mismatches == 0, static_cast<double>(mismatches), 0.0,
          "selections differing from a full sort over 1000 score vectors, every k");

  // Straight-line multi-view fusion reference.
  ModelConfig cfg;
  double worst = 0.0;
  std::size_t k2_mismatch = 0;
  for (int trial = 0; trial < 100; ++trial) {
    ParameterStore st;
    init_mfusion(st, cfg, rng);
    const std::size_t views = 4 + trial % 9;
    const std::size_t top_k = 2 + trial % (views - 1);
    const Tensor p = random_tensor({1, cfg.point_dim}, rng);
    const Tensor v = random_tensor({views, cfg.view_dim}, rng);
    std::vector<double> sc(views);
    for (double& x : sc) x = u(rng);
    const Tensor got = mfusion(st, p, v, sc, views, top_k);

    const auto& w1 = st.get("mfusion.fc1.w");
    const auto& b1 = st.get("mfusion.fc1.b");
    const auto& w2 = st.get("mfusion.fc2.w");
    const auto& b2 = st.get("mfusion.fc2.b");
    const std::size_t in = cfg.point_dim + cfg.view_dim, hid = cfg.fusion_hidden,
                      out = cfg.fusion_dim;
    std::vector<std::size_t> order(views);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return sc[a] != sc[b] ? sc[a] > sc[b] : a < b;
    });
    std::vector<double> total(out, 0.0);
    for (std::size_t k = 2; k <= top_k; ++k) {
      std::vector<double> x(in);
      for (std::size_t j = 0; j < cfg.point_dim; ++j) x[j] = p[j];
      for (std::size_t j = 0; j < cfg.view_dim; ++j) {
        double m = -INFINITY;
        for (std::size_t r = 0; r < k; ++r) m = std::max(m, v.at(order[r], j));
        x[cfg.point_dim + j] = m;
      }
      std::vector<double> h(hid);
      for (std::size_t c = 0; c < hid; ++c) {
        double a = b1[c];
        for (std::size_t r = 0; r < in; ++r) a += x[r] * w1.at(r, c);
        h[c] = std::max(0.0, a);
      }
      for (std::size_t c = 0; c < out; ++c) {
        double a = b2[c];
        for (std::size_t r = 0; r < hid; ++r) a += h[r] * w2.at(r, c);
        total[c] += std::max(0.0, a);
      }
    }
    for (std::size_t c = 0; c < out; ++c) {
      worst = std::max(worst, std::abs(total[c] / static_cast<double>(top_k - 1) - got[c]));
    }

    // K = 2 must be exactly the single MF_2 term.
    const Tensor k2 = mfusion(st, p, v, sc, views, 2);
    const std::vector<std::uint32_t> top2{static_cast<std::uint32_t>(order[0]),
                                          static_cast<std::uint32_t>(order[1])};
    const Tensor m2 = max_over_axis(reshape(gather_rows(v, top2), {1, 2, cfg.view_dim}), 1);
    const Tensor mf2 = relu(linear(st, "mfusion.fc2", relu(linear(st, "mfusion.fc1",
                                                                 concat({p, m2}, 1)))));
    if (!std::equal(k2.values().begin(), k2.values().end(), mf2.values().begin(),
                    mf2.values().end())) {
      ++k2_mismatch;
    }
  }
  s.check("oracle/mfusion", worst <= 1e-12, worst, 1e-12,
          "max abs difference from a loop-level reference over 100 instances");
  s.check("oracle/mfusion_k2", k2_mismatch == 0, static_cast<double>(k2_mismatch), 0.0,
          "instances where K = 2 differs from MF_2");
}

void encoder_properties(Suite& s, Rng& rng) {
  // kNN against a full sort of distances (distinct random coordinates).
  std::size_t knn_mismatch = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 10 + trial;
    const std::size_t k = 1 + trial % 8;
    const Matrix cloud = random_cloud(n, rng);
    const auto got = knn_graph(cloud, k);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<std::pair<double, std::uint32_t>> d;
      for (std::uint32_t j = 0; j < n; ++j) {
        if (j == i) continue;
        double s2 = 0.0;
        for (std::size_t c = 0; c < 3; ++c) s2 += std::pow(cloud(j, c) - cloud(i, c), 2);
        d.emplace_back(s2, j);
      }
      std::sort(d.begin(), d.end());
      for (std::size_t t = 0; t < k; ++t) knn_mismatch += got[i * k + t] != d[t].second;
    }
  }
  s.check("oracle/knn", knn_mismatch == 0, static_cast<double>(knn_mismatch), 0.0,
          "neighbour entries differing from a brute-force sort over 50 clouds");

  // Point permutation invariance of the encoder.
  ModelConfig cfg;
  SynthConfig sc;
  sc.points = 256;
  std::size_t perm_mismatch = 0;
  for (int cloud_id = 0; cloud_id < 5; ++cloud_id) {
    ParameterStore st;
    init_point_encoder(st, cfg, rng);
    const Matrix cloud = generate_shape(cloud_id % kShapeFamilies, rng(), sc);
    const Tensor base = point_encode(st, cloud, cfg.knn);
    for (int t = 0; t < 10; ++t) {
      std::vector<std::size_t> perm(cloud.rows);
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      Matrix shuffled(cloud.rows, 3);
      for (std::size_t r = 0; r < cloud.rows; ++r) {
        for (std::size_t c = 0; c < 3; ++c) shuffled(r, c) = cloud(perm[r], c);
      }
      const Tensor got = point_encode(st, shuffled, cfg.knn);
      perm_mismatch += !std::equal(base.values().begin(), base.values().end(),
                                   got.values().begin(), got.values().end());
    }
  }
  s.check("invariance/point_permutation", perm_mismatch == 0, static_cast<double>(perm_mismatch),
          0.0, "point features changed by a row permutation (5 clouds x 10 permutations)");
}

void retrieval_properties(Suite& s, Rng& rng) {
  std::size_t ap_mismatch = 0;
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t m = 2 + trial % 29;
    const std::size_t classes = std::min<std::size_t>(1 + trial % 4, m / 2);
    Matrix e(m, 4);
    for (double& x : e.data) x = n(rng);
    std::vector<std::uint32_t> labels(m);
    for (std::size_t i = 0; i < m; ++i) labels[i] = static_cast<std::uint32_t>(i % classes);
    const RetrievalResult r = retrieval_map(e, labels);
    for (std::size_t q = 0; q < m; ++q) {
      // Rank of i = number of items strictly closer, or equally close with a
      // lower index.
      auto dist = [&](std::size_t a, std::size_t b) {
        double dot = 0.0, na = 0.0, nb = 0.0;
        for (std::size_t j = 0; j < 4; ++j) {
          dot += e(a, j) * e(b, j);
          na += e(a, j) * e(a, j);
          nb += e(b, j) * e(b, j);
        }
        return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
      };
      std::vector<std::size_t> rel_ranks;
      for (std::size_t i = 0; i < m; ++i) {
        if (i == q || labels[i] != labels[q]) continue;
        std::size_t rank = 1;
        for (std::size_t j = 0; j < m; ++j) {
          if (j == q || j == i) continue;
          const double dj = dist(q, j), di = dist(q, i);
          rank += dj < di || (dj == di && j < i);
        }
        rel_ranks.push_back(rank);
      }
      if (rel_ranks.empty()) continue;
      std::sort(rel_ranks.begin(), rel_ranks.end());
      double ap = 0.0;
      for (std::size_t h = 0; h < rel_ranks.size(); ++h) {
        ap += static_cast<double>(h + 1) / static_cast<double>(rel_ranks[h]);
      }
      ap /= static_cast<double>(rel_ranks.size());
      ap_mismatch += ap != r.average_precision[q];
    }
    for (std::size_t j = 1; j < r.pr_curve.size(); ++j) {
      ap_mismatch += r.pr_curve[j].precision > r.pr_curve[j - 1].precision;
    }
  }
  s.check("oracle/retrieval_ap", ap_mismatch == 0, static_cast<double>(ap_mismatch), 0.0,
          "AP mismatches against rank counting plus PR monotonicity violations");
}

}  // namespace

VerifyReport run_verification(const std::function<void(const CheckResult&)>& on_check) {
  const auto start = std::chrono::steady_clock::now();
  Suite s(on_check);
  Rng rng(20190127);
  op_gradients(s, rng);
  module_gradients(s, rng);
  fusion_invariants(s, rng);
  selection_oracles(s, rng);
  encoder_properties(s, rng);
  retrieval_properties(s, rng);
  s.report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return std::move(s.report);
}

std::string format_report(const VerifyReport& report) {
  std::string out;
  char buf[512];
  std::snprintf(buf, sizeof buf, "%-34s %-6s %12s %12s  %s\n", "check", "result", "measured",
                "tolerance", "detail");
  out += buf;
  for (const auto& c : report.checks) {
    std::snprintf(buf, sizeof buf, "%-34s %-6s %12.3e %12.3e  %s\n", c.name.c_str(),
                  c.passed ? "PASS" : "FAIL", c.measured, c.tolerance, c.detail.c_str());
    out += buf;
  }
  std::size_t failed = 0;
  for (const auto& c : report.checks) failed += !c.passed;
  std::snprintf(buf, sizeof buf, "%zu checks, %zu failed, %.1f s\n", report.checks.size(), failed,
                report.seconds);
  out += buf;
  return out;
}

}  // namespace pvr
