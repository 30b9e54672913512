// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any fails.
//
//   acceptance --pvrf <path to pvrf> [--work <dir>] [--only 1,2,...]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <sys/wait.h>

#include <CLI11.hpp>

#include "pvrnet/encoders.hpp"
#include "pvrnet/experiments.hpp"
#include "pvrnet/metrics.hpp"
#include "pvrnet/ops.hpp"
#include "pvrnet/relation_fusion.hpp"
#include "pvrnet/training.hpp"
#include "pvrnet/verify.hpp"

namespace fs = std::filesystem;
using namespace pvr;

namespace {

using Rng = std::mt19937_64;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

Tensor randn(Shape shape, Rng& rng, double sd = 1.0) {
  std::normal_distribution<double> n(0.0, sd);
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = n(rng);
  return Tensor::from(std::move(shape), std::move(v));
}

void randomize(ParameterStore& st, Rng& rng, double sd) {
  std::normal_distribution<double> n(0.0, sd);
  for (const auto& p : st.paths()) {
    for (double& x : st.get(p).mutable_values()) x = n(rng);
  }
}

std::vector<double> values(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

ParameterStore fusion_params(const ModelConfig& c, std::size_t classes, Rng& rng) {
  ParameterStore st;
  init_relation(st, c, rng);
  init_sfusion(st, c, rng);
  init_mfusion(st, c, rng);
  init_fusion_head(st, c, 2 * c.fusion_dim, classes, rng);
  return st;
}

// 1. Finite-difference checks of every op and of the fused forward pass.
Outcome gradient_correctness() {
  const VerifyReport r = run_verification();
  double worst = 0.0;
  std::size_t checks = 0;
  std::vector<std::string> failed;
  bool saw_fused = false;
  for (const auto& c : r.checks) {
    if (c.name.rfind("grad/", 0) != 0) continue;
    ++checks;
    worst = std::max(worst, c.measured);
    saw_fused |= c.name == "grad/fuse_end_to_end";
    if (!(c.measured < 1e-5)) failed.push_back(c.name);
  }
  std::string detail = std::to_string(checks) + " gradient checks, max rel err " +
                       fmt("%.2e", worst) + " (< 1e-5), suite " + fmt("%.1f", r.seconds) +
                       " s (< 60 s)";
  for (const auto& f : failed) detail += "; failed " + f;
  return {failed.empty() && saw_fused && r.seconds < 60.0, detail};
}

// 2. Score range and enhancement norm ratio.
Outcome score_invariants() {
  Rng rng(2002);
  std::size_t bad_range = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    ModelConfig c;
    c.point_dim = 4 + trial % 13;
    c.view_dim = 3 + trial % 11;
    c.relation_hidden = 2 + trial % 9;
    ParameterStore st;
    init_relation(st, c, rng);
    randomize(st, rng, 0.2 + (trial % 5) * 0.4);
    const std::size_t views = 1 + trial % 12;
    const Tensor p = randn({1, c.point_dim}, rng, 2.0);
    const Tensor v = randn({views, c.view_dim}, rng, 2.0);
    const Tensor s = relation_scores(st, p, v, views);
    const Tensor e = enhance_views(v, s);
    for (std::size_t i = 0; i < views; ++i) {
      if (!(s[i] > 0.0 && s[i] < 1.0)) ++bad_range;
      double nv = 0.0, ne = 0.0;
      for (std::size_t d = 0; d < c.view_dim; ++d) {
        nv += v.at(i, d) * v.at(i, d);
        ne += e.at(i, d) * e.at(i, d);
      }
      worst = std::max(worst, std::abs(std::sqrt(ne) / std::sqrt(nv) - (1.0 + s[i])));
    }
  }
  return {bad_range == 0 && worst <= 1e-12,
          "1000 instances, scores outside (0,1): " + std::to_string(bad_range) +
              ", max |ratio - (1+s)| " + fmt("%.2e", worst) + " (<= 1e-12)"};
}

// 3. View permutation leaves the fused outputs bit-identical.
Outcome view_permutation_symmetry() {
  Rng rng(3003);
  ModelConfig c;
  c.point_dim = 16;
  c.view_dim = 12;
  c.fusion_dim = 10;
  c.embed_dim = 8;
  c.relation_hidden = 8;
  c.fusion_hidden = 16;
  std::size_t tested = 0, changed = 0;
  while (tested < 50) {
    ParameterStore st = fusion_params(c, 5, rng);
    const std::size_t views = 12;
    const Tensor p = randn({1, c.point_dim}, rng), v = randn({views, c.view_dim}, rng);
    const FusionOptions opt{.use_mfusion = true, .top_k = 4};
    const FusedFeature a = fuse(st, p, v, views, opt);
    std::set<double> distinct(a.scores.values().begin(), a.scores.values().end());
    if (distinct.size() != views) continue;  // the criterion covers distinct scores only
    ++tested;
    std::vector<std::uint32_t> perm(views);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const FusedFeature b = fuse(st, p, gather_rows(v, perm), views, opt);
    if (values(a.sfusion) != values(b.sfusion) || values(a.mfusion) != values(b.mfusion) ||
        values(a.fusion) != values(b.fusion) || values(a.logits) != values(b.logits)) {
      ++changed;
    }
  }
  return {changed == 0, "50 inputs with distinct scores, changed outputs: " +
                            std::to_string(changed)};
}

// 4. Top-k against a full sort.
Outcome top_k_oracle() {
  Rng rng(4004);
  std::uniform_int_distribution<int> coarse(0, 7);
  std::uniform_real_distribution<double> fine(0.0, 1.0);
  std::size_t mismatches = 0, comparisons = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t v = 1 + trial % 16;
    std::vector<double> s(v);
    for (double& x : s) x = trial % 2 ? coarse(rng) / 7.0 : fine(rng);
    std::vector<std::uint32_t> idx(v);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](std::uint32_t a, std::uint32_t b) { return s[a] > s[b] || (s[a] == s[b] && a < b); });
    for (std::size_t k = 1; k <= v; ++k) {
      ++comparisons;
      mismatches += select_top_k(s, k) != std::vector<std::uint32_t>(idx.begin(), idx.begin() + k);
    }
  }
  return {mismatches == 0, "1000 score vectors, " + std::to_string(comparisons) +
                               " (vector, k) pairs, mismatches: " + std::to_string(mismatches)};
}

// 5. MFusion against a loop-level reference.
std::vector<double> mlp_relu2(const ParameterStore& st, const std::string& prefix,
                              const std::vector<double>& x) {
  std::vector<double> h = x;
  for (const char* layer : {".fc1", ".fc2"}) {
    const Tensor& w = st.get(prefix + layer + ".w");
    const Tensor& b = st.get(prefix + layer + ".b");
    std::vector<double> out(w.dim(1));
    for (std::size_t o = 0; o < out.size(); ++o) {
      double acc = 0.0;
      for (std::size_t i = 0; i < h.size(); ++i) acc += h[i] * w.at(i, o);
      acc += b[o];
      out[o] = acc > 0.0 ? acc : 0.0;
    }
    h = std::move(out);
  }
  return h;
}

Outcome mfusion_oracle() {
  Rng rng(5005);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  std::size_t k2_mismatch = 0;
  for (int trial = 0; trial < 100; ++trial) {
    ModelConfig c;
    c.point_dim = 3 + trial % 7;
    c.view_dim = 2 + trial % 5;
    c.fusion_hidden = 4 + trial % 6;
    c.fusion_dim = 3 + trial % 4;
    ParameterStore st;
    init_mfusion(st, c, rng);
    randomize(st, rng, 0.8);
    const std::size_t views = 2 + trial % 11;
    const std::size_t top_k = 2 + trial % (views - 1);
    const Tensor p = randn({1, c.point_dim}, rng), v = randn({views, c.view_dim}, rng);
    std::vector<double> s(views);
    for (double& x : s) x = u(rng);
    const Tensor got = mfusion(st, p, v, s, views, top_k);

    std::vector<std::size_t> order(views);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return s[a] > s[b] || (s[a] == s[b] && a < b); });
    std::vector<double> acc(c.fusion_dim, 0.0), mf2;
    for (std::size_t k = 2; k <= top_k; ++k) {
      std::vector<double> x(p.values().begin(), p.values().end());
      for (std::size_t d = 0; d < c.view_dim; ++d) {
        double m = -INFINITY;
        for (std::size_t j = 0; j < k; ++j) m = std::max(m, v.at(order[j], d));
        x.push_back(m);
      }
      const auto out = mlp_relu2(st, "mfusion", x);
      if (k == 2) mf2 = out;
      for (std::size_t d = 0; d < out.size(); ++d) acc[d] += out[d];
    }
    for (std::size_t d = 0; d < acc.size(); ++d) {
      worst = std::max(worst, std::abs(got[d] - acc[d] / static_cast<double>(top_k - 1)));
    }
    // K = 2 is MF_2 itself: the one-term mean must reproduce it bit for bit.
    const Tensor k2 = mfusion(st, p, v, s, views, 2);
    k2_mismatch += values(k2) != mf2;
  }
  return {worst <= 1e-12 && k2_mismatch == 0,
          "100 instances, max abs diff " + fmt("%.2e", worst) +
              " (<= 1e-12), K=2 differing from MF_2: " + std::to_string(k2_mismatch)};
}

// 6. Point permutation invariance of the encoder.
Outcome point_permutation_invariance() {
  Rng rng(6006);
  const ModelConfig c;
  ParameterStore st;
  init_point_encoder(st, c, rng);
  randomize(st, rng, 0.3);
  const SynthConfig sc;
  std::size_t changed = 0;
  for (std::size_t cloud = 0; cloud < 20; ++cloud) {
    const Matrix pts = generate_shape(cloud % kShapeFamilies, 600 + cloud, sc);
    const std::vector<double> ref = values(point_encode(st, pts, c.knn));
    for (int perm = 0; perm < 50; ++perm) {
      std::vector<std::size_t> order(pts.rows);
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
      Matrix shuffled(pts.rows, 3);
      for (std::size_t i = 0; i < pts.rows; ++i) {
        std::copy(pts.row(order[i]), pts.row(order[i]) + 3, shuffled.row(i));
      }
      changed += values(point_encode(st, shuffled, c.knn)) != ref;
    }
  }
  return {changed == 0, "20 clouds x 50 permutations of " + std::to_string(sc.points) +
                            " points, changed features: " + std::to_string(changed)};
}

// 10. Retrieval metric against rank counting.
Outcome retrieval_correctness() {
  Rng rng(1010);
  std::normal_distribution<double> n(0.0, 1.0);
  std::size_t ap_mismatch = 0, pr_violations = 0, datasets = 0;
  for (std::size_t m = 2; m <= 30; ++m) {
    for (int rep = 0; rep < 20; ++rep) {
      const std::size_t dim = 1 + rep % 4;
      Matrix e(m, dim);
      for (double& x : e.data) x = rep % 3 == 0 ? std::round(n(rng)) : n(rng);  // ties too
      std::vector<std::uint32_t> labels(m);
      std::uniform_int_distribution<std::uint32_t> cls(0, 1 + rep % 4);
      for (auto& l : labels) l = cls(rng);
      labels[1] = labels[0];
      ++datasets;
      auto dist = [&](std::size_t a, std::size_t b) {
        double dot = 0, na = 0, nb = 0;
        for (std::size_t d = 0; d < dim; ++d) {
          dot += e(a, d) * e(b, d);
          na += e(a, d) * e(a, d);
          nb += e(b, d) * e(b, d);
        }
        if (na == 0.0 || nb == 0.0) return 1.0;
        return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
      };
      std::ostringstream sink;
      auto* old = std::cerr.rdbuf(sink.rdbuf());  // exclusion warnings are expected here
      const RetrievalResult r = retrieval_map(e, labels);
      std::cerr.rdbuf(old);
      for (std::size_t q = 0; q < m; ++q) {
        std::vector<std::size_t> ranks;
        for (std::size_t i = 0; i < m; ++i) {
          if (i == q || labels[i] != labels[q]) continue;
          std::size_t rank = 1;
          for (std::size_t j = 0; j < m; ++j) {
            if (j == q || j == i) continue;
            const double dj = dist(q, j), di = dist(q, i);
            rank += dj < di || (dj == di && j < i);
          }
          ranks.push_back(rank);
        }
        if (ranks.empty()) {
          ap_mismatch += !std::isnan(r.average_precision[q]);
          continue;
        }
        std::sort(ranks.begin(), ranks.end());
        double ap = 0.0;
        for (std::size_t h = 0; h < ranks.size(); ++h) ap += (h + 1.0) / ranks[h];
        ap /= static_cast<double>(ranks.size());
        ap_mismatch += ap != r.average_precision[q];
      }
      for (std::size_t j = 1; j < r.pr_curve.size(); ++j) {
        pr_violations += r.pr_curve[j].precision > r.pr_curve[j - 1].precision;
      }
    }
  }
  Matrix clustered(40, 8);
  std::vector<std::uint32_t> labels;
  for (std::size_t i = 0; i < 40; ++i) {
    clustered(i, i % 8) = 1.0;
    labels.push_back(static_cast<std::uint32_t>(i % 8));
  }
  const double perfect = retrieval_map(clustered, labels).map;
  return {ap_mismatch == 0 && pr_violations == 0 && perfect == 1.0,
          std::to_string(datasets) + " datasets with M <= 30, AP mismatches " +
              std::to_string(ap_mismatch) + ", PR increases " + std::to_string(pr_violations) +
              ", clustered mAP " + fmt("%.6f", perfect)};
}

// 11. Two runs of every CLI subcommand produce identical artifacts.
int sh(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    files[fs::relative(e.path(), root).string()] = {std::istreambuf_iterator<char>(in), {}};
  }
  return files;
}

Outcome cli_determinism(const std::string& pvrf, const fs::path& work) {
  const char* config = R"({
  "dataset": {"classes": 4, "train_per_class": 6, "test_per_class": 3, "points": 256},
  "model": {"point_dim": 16, "view_dim": 16, "fusion_dim": 16, "embed_dim": 8,
            "point_hidden": 8, "edge_hidden1": 8, "edge_hidden2": 8, "view_hidden": 32,
            "relation_hidden": 8, "fusion_hidden": 16},
  "schedule": {"epochs": 3, "freeze_epochs": 1, "batch_size": 8}
})";
  const std::vector<std::string> commands{
      "gen-data",        "train point",           "train view", "train fusion",
      "train late",      "eval --model fusion",   "eval --model late",
      "ablate --seeds 1", "robustness",           "verify"};
  std::vector<std::map<std::string, std::string>> runs;
  std::vector<std::string> stdout_text;
  for (const char* name : {"run_a", "run_b"}) {
    const fs::path dir = work / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::ofstream(dir / "config.json") << config;
    std::string out;
    for (const auto& c : commands) {
      const std::string cmd = "cd '" + dir.string() + "' && '" + pvrf + "' " + c +
                              (c == "verify" ? "" : " --config config.json --quiet") +
                              " > last_stdout.txt";
      if (sh(cmd) != 0) return {false, "`pvrf " + c + "` failed in " + dir.string()};
      std::ifstream in(dir / "last_stdout.txt");
      std::string text{std::istreambuf_iterator<char>(in), {}};
      // The verify table ends with a wall-clock line; everything else is compared.
      if (c == "verify") text = text.substr(0, text.rfind("checks,"));
      out += text;
    }
    fs::remove(dir / "last_stdout.txt");
    runs.push_back(snapshot(dir));
    stdout_text.push_back(out);
  }
  std::size_t differing = 0;
  for (const auto& [file, bytes] : runs[0]) {
    auto it = runs[1].find(file);
    differing += it == runs[1].end() || it->second != bytes;
  }
  differing += runs[0].size() != runs[1].size();
  const bool same_stdout = stdout_text[0] == stdout_text[1];
  return {differing == 0 && same_stdout && runs[0].size() >= 12,
          std::to_string(commands.size()) + " subcommands run twice, " +
              std::to_string(runs[0].size()) + " artifacts, differing: " +
              std::to_string(differing) + (same_stdout ? ", stdout identical" : ", stdout differs")};
}

// 12. Encoders frozen in phase 1, moving in phase 2.
Outcome freeze_contract() {
  ExperimentConfig cfg;
  cfg.dataset.train_per_class = 8;
  cfg.dataset.test_per_class = 2;
  cfg.schedule.epochs = 5;
  cfg.schedule.freeze_epochs = 3;
  const DatasetSplit d = make_dataset(cfg.dataset);
  const PreparedSet train(d.train, cfg.model.knn);
  ModelSpec point_spec{ModelKind::kPoint, false, 0}, view_spec{ModelKind::kView, false, 0};
  Model point(point_spec, cfg.model, cfg.dataset.classes, cfg.dataset.descriptor_size(), 1);
  Model view(view_spec, cfg.model, cfg.dataset.classes, cfg.dataset.descriptor_size(), 1);
  ScheduleConfig pre = cfg.schedule;
  pre.epochs = 1;
  pretrain_unimodal(point, train, pre);
  pretrain_unimodal(view, train, pre);
  Model fusion(ModelSpec{}, cfg.model, cfg.dataset.classes, cfg.dataset.descriptor_size(), 1);
  fusion.load_encoder(point.params(), "point.");
  fusion.load_encoder(view.params(), "view.");

  auto encoder_values = [](const ParameterStore& st) {
    std::vector<std::vector<double>> out;
    for (const auto& p : st.paths()) {
      if (p.rfind("point.", 0) == 0 || p.rfind("view.", 0) == 0) out.push_back(values(st.get(p)));
    }
    return out;
  };
  const auto initial = encoder_values(fusion.params());
  std::size_t phase1_epochs = 0, phase1_changed = 0;
  std::vector<std::vector<double>> last_phase1;
  bool moved_in_first_step = false, saw_phase2 = false;
  TrainHooks hooks;
  hooks.on_epoch_end = [&](std::size_t, int phase, const ParameterStore& st) {
    if (phase != 1) return;
    ++phase1_epochs;
    last_phase1 = encoder_values(st);
    phase1_changed += last_phase1 != initial;
  };
  hooks.on_step = [&](std::size_t epoch, std::size_t step, int phase, const ParameterStore& st) {
    if (phase == 2 && epoch == cfg.schedule.freeze_epochs && step == 0) {
      saw_phase2 = true;
      moved_in_first_step = encoder_values(st) != last_phase1;
    }
  };
  train_fusion(fusion, train, cfg.schedule, hooks);
  return {phase1_epochs == cfg.schedule.freeze_epochs && phase1_changed == 0 && saw_phase2 &&
              moved_in_first_step,
          std::to_string(phase1_epochs) + " frozen epochs, encoder changes during them: " +
              std::to_string(phase1_changed) + ", encoder moved in first phase-2 step: " +
              (moved_in_first_step ? "yes" : "no")};
}

// 7-9. Ablation over 5 seeds; robustness on the models of the first 3.
struct AblationOutcomes {
  Outcome ordering, views, points;
};

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

AblationOutcomes ablation_and_robustness(const fs::path& work) {
  const auto start = Clock::now();
  const ExperimentConfig cfg;
  const DatasetSplit d = make_dataset(cfg.dataset);
  const PreparedSet train(d.train, cfg.model.knn), test(d.test, cfg.model.knn);

  std::map<std::string, std::vector<double>> acc;
  std::map<std::string, std::vector<double>> view_drop, point_drop;
  std::vector<std::vector<AblationRow>> all_rows;
  std::string per_seed = "seed,model,mean_class_acc,overall_acc\n";
  double robustness_seconds = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    AblationRun run = run_ablation(train, test, cfg, seed);
    all_rows.push_back(run.rows);
    for (const auto& r : run.rows) {
      acc[r.model].push_back(r.overall_acc);
      per_seed += std::to_string(seed) + "," + r.model + "," + fmt("%.6f", r.mean_class_acc) +
                  "," + fmt("%.6f", r.overall_acc) + "\n";
    }
    std::cout << "  seed " << seed << " ablation done at " << fmt("%.0f", seconds_since(start))
              << " s\n"
              << std::flush;
    if (seed > 3) continue;
    const auto rs = Clock::now();
    std::vector<const Model*> models;
    for (const auto& m : run.models) {
      const std::string label = model_label(m.spec());
      if (label == "point_only" || label == "view_only" || label == "sm_fusion_k4") {
        models.push_back(&m);
      }
    }
    const RobustnessTables t = run_robustness(models, d.test, cfg.model.knn);
    for (const Model* m : models) {
      const std::string label = model_label(m->spec());
      view_drop[label].push_back(sweep_accuracy(t.views, label, 12) -
                                 sweep_accuracy(t.views, label, 4));
      point_drop[label].push_back(sweep_accuracy(t.points, label, 1024) -
                                  sweep_accuracy(t.points, label, 128));
    }
    robustness_seconds += seconds_since(rs);
  }
  const double ablation_seconds = seconds_since(start) - robustness_seconds;
  fs::create_directories(work);
  std::ofstream(work / "ablation_median.csv") << ablation_csv(median_rows(all_rows));
  std::ofstream(work / "ablation_seeds.csv") << per_seed;

  const double point = median(acc["point_only"]), view = median(acc["view_only"]);
  const double late = median(acc["late_fusion"]), sf = median(acc["sfusion_only"]);
  const double sm4 = median(acc["sm_fusion_k4"]);
  constexpr double tol = 0.005;  // half a percentage point
  const bool ordered = sm4 >= sf - tol && sf >= late - tol && late >= std::max(point, view) - tol;
  AblationOutcomes out;
  out.ordering = {ordered && ablation_seconds < 3600.0,
                  "median overall acc point " + fmt("%.4f", point) + ", view " + fmt("%.4f", view) +
                      ", late " + fmt("%.4f", late) + ", sfusion " + fmt("%.4f", sf) +
                      ", s+m k4 " + fmt("%.4f", sm4) + " (tolerance 0.005); ablation " +
                      fmt("%.0f", ablation_seconds) + " s (< 3600 s)"};
  const double fv = median(view_drop["sm_fusion_k4"]), vv = median(view_drop["view_only"]);
  out.views = {fv < vv, "median drop 12->4 views: fusion " + fmt("%.4f", fv) + " vs view-only " +
                            fmt("%.4f", vv) + " (3 seeds)"};
  const double fp = median(point_drop["sm_fusion_k4"]), pp = median(point_drop["point_only"]);
  out.points = {fp < pp, "median drop 1024->128 points: fusion " + fmt("%.4f", fp) +
                             " vs point-only " + fmt("%.4f", pp) + " (3 seeds)"};
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string pvrf;
  std::string work = (fs::temp_directory_path() / "pvrf_acceptance").string();
  std::vector<int> only;
  app.add_option("--pvrf", pvrf, "pvrf executable")->required()->check(CLI::ExistingFile);
  app.add_option("--work", work, "Scratch directory");
  app.add_option("--only", only, "Run a subset of criteria")->delimiter(',');
  CLI11_PARSE(app, argc, argv);
  pvrf = fs::absolute(pvrf).string();
  auto wanted = [&](int n) { return only.empty() || std::count(only.begin(), only.end(), n); };

  std::map<int, std::pair<std::string, Outcome>> results;
  auto report = [&](int n, const std::string& name, const Outcome& o) {
    results[n] = {name, o};
    std::cout << "criterion " << n << " [" << name << "]: " << (o.pass ? "PASS" : "FAIL") << " | "
              << o.detail << "\n"
              << std::flush;
  };
  auto guarded = [&](int n, const std::string& name, const std::function<Outcome()>& f) {
    if (!wanted(n)) return;
    try {
      report(n, name, f());
    } catch (const std::exception& e) {
      report(n, name, {false, std::string("exception: ") + e.what()});
    }
  };

  guarded(1, "gradient correctness", gradient_correctness);
  guarded(2, "score and enhancement invariants", score_invariants);
  guarded(3, "view permutation symmetry", view_permutation_symmetry);
  guarded(4, "top-k oracle", top_k_oracle);
  guarded(5, "mfusion oracle", mfusion_oracle);
  guarded(6, "point permutation invariance", point_permutation_invariance);
  guarded(10, "retrieval metric correctness", retrieval_correctness);
  guarded(11, "determinism", [&] { return cli_determinism(pvrf, fs::path(work) / "cli"); });
  guarded(12, "freeze contract", freeze_contract);
  if (wanted(7) || wanted(8) || wanted(9)) {
    try {
      const AblationOutcomes a = ablation_and_robustness(fs::path(work) / "ablation");
      if (wanted(7)) report(7, "directional ablation", a.ordering);
      if (wanted(8)) report(8, "missing-view robustness", a.views);
      if (wanted(9)) report(9, "missing-point robustness", a.points);
    } catch (const std::exception& e) {
      for (int n : {7, 8, 9}) {
        if (wanted(n)) report(n, "ablation", {false, std::string("exception: ") + e.what()});
      }
    }
  }

  std::cout << "\nsummary\n";
  bool all = true;
  for (const auto& [n, r] : results) {
    std::cout << "  " << n << ". " << r.first << ": " << (r.second.pass ? "PASS" : "FAIL") << "\n";
    all &= r.second.pass;
  }
  return all ? 0 : 1;
}
