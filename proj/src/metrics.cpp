#include "pvrnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <limits>
#include <numeric>

#include "pvrnet/errors.hpp"

namespace pvr {

ClassificationMetrics evaluate_classification(std::span<const std::uint32_t> predicted,
                                              std::span<const std::uint32_t> labels,
                                              std::size_t classes) {
  if (predicted.size() != labels.size()) {
    throw InputError("evaluate_classification: " + std::to_string(predicted.size()) +
                     " predictions for " + std::to_string(labels.size()) + " labels");
  }
  if (labels.empty()) throw InputError("evaluate_classification: empty test split");
  std::vector<std::size_t> total(classes, 0), correct(classes, 0);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= classes) {
      throw InputError("evaluate_classification: label " + std::to_string(labels[i]) +
                       " outside [0, " + std::to_string(classes) + ")");
    }
    ++total[labels[i]];
    if (predicted[i] == labels[i]) {
      ++correct[labels[i]];
      ++hits;
    }
  }
  ClassificationMetrics m;
  m.overall_acc = static_cast<double>(hits) / static_cast<double>(labels.size());
  m.per_class_acc.resize(classes);
  double sum = 0.0;
  std::size_t defined = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    if (total[c] == 0) {
      m.excluded_classes.push_back(static_cast<std::uint32_t>(c));
      continue;
    }
    const double acc = static_cast<double>(correct[c]) / static_cast<double>(total[c]);
    m.per_class_acc[c] = acc;
    sum += acc;
    ++defined;
  }
  if (!m.excluded_classes.empty()) {
    std::cerr << "warning: " << m.excluded_classes.size()
              << " class(es) have no test samples and are excluded from mean class accuracy\n";
  }
  m.mean_class_acc = sum / static_cast<double>(defined);
  return m;
}

RetrievalResult retrieval_map(const Matrix& embeddings, std::span<const std::uint32_t> labels) {
  const std::size_t m = embeddings.rows;
  if (labels.size() != m) {
    throw InputError("retrieval_map: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(m) + " embeddings");
  }
  if (m < 2) throw InputError("retrieval_map: need at least two embeddings");
  const std::size_t d = embeddings.cols;
  std::vector<double> norms(m);
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += embeddings(i, j) * embeddings(i, j);
    norms[i] = std::sqrt(s);
  }
  auto distance = [&](std::size_t a, std::size_t b) {
    if (norms[a] == 0.0 || norms[b] == 0.0) return 1.0;
    double dot = 0.0;
    for (std::size_t j = 0; j < d; ++j) dot += embeddings(a, j) * embeddings(b, j);
    return 1.0 - dot / (norms[a] * norms[b]);
  };

  RetrievalResult r;
  r.average_precision.assign(m, std::numeric_limits<double>::quiet_NaN());
  std::vector<double> level_sum(kPrLevels, 0.0);
  std::vector<std::pair<double, std::size_t>> ranked;
  double ap_sum = 0.0;
  std::size_t used = 0;
  for (std::size_t q = 0; q < m; ++q) {
    ranked.clear();
    for (std::size_t i = 0; i < m; ++i) {
      if (i != q) ranked.emplace_back(distance(q, i), i);
    }
    std::sort(ranked.begin(), ranked.end());
    std::size_t relevant = 0;
    for (const auto& [_, i] : ranked) relevant += labels[i] == labels[q];
    if (relevant == 0) {
      ++r.excluded_queries;
      continue;
    }
    // Precision at the rank of each relevant hit.
    std::vector<double> hit_precision;
    hit_precision.reserve(relevant);
    for (std::size_t rank = 0; rank < ranked.size(); ++rank) {
      if (labels[ranked[rank].second] == labels[q]) {
        hit_precision.push_back(static_cast<double>(hit_precision.size() + 1) /
                                static_cast<double>(rank + 1));
      }
    }
    double ap = 0.0;
    for (double p : hit_precision) ap += p;
    ap /= static_cast<double>(relevant);
    r.average_precision[q] = ap;
    ap_sum += ap;
    ++used;
    // Interpolated precision at level j/10: best precision among hits whose
    // recall (h+1)/relevant reaches the level; compared in integers.
    for (std::size_t j = 0; j < kPrLevels; ++j) {
      double best = 0.0;
      for (std::size_t h = 0; h < hit_precision.size(); ++h) {
        if ((h + 1) * (kPrLevels - 1) >= j * relevant) best = std::max(best, hit_precision[h]);
      }
      level_sum[j] += best;
    }
  }
  if (used == 0) throw InputError("retrieval_map: no query has a same-label item");
  if (r.excluded_queries > 0) {
    std::cerr << "warning: " << r.excluded_queries
              << " retrieval queries have no relevant items and are excluded\n";
  }
  r.map = ap_sum / static_cast<double>(used);
  for (std::size_t j = 0; j < kPrLevels; ++j) {
    r.pr_curve.push_back({static_cast<double>(j) / static_cast<double>(kPrLevels - 1),
                          level_sum[j] / static_cast<double>(used)});
  }
  return r;
}

Predictions predict(const Model& model, const PreparedSet& data, std::size_t batch_size) {
  NoGradGuard no_grad;
  const ModelKind kind = model.spec().kind;
  if (uses_views(kind) && data.descriptor_size() != model.descriptor_size()) {
    throw InputError("predict: data has " + std::to_string(data.descriptor_size()) +
                     " descriptor values, model expects " +
                     std::to_string(model.descriptor_size()));
  }
  Predictions out;
  std::vector<double> emb;
  std::size_t width = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    idx.clear();
    for (std::size_t i = start; i < std::min(data.size(), start + batch_size); ++i) idx.push_back(i);
    const auto batch = data.batch(idx, uses_points(kind), uses_views(kind));
    const ModelOutput o = model.forward(batch);
    const std::size_t c = o.logits.dim(1);
    width = o.embedding.dim(1);
    for (std::size_t b = 0; b < idx.size(); ++b) {
      const auto row = o.logits.values().subspan(b * c, c);
      out.predicted.push_back(
          static_cast<std::uint32_t>(std::max_element(row.begin(), row.end()) - row.begin()));
    }
    emb.insert(emb.end(), o.embedding.values().begin(), o.embedding.values().end());
  }
  out.labels.assign(data.labels().begin(), data.labels().end());
  out.embeddings.rows = data.size();
  out.embeddings.cols = width;
  out.embeddings.data = std::move(emb);
  return out;
}

EvalReport evaluate(const Model& model, const PreparedSet& test, const nlohmann::json& config_echo) {
  const Predictions pred = predict(model, test);
  EvalReport r;
  r.model = model_label(model.spec());
  r.classification = evaluate_classification(pred.predicted, pred.labels, model.classes());
  r.retrieval = retrieval_map(pred.embeddings, pred.labels);
  r.test_samples = test.size();
  r.config = config_echo;
  return r;
}

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json per_class = nlohmann::json::array();
  for (const auto& acc : r.classification.per_class_acc) {
    per_class.push_back(acc ? nlohmann::json(*acc) : nlohmann::json(nullptr));
  }
  nlohmann::json pr = nlohmann::json::array();
  for (const auto& p : r.retrieval.pr_curve) {
    pr.push_back({{"recall", p.recall}, {"precision", p.precision}});
  }
  return {{"model", r.model},
          {"overall_acc", r.classification.overall_acc},
          {"mean_class_acc", r.classification.mean_class_acc},
          {"per_class_acc", per_class},
          {"excluded_classes", r.classification.excluded_classes},
          {"retrieval_map", r.retrieval.map},
          {"excluded_queries", r.retrieval.excluded_queries},
          {"pr_curve", pr},
          {"test_samples", r.test_samples},
          {"config", r.config}};
}

std::string pr_curve_csv(const std::vector<PrPoint>& curve) {
  std::string out = "recall,precision\n";
  char buf[64];
  for (const auto& p : curve) {
    std::snprintf(buf, sizeof buf, "%.1f,%.6f\n", p.recall, p.precision);
    out += buf;
  }
  return out;
}

}  // namespace pvr
