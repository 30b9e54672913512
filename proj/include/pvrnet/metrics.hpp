#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pvrnet/model.hpp"
#include "pvrnet/synth.hpp"

namespace pvr {

struct ClassificationMetrics {
  double overall_acc = 0.0;
  double mean_class_acc = 0.0;
  /// Empty when the class has no test samples; such classes are left out of
  /// mean_class_acc and listed in excluded_classes.
  std::vector<std::optional<double>> per_class_acc;
  std::vector<std::uint32_t> excluded_classes;
};

ClassificationMetrics evaluate_classification(std::span<const std::uint32_t> predicted,
                                              std::span<const std::uint32_t> labels,
                                              std::size_t classes);

struct PrPoint {
  double recall = 0.0;
  double precision = 0.0;
};

inline constexpr std::size_t kPrLevels = 11;

struct RetrievalResult {
  double map = 0.0;
  /// Interpolated precision at recall 0.0, 0.1, ..., 1.0, averaged over queries.
  std::vector<PrPoint> pr_curve;
  std::vector<double> average_precision;  ///< per query, NaN when excluded
  std::size_t excluded_queries = 0;
};

/// Leave-one-out retrieval: every row queries all others ranked by cosine
/// distance (ties by ascending index). A query without any same-label item is
/// excluded. Requires at least two rows and one same-label pair.
RetrievalResult retrieval_map(const Matrix& embeddings, std::span<const std::uint32_t> labels);

struct Predictions {
  std::vector<std::uint32_t> predicted;
  std::vector<std::uint32_t> labels;
  Matrix embeddings;
};

Predictions predict(const Model& model, const PreparedSet& data, std::size_t batch_size = 32);

struct EvalReport {
  std::string model;
  ClassificationMetrics classification;
  RetrievalResult retrieval;
  std::size_t test_samples = 0;
  nlohmann::json config;
};

EvalReport evaluate(const Model& model, const PreparedSet& test, const nlohmann::json& config_echo);
nlohmann::json to_json(const EvalReport& report);
std::string pr_curve_csv(const std::vector<PrPoint>& curve);

}  // namespace pvr
