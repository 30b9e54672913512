#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pvrnet/config.hpp"
#include "pvrnet/model.hpp"
#include "pvrnet/training.hpp"

namespace pvr {

struct AblationRow {
  std::string model;
  double mean_class_acc = 0.0;
  double overall_acc = 0.0;
};

/// The seven compared configurations, in table order: point-only, view-only,
/// late fusion, SFusion only, and SFusion + MFusion with K = 2, 3, 4.
std::vector<ModelSpec> ablation_specs();

struct AblationRun {
  std::vector<AblationRow> rows;
  std::vector<Model> models;  ///< same order as rows
};

/// Trains and evaluates every configuration with one seed. The unimodal
/// models are trained once and their encoders initialise every fused model.
AblationRun run_ablation(const PreparedSet& train, const PreparedSet& test,
                         const ExperimentConfig& config, std::uint64_t seed,
                         const TrainHooks& hooks = {});

/// Per-model medians over several seeds (rows matched by position).
std::vector<AblationRow> median_rows(const std::vector<std::vector<AblationRow>>& runs);

/// "model,mean_class_acc,overall_acc"
std::string ablation_csv(const std::vector<AblationRow>& rows);

struct SweepRow {
  std::string model;
  std::size_t count = 0;  ///< views or points kept at test time
  double overall_acc = 0.0;
};

struct RobustnessTables {
  std::vector<SweepRow> views;   ///< points fixed at the full count
  std::vector<SweepRow> points;  ///< views fixed at the full count
};

inline constexpr std::size_t kViewSweep[] = {4, 8, 10, 12};
inline constexpr std::size_t kPointSweep[] = {128, 256, 384, 512, 640, 768, 896, 1024};

/// Evaluates trained models on reduced test inputs. Models must have been
/// trained with the full view ring and point count of `test`.
RobustnessTables run_robustness(std::span<const Model* const> models,
                                std::span<const ShapeSample> test, std::size_t knn,
                                std::span<const std::size_t> view_counts = kViewSweep,
                                std::span<const std::size_t> point_counts = kPointSweep);

/// "model,views,overall_acc" or "model,points,overall_acc"
std::string sweep_csv(const std::vector<SweepRow>& rows, const std::string& count_column);

/// Accuracy of `model` at `count` in a sweep; throws InputError if absent.
double sweep_accuracy(const std::vector<SweepRow>& rows, const std::string& model,
                      std::size_t count);

}  // namespace pvr
