#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "pvrnet/params.hpp"
#include "pvrnet/synth.hpp"

namespace pvr {

struct ModelConfig {
  std::size_t point_dim = 64;        ///< Dp
  std::size_t view_dim = 64;         ///< Dh
  std::size_t fusion_dim = 128;      ///< Df
  std::size_t embed_dim = 64;        ///< De
  std::size_t knn = 8;
  std::size_t top_k = 4;             ///< K, largest multi-view set
  std::size_t point_hidden = 32;     ///< per-point width after the first EdgeConv
  std::size_t edge_hidden1 = 32;     ///< edge hidden width, first EdgeConv
  std::size_t edge_hidden2 = 32;     ///< edge hidden width, second EdgeConv
  std::size_t view_hidden = 128;
  std::size_t relation_hidden = 64;
  std::size_t fusion_hidden = 128;

  bool operator==(const ModelConfig&) const = default;
};

struct ScheduleConfig {
  std::size_t epochs = 40;
  std::size_t freeze_epochs = 10;
  std::size_t batch_size = 16;
  double lr = 1e-3;
  OptimizerMode optimizer = OptimizerMode::kAdam;
  std::uint64_t seed = 1;

  bool operator==(const ScheduleConfig&) const = default;
};

struct PathConfig {
  std::string dataset = "data/synth";
  std::string checkpoints = "checkpoints";
  std::string reports = "reports";

  bool operator==(const PathConfig&) const = default;
};

struct ExperimentConfig {
  SynthConfig dataset;
  ModelConfig model;
  ScheduleConfig schedule;
  PathConfig paths;

  /// Throws ConfigError if any value or cross-field constraint is violated.
  void validate() const;
  bool operator==(const ExperimentConfig&) const = default;
};

nlohmann::json to_json(const SynthConfig& c);
nlohmann::json to_json(const ModelConfig& c);
nlohmann::json to_json(const ScheduleConfig& c);
nlohmann::json to_json(const ExperimentConfig& c);

// Parsers reject unknown keys and wrongly typed values; missing keys keep
// their defaults.
SynthConfig synth_config_from_json(const nlohmann::json& j);
ModelConfig model_config_from_json(const nlohmann::json& j);
ScheduleConfig schedule_config_from_json(const nlohmann::json& j);
ExperimentConfig config_from_json(const nlohmann::json& j);

ExperimentConfig load_config(const std::filesystem::path& path);
std::string dump_json(const nlohmann::json& j);

}  // namespace pvr
