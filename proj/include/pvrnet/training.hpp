#pragma once

#include <functional>
#include <string>
#include <vector>

#include "pvrnet/config.hpp"
#include "pvrnet/model.hpp"

namespace pvr {

/// Observation points inside the training loops. `phase` is 1 while the
/// encoders are frozen and 2 afterwards (unimodal training is always 2).
struct TrainHooks {
  std::function<void(std::size_t epoch, int phase, const ParameterStore&)> on_epoch_end;
  std::function<void(std::size_t epoch, std::size_t step, int phase, const ParameterStore&)>
      on_step;
  std::function<void(const std::string&)> log;
};

struct TrainResult {
  std::vector<double> epoch_loss;  ///< mean cross-entropy per epoch
  std::size_t steps = 0;
};

/// Encoder plus linear classifier on one modality. freeze_epochs is ignored.
TrainResult pretrain_unimodal(Model& model, const PreparedSet& train,
                              const ScheduleConfig& schedule, const TrainHooks& hooks = {});

/// Two-phase schedule for fusion and late-fusion models whose encoders were
/// loaded from pretrained unimodal checkpoints. During the first
/// freeze_epochs only the non-encoder parameters are updated; encoder
/// features are computed once and reused. Afterwards every parameter trains.
TrainResult train_fusion(Model& model, const PreparedSet& train, const ScheduleConfig& schedule,
                         const TrainHooks& hooks = {});

/// Prefixes excluded from optimizer steps while the encoders are frozen.
const std::vector<std::string>& encoder_prefixes();

}  // namespace pvr
