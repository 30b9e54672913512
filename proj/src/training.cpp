#include "pvrnet/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "pvrnet/errors.hpp"
#include "pvrnet/ops.hpp"

namespace pvr {

namespace {

std::vector<std::size_t> epoch_order(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  // Fisher-Yates with our own index draw so the order does not depend on the
  // standard library's shuffle.
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

StepOptions step_options(const ScheduleConfig& schedule, bool freeze) {
  StepOptions opt;
  opt.mode = schedule.optimizer;
  opt.lr = schedule.lr;
  if (freeze) opt.frozen_prefixes = encoder_prefixes();
  return opt;
}

void check_loss(double loss, const Model& model, std::size_t epoch, std::size_t step) {
  if (std::isfinite(loss)) return;
  std::ostringstream os;
  os << "training diverged: loss " << loss << " at epoch " << epoch << ", step " << step
     << " (model " << model_label(model.spec()) << ")";
  // Locate the first parameter that went non-finite, if any.
  for (const auto& [path, t] : model.params().entries()) {
    for (double v : t.values()) {
      if (!std::isfinite(v)) {
        os << "; first non-finite parameter: " << path;
        throw TrainingError(os.str());
      }
    }
  }
  os << "; all parameters finite, check the learning rate";
  throw TrainingError(os.str());
}

void check_train_set(const Model& model, const PreparedSet& train) {
  if (train.size() == 0) throw InputError("training set is empty");
  if (uses_views(model.spec().kind) && train.descriptor_size() != model.descriptor_size()) {
    throw InputError("training descriptors have " + std::to_string(train.descriptor_size()) +
                     " values, model expects " + std::to_string(model.descriptor_size()));
  }
}

// Runs one epoch over `train`; `forward` builds the logits for a batch of
// sample indices.
template <typename Forward>
double run_epoch(Model& model, const PreparedSet& train, const ScheduleConfig& schedule,
                 std::mt19937_64& rng, const StepOptions& opt, std::size_t epoch, int phase,
                 TrainResult& result, const TrainHooks& hooks, Forward&& forward) {
  const auto order = epoch_order(train.size(), rng);
  double total = 0.0;
  std::size_t step = 0;
  for (std::size_t start = 0; start < order.size(); start += schedule.batch_size, ++step) {
    const std::size_t end = std::min(order.size(), start + schedule.batch_size);
    const std::span<const std::size_t> idx(order.data() + start, end - start);
    std::vector<std::uint32_t> labels;
    labels.reserve(idx.size());
    for (std::size_t i : idx) labels.push_back(train.labels()[i]);
    const Tensor loss = softmax_cross_entropy(forward(idx), labels);
    check_loss(loss.item(), model, epoch, step);
    loss.backward();
    optimizer_step(model.params(), opt);
    ++result.steps;
    total += loss.item() * static_cast<double>(idx.size());
    if (hooks.on_step) hooks.on_step(epoch, step, phase, model.params());
  }
  const double mean = total / static_cast<double>(train.size());
  result.epoch_loss.push_back(mean);
  if (hooks.log) {
    std::ostringstream os;
    os << model_label(model.spec()) << " epoch " << epoch + 1 << "/" << schedule.epochs
       << " phase " << phase << " loss " << mean;
    hooks.log(os.str());
  }
  if (hooks.on_epoch_end) hooks.on_epoch_end(epoch, phase, model.params());
  return mean;
}

}  // namespace

const std::vector<std::string>& encoder_prefixes() {
  static const std::vector<std::string> prefixes{"point.", "view."};
  return prefixes;
}

TrainResult pretrain_unimodal(Model& model, const PreparedSet& train,
                              const ScheduleConfig& schedule, const TrainHooks& hooks) {
  const ModelKind kind = model.spec().kind;
  if (kind != ModelKind::kPoint && kind != ModelKind::kView) {
    throw UsageError("pretrain_unimodal expects a point or view model, got " +
                     model_label(model.spec()));
  }
  check_train_set(model, train);
  std::mt19937_64 rng(schedule.seed);
  const StepOptions opt = step_options(schedule, false);
  const bool points = kind == ModelKind::kPoint;
  TrainResult result;
  for (std::size_t epoch = 0; epoch < schedule.epochs; ++epoch) {
    run_epoch(model, train, schedule, rng, opt, epoch, 2, result, hooks,
              [&](std::span<const std::size_t> idx) {
                return model.forward(train.batch(idx, points, !points)).logits;
              });
  }
  return result;
}

TrainResult train_fusion(Model& model, const PreparedSet& train, const ScheduleConfig& schedule,
                         const TrainHooks& hooks) {
  const ModelKind kind = model.spec().kind;
  if (kind != ModelKind::kFusion && kind != ModelKind::kLate) {
    throw UsageError("train_fusion expects a fusion or late-fusion model, got " +
                     model_label(model.spec()));
  }
  check_train_set(model, train);
  std::mt19937_64 rng(schedule.seed);
  TrainResult result;

  const std::size_t frozen_epochs = std::min(schedule.freeze_epochs, schedule.epochs);
  if (frozen_epochs > 0) {
    // Encoders do not change in this phase, so their features are computed
    // once for the whole training set.
    std::vector<double> p_cache, v_cache;
    std::size_t dp = 0, dh = 0;
    const std::size_t views = train.views_per_sample();
    {
      NoGradGuard no_grad;
      std::vector<std::size_t> idx;
      for (std::size_t start = 0; start < train.size(); start += schedule.batch_size) {
        idx.clear();
        for (std::size_t i = start; i < std::min(train.size(), start + schedule.batch_size); ++i) {
          idx.push_back(i);
        }
        const EncodedBatch e = model.encode(train.batch(idx));
        dp = e.p.dim(1);
        dh = e.v.dim(1);
        p_cache.insert(p_cache.end(), e.p.values().begin(), e.p.values().end());
        v_cache.insert(v_cache.end(), e.v.values().begin(), e.v.values().end());
      }
    }
    const StepOptions opt = step_options(schedule, true);
    for (std::size_t epoch = 0; epoch < frozen_epochs; ++epoch) {
      run_epoch(model, train, schedule, rng, opt, epoch, 1, result, hooks,
                [&](std::span<const std::size_t> idx) {
                  std::vector<double> p, v;
                  p.reserve(idx.size() * dp);
                  v.reserve(idx.size() * views * dh);
                  for (std::size_t i : idx) {
                    p.insert(p.end(), p_cache.begin() + i * dp, p_cache.begin() + (i + 1) * dp);
                    v.insert(v.end(), v_cache.begin() + i * views * dh,
                             v_cache.begin() + (i + 1) * views * dh);
                  }
                  EncodedBatch e;
                  e.p = Tensor::from({idx.size(), dp}, std::move(p));
                  e.v = Tensor::from({idx.size() * views, dh}, std::move(v));
                  e.views = views;
                  return model.head(e).logits;
                });
    }
  }

  const StepOptions opt = step_options(schedule, false);
  for (std::size_t epoch = frozen_epochs; epoch < schedule.epochs; ++epoch) {
    run_epoch(model, train, schedule, rng, opt, epoch, 2, result, hooks,
              [&](std::span<const std::size_t> idx) { return model.forward(train.batch(idx)).logits; });
  }
  return result;
}

}  // namespace pvr
