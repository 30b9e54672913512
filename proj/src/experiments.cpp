#include "pvrnet/experiments.hpp"

#include <algorithm>
#include <cstdio>

#include "pvrnet/errors.hpp"
#include "pvrnet/metrics.hpp"

namespace pvr {

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double overall_accuracy(const Model& model, const PreparedSet& data) {
  const Predictions p = predict(model, data);
  return evaluate_classification(p.predicted, p.labels, model.classes()).overall_acc;
}

}  // namespace

std::vector<ModelSpec> ablation_specs() {
  return {{ModelKind::kPoint, false, 0}, {ModelKind::kView, false, 0},
          {ModelKind::kLate, false, 0},  {ModelKind::kFusion, false, 0},
          {ModelKind::kFusion, true, 2}, {ModelKind::kFusion, true, 3},
          {ModelKind::kFusion, true, 4}};
}

AblationRun run_ablation(const PreparedSet& train, const PreparedSet& test,
                         const ExperimentConfig& config, std::uint64_t seed,
                         const TrainHooks& hooks) {
  ScheduleConfig schedule = config.schedule;
  schedule.seed = seed;
  const std::size_t classes = config.dataset.classes;
  const std::size_t dv = train.descriptor_size();

  AblationRun run;
  for (const ModelSpec& spec : ablation_specs()) {
    Model model(spec, config.model, classes, dv, seed);
    if (spec.kind == ModelKind::kPoint || spec.kind == ModelKind::kView) {
      pretrain_unimodal(model, train, schedule, hooks);
    } else {
      if (spec.kind == ModelKind::kFusion && spec.use_mfusion &&
          spec.top_k > train.views_per_sample()) {
        throw ConfigError("ablation needs at least " + std::to_string(spec.top_k) + " views");
      }
      model.load_encoder(run.models.at(0).params(), "point.");
      model.load_encoder(run.models.at(1).params(), "view.");
      train_fusion(model, train, schedule, hooks);
    }
    const Predictions p = predict(model, test);
    const auto m = evaluate_classification(p.predicted, p.labels, classes);
    run.rows.push_back({model_label(spec), m.mean_class_acc, m.overall_acc});
    if (hooks.log) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "seed %llu %s: overall %.4f mean class %.4f",
                    static_cast<unsigned long long>(seed), run.rows.back().model.c_str(),
                    m.overall_acc, m.mean_class_acc);
      hooks.log(buf);
    }
    run.models.push_back(std::move(model));
  }
  return run;
}

std::vector<AblationRow> median_rows(const std::vector<std::vector<AblationRow>>& runs) {
  if (runs.empty()) throw InputError("median_rows: no runs");
  std::vector<AblationRow> out;
  for (std::size_t r = 0; r < runs.front().size(); ++r) {
    std::vector<double> mca, oa;
    for (const auto& run : runs) {
      if (run.size() != runs.front().size() || run[r].model != runs.front()[r].model) {
        throw InputError("median_rows: runs list different models");
      }
      mca.push_back(run[r].mean_class_acc);
      oa.push_back(run[r].overall_acc);
    }
    out.push_back({runs.front()[r].model, median(mca), median(oa)});
  }
  return out;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string out = "model,mean_class_acc,overall_acc\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f\n", r.model.c_str(), r.mean_class_acc,
                  r.overall_acc);
    out += buf;
  }
  return out;
}

RobustnessTables run_robustness(std::span<const Model* const> models,
                                std::span<const ShapeSample> test, std::size_t knn,
                                std::span<const std::size_t> view_counts,
                                std::span<const std::size_t> point_counts) {
  if (test.empty()) throw InputError("run_robustness: empty test split");
  const std::size_t full_views = test.front().views.rows;
  const std::size_t full_points = test.front().points.rows;
  RobustnessTables t;

  std::vector<ShapeSample> reduced;
  for (std::size_t views : view_counts) {
    if (views > full_views) {
      throw InputError("run_robustness: cannot keep " + std::to_string(views) + " of " +
                       std::to_string(full_views) + " views");
    }
    reduced.clear();
    for (const auto& s : test) reduced.push_back(subsample_views(s, views));
    const PreparedSet data(reduced, knn);
    for (const Model* m : models) {
      t.views.push_back({model_label(m->spec()), views, overall_accuracy(*m, data)});
    }
  }
  for (std::size_t points : point_counts) {
    if (points > full_points || points <= knn) {
      throw InputError("run_robustness: cannot keep " + std::to_string(points) + " of " +
                       std::to_string(full_points) + " points with k = " + std::to_string(knn));
    }
    reduced.clear();
    for (const auto& s : test) reduced.push_back(subsample_points(s, points));
    const PreparedSet data(reduced, knn);
    for (const Model* m : models) {
      t.points.push_back({model_label(m->spec()), points, overall_accuracy(*m, data)});
    }
  }
  return t;
}

std::string sweep_csv(const std::vector<SweepRow>& rows, const std::string& count_column) {
  std::string out = "model," + count_column + ",overall_acc\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%zu,%.6f\n", r.model.c_str(), r.count, r.overall_acc);
    out += buf;
  }
  return out;
}

double sweep_accuracy(const std::vector<SweepRow>& rows, const std::string& model,
                      std::size_t count) {
  for (const auto& r : rows) {
    if (r.model == model && r.count == count) return r.overall_acc;
  }
  throw InputError("sweep has no row for " + model + " at " + std::to_string(count));
}

}  // namespace pvr
