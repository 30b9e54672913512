#include "pvrnet/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "pvrnet/binary_io.hpp"
#include "pvrnet/config.hpp"
#include "pvrnet/errors.hpp"
#include "pvrnet/experiments.hpp"
#include "pvrnet/metrics.hpp"
#include "pvrnet/model.hpp"
#include "pvrnet/training.hpp"
#include "pvrnet/verify.hpp"

namespace pvr {

namespace {

namespace fs = std::filesystem;

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
  bool force = false;
  bool dry_run = false;
  std::string mode;
  std::string eval_model = "fusion";
  std::string checkpoint;
  std::vector<std::uint64_t> seeds;
  std::size_t seed_count = 5;
  std::string inject_fault;
};

std::optional<std::uint64_t> env_seed() {
  const char* v = std::getenv("PVRF_SEED");
  if (!v || !*v) return std::nullopt;
  char* end = nullptr;
  const unsigned long long s = std::strtoull(v, &end, 10);
  if (*end != '\0') throw ConfigError(std::string("PVRF_SEED is not an unsigned integer: ") + v);
  return s;
}

// The config file, then PVRF_SEED, then --seed; later sources win.
ExperimentConfig resolve_config(const Options& o, bool seed_is_dataset) {
  ExperimentConfig c = o.config_path.empty() ? ExperimentConfig{} : load_config(o.config_path);
  std::optional<std::uint64_t> seed = env_seed();
  if (o.seed) seed = o.seed;
  if (seed) (seed_is_dataset ? c.dataset.seed : c.schedule.seed) = *seed;
  c.validate();
  return c;
}

fs::path checkpoint_path(const ExperimentConfig& c, const std::string& mode) {
  return fs::path(c.paths.checkpoints) / (mode + ".ckpt");
}

fs::path report_path(const ExperimentConfig& c, const std::string& name) {
  return fs::path(c.paths.reports) / name;
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

// Dataset on disk; its generation parameters must agree with the config
// (the seed is allowed to differ).
DatasetSplit load_matching_dataset(const ExperimentConfig& c) {
  if (!fs::exists(manifest_path(c.paths.dataset))) {
    throw UsageError("dataset not found at '" + c.paths.dataset +
                     "'; run `pvrf gen-data` first");
  }
  DatasetSplit d = load_dataset(c.paths.dataset);
  SynthConfig expected = c.dataset;
  expected.seed = d.config.seed;
  if (!(expected == d.config)) {
    throw ConfigError("dataset at '" + c.paths.dataset +
                      "' was generated with different parameters; rerun `pvrf gen-data --force`");
  }
  return d;
}

ModelSpec spec_for(const std::string& mode, const ExperimentConfig& c) {
  ModelSpec s;
  s.kind = parse_model_kind(mode);
  s.top_k = c.model.top_k;
  s.use_mfusion = true;
  return s;
}

TrainHooks logging_hooks(const Options& o, std::ostream& err) {
  TrainHooks h;
  if (!o.quiet) h.log = [&err](const std::string& line) { err << line << '\n'; };
  return h;
}

Model load_model(const std::string& mode, const ExperimentConfig& c, std::size_t classes,
                 std::size_t dv, const fs::path& path) {
  Model model(spec_for(mode, c), c.model, classes, dv, c.schedule.seed);
  const ParameterStore saved = load_checkpoint(path);
  if (saved.size() != model.params().size()) {
    throw FormatError("checkpoint '" + path.string() + "' holds " + std::to_string(saved.size()) +
                      " tensors, a " + mode + " model with this config has " +
                      std::to_string(model.params().size()));
  }
  model.params().load_values(saved, "");
  return model;
}

void print_counts(const DatasetSplit& d, std::ostream& out) {
  out << "class,train,test\n";
  for (std::size_t c = 0; c < d.class_names.size(); ++c) {
    std::size_t tr = 0, te = 0;
    for (const auto& s : d.train) tr += s.class_id == c;
    for (const auto& s : d.test) te += s.class_id == c;
    out << d.class_names[c] << ',' << tr << ',' << te << '\n';
  }
}

int cmd_gen_data(const Options& o, std::ostream& out, std::ostream&) {
  const ExperimentConfig c = resolve_config(o, true);
  const fs::path stem = c.paths.dataset;
  if (!o.force && (fs::exists(manifest_path(stem)) || fs::exists(blob_path(stem)))) {
    throw UsageError("dataset files already exist at '" + stem.string() +
                     "'; pass --force to overwrite");
  }
  ensure_parent(stem);
  const DatasetSplit d = make_dataset(c.dataset);
  save_dataset(d, stem);
  out << "wrote " << manifest_path(stem).string() << " (seed " << c.dataset.seed << ")\n";
  print_counts(d, out);
  return kExitOk;
}

int cmd_train(const Options& o, std::ostream& out, std::ostream& err) {
  const ExperimentConfig c = resolve_config(o, false);
  const ModelSpec spec = spec_for(o.mode, c);
  const bool fused = spec.kind == ModelKind::kFusion || spec.kind == ModelKind::kLate;

  if (o.dry_run) {
    Model model(spec, c.model, c.dataset.classes, c.dataset.descriptor_size(), c.schedule.seed);
    out << "config ok\n";
    out << "model " << model_label(spec) << '\n';
    out << "parameters " << model.params().parameter_count() << '\n';
    out << "encoder_parameters "
        << model.params().parameter_count("point.") + model.params().parameter_count("view.")
        << '\n';
    out << "head_parameters " << model.head_parameter_count() << '\n';
    return kExitOk;
  }

  if (fused) {
    for (const char* branch : {"point", "view"}) {
      if (!fs::exists(checkpoint_path(c, branch))) {
        throw UsageError(std::string("missing ") + branch + " checkpoint '" +
                         checkpoint_path(c, branch).string() + "'; pretrain " + branch +
                         " first with `pvrf train " + branch + "`");
      }
    }
  }
  const DatasetSplit d = load_matching_dataset(c);
  const PreparedSet train(d.train, c.model.knn);
  const PreparedSet test(d.test, c.model.knn);
  Model model(spec, c.model, d.class_names.size(), d.config.descriptor_size(), c.schedule.seed);
  const TrainHooks hooks = logging_hooks(o, err);
  TrainResult result;
  if (fused) {
    model.load_encoder(load_checkpoint(checkpoint_path(c, "point")), "point.");
    model.load_encoder(load_checkpoint(checkpoint_path(c, "view")), "view.");
    result = train_fusion(model, train, c.schedule, hooks);
  } else {
    result = pretrain_unimodal(model, train, c.schedule, hooks);
  }

  const fs::path ckpt = checkpoint_path(c, o.mode);
  ensure_parent(ckpt);
  save_checkpoint(model.params(), ckpt);
  const EvalReport report = evaluate(model, test, to_json(c));
  nlohmann::json j = to_json(report);
  j["epoch_loss"] = result.epoch_loss;
  const fs::path rp = report_path(c, o.mode + "_report.json");
  ensure_parent(rp);
  write_text_atomic(rp, dump_json(j));
  out << "model " << report.model << '\n'
      << "overall_acc " << report.classification.overall_acc << '\n'
      << "mean_class_acc " << report.classification.mean_class_acc << '\n'
      << "retrieval_map " << report.retrieval.map << '\n'
      << "checkpoint " << ckpt.string() << '\n'
      << "report " << rp.string() << '\n';
  return kExitOk;
}

int cmd_eval(const Options& o, std::ostream& out, std::ostream&) {
  const ExperimentConfig c = resolve_config(o, false);
  const DatasetSplit d = load_matching_dataset(c);
  const fs::path ckpt = o.checkpoint.empty() ? checkpoint_path(c, o.eval_model) : fs::path(o.checkpoint);
  if (!fs::exists(ckpt)) {
    throw UsageError("checkpoint '" + ckpt.string() + "' not found; run `pvrf train " +
                     o.eval_model + "` first");
  }
  const Model model =
      load_model(o.eval_model, c, d.class_names.size(), d.config.descriptor_size(), ckpt);
  const PreparedSet test(d.test, c.model.knn);
  const EvalReport report = evaluate(model, test, to_json(c));
  const fs::path rp = report_path(c, "eval_" + o.eval_model + ".json");
  ensure_parent(rp);
  write_text_atomic(rp, dump_json(to_json(report)));
  write_text_atomic(report_path(c, "pr_curve.csv"), pr_curve_csv(report.retrieval.pr_curve));
  out << "overall_acc " << report.classification.overall_acc << '\n'
      << "mean_class_acc " << report.classification.mean_class_acc << '\n'
      << "retrieval_map " << report.retrieval.map << '\n'
      << "report " << rp.string() << '\n';
  return kExitOk;
}

int cmd_ablate(const Options& o, std::ostream& out, std::ostream& err) {
  const ExperimentConfig c = resolve_config(o, false);
  const DatasetSplit d = load_matching_dataset(c);
  std::vector<std::uint64_t> seeds = o.seeds;
  if (seeds.empty()) {
    for (std::size_t i = 0; i < o.seed_count; ++i) seeds.push_back(c.schedule.seed + i);
  }
  if (seeds.empty()) throw UsageError("ablate needs at least one seed");
  const PreparedSet train(d.train, c.model.knn);
  const PreparedSet test(d.test, c.model.knn);
  const TrainHooks hooks = logging_hooks(o, err);
  std::vector<std::vector<AblationRow>> runs;
  std::string per_seed = "seed,model,mean_class_acc,overall_acc\n";
  for (std::uint64_t seed : seeds) {
    runs.push_back(run_ablation(train, test, c, seed, hooks).rows);
    const std::string table = ablation_csv(runs.back());
    std::istringstream lines(table);
    std::string line;
    std::getline(lines, line);  // header
    while (std::getline(lines, line)) per_seed += std::to_string(seed) + "," + line + "\n";
  }
  const std::string table = ablation_csv(median_rows(runs));
  const fs::path rp = report_path(c, "ablation.csv");
  ensure_parent(rp);
  write_text_atomic(rp, table);
  write_text_atomic(report_path(c, "ablation_runs.csv"), per_seed);
  out << table;
  return kExitOk;
}

int cmd_robustness(const Options& o, std::ostream& out, std::ostream&) {
  const ExperimentConfig c = resolve_config(o, false);
  const DatasetSplit d = load_matching_dataset(c);
  std::vector<Model> models;
  for (const char* mode : {"point", "view", "fusion"}) {
    const fs::path ckpt = checkpoint_path(c, mode);
    if (!fs::exists(ckpt)) {
      throw UsageError("checkpoint '" + ckpt.string() + "' not found; run `pvrf train " + mode +
                       "` first");
    }
    models.push_back(load_model(mode, c, d.class_names.size(), d.config.descriptor_size(), ckpt));
  }
  std::vector<const Model*> ptrs;
  for (const auto& m : models) ptrs.push_back(&m);
  // Sweep counts above the dataset's point count are skipped; the full count
  // is always evaluated.
  std::vector<std::size_t> point_counts;
  for (std::size_t n : kPointSweep) {
    if (n < d.config.points) point_counts.push_back(n);
  }
  point_counts.push_back(d.config.points);
  const RobustnessTables t = run_robustness(ptrs, d.test, c.model.knn, kViewSweep, point_counts);
  const EvalReport full = evaluate(models.back(), PreparedSet(d.test, c.model.knn), to_json(c));
  const fs::path views = report_path(c, "robustness_views.csv");
  ensure_parent(views);
  write_text_atomic(views, sweep_csv(t.views, "views"));
  write_text_atomic(report_path(c, "robustness_points.csv"), sweep_csv(t.points, "points"));
  write_text_atomic(report_path(c, "pr_curve.csv"), pr_curve_csv(full.retrieval.pr_curve));
  out << sweep_csv(t.views, "views") << sweep_csv(t.points, "points");
  return kExitOk;
}

int cmd_verify(const Options& o, std::ostream& out, std::ostream&) {
  if (!o.inject_fault.empty()) testing::inject_backward_sign_flip(o.inject_fault);
  const VerifyReport r = run_verification();
  testing::inject_backward_sign_flip("");
  out << format_report(r);
  if (r.all_passed()) return kExitOk;
  out << "failed:";
  for (const auto& c : r.checks) {
    if (!c.passed) out << ' ' << c.name;
  }
  out << '\n';
  return kExitVerifyFailed;
}

}  // namespace

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Point-view relation fusion experiments", "pvrf"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", o.config_path, "JSON experiment config")
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "Override the seed (wins over PVRF_SEED)");
    sub->add_flag("-q,--quiet", o.quiet, "No progress output");
  };

  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic dataset");
  add_common(gen);
  gen->add_flag("--force", o.force, "Overwrite existing dataset files");

  auto* train = app.add_subcommand("train", "Train one model");
  add_common(train);
  train->add_option("mode", o.mode, "point, view, fusion or late")
      ->required()
      ->check(CLI::IsMember({"point", "view", "fusion", "late"}));
  train->add_flag("--dry-run", o.dry_run, "Validate the config and print parameter counts");

  auto* eval = app.add_subcommand("eval", "Evaluate a trained model");
  add_common(eval);
  eval->add_option("--model", o.eval_model, "point, view, fusion or late")
      ->check(CLI::IsMember({"point", "view", "fusion", "late"}));
  eval->add_option("--checkpoint", o.checkpoint, "Checkpoint file (default from config paths)");

  auto* ablate = app.add_subcommand("ablate", "Run the seven-model ablation");
  add_common(ablate);
  ablate->add_option("--seeds", o.seeds, "Explicit training seeds")->delimiter(',');
  ablate->add_option("--seed-count", o.seed_count, "Consecutive seeds from the base seed")
      ->check(CLI::PositiveNumber);

  auto* robust = app.add_subcommand("robustness", "Missing view and missing point sweeps");
  add_common(robust);

  auto* verify = app.add_subcommand("verify", "Run the property suite");
  verify->add_option("--inject-fault", o.inject_fault)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*gen) return cmd_gen_data(o, out, err);
    if (*train) return cmd_train(o, out, err);
    if (*eval) return cmd_eval(o, out, err);
    if (*ablate) return cmd_ablate(o, out, err);
    if (*robust) return cmd_robustness(o, out, err);
    if (*verify) return cmd_verify(o, out, err);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitValidation;
}

}  // namespace pvr
