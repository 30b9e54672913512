#include "pvrnet/config.hpp"

#include <fstream>
#include <set>

#include "pvrnet/errors.hpp"

namespace pvr {

using nlohmann::json;

namespace {

// Reads typed fields from one JSON object and rejects keys nobody asked for.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ConfigError("'" + name_ + "' must be a JSON object");
  }

  void size(const char* key, std::size_t& out) {
    std::uint64_t v = out;
    u64(key, v);
    out = static_cast<std::size_t>(v);
  }
  void u64(const char* key, std::uint64_t& out) {
    if (const json* v = find(key)) {
      // Parsed text yields unsigned values; programmatic JSON yields signed ones.
      const bool ok = v->is_number_unsigned() ||
                      (v->is_number_integer() && v->get<std::int64_t>() >= 0);
      if (!ok) throw type_error(key, "a non-negative integer");
      out = v->get<std::uint64_t>();
    }
  }
  void real(const char* key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) throw type_error(key, "a number");
      out = v->get<double>();
    }
  }
  void boolean(const char* key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) throw type_error(key, "a boolean");
      out = v->get<bool>();
    }
  }
  void string(const char* key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) throw type_error(key, "a string");
      out = v->get<std::string>();
    }
  }
  const json* object(const char* key) { return find(key); }

  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError("unknown key '" + name_ + "." + key + "'");
    }
  }

 private:
  const json* find(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }
  ConfigError type_error(const char* key, const char* what) const {
    return ConfigError("'" + name_ + "." + key + "' must be " + what);
  }

  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

}  // namespace

json to_json(const SynthConfig& c) {
  return {{"classes", c.classes},
          {"train_per_class", c.train_per_class},
          {"test_per_class", c.test_per_class},
          {"points", c.points},
          {"views", c.views},
          {"resolution", c.resolution},
          {"elevation_deg", c.elevation_deg},
          {"jitter", c.jitter},
          {"scale_range", c.scale_range},
          {"random_rotation", c.random_rotation},
          {"seed", c.seed}};
}

json to_json(const ModelConfig& c) {
  return {{"point_dim", c.point_dim},       {"view_dim", c.view_dim},
          {"fusion_dim", c.fusion_dim},     {"embed_dim", c.embed_dim},
          {"knn", c.knn},                   {"top_k", c.top_k},
          {"point_hidden", c.point_hidden}, {"edge_hidden1", c.edge_hidden1},
          {"edge_hidden2", c.edge_hidden2}, {"view_hidden", c.view_hidden},
          {"relation_hidden", c.relation_hidden}, {"fusion_hidden", c.fusion_hidden}};
}

json to_json(const ScheduleConfig& c) {
  return {{"epochs", c.epochs},
          {"freeze_epochs", c.freeze_epochs},
          {"batch_size", c.batch_size},
          {"lr", c.lr},
          {"optimizer", std::string(optimizer_name(c.optimizer))},
          {"seed", c.seed}};
}

json to_json(const ExperimentConfig& c) {
  return {{"dataset", to_json(c.dataset)},
          {"model", to_json(c.model)},
          {"schedule", to_json(c.schedule)},
          {"paths",
           {{"dataset", c.paths.dataset},
            {"checkpoints", c.paths.checkpoints},
            {"reports", c.paths.reports}}}};
}

SynthConfig synth_config_from_json(const json& j) {
  SynthConfig c;
  Section s(j, "dataset");
  s.size("classes", c.classes);
  s.size("train_per_class", c.train_per_class);
  s.size("test_per_class", c.test_per_class);
  s.size("points", c.points);
  s.size("views", c.views);
  s.size("resolution", c.resolution);
  s.real("elevation_deg", c.elevation_deg);
  s.real("jitter", c.jitter);
  s.real("scale_range", c.scale_range);
  s.boolean("random_rotation", c.random_rotation);
  s.u64("seed", c.seed);
  s.finish();
  return c;
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  Section s(j, "model");
  s.size("point_dim", c.point_dim);
  s.size("view_dim", c.view_dim);
  s.size("fusion_dim", c.fusion_dim);
  s.size("embed_dim", c.embed_dim);
  s.size("knn", c.knn);
  s.size("top_k", c.top_k);
  s.size("point_hidden", c.point_hidden);
  s.size("edge_hidden1", c.edge_hidden1);
  s.size("edge_hidden2", c.edge_hidden2);
  s.size("view_hidden", c.view_hidden);
  s.size("relation_hidden", c.relation_hidden);
  s.size("fusion_hidden", c.fusion_hidden);
  s.finish();
  return c;
}

ScheduleConfig schedule_config_from_json(const json& j) {
  ScheduleConfig c;
  Section s(j, "schedule");
  s.size("epochs", c.epochs);
  s.size("freeze_epochs", c.freeze_epochs);
  s.size("batch_size", c.batch_size);
  s.real("lr", c.lr);
  std::string opt(optimizer_name(c.optimizer));
  s.string("optimizer", opt);
  c.optimizer = parse_optimizer(opt);
  s.u64("seed", c.seed);
  s.finish();
  return c;
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  Section s(j, "config");
  if (const json* d = s.object("dataset")) c.dataset = synth_config_from_json(*d);
  if (const json* m = s.object("model")) c.model = model_config_from_json(*m);
  if (const json* sc = s.object("schedule")) c.schedule = schedule_config_from_json(*sc);
  if (const json* p = s.object("paths")) {
    Section ps(*p, "paths");
    ps.string("dataset", c.paths.dataset);
    ps.string("checkpoints", c.paths.checkpoints);
    ps.string("reports", c.paths.reports);
    ps.finish();
  }
  s.finish();
  c.validate();
  return c;
}

void ExperimentConfig::validate() const {
  dataset.validate();
  const ModelConfig& m = model;
  for (auto [name, v] : {std::pair{"point_dim", m.point_dim}, {"view_dim", m.view_dim},
                         {"fusion_dim", m.fusion_dim}, {"embed_dim", m.embed_dim},
                         {"point_hidden", m.point_hidden}, {"edge_hidden1", m.edge_hidden1},
                         {"edge_hidden2", m.edge_hidden2}, {"view_hidden", m.view_hidden},
                         {"relation_hidden", m.relation_hidden},
                         {"fusion_hidden", m.fusion_hidden}, {"knn", m.knn}}) {
    if (v == 0) throw ConfigError(std::string("model.") + name + " must be positive");
  }
  if (m.knn >= dataset.points) {
    throw ConfigError("model.knn (" + std::to_string(m.knn) + ") must be below dataset.points (" +
                      std::to_string(dataset.points) + ")");
  }
  if (m.top_k < 2 || m.top_k > dataset.views) {
    throw ConfigError("model.top_k must be in [2, dataset.views]");
  }
  if (schedule.epochs == 0) throw ConfigError("schedule.epochs must be positive");
  if (schedule.freeze_epochs > schedule.epochs) {
    throw ConfigError("schedule.freeze_epochs must not exceed schedule.epochs");
  }
  if (schedule.batch_size == 0) throw ConfigError("schedule.batch_size must be positive");
  if (!(schedule.lr > 0.0)) throw ConfigError("schedule.lr must be positive");
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

}  // namespace pvr
