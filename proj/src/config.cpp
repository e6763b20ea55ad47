#include "epgrad/config.hpp"

#include <fstream>
#include <set>

namespace epgrad {

using nlohmann::json;

ExperimentConfig default_config() {
  ExperimentConfig cfg;  // field defaults are the published benchmark
  return cfg;
}

namespace {

void check_keys(const json& j, const std::string& section,
                const std::set<std::string>& allowed) {
  if (!j.is_object()) {
    throw ConfigError("config: section '" + section + "' must be an object");
  }
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) {
      throw ConfigError("config: unknown key '" + key + "' in section '" +
                        section + "'");
    }
  }
}

double get_num(const json& j, const std::string& key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number()) {
    throw ConfigError("config: '" + key + "' must be a number");
  }
  return j.at(key).get<double>();
}

int get_int(const json& j, const std::string& key, int fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number_integer()) {
    throw ConfigError("config: '" + key + "' must be an integer");
  }
  return j.at(key).get<int>();
}

std::string get_str(const json& j, const std::string& key,
                    const std::string& fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_string()) {
    throw ConfigError("config: '" + key + "' must be a string");
  }
  return j.at(key).get<std::string>();
}

bool get_bool(const json& j, const std::string& key, bool fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_boolean()) {
    throw ConfigError("config: '" + key + "' must be a boolean");
  }
  return j.at(key).get<bool>();
}

void parse_dataset(const json& j, DatasetCfg& d) {
  check_keys(j, "dataset",
             {"kind", "classes", "dim", "per_class", "spread", "margin",
              "pretext_classes", "train_images", "train_labels", "test_images",
              "test_labels", "path", "label_col", "test_fraction"});
  const std::string kind = get_str(j, "kind", "blobs");
  if (kind == "blobs") {
    d.kind = DatasetCfg::Kind::Blobs;
  } else if (kind == "idx") {
    d.kind = DatasetCfg::Kind::Idx;
  } else if (kind == "csv") {
    d.kind = DatasetCfg::Kind::Csv;
  } else {
    throw ConfigError("config: unknown dataset kind '" + kind + "'");
  }
  d.classes = get_int(j, "classes", d.classes);
  d.dim = get_int(j, "dim", d.dim);
  d.per_class = get_int(j, "per_class", d.per_class);
  d.spread = get_num(j, "spread", d.spread);
  d.margin = get_num(j, "margin", d.margin);
  d.pretext_classes = get_int(j, "pretext_classes", d.pretext_classes);
  d.train_images = get_str(j, "train_images", d.train_images);
  d.train_labels = get_str(j, "train_labels", d.train_labels);
  d.test_images = get_str(j, "test_images", d.test_images);
  d.test_labels = get_str(j, "test_labels", d.test_labels);
  d.path = get_str(j, "path", d.path);
  d.label_col = get_int(j, "label_col", d.label_col);
  d.test_fraction = get_num(j, "test_fraction", d.test_fraction);
  if (d.pretext_classes < 0) {
    throw ConfigError("config: pretext_classes must be >= 0");
  }
}

void parse_loss(const json& j, LossSpec& l) {
  check_keys(j, "loss", {"kind", "gamma", "beta", "reinforce_samples"});
  const std::string kind = get_str(j, "kind", "aepg");
  try {
    l.kind = loss_kind_from_string(kind);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  // per-kind hyperparameter defaults
  switch (l.kind) {
    case LossKind::Focal: l.gamma = 1.0; break;
    case LossKind::LabelSmooth: l.gamma = 0.01; break;
    case LossKind::ConfidencePenalty: l.beta = 0.1; break;
    case LossKind::EntropyPenalty: l.beta = 1.0; break;
    default: break;
  }
  l.gamma = get_num(j, "gamma", l.gamma);
  l.beta = get_num(j, "beta", l.beta);
  l.reinforce_samples = get_int(j, "reinforce_samples", l.reinforce_samples);
  if (l.gamma < 0.0) throw ConfigError("config: loss gamma must be >= 0");
  if (l.kind == LossKind::LabelSmooth && l.gamma >= 1.0) {
    throw ConfigError("config: label smoothing mass must lie in [0,1)");
  }
  if (l.beta < 0.0) throw ConfigError("config: loss beta must be >= 0");
  if (l.reinforce_samples < 1) {
    throw ConfigError("config: reinforce_samples must be >= 1");
  }
}

void parse_schedule(const json& j, ScheduleCfg& s) {
  check_keys(j, "schedule", {"kind", "tau", "value", "scope"});
  try {
    s.kind = schedule_kind_from_string(get_str(j, "kind", "sigmoid"));
    s.scope = schedule_scope_from_string(get_str(j, "scope", "per_task"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  s.tau = get_num(j, "tau", s.tau);
  s.value = get_num(j, "value", s.value);
  if (s.tau <= 0.0) throw ConfigError("config: schedule tau must be > 0");
  if (s.value < 0.0 || s.value > 1.0) {
    throw ConfigError("config: schedule value must lie in [0,1]");
  }
}

void parse_optimizer(const json& j, OptimizerCfg& o) {
  check_keys(j, "optimizer", {"kind", "lr", "beta1", "beta2", "eps"});
  const std::string kind = get_str(j, "kind", "adam");
  if (kind == "adam") {
    o.kind = OptimizerCfg::Kind::Adam;
    o.lr = 5e-4;
  } else if (kind == "sgd") {
    o.kind = OptimizerCfg::Kind::Sgd;
    o.lr = 0.05;
  } else {
    throw ConfigError("config: unknown optimizer kind '" + kind + "'");
  }
  o.lr = get_num(j, "lr", o.lr);
  o.beta1 = get_num(j, "beta1", o.beta1);
  o.beta2 = get_num(j, "beta2", o.beta2);
  o.eps = get_num(j, "eps", o.eps);
  if (o.lr < 0.0) throw ConfigError("config: learning rate must be >= 0");
}

void parse_model(const json& j, ModelCfg& m) {
  check_keys(j, "model",
             {"hidden", "depth", "adapter_rank", "pretrained",
              "pretrain_epochs", "head_init_std"});
  m.hidden = get_int(j, "hidden", m.hidden);
  m.depth = get_int(j, "depth", m.depth);
  m.adapter_rank = get_int(j, "adapter_rank", m.adapter_rank);
  m.pretrained = get_bool(j, "pretrained", m.pretrained);
  m.pretrain_epochs = get_int(j, "pretrain_epochs", m.pretrain_epochs);
  m.head_init_std = get_num(j, "head_init_std", m.head_init_std);
  if (m.hidden <= 0 || m.depth <= 0 || m.adapter_rank < 0 ||
      m.pretrain_epochs < 0 || m.head_init_std < 0.0) {
    throw ConfigError("config: invalid model section");
  }
}

void parse_train(const json& j, TrainCfg& t) {
  check_keys(j, "train", {"epochs", "batch", "freeze_frac"});
  t.epochs = get_int(j, "epochs", t.epochs);
  t.batch = get_int(j, "batch", t.batch);
  t.freeze_frac = get_num(j, "freeze_frac", t.freeze_frac);
  if (t.epochs <= 0 || t.batch <= 0 || t.freeze_frac < 0.0 ||
      t.freeze_frac > 1.0) {
    throw ConfigError("config: invalid train section");
  }
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
  check_keys(j, "<top level>",
             {"dataset", "tasks", "model", "loss", "schedule", "optimizer",
              "noise", "train", "seeds", "out_dir"});
  ExperimentConfig cfg = default_config();
  if (j.contains("dataset")) parse_dataset(j.at("dataset"), cfg.dataset);
  if (j.contains("tasks")) {
    check_keys(j.at("tasks"), "tasks", {"count"});
    cfg.n_tasks = get_int(j.at("tasks"), "count", cfg.n_tasks);
    if (cfg.n_tasks <= 0) throw ConfigError("config: tasks.count must be > 0");
  }
  if (j.contains("model")) parse_model(j.at("model"), cfg.model);
  if (j.contains("loss")) parse_loss(j.at("loss"), cfg.loss);
  if (j.contains("schedule")) parse_schedule(j.at("schedule"), cfg.schedule);
  if (j.contains("optimizer")) parse_optimizer(j.at("optimizer"), cfg.optimizer);
  if (j.contains("noise")) {
    check_keys(j.at("noise"), "noise", {"eta"});
    cfg.noise_eta = get_num(j.at("noise"), "eta", cfg.noise_eta);
    if (cfg.noise_eta < 0.0 || cfg.noise_eta > 1.0) {
      throw ConfigError("config: noise.eta must lie in [0,1]");
    }
  }
  if (j.contains("train")) parse_train(j.at("train"), cfg.train);
  if (j.contains("seeds")) {
    if (!j.at("seeds").is_array() || j.at("seeds").empty()) {
      throw ConfigError("config: seeds must be a non-empty array");
    }
    cfg.seeds.clear();
    for (const auto& s : j.at("seeds")) {
      if (!s.is_number_unsigned()) {
        throw ConfigError("config: seeds must be non-negative integers");
      }
      cfg.seeds.push_back(s.get<std::uint64_t>());
    }
  }
  cfg.out_dir = get_str(j, "out_dir", cfg.out_dir);
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config: cannot open " + path);
  json j;
  try {
    j = json::parse(f);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: " + std::string(e.what()));
  }
  return parse_config(j);
}

json config_to_json(const ExperimentConfig& cfg) {
  json j;
  json d;
  switch (cfg.dataset.kind) {
    case DatasetCfg::Kind::Blobs:
      d["kind"] = "blobs";
      d["classes"] = cfg.dataset.classes;
      d["dim"] = cfg.dataset.dim;
      d["per_class"] = cfg.dataset.per_class;
      d["spread"] = cfg.dataset.spread;
      d["margin"] = cfg.dataset.margin;
      break;
    case DatasetCfg::Kind::Idx:
      d["kind"] = "idx";
      d["train_images"] = cfg.dataset.train_images;
      d["train_labels"] = cfg.dataset.train_labels;
      d["test_images"] = cfg.dataset.test_images;
      d["test_labels"] = cfg.dataset.test_labels;
      break;
    case DatasetCfg::Kind::Csv:
      d["kind"] = "csv";
      d["path"] = cfg.dataset.path;
      d["label_col"] = cfg.dataset.label_col;
      d["test_fraction"] = cfg.dataset.test_fraction;
      break;
  }
  d["pretext_classes"] = cfg.dataset.pretext_classes;
  j["dataset"] = std::move(d);
  j["tasks"] = {{"count", cfg.n_tasks}};
  j["model"] = {{"hidden", cfg.model.hidden},
                {"depth", cfg.model.depth},
                {"adapter_rank", cfg.model.adapter_rank},
                {"pretrained", cfg.model.pretrained},
                {"pretrain_epochs", cfg.model.pretrain_epochs},
                {"head_init_std", cfg.model.head_init_std}};
  j["loss"] = {{"kind", to_string(cfg.loss.kind)},
               {"gamma", cfg.loss.gamma},
               {"beta", cfg.loss.beta},
               {"reinforce_samples", cfg.loss.reinforce_samples}};
  j["schedule"] = {{"kind", to_string(cfg.schedule.kind)},
                   {"tau", cfg.schedule.tau},
                   {"value", cfg.schedule.value},
                   {"scope", to_string(cfg.schedule.scope)}};
  j["optimizer"] = {
      {"kind", cfg.optimizer.kind == OptimizerCfg::Kind::Adam ? "adam" : "sgd"},
      {"lr", cfg.optimizer.lr},
      {"beta1", cfg.optimizer.beta1},
      {"beta2", cfg.optimizer.beta2},
      {"eps", cfg.optimizer.eps}};
  j["noise"] = {{"eta", cfg.noise_eta}};
  j["train"] = {{"epochs", cfg.train.epochs},
                {"batch", cfg.train.batch},
                {"freeze_frac", cfg.train.freeze_frac}};
  j["seeds"] = cfg.seeds;
  j["out_dir"] = cfg.out_dir;
  return j;
}

}  // namespace epgrad
