#include "impart/experiment.hpp"

#include <cstdio>
#include <fstream>
#include <set>

namespace impart {
namespace {

using nlohmann::json;

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& section) {
  if (!j.is_object()) throw ValidationError("config: section '" + section + "' must be an object");
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) throw ValidationError("config: unknown key '" + section + "." + key + "'");
  }
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& section) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError("config: '" + section + "." + key + "' has the wrong type");
  }
}

json train_to_json(const TrainConfig& t) {
  return {{"model_id", t.model_id},       {"epochs", t.epochs},     {"batch_size", t.batch_size},
          {"lr_max", t.lr_max},           {"warmup_epochs", t.warmup_epochs},
          {"momentum", t.momentum},       {"weight_decay", t.weight_decay},
          {"augment", t.augment},         {"augment_pad", t.augment_pad}};
}

void train_from_json(const json& j, TrainConfig& t, const std::string& section) {
  check_keys(j, {"model_id", "epochs", "batch_size", "lr_max", "warmup_epochs", "momentum",
                 "weight_decay", "augment", "augment_pad"},
             section);
  read(j, "model_id", t.model_id, section);
  read(j, "epochs", t.epochs, section);
  read(j, "batch_size", t.batch_size, section);
  read(j, "lr_max", t.lr_max, section);
  read(j, "warmup_epochs", t.warmup_epochs, section);
  read(j, "momentum", t.momentum, section);
  read(j, "weight_decay", t.weight_decay, section);
  read(j, "augment", t.augment, section);
  read(j, "augment_pad", t.augment_pad, section);
}

template <class Fn>
void wrap(const std::string& what, Fn&& fn) {
  try {
    fn();
  } catch (const std::invalid_argument& e) {
    throw ValidationError(what + ": " + e.what());
  }
}

}  // namespace

ExperimentConfig::ExperimentConfig() {
  surrogate.model_id = "surrogate_narrow";
  victim.model_id = "victim_resnet";
}

json ExperimentConfig::to_json() const {
  json j;
  j["dataset_root"] = dataset_root.string();
  j["output_dir"] = output_dir.string();
  j["seed"] = seed;
  j["workers"] = workers;
  j["surrogate"] = train_to_json(surrogate);
  j["victim"] = train_to_json(victim);
  j["label_map"] = {{"mode", to_string(mode)}, {"target", target}};
  j["trigger"] = {{"gamma", trigger.gamma},
                  {"max_iters", trigger.max_iters},
                  {"step_cls", trigger.step_cls},
                  {"step_color", trigger.step_color},
                  {"quality_gate_e00", trigger.quality_gate_e00 ? json(*trigger.quality_gate_e00) : json()}};
  j["poison"] = {{"rho", rho}, {"test_poison_count", test_poison_count}};
  j["defense"] = {{"strip",
                   {{"num_overlays", strip.num_overlays},
                    {"blend_alpha", strip.blend_alpha},
                    {"entropy_threshold", strip.entropy_threshold},
                    {"num_inputs", strip.num_inputs}}},
                  {"spectral", {{"removal_fraction", spectral_removal_fraction}}}};
  j["sweep"] = {{"rhos", sweep.rhos}, {"gammas", sweep.gammas}, {"gamma_samples", sweep.gamma_samples}};
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig c;
  check_keys(j, {"dataset_root", "output_dir", "seed", "workers", "surrogate", "victim", "label_map",
                 "trigger", "poison", "defense", "sweep"},
             "root");
  std::string path;
  if (j.contains("dataset_root")) {
    read(j, "dataset_root", path, "root");
    c.dataset_root = path;
  }
  if (j.contains("output_dir")) {
    read(j, "output_dir", path, "root");
    c.output_dir = path;
  }
  read(j, "seed", c.seed, "root");
  read(j, "workers", c.workers, "root");
  if (j.contains("surrogate")) train_from_json(j["surrogate"], c.surrogate, "surrogate");
  if (j.contains("victim")) train_from_json(j["victim"], c.victim, "victim");
  if (j.contains("label_map")) {
    const auto& m = j["label_map"];
    check_keys(m, {"mode", "target"}, "label_map");
    std::string mode;
    read(m, "mode", mode, "label_map");
    if (!mode.empty()) wrap("label_map.mode", [&] { c.mode = parse_label_mode(mode); });
    read(m, "target", c.target, "label_map");
  }
  if (j.contains("trigger")) {
    const auto& t = j["trigger"];
    check_keys(t, {"gamma", "max_iters", "step_cls", "step_color", "quality_gate_e00"}, "trigger");
    read(t, "gamma", c.trigger.gamma, "trigger");
    read(t, "max_iters", c.trigger.max_iters, "trigger");
    read(t, "step_cls", c.trigger.step_cls, "trigger");
    read(t, "step_color", c.trigger.step_color, "trigger");
    if (t.contains("quality_gate_e00") && !t["quality_gate_e00"].is_null()) {
      double gate = 0.0;
      read(t, "quality_gate_e00", gate, "trigger");
      c.trigger.quality_gate_e00 = gate;
    }
  }
  if (j.contains("poison")) {
    const auto& p = j["poison"];
    check_keys(p, {"rho", "test_poison_count"}, "poison");
    read(p, "rho", c.rho, "poison");
    read(p, "test_poison_count", c.test_poison_count, "poison");
  }
  if (j.contains("defense")) {
    const auto& d = j["defense"];
    check_keys(d, {"strip", "spectral"}, "defense");
    if (d.contains("strip")) {
      const auto& s = d["strip"];
      check_keys(s, {"num_overlays", "blend_alpha", "entropy_threshold", "num_inputs"}, "defense.strip");
      read(s, "num_overlays", c.strip.num_overlays, "defense.strip");
      read(s, "blend_alpha", c.strip.blend_alpha, "defense.strip");
      read(s, "entropy_threshold", c.strip.entropy_threshold, "defense.strip");
      read(s, "num_inputs", c.strip.num_inputs, "defense.strip");
    }
    if (d.contains("spectral")) {
      const auto& s = d["spectral"];
      check_keys(s, {"removal_fraction"}, "defense.spectral");
      read(s, "removal_fraction", c.spectral_removal_fraction, "defense.spectral");
    }
  }
  if (j.contains("sweep")) {
    const auto& s = j["sweep"];
    check_keys(s, {"rhos", "gammas", "gamma_samples"}, "sweep");
    read(s, "rhos", c.sweep.rhos, "sweep");
    read(s, "gammas", c.sweep.gammas, "sweep");
    read(s, "gamma_samples", c.sweep.gamma_samples, "sweep");
  }
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("config file not found: " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

void ExperimentConfig::validate(bool check_paths) const {
  if (dataset_root.empty()) throw ValidationError("config: dataset_root is not set");
  if (check_paths && !std::filesystem::is_directory(dataset_root)) {
    throw ValidationError("dataset_root does not exist: " + dataset_root.string());
  }
  if (output_dir.empty()) throw ValidationError("config: output_dir is not set");
  if (workers < 1) throw ValidationError("config: workers must be >= 1");
  wrap("surrogate", [&] { surrogate.validate(); });
  wrap("victim", [&] { victim.validate(); });
  wrap("trigger", [&] { trigger.validate(); });
  if (!(rho >= 0.0 && rho <= 1.0)) throw ValidationError("config: poison.rho must lie in [0, 1]");
  if (test_poison_count < 0) throw ValidationError("config: poison.test_poison_count must be >= 0");
  if (target < 0) throw ValidationError("config: label_map.target must be >= 0");
  if (strip.num_overlays < 1 || strip.num_inputs < 1) {
    throw ValidationError("config: defense.strip counts must be >= 1");
  }
  if (!(strip.blend_alpha > 0.0 && strip.blend_alpha < 1.0)) {
    throw ValidationError("config: defense.strip.blend_alpha must lie in (0, 1)");
  }
  if (!(strip.entropy_threshold > 0.0)) throw ValidationError("config: defense.strip.entropy_threshold must be > 0");
  if (!(spectral_removal_fraction > 0.0 && spectral_removal_fraction < 1.0)) {
    throw ValidationError("config: defense.spectral.removal_fraction must lie in (0, 1)");
  }
  for (double r : sweep.rhos) {
    if (!(r >= 0.0 && r <= 1.0)) throw ValidationError("config: sweep.rhos entries must lie in [0, 1]");
  }
  for (double g : sweep.gammas) {
    if (!(g >= 0.0)) throw ValidationError("config: sweep.gammas entries must be >= 0");
  }
  if (sweep.gamma_samples < 1) throw ValidationError("config: sweep.gamma_samples must be >= 1");
}

LabelMap ExperimentConfig::label_map(int num_classes) const {
  try {
    return mode == LabelMode::all_to_all ? LabelMap::all_to_all(num_classes)
                                         : LabelMap::all_to_one(num_classes, target);
  } catch (const std::exception& e) {
    throw ValidationError(std::string("label_map: ") + e.what());
  }
}

TrainConfig ExperimentConfig::surrogate_train() const {
  TrainConfig t = surrogate;
  t.seed = mix64(seed ^ 0x7375ULL);
  return t;
}

TrainConfig ExperimentConfig::victim_train() const {
  TrainConfig t = victim;
  t.seed = mix64(seed ^ 0x7669ULL);
  return t;
}

TriggerConfig ExperimentConfig::trigger_config() const {
  TriggerConfig t = trigger;
  t.seed = seed;
  return t;
}

std::uint64_t ExperimentConfig::defense_seed() const { return mix64(seed ^ 0x6465ULL); }

std::string json_hash(const json& j) {
  const std::string text = j.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) h = (h ^ c) * 1099511628211ULL;
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ConfigHashes config_hashes(const ExperimentConfig& cfg) {
  json j = cfg.to_json();
  j.erase("workers");
  j.erase("output_dir");
  ConfigHashes h;
  h.full = json_hash(j);
  const json surrogate = {{"seed", j["seed"]}, {"surrogate", j["surrogate"]}};
  h.surrogate = json_hash(surrogate);
  h.poison = json_hash({{"surrogate", h.surrogate},
                        {"label_map", j["label_map"]},
                        {"trigger", j["trigger"]},
                        {"rho", j["poison"]["rho"]}});
  h.test_poison = json_hash({{"surrogate", h.surrogate},
                             {"label_map", j["label_map"]},
                             {"trigger", j["trigger"]},
                             {"test_poison_count", j["poison"]["test_poison_count"]}});
  h.victim = json_hash({{"poison", h.poison}, {"victim", j["victim"]}});
  h.clean_victim = json_hash({{"seed", j["seed"]}, {"victim", j["victim"]}});
  return h;
}

}  // namespace impart
