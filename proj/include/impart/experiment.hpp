#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "impart/label_mapping.hpp"
#include "impart/training.hpp"
#include "impart/trigger_forge.hpp"

namespace impart {

// Invalid user input (bad config value, missing path, hash mismatch). The CLI
// maps it to exit code 2; every other exception maps to 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct StripSettings {
  int num_overlays = 100;
  double blend_alpha = 0.5;
  double entropy_threshold = 0.2;
  // Benign and poisoned test inputs scored; the overlay pool is the rest of the clean test split.
  int num_inputs = 200;
};

struct SweepSettings {
  std::vector<double> rhos{0.001, 0.01, 0.1};
  std::vector<double> gammas{0.0, 10.0, 30.0, 50.0, 100.0};
  int gamma_samples = 100;
};

// Hierarchical JSON config. Unknown keys are rejected; missing keys keep defaults.
struct ExperimentConfig {
  std::filesystem::path dataset_root;
  std::filesystem::path output_dir;
  std::uint64_t seed = 1;
  int workers = 1;

  TrainConfig surrogate;
  TrainConfig victim;
  LabelMode mode = LabelMode::all_to_all;
  int target = 0;
  TriggerConfig trigger;
  double rho = 0.1;
  // Poisoned test items (an evenly spaced subset of the test split); 0 = all.
  int test_poison_count = 500;

  StripSettings strip;
  double spectral_removal_fraction = 0.15;
  SweepSettings sweep;

  ExperimentConfig();

  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::filesystem::path& path);

  // Throws ValidationError; paths are checked when check_paths is set.
  void validate(bool check_paths) const;

  LabelMap label_map(int num_classes) const;

  // Component seeds, all derived from `seed`.
  TrainConfig surrogate_train() const;
  TrainConfig victim_train() const;
  TriggerConfig trigger_config() const;
  std::uint64_t poison_seed() const { return seed; }
  std::uint64_t defense_seed() const;
};

// 16 hex digits of FNV-1a over the canonical (sorted-key) JSON dump.
std::string json_hash(const nlohmann::json& j);

// Audit-chain hashes. Each artifact records the full config hash and the hash
// of the sections it depends on; consumers refuse inputs whose scope hash
// differs from the one implied by their own config.
struct ConfigHashes {
  std::string full;
  std::string surrogate;    // dataset, surrogate training
  std::string poison;       // surrogate + label map, trigger, rho
  std::string test_poison;  // surrogate + label map, trigger, test subset
  std::string victim;       // poison + victim training
  std::string clean_victim; // dataset + victim training
};

ConfigHashes config_hashes(const ExperimentConfig& cfg);

}  // namespace impart
