#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"

#include "impart/nn/network.hpp"

namespace impart {

struct CheckpointMetadata {
  std::string config_hash;
  // Hash of the configuration sections this model depends on.
  std::string scope_hash;
  std::uint64_t dataset_fingerprint = 0;
  double final_loss = 0.0;
  double train_accuracy = 0.0;
  std::optional<double> test_accuracy;
  nlohmann::json extra = nlohmann::json::object();

  nlohmann::json to_json() const;
  static CheckpointMetadata from_json(const nlohmann::json& j);
};

struct ModelCheckpoint {
  nn::Network network;
  CheckpointMetadata metadata;
};

// Single-file container:
//   "IMPCKPT\0" | u32 version | u64 header length | header JSON
//   | params (f32 LE) | buffers (f32 LE) | u64 FNV-1a of everything before it
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const ModelCheckpoint& ckpt, const std::filesystem::path& path);
ModelCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace impart
