#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "impart/checkpoint.hpp"
#include "impart/dataset.hpp"

namespace impart {

struct TrainConfig {
  std::string model_id = "victim_resnet";
  int epochs = 30;
  int batch_size = 64;
  double lr_max = 0.01;
  int warmup_epochs = 5;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  bool augment = true;
  int augment_pad = 4;
  std::uint64_t seed = 0;

  // Throws std::invalid_argument on out-of-range fields or unknown model_id.
  void validate() const;
};

// Linear warm-up to lr_max over warmup_epochs, then cosine decay to zero.
double learning_rate(const TrainConfig& cfg, std::size_t step, std::size_t steps_per_epoch);

struct EpochLog {
  int epoch = 0;
  double mean_loss = 0.0;
  double running_accuracy = 0.0;
  double last_lr = 0.0;
};

using EpochCallback = std::function<void(const EpochLog&)>;

// Minimizes mean cross-entropy with momentum SGD. Accuracies in the returned
// metadata are measured in eval mode after the final epoch, in percent.
ModelCheckpoint train_classifier(const LabeledDataset& train, const TrainConfig& cfg,
                                 const LabeledDataset* test = nullptr,
                                 const EpochCallback& on_epoch = {});

std::vector<int> predict_labels(const nn::Network& net, const std::vector<const RgbImage*>& images);
std::vector<int> predict_labels(const nn::Network& net, const LabeledDataset& data);

// Percentage of items whose argmax equals the label.
double accuracy(const nn::Network& net, const LabeledDataset& data);

}  // namespace impart
