#include "impart/training.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "impart/nn/models.hpp"

namespace impart {
namespace {

constexpr std::uint64_t kShuffleStream = 0x5348554646ULL;
constexpr std::uint64_t kAugmentStream = 0x4155474dULL;
constexpr int kEvalBatch = 256;

}  // namespace

void TrainConfig::validate() const {
  if (!nn::is_registered_model(model_id)) {
    throw std::invalid_argument("TrainConfig: unknown model_id '" + model_id + "'");
  }
  if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
  if (batch_size < 2) throw std::invalid_argument("TrainConfig: batch_size must be >= 2");
  if (!(lr_max >= 0.0) || !std::isfinite(lr_max)) {
    throw std::invalid_argument("TrainConfig: lr_max must be finite and nonnegative");
  }
  if (warmup_epochs < 0 || warmup_epochs >= epochs) {
    throw std::invalid_argument("TrainConfig: warmup_epochs must lie in [0, epochs)");
  }
  if (momentum < 0.0 || momentum >= 1.0) throw std::invalid_argument("TrainConfig: momentum must lie in [0, 1)");
  if (weight_decay < 0.0) throw std::invalid_argument("TrainConfig: weight_decay must be >= 0");
  if (augment_pad < 0) throw std::invalid_argument("TrainConfig: augment_pad must be >= 0");
}

double learning_rate(const TrainConfig& cfg, std::size_t step, std::size_t steps_per_epoch) {
  const std::size_t warm = static_cast<std::size_t>(cfg.warmup_epochs) * steps_per_epoch;
  const std::size_t total = static_cast<std::size_t>(cfg.epochs) * steps_per_epoch;
  if (step < warm) return cfg.lr_max * static_cast<double>(step + 1) / static_cast<double>(warm);
  const double t = static_cast<double>(step - warm) / static_cast<double>(std::max<std::size_t>(total - warm, 1));
  return 0.5 * cfg.lr_max * (1.0 + std::cos(std::numbers::pi * std::min(t, 1.0)));
}

ModelCheckpoint train_classifier(const LabeledDataset& train, const TrainConfig& cfg,
                                 const LabeledDataset* test, const EpochCallback& on_epoch) {
  cfg.validate();
  if (train.empty()) throw std::invalid_argument("train_classifier: empty dataset");
  train.validate();

  nn::Network net = nn::build_model(cfg.model_id, train.num_classes(), 3, train.height(), train.width());
  net.initialize(cfg.seed);
  std::vector<float> mean, stddev;
  channel_statistics(train, mean, stddev);
  net.set_input_statistics(mean, stddev);

  const std::size_t n = train.size();
  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
  const std::size_t steps_per_epoch = (n + bs - 1) / bs;
  nn::Sgd sgd(net.params().size(), cfg.momentum, cfg.weight_decay);
  std::vector<float> grads(net.params().size());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  nn::Tape tape;
  std::size_t step = 0;
  double final_loss = 0.0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle = Rng::derive(cfg.seed ^ kShuffleStream, static_cast<std::uint64_t>(epoch));
    shuffle.shuffle(order);
    const std::uint64_t aug_seed = mix64(cfg.seed ^ kAugmentStream) + static_cast<std::uint64_t>(epoch);

    double loss_sum = 0.0;
    std::size_t seen = 0;
    std::size_t correct = 0;
    double lr = 0.0;
    for (std::size_t start = 0; start < n; start += bs, ++step) {
      const std::size_t end = std::min(n, start + bs);
      lr = learning_rate(cfg, step, steps_per_epoch);
      // A single-sample batch has no batch-norm variance; skip it.
      if (end - start < 2) continue;

      std::vector<RgbImage> augmented;
      std::vector<const RgbImage*> batch;
      std::vector<int> labels;
      augmented.reserve(end - start);
      for (std::size_t k = start; k < end; ++k) {
        const Sample& s = train[order[k]];
        if (cfg.augment) {
          Rng rng = Rng::derive(aug_seed, k);
          augmented.push_back(augment_crop_flip(*s.image, cfg.augment_pad, rng));
        }
        labels.push_back(s.label);
      }
      for (std::size_t k = start; k < end; ++k) {
        batch.push_back(cfg.augment ? &augmented[k - start] : train[order[k]].image.get());
      }

      const nn::Tensor logits = net.forward(to_tensor(batch), nn::Mode::train, tape);
      const nn::LossResult loss = nn::softmax_cross_entropy(logits, labels);
      if (!std::isfinite(loss.loss)) {
        std::ostringstream msg;
        msg << "train_classifier: non-finite loss at epoch " << epoch << ", step " << step
            << ", lr " << lr << " (model " << cfg.model_id << ", batch " << batch.size() << ")";
        throw std::runtime_error(msg.str());
      }
      std::fill(grads.begin(), grads.end(), 0.0f);
      net.backward(tape, loss.grad_logits, nullptr, grads);
      net.commit_statistics(tape);
      sgd.step(net.params(), grads, lr);

      loss_sum += loss.loss * static_cast<double>(batch.size());
      seen += batch.size();
      correct += static_cast<std::size_t>(loss.correct);
    }
    final_loss = seen ? loss_sum / static_cast<double>(seen) : 0.0;
    if (on_epoch) {
      on_epoch({epoch, final_loss, seen ? 100.0 * correct / static_cast<double>(seen) : 0.0, lr});
    }
  }

  CheckpointMetadata meta;
  meta.dataset_fingerprint = train.fingerprint();
  meta.final_loss = final_loss;
  meta.train_accuracy = accuracy(net, train);
  if (test != nullptr && !test->empty()) meta.test_accuracy = accuracy(net, *test);
  meta.extra["train_config"] = {{"model_id", cfg.model_id},     {"epochs", cfg.epochs},
                                {"batch_size", cfg.batch_size}, {"lr_max", cfg.lr_max},
                                {"warmup_epochs", cfg.warmup_epochs},
                                {"momentum", cfg.momentum},     {"weight_decay", cfg.weight_decay},
                                {"augment", cfg.augment},       {"seed", cfg.seed}};
  return {std::move(net), std::move(meta)};
}

std::vector<int> predict_labels(const nn::Network& net, const std::vector<const RgbImage*>& images) {
  std::vector<int> out;
  out.reserve(images.size());
  for (std::size_t start = 0; start < images.size(); start += kEvalBatch) {
    const std::size_t end = std::min(images.size(), start + kEvalBatch);
    const std::vector<const RgbImage*> batch(images.begin() + start, images.begin() + end);
    const nn::Tensor logits = net.infer(to_tensor(batch));
    for (int i = 0; i < logits.shape().n; ++i) out.push_back(nn::argmax(logits.sample(i)));
  }
  return out;
}

std::vector<int> predict_labels(const nn::Network& net, const LabeledDataset& data) {
  std::vector<const RgbImage*> images;
  images.reserve(data.size());
  for (const auto& s : data.items()) images.push_back(s.image.get());
  return predict_labels(net, images);
}

double accuracy(const nn::Network& net, const LabeledDataset& data) {
  if (data.empty()) throw std::invalid_argument("accuracy: empty dataset");
  const auto pred = predict_labels(net, data);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == data[i].label;
  return 100.0 * static_cast<double>(hits) / static_cast<double>(pred.size());
}

}  // namespace impart
