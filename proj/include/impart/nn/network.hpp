#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "impart/nn/layers.hpp"
#include "impart/nn/tensor.hpp"

namespace impart::nn {

// Activations and scratch of one forward pass, consumed by backward.
struct Tape {
  Mode mode = Mode::eval;
  std::vector<Tensor> values;
  std::vector<Scratch> scratch;
};

// Directed acyclic graph of layers. Node 0 is the input; the last node yields
// the logits. Parameters and buffers are stored contiguously so they can be
// checkpointed and optimized as flat arrays.
class Network {
 public:
  Network(std::string model_id, int channels, int height, int width);

  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;
  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;

  static constexpr int kInput = 0;

  int add(std::unique_ptr<Layer> layer, std::vector<int> inputs);
  // Marks the node whose output is the latent representation (penultimate layer).
  void set_latent(int node) { latent_node_ = node; }

  void initialize(std::uint64_t seed);

  const std::string& model_id() const { return model_id_; }
  int num_classes() const;
  int latent_node() const { return latent_node_; }
  Shape input_shape(int batch) const { return {batch, channels_, height_, width_}; }

  std::span<float> params() { return params_; }
  std::span<const float> params() const { return params_; }
  std::span<float> buffers() { return buffers_; }
  std::span<const float> buffers() const { return buffers_; }

  // Sets the input standardization buffers (the first node must be Standardize).
  void set_input_statistics(std::span<const float> mean, std::span<const float> stddev);

  Tensor forward(const Tensor& input, Mode mode, Tape& tape) const;
  Tensor infer(const Tensor& input) const;
  Tensor latent(const Tensor& input) const;

  // Backpropagates grad_logits through the tape. grad_input and grad_params are
  // optional (null / empty to skip).
  void backward(const Tape& tape, const Tensor& grad_logits, Tensor* grad_input,
                std::span<float> grad_params) const;

  // Applies training-mode batch statistics to running buffers.
  void commit_statistics(const Tape& tape);

  std::string describe() const;

 private:
  struct Node {
    std::unique_ptr<Layer> layer;
    std::vector<int> inputs;
    std::size_t param_offset = 0;
    std::size_t buffer_offset = 0;
    Shape shape;  // with n = 1
  };

  LayerIo io_for(const Node& node, const std::vector<Tensor>& values,
                 std::vector<const Tensor*>& ptrs) const;

  std::string model_id_;
  int channels_;
  int height_;
  int width_;
  int latent_node_ = -1;
  std::vector<Node> nodes_;
  std::vector<float> params_;
  std::vector<float> buffers_;
};

struct LossResult {
  double loss = 0.0;
  Tensor grad_logits;
  int correct = 0;
};

// Mean softmax cross-entropy over the batch and its gradient w.r.t. the logits.
LossResult softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);

std::vector<double> softmax(std::span<const float> logits);
int argmax(std::span<const float> logits);

// SGD with momentum and L2 weight decay (decay added to the gradient).
class Sgd {
 public:
  Sgd(std::size_t num_params, double momentum, double weight_decay);
  void step(std::span<float> params, std::span<const float> grads, double lr);

 private:
  double momentum_;
  double weight_decay_;
  std::vector<float> velocity_;
};

}  // namespace impart::nn
