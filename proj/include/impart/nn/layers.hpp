#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "impart/nn/tensor.hpp"
#include "impart/rng.hpp"

namespace impart::nn {

enum class Mode { train, eval };

// Per-node scratch saved by forward for use in backward.
struct Scratch {
  std::vector<float> f;
  std::vector<int> i;
};

struct LayerIo {
  std::span<const Tensor* const> inputs;
  std::span<const float> params;
  std::span<const float> buffers;
};

// Stateless operator. Parameters and buffers live in the owning Network and are
// passed in as spans, so a const Network is safe to share between threads.
class Layer {
 public:
  virtual ~Layer() = default;

  virtual std::string kind() const = 0;
  virtual std::size_t num_params() const { return 0; }
  virtual std::size_t num_buffers() const { return 0; }
  virtual Shape output_shape(std::span<const Shape> inputs) const = 0;
  virtual void init(std::span<float> params, std::span<float> buffers, Rng& rng) const;

  virtual Tensor forward(const LayerIo& io, Mode mode, Scratch& scratch) const = 0;

  // Accumulates into grad_inputs[k] (skipped when null) and grad_params (skipped
  // when empty).
  virtual void backward(const LayerIo& io, Mode mode, const Tensor& output,
                        const Tensor& grad_out, const Scratch& scratch,
                        std::span<Tensor* const> grad_inputs,
                        std::span<float> grad_params) const = 0;

  // Folds training-mode batch statistics into running buffers.
  virtual void update_buffers(const Scratch& scratch, std::span<float> buffers) const;
};

// 3x3 (or k x k) convolution, zero padding k/2, no bias.
class Conv2d final : public Layer {
 public:
  Conv2d(int in_channels, int out_channels, int kernel, int stride);
  std::string kind() const override { return "conv2d"; }
  std::size_t num_params() const override;
  Shape output_shape(std::span<const Shape> inputs) const override;
  void init(std::span<float> params, std::span<float> buffers, Rng& rng) const override;
  Tensor forward(const LayerIo& io, Mode mode, Scratch& scratch) const override;
  void backward(const LayerIo& io, Mode mode, const Tensor& output, const Tensor& grad_out,
                const Scratch& scratch, std::span<Tensor* const> grad_inputs,
                std::span<float> grad_params) const override;

 private:
  int in_channels_;
  int out_channels_;
  int kernel_;
  int stride_;
};

class BatchNorm2d final : public Layer {
 public:
  explicit BatchNorm2d(int channels, float momentum = 0.1f, float eps = 1e-5f);
  std::string kind() const override { return "batch_norm"; }
  std::size_t num_params() const override { return 2 * static_cast<std::size_t>(channels_); }
  std::size_t num_buffers() const override { return 2 * static_cast<std::size_t>(channels_); }
  Shape output_shape(std::span<const Shape> inputs) const override { return inputs[0]; }
  void init(std::span<float> params, std::span<float> buffers, Rng& rng) const override;
  Tensor forward(const LayerIo& io, Mode mode, Scratch& scratch) const override;
  void backward(const LayerIo& io, Mode mode, const Tensor& output, const Tensor& grad_out,
                const Scratch& scratch, std::span<Tensor* const> grad_inputs,
                std::span<float> grad_params) const override;
  void update_buffers(const Scratch& scratch, std::span<float> buffers) const override;

 private:
  int channels_;
  float momentum_;
  float eps_;
};

class Relu final : public Layer {
 public:
  std::string kind() const override { return "relu"; }
  Shape output_shape(std::span<const Shape> inputs) const override { return inputs[0]; }
  Tensor forward(const LayerIo& io, Mode mode, Scratch& scratch) const override;
  void backward(const LayerIo& io, Mode mode, const Tensor& output, const Tensor& grad_out,
                const Scratch& scratch, std::span<Tensor* const> grad_inputs,
                std::span<float> grad_params) const override;
};

// Elementwise sum of two equally shaped inputs (residual join).
class Add final : public Layer {
 public:
  std::string kind() const override { return "add"; }
  Shape output_shape(std::span<const Shape> inputs) const override;
  Tensor forward(const LayerIo& io, Mode mode, Scratch& scratch) const override;
  void backward(const LayerIo& io, Mode mode, const Tensor& output, const Tensor& grad_out,
                const Scratch& scratch, std::span<Tensor* const> grad_inputs,
                std::span<float> grad_params) const override;
};

// 2x2 max pooling, stride 2.
class MaxPool2 final : public Layer {
 public:
  std::string kind() const override { return "max_pool"; }
  Shape output_shape(std::span<const Shape> inputs) const override;
  Tensor forward(const LayerIo& io, Mode mode, Scratch& scratch) const override;
  void backward(const LayerIo& io, Mode mode, const Tensor& output, const Tensor& grad_out,
                const Scratch& scratch, std::span<Tensor* const> grad_inputs,
                std::span<float> grad_params) const override;
};

class GlobalAvgPool final : public Layer {
 public:
  std::string kind() const override { return "global_avg_pool"; }
  Shape output_shape(std::span<const Shape> inputs) const override;
  Tensor forward(const LayerIo& io, Mode mode, Scratch& scratch) const override;
  void backward(const LayerIo& io, Mode mode, const Tensor& output, const Tensor& grad_out,
                const Scratch& scratch, std::span<Tensor* const> grad_inputs,
                std::span<float> grad_params) const override;
};

// Fully connected layer over the flattened per-sample input.
class Linear final : public Layer {
 public:
  Linear(int in_features, int out_features);
  std::string kind() const override { return "linear"; }
  std::size_t num_params() const override;
  Shape output_shape(std::span<const Shape> inputs) const override;
  void init(std::span<float> params, std::span<float> buffers, Rng& rng) const override;
  Tensor forward(const LayerIo& io, Mode mode, Scratch& scratch) const override;
  void backward(const LayerIo& io, Mode mode, const Tensor& output, const Tensor& grad_out,
                const Scratch& scratch, std::span<Tensor* const> grad_inputs,
                std::span<float> grad_params) const override;

 private:
  int in_features_;
  int out_features_;
};

// Fixed per-channel standardization (x - mean) / std; mean and std are buffers.
class Standardize final : public Layer {
 public:
  explicit Standardize(int channels) : channels_(channels) {}
  std::string kind() const override { return "standardize"; }
  std::size_t num_buffers() const override { return 2 * static_cast<std::size_t>(channels_); }
  Shape output_shape(std::span<const Shape> inputs) const override { return inputs[0]; }
  void init(std::span<float> params, std::span<float> buffers, Rng& rng) const override;
  Tensor forward(const LayerIo& io, Mode mode, Scratch& scratch) const override;
  void backward(const LayerIo& io, Mode mode, const Tensor& output, const Tensor& grad_out,
                const Scratch& scratch, std::span<Tensor* const> grad_inputs,
                std::span<float> grad_params) const override;

 private:
  int channels_;
};

}  // namespace impart::nn
