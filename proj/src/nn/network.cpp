#include "impart/nn/network.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace impart::nn {

Network::Network(std::string model_id, int channels, int height, int width)
    : model_id_(std::move(model_id)), channels_(channels), height_(height), width_(width) {
  Node input;
  input.shape = {1, channels, height, width};
  nodes_.push_back(std::move(input));
}

int Network::add(std::unique_ptr<Layer> layer, std::vector<int> inputs) {
  std::vector<Shape> in_shapes;
  for (int i : inputs) {
    if (i < 0 || i >= static_cast<int>(nodes_.size())) {
      throw std::invalid_argument("Network::add: input node " + std::to_string(i) + " not defined");
    }
    in_shapes.push_back(nodes_[i].shape);
  }
  Node node;
  node.shape = layer->output_shape(in_shapes);
  node.param_offset = params_.size();
  node.buffer_offset = buffers_.size();
  params_.resize(params_.size() + layer->num_params(), 0.0f);
  buffers_.resize(buffers_.size() + layer->num_buffers(), 0.0f);
  node.layer = std::move(layer);
  node.inputs = std::move(inputs);
  nodes_.push_back(std::move(node));
  return static_cast<int>(nodes_.size()) - 1;
}

void Network::initialize(std::uint64_t seed) {
  for (std::size_t i = 1; i < nodes_.size(); ++i) {
    Node& node = nodes_[i];
    Rng rng = Rng::derive(seed, i);
    node.layer->init(std::span<float>(params_).subspan(node.param_offset, node.layer->num_params()),
                     std::span<float>(buffers_).subspan(node.buffer_offset,
                                                        node.layer->num_buffers()),
                     rng);
  }
}

int Network::num_classes() const { return nodes_.back().shape.c; }

void Network::set_input_statistics(std::span<const float> mean, std::span<const float> stddev) {
  if (nodes_.size() < 2 || nodes_[1].layer->kind() != "standardize") {
    throw std::logic_error("Network: first layer is not a standardization layer");
  }
  if (mean.size() != static_cast<std::size_t>(channels_) || stddev.size() != mean.size()) {
    throw std::invalid_argument("Network::set_input_statistics: channel count mismatch");
  }
  const std::size_t off = nodes_[1].buffer_offset;
  std::copy(mean.begin(), mean.end(), buffers_.begin() + off);
  std::copy(stddev.begin(), stddev.end(), buffers_.begin() + off + channels_);
}

LayerIo Network::io_for(const Node& node, const std::vector<Tensor>& values,
                        std::vector<const Tensor*>& ptrs) const {
  ptrs.clear();
  for (int i : node.inputs) ptrs.push_back(&values[i]);
  return LayerIo{ptrs,
                 std::span<const float>(params_).subspan(node.param_offset,
                                                         node.layer->num_params()),
                 std::span<const float>(buffers_).subspan(node.buffer_offset,
                                                          node.layer->num_buffers())};
}

Tensor Network::forward(const Tensor& input, Mode mode, Tape& tape) const {
  const Shape s = input.shape();
  if (s.c != channels_ || s.h != height_ || s.w != width_) {
    throw std::invalid_argument("Network::forward: input shape mismatch");
  }
  tape.mode = mode;
  tape.values.resize(nodes_.size());
  tape.scratch.assign(nodes_.size(), Scratch{});
  tape.values[0] = input;
  std::vector<const Tensor*> ptrs;
  for (std::size_t i = 1; i < nodes_.size(); ++i) {
    const LayerIo io = io_for(nodes_[i], tape.values, ptrs);
    tape.values[i] = nodes_[i].layer->forward(io, mode, tape.scratch[i]);
  }
  return tape.values.back();
}

Tensor Network::infer(const Tensor& input) const {
  Tape tape;
  return forward(input, Mode::eval, tape);
}

Tensor Network::latent(const Tensor& input) const {
  if (latent_node_ < 0) throw std::logic_error("Network: latent layer not set");
  Tape tape;
  forward(input, Mode::eval, tape);
  return std::move(tape.values[latent_node_]);
}

void Network::backward(const Tape& tape, const Tensor& grad_logits, Tensor* grad_input,
                       std::span<float> grad_params) const {
  const std::size_t count = nodes_.size();
  if (tape.values.size() != count) throw std::logic_error("Network::backward: tape mismatch");
  std::vector<Tensor> grads(count);
  std::vector<bool> live(count, false);
  grads[count - 1] = grad_logits;
  live[count - 1] = true;

  std::vector<const Tensor*> ptrs;
  std::vector<Tensor*> grad_ptrs;
  for (std::size_t i = count - 1; i >= 1; --i) {
    if (!live[i]) continue;
    const Node& node = nodes_[i];
    grad_ptrs.clear();
    for (int j : node.inputs) {
      if (j == kInput && grad_input == nullptr) {
        grad_ptrs.push_back(nullptr);
        continue;
      }
      if (!live[j]) {
        grads[j] = Tensor(tape.values[j].shape());
        live[j] = true;
      }
      grad_ptrs.push_back(&grads[j]);
    }
    const LayerIo io = io_for(node, tape.values, ptrs);
    std::span<float> gp;
    if (!grad_params.empty()) gp = grad_params.subspan(node.param_offset, node.layer->num_params());
    node.layer->backward(io, tape.mode, tape.values[i], grads[i], tape.scratch[i], grad_ptrs, gp);
    grads[i] = Tensor();
  }
  if (grad_input != nullptr) {
    *grad_input = live[0] ? std::move(grads[0]) : Tensor(tape.values[0].shape());
  }
}

void Network::commit_statistics(const Tape& tape) {
  if (tape.mode != Mode::train) return;
  for (std::size_t i = 1; i < nodes_.size(); ++i) {
    const Node& node = nodes_[i];
    if (node.layer->num_buffers() == 0) continue;
    node.layer->update_buffers(
        tape.scratch[i],
        std::span<float>(buffers_).subspan(node.buffer_offset, node.layer->num_buffers()));
  }
}

std::string Network::describe() const {
  std::ostringstream os;
  os << model_id_ << ": " << params_.size() << " parameters\n";
  for (std::size_t i = 1; i < nodes_.size(); ++i) {
    const Shape& s = nodes_[i].shape;
    os << "  [" << i << "] " << nodes_[i].layer->kind() << " <-";
    for (int j : nodes_[i].inputs) os << ' ' << j;
    os << "  -> " << s.c << 'x' << s.h << 'x' << s.w << '\n';
  }
  return os.str();
}

std::vector<double> softmax(std::span<const float> logits) {
  std::vector<double> p(logits.size());
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(static_cast<double>(logits[i]) - m);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

int argmax(std::span<const float> logits) {
  return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

LossResult softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  const Shape s = logits.shape();
  if (labels.size() != static_cast<std::size_t>(s.n)) {
    throw std::invalid_argument("softmax_cross_entropy: label count mismatch");
  }
  LossResult r;
  r.grad_logits = Tensor(s);
  const int k = static_cast<int>(s.per_sample());
  for (int i = 0; i < s.n; ++i) {
    const auto row = logits.sample(i);
    const auto p = softmax(row);
    const int y = labels[i];
    if (y < 0 || y >= k) throw std::out_of_range("softmax_cross_entropy: label out of range");
    r.loss -= std::log(std::max(p[y], 1e-300));
    if (argmax(row) == y) ++r.correct;
    auto g = r.grad_logits.sample(i);
    for (int j = 0; j < k; ++j) {
      g[j] = static_cast<float>((p[j] - (j == y ? 1.0 : 0.0)) / s.n);
    }
  }
  r.loss /= s.n;
  return r;
}

Sgd::Sgd(std::size_t num_params, double momentum, double weight_decay)
    : momentum_(momentum), weight_decay_(weight_decay), velocity_(num_params, 0.0f) {}

void Sgd::step(std::span<float> params, std::span<const float> grads, double lr) {
  const float m = static_cast<float>(momentum_);
  const float wd = static_cast<float>(weight_decay_);
  const float step = static_cast<float>(lr);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const float g = grads[i] + wd * params[i];
    velocity_[i] = m * velocity_[i] + g;
    params[i] -= step * velocity_[i];
  }
}

}  // namespace impart::nn
