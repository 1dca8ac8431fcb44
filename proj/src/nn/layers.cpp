#include "impart/nn/layers.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace impart::nn {
namespace {

using MatRM = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatRM>;
using ConstMapRM = Eigen::Map<const MatRM>;

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

struct ConvGeometry {
  int cin, h, w, k, stride, pad, ho, wo;
};

void im2col(std::span<const float> x, const ConvGeometry& g, std::vector<float>& col) {
  const int hw_out = g.ho * g.wo;
  col.assign(static_cast<std::size_t>(g.cin) * g.k * g.k * hw_out, 0.0f);
  for (int ci = 0; ci < g.cin; ++ci) {
    const float* plane = x.data() + static_cast<std::size_t>(ci) * g.h * g.w;
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        float* row = col.data() + (static_cast<std::size_t>(ci * g.k + ky) * g.k + kx) * hw_out;
        for (int oy = 0; oy < g.ho; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.h) continue;
          const float* src = plane + static_cast<std::size_t>(iy) * g.w;
          float* dst = row + static_cast<std::size_t>(oy) * g.wo;
          for (int ox = 0; ox < g.wo; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < g.w) dst[ox] = src[ix];
          }
        }
      }
    }
  }
}

void col2im_add(const std::vector<float>& col, const ConvGeometry& g, std::span<float> dx) {
  const int hw_out = g.ho * g.wo;
  for (int ci = 0; ci < g.cin; ++ci) {
    float* plane = dx.data() + static_cast<std::size_t>(ci) * g.h * g.w;
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        const float* row =
            col.data() + (static_cast<std::size_t>(ci * g.k + ky) * g.k + kx) * hw_out;
        for (int oy = 0; oy < g.ho; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.h) continue;
          float* dst = plane + static_cast<std::size_t>(iy) * g.w;
          const float* src = row + static_cast<std::size_t>(oy) * g.wo;
          for (int ox = 0; ox < g.wo; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < g.w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace

void Layer::init(std::span<float>, std::span<float>, Rng&) const {}
void Layer::update_buffers(const Scratch&, std::span<float>) const {}

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(int in_channels, int out_channels, int kernel, int stride)
    : in_channels_(in_channels), out_channels_(out_channels), kernel_(kernel), stride_(stride) {
  require(in_channels > 0 && out_channels > 0, "Conv2d: channel counts must be positive");
  require(kernel > 0 && kernel % 2 == 1, "Conv2d: kernel must be odd");
  require(stride > 0, "Conv2d: stride must be positive");
}

std::size_t Conv2d::num_params() const {
  return static_cast<std::size_t>(out_channels_) * in_channels_ * kernel_ * kernel_;
}

Shape Conv2d::output_shape(std::span<const Shape> inputs) const {
  const Shape& s = inputs[0];
  require(s.c == in_channels_, "Conv2d: input channel mismatch");
  const int pad = kernel_ / 2;
  return {s.n, out_channels_, (s.h + 2 * pad - kernel_) / stride_ + 1,
          (s.w + 2 * pad - kernel_) / stride_ + 1};
}

void Conv2d::init(std::span<float> params, std::span<float>, Rng& rng) const {
  // Uniform in +-1/sqrt(fan_in); behind batch norm this sets the effective step size.
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_channels_ * kernel_ * kernel_));
  for (float& p : params) p = static_cast<float>(rng.uniform(-bound, bound));
}

Tensor Conv2d::forward(const LayerIo& io, Mode, Scratch&) const {
  const Tensor& x = *io.inputs[0];
  const Shape in = x.shape();
  const Shape out_shape = output_shape(std::span<const Shape>(&in, 1));
  const ConvGeometry g{in.c, in.h, in.w, kernel_, stride_, kernel_ / 2, out_shape.h, out_shape.w};
  const int kdim = in.c * kernel_ * kernel_;
  const int hw_out = g.ho * g.wo;

  Tensor y(out_shape);
  const ConstMapRM weight(io.params.data(), out_channels_, kdim);
  std::vector<float> col;
  for (int n = 0; n < in.n; ++n) {
    im2col(x.sample(n), g, col);
    MapRM out(y.sample(n).data(), out_channels_, hw_out);
    out.noalias() = weight * ConstMapRM(col.data(), kdim, hw_out);
  }
  return y;
}

void Conv2d::backward(const LayerIo& io, Mode, const Tensor&, const Tensor& grad_out,
                      const Scratch&, std::span<Tensor* const> grad_inputs,
                      std::span<float> grad_params) const {
  const Tensor& x = *io.inputs[0];
  const Shape in = x.shape();
  const Shape out_shape = grad_out.shape();
  const ConvGeometry g{in.c, in.h, in.w, kernel_, stride_, kernel_ / 2, out_shape.h, out_shape.w};
  const int kdim = in.c * kernel_ * kernel_;
  const int hw_out = g.ho * g.wo;
  const ConstMapRM weight(io.params.data(), out_channels_, kdim);
  Tensor* dx = grad_inputs[0];

  std::vector<float> col;
  std::vector<float> dcol(static_cast<std::size_t>(kdim) * hw_out);
  for (int n = 0; n < in.n; ++n) {
    const ConstMapRM gy(grad_out.sample(n).data(), out_channels_, hw_out);
    if (!grad_params.empty()) {
      im2col(x.sample(n), g, col);
      MapRM dw(grad_params.data(), out_channels_, kdim);
      dw.noalias() += gy * ConstMapRM(col.data(), kdim, hw_out).transpose();
    }
    if (dx != nullptr) {
      MapRM dc(dcol.data(), kdim, hw_out);
      dc.noalias() = weight.transpose() * gy;
      col2im_add(dcol, g, dx->sample(n));
    }
  }
}

// ---------------------------------------------------------------- BatchNorm2d

BatchNorm2d::BatchNorm2d(int channels, float momentum, float eps)
    : channels_(channels), momentum_(momentum), eps_(eps) {
  require(channels > 0, "BatchNorm2d: channels must be positive");
}

void BatchNorm2d::init(std::span<float> params, std::span<float> buffers, Rng&) const {
  std::fill(params.begin(), params.begin() + channels_, 1.0f);
  std::fill(params.begin() + channels_, params.end(), 0.0f);
  std::fill(buffers.begin(), buffers.begin() + channels_, 0.0f);
  std::fill(buffers.begin() + channels_, buffers.end(), 1.0f);
}

Tensor BatchNorm2d::forward(const LayerIo& io, Mode mode, Scratch& scratch) const {
  const Tensor& x = *io.inputs[0];
  const Shape s = x.shape();
  const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
  const double count = static_cast<double>(s.n) * plane;
  const float* gamma = io.params.data();
  const float* beta = io.params.data() + channels_;

  // scratch.f = [mean(C), inv_std(C), unbiased_var(C)]
  scratch.f.assign(3 * static_cast<std::size_t>(channels_), 0.0f);
  for (int c = 0; c < channels_; ++c) {
    double mean;
    double var;
    if (mode == Mode::train) {
      double sum = 0.0;
      for (int n = 0; n < s.n; ++n) {
        const float* p = x.sample(n).data() + c * plane;
        for (std::size_t i = 0; i < plane; ++i) sum += p[i];
      }
      mean = sum / count;
      double sq = 0.0;
      for (int n = 0; n < s.n; ++n) {
        const float* p = x.sample(n).data() + c * plane;
        for (std::size_t i = 0; i < plane; ++i) sq += (p[i] - mean) * (p[i] - mean);
      }
      var = sq / count;
      scratch.f[2 * channels_ + c] = static_cast<float>(count > 1 ? sq / (count - 1) : var);
    } else {
      mean = io.buffers[c];
      var = io.buffers[channels_ + c];
    }
    scratch.f[c] = static_cast<float>(mean);
    scratch.f[channels_ + c] = static_cast<float>(1.0 / std::sqrt(var + eps_));
  }

  Tensor y(s);
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < channels_; ++c) {
      const float m = scratch.f[c];
      const float scale = gamma[c] * scratch.f[channels_ + c];
      const float* p = x.sample(n).data() + c * plane;
      float* q = y.sample(n).data() + c * plane;
      for (std::size_t i = 0; i < plane; ++i) q[i] = (p[i] - m) * scale + beta[c];
    }
  }
  return y;
}

void BatchNorm2d::backward(const LayerIo& io, Mode mode, const Tensor&, const Tensor& grad_out,
                           const Scratch& scratch, std::span<Tensor* const> grad_inputs,
                           std::span<float> grad_params) const {
  const Tensor& x = *io.inputs[0];
  const Shape s = x.shape();
  const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
  const double count = static_cast<double>(s.n) * plane;
  const float* gamma = io.params.data();
  Tensor* dx = grad_inputs[0];

  for (int c = 0; c < channels_; ++c) {
    const float m = scratch.f[c];
    const float inv_std = scratch.f[channels_ + c];
    double sum_dy = 0.0;
    double sum_dy_xhat = 0.0;
    for (int n = 0; n < s.n; ++n) {
      const float* p = x.sample(n).data() + c * plane;
      const float* gy = grad_out.sample(n).data() + c * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        sum_dy += gy[i];
        sum_dy_xhat += gy[i] * (p[i] - m) * inv_std;
      }
    }
    if (!grad_params.empty()) {
      grad_params[c] += static_cast<float>(sum_dy_xhat);
      grad_params[channels_ + c] += static_cast<float>(sum_dy);
    }
    if (dx == nullptr) continue;
    const float g_inv = gamma[c] * inv_std;
    const float mean_dy = static_cast<float>(sum_dy / count);
    const float mean_dy_xhat = static_cast<float>(sum_dy_xhat / count);
    for (int n = 0; n < s.n; ++n) {
      const float* p = x.sample(n).data() + c * plane;
      const float* gy = grad_out.sample(n).data() + c * plane;
      float* q = dx->sample(n).data() + c * plane;
      if (mode == Mode::train) {
        for (std::size_t i = 0; i < plane; ++i) {
          const float xhat = (p[i] - m) * inv_std;
          q[i] += g_inv * (gy[i] - mean_dy - xhat * mean_dy_xhat);
        }
      } else {
        for (std::size_t i = 0; i < plane; ++i) q[i] += g_inv * gy[i];
      }
    }
  }
}

void BatchNorm2d::update_buffers(const Scratch& scratch, std::span<float> buffers) const {
  for (int c = 0; c < channels_; ++c) {
    buffers[c] = (1.0f - momentum_) * buffers[c] + momentum_ * scratch.f[c];
    buffers[channels_ + c] =
        (1.0f - momentum_) * buffers[channels_ + c] + momentum_ * scratch.f[2 * channels_ + c];
  }
}

// ---------------------------------------------------------------- Relu

Tensor Relu::forward(const LayerIo& io, Mode, Scratch&) const {
  const Tensor& x = *io.inputs[0];
  Tensor y(x.shape());
  const auto src = x.data();
  auto dst = y.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] > 0.0f ? src[i] : 0.0f;
  return y;
}

void Relu::backward(const LayerIo&, Mode, const Tensor& output, const Tensor& grad_out,
                    const Scratch&, std::span<Tensor* const> grad_inputs,
                    std::span<float>) const {
  Tensor* dx = grad_inputs[0];
  if (dx == nullptr) return;
  const auto y = output.data();
  const auto gy = grad_out.data();
  auto d = dx->data();
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] > 0.0f) d[i] += gy[i];
  }
}

// ---------------------------------------------------------------- Add

Shape Add::output_shape(std::span<const Shape> inputs) const {
  require(inputs.size() == 2 && inputs[0] == inputs[1], "Add: inputs must share a shape");
  return inputs[0];
}

Tensor Add::forward(const LayerIo& io, Mode, Scratch&) const {
  const Tensor& a = *io.inputs[0];
  const Tensor& b = *io.inputs[1];
  Tensor y(a.shape());
  auto dst = y.data();
  const auto pa = a.data();
  const auto pb = b.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = pa[i] + pb[i];
  return y;
}

void Add::backward(const LayerIo&, Mode, const Tensor&, const Tensor& grad_out, const Scratch&,
                   std::span<Tensor* const> grad_inputs, std::span<float>) const {
  const auto gy = grad_out.data();
  for (Tensor* dx : grad_inputs) {
    if (dx == nullptr) continue;
    auto d = dx->data();
    for (std::size_t i = 0; i < gy.size(); ++i) d[i] += gy[i];
  }
}

// ---------------------------------------------------------------- MaxPool2

Shape MaxPool2::output_shape(std::span<const Shape> inputs) const {
  const Shape& s = inputs[0];
  require(s.h % 2 == 0 && s.w % 2 == 0, "MaxPool2: spatial dims must be even");
  return {s.n, s.c, s.h / 2, s.w / 2};
}

Tensor MaxPool2::forward(const LayerIo& io, Mode, Scratch& scratch) const {
  const Tensor& x = *io.inputs[0];
  const Shape s = x.shape();
  const Shape o{s.n, s.c, s.h / 2, s.w / 2};
  Tensor y(o);
  scratch.i.resize(o.size());
  const auto src = x.data();
  auto dst = y.data();
  std::size_t out_idx = 0;
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const std::size_t base = (static_cast<std::size_t>(n) * s.c + c) * s.h * s.w;
      for (int oy = 0; oy < o.h; ++oy) {
        for (int ox = 0; ox < o.w; ++ox, ++out_idx) {
          std::size_t best = base + static_cast<std::size_t>(2 * oy) * s.w + 2 * ox;
          for (int dy = 0; dy < 2; ++dy) {
            for (int dxo = 0; dxo < 2; ++dxo) {
              const std::size_t idx = base + static_cast<std::size_t>(2 * oy + dy) * s.w + 2 * ox + dxo;
              if (src[idx] > src[best]) best = idx;
            }
          }
          dst[out_idx] = src[best];
          scratch.i[out_idx] = static_cast<int>(best - base);
        }
      }
    }
  }
  return y;
}

void MaxPool2::backward(const LayerIo& io, Mode, const Tensor&, const Tensor& grad_out,
                        const Scratch& scratch, std::span<Tensor* const> grad_inputs,
                        std::span<float>) const {
  Tensor* dx = grad_inputs[0];
  if (dx == nullptr) return;
  const Shape s = io.inputs[0]->shape();
  const Shape o = grad_out.shape();
  const auto gy = grad_out.data();
  auto d = dx->data();
  const std::size_t per_plane_out = static_cast<std::size_t>(o.h) * o.w;
  for (std::size_t i = 0; i < gy.size(); ++i) {
    const std::size_t plane = i / per_plane_out;
    d[plane * s.h * s.w + scratch.i[i]] += gy[i];
  }
}

// ---------------------------------------------------------------- GlobalAvgPool

Shape GlobalAvgPool::output_shape(std::span<const Shape> inputs) const {
  return {inputs[0].n, inputs[0].c, 1, 1};
}

Tensor GlobalAvgPool::forward(const LayerIo& io, Mode, Scratch&) const {
  const Tensor& x = *io.inputs[0];
  const Shape s = x.shape();
  const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
  Tensor y({s.n, s.c, 1, 1});
  const auto src = x.data();
  auto dst = y.data();
  for (std::size_t p = 0; p < dst.size(); ++p) {
    float acc = 0.0f;
    for (std::size_t i = 0; i < plane; ++i) acc += src[p * plane + i];
    dst[p] = acc / static_cast<float>(plane);
  }
  return y;
}

void GlobalAvgPool::backward(const LayerIo& io, Mode, const Tensor&, const Tensor& grad_out,
                             const Scratch&, std::span<Tensor* const> grad_inputs,
                             std::span<float>) const {
  Tensor* dx = grad_inputs[0];
  if (dx == nullptr) return;
  const Shape s = io.inputs[0]->shape();
  const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
  const auto gy = grad_out.data();
  auto d = dx->data();
  for (std::size_t p = 0; p < gy.size(); ++p) {
    const float g = gy[p] / static_cast<float>(plane);
    for (std::size_t i = 0; i < plane; ++i) d[p * plane + i] += g;
  }
}

// ---------------------------------------------------------------- Linear

Linear::Linear(int in_features, int out_features)
    : in_features_(in_features), out_features_(out_features) {
  require(in_features > 0 && out_features > 0, "Linear: feature counts must be positive");
}

std::size_t Linear::num_params() const {
  return static_cast<std::size_t>(out_features_) * in_features_ + out_features_;
}

Shape Linear::output_shape(std::span<const Shape> inputs) const {
  require(static_cast<int>(inputs[0].per_sample()) == in_features_, "Linear: input size mismatch");
  return {inputs[0].n, out_features_, 1, 1};
}

void Linear::init(std::span<float> params, std::span<float>, Rng& rng) const {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_features_));
  for (float& p : params) p = static_cast<float>(rng.uniform(-bound, bound));
}

Tensor Linear::forward(const LayerIo& io, Mode, Scratch&) const {
  const Tensor& x = *io.inputs[0];
  const int n = x.shape().n;
  Tensor y({n, out_features_, 1, 1});
  const ConstMapRM weight(io.params.data(), out_features_, in_features_);
  const Eigen::Map<const Eigen::VectorXf> bias(io.params.data() + weight.size(), out_features_);
  for (int i = 0; i < n; ++i) {
    const Eigen::Map<const Eigen::VectorXf> xi(x.sample(i).data(), in_features_);
    Eigen::Map<Eigen::VectorXf> yi(y.sample(i).data(), out_features_);
    yi.noalias() = weight * xi;
    yi += bias;
  }
  return y;
}

void Linear::backward(const LayerIo& io, Mode, const Tensor&, const Tensor& grad_out,
                      const Scratch&, std::span<Tensor* const> grad_inputs,
                      std::span<float> grad_params) const {
  const Tensor& x = *io.inputs[0];
  const int n = x.shape().n;
  const ConstMapRM weight(io.params.data(), out_features_, in_features_);
  Tensor* dx = grad_inputs[0];
  for (int i = 0; i < n; ++i) {
    const Eigen::Map<const Eigen::VectorXf> gy(grad_out.sample(i).data(), out_features_);
    if (!grad_params.empty()) {
      const Eigen::Map<const Eigen::VectorXf> xi(x.sample(i).data(), in_features_);
      MapRM dw(grad_params.data(), out_features_, in_features_);
      dw.noalias() += gy * xi.transpose();
      Eigen::Map<Eigen::VectorXf> db(grad_params.data() + dw.size(), out_features_);
      db += gy;
    }
    if (dx != nullptr) {
      Eigen::Map<Eigen::VectorXf> dxi(dx->sample(i).data(), in_features_);
      dxi.noalias() += weight.transpose() * gy;
    }
  }
}

// ---------------------------------------------------------------- Standardize

void Standardize::init(std::span<float>, std::span<float> buffers, Rng&) const {
  std::fill(buffers.begin(), buffers.begin() + channels_, 0.0f);
  std::fill(buffers.begin() + channels_, buffers.end(), 1.0f);
}

Tensor Standardize::forward(const LayerIo& io, Mode, Scratch&) const {
  const Tensor& x = *io.inputs[0];
  const Shape s = x.shape();
  const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
  Tensor y(s);
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < channels_; ++c) {
      const float m = io.buffers[c];
      const float inv = 1.0f / io.buffers[channels_ + c];
      const float* p = x.sample(n).data() + c * plane;
      float* q = y.sample(n).data() + c * plane;
      for (std::size_t i = 0; i < plane; ++i) q[i] = (p[i] - m) * inv;
    }
  }
  return y;
}

void Standardize::backward(const LayerIo& io, Mode, const Tensor&, const Tensor& grad_out,
                           const Scratch&, std::span<Tensor* const> grad_inputs,
                           std::span<float>) const {
  Tensor* dx = grad_inputs[0];
  if (dx == nullptr) return;
  const Shape s = grad_out.shape();
  const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < channels_; ++c) {
      const float inv = 1.0f / io.buffers[channels_ + c];
      const float* gy = grad_out.sample(n).data() + c * plane;
      float* q = dx->sample(n).data() + c * plane;
      for (std::size_t i = 0; i < plane; ++i) q[i] += gy[i] * inv;
    }
  }
}

}  // namespace impart::nn
