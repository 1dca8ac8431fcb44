#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

namespace impart::nn {

struct Shape {
  int n = 0;
  int c = 0;
  int h = 1;
  int w = 1;

  std::size_t per_sample() const { return static_cast<std::size_t>(c) * h * w; }
  std::size_t size() const { return static_cast<std::size_t>(n) * per_sample(); }
  friend bool operator==(const Shape&, const Shape&) = default;
};

// Dense NCHW float tensor.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f) : shape_(shape), data_(shape.size(), fill) {}

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }

  std::span<float> sample(int i) {
    return std::span<float>(data_).subspan(static_cast<std::size_t>(i) * shape_.per_sample(),
                                           shape_.per_sample());
  }
  std::span<const float> sample(int i) const {
    return std::span<const float>(data_).subspan(
        static_cast<std::size_t>(i) * shape_.per_sample(), shape_.per_sample());
  }

  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  void fill(float v) { std::fill(data_.begin(), data_.end(), v); }

 private:
  Shape shape_;
  std::vector<float> data_;
};

}  // namespace impart::nn
