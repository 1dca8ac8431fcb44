#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace impart {

// Normalized sRGB image, channel values in [0, 1], stored row-major HWC.
class RgbImage {
 public:
  RgbImage() = default;
  RgbImage(int height, int width, double fill = 0.0);
  RgbImage(int height, int width, std::vector<double> pixels);

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t num_pixels() const { return static_cast<std::size_t>(height_) * width_; }
  std::size_t size() const { return pixels_.size(); }
  bool empty() const { return pixels_.empty(); }

  double& at(int y, int x, int c) { return pixels_[index(y, x, c)]; }
  double at(int y, int x, int c) const { return pixels_[index(y, x, c)]; }

  std::span<double> data() { return pixels_; }
  std::span<const double> data() const { return pixels_; }

  bool same_shape(const RgbImage& other) const {
    return height_ == other.height_ && width_ == other.width_;
  }

  // Throws std::domain_error if any channel lies outside [0, 1] or is not finite.
  void validate() const;

  // Projection onto [0, 1]^(H x W x 3).
  void clamp();

  std::vector<std::uint8_t> to_8bit() const;
  static RgbImage from_8bit(int height, int width, std::span<const std::uint8_t> bytes);

  // Round-trips through 8-bit storage.
  RgbImage quantized() const;

  friend bool operator==(const RgbImage&, const RgbImage&) = default;

 private:
  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * 3 + c;
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<double> pixels_;
};

// Throws std::domain_error when the two images differ in shape.
void require_same_shape(const RgbImage& a, const RgbImage& b, const char* what);

}  // namespace impart
