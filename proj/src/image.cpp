#include "impart/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace impart {

RgbImage::RgbImage(int height, int width, double fill)
    : height_(height), width_(width) {
  if (height <= 0 || width <= 0) {
    throw std::invalid_argument("RgbImage: dimensions must be positive");
  }
  pixels_.assign(static_cast<std::size_t>(height) * width * 3, fill);
}

RgbImage::RgbImage(int height, int width, std::vector<double> pixels)
    : height_(height), width_(width), pixels_(std::move(pixels)) {
  if (height <= 0 || width <= 0) {
    throw std::invalid_argument("RgbImage: dimensions must be positive");
  }
  if (pixels_.size() != static_cast<std::size_t>(height) * width * 3) {
    throw std::invalid_argument("RgbImage: pixel buffer does not match dimensions");
  }
}

void RgbImage::validate() const {
  for (double v : pixels_) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw std::domain_error("RgbImage: channel value " + std::to_string(v) +
                              " outside [0,1]");
    }
  }
}

void RgbImage::clamp() {
  for (double& v : pixels_) v = std::clamp(v, 0.0, 1.0);
}

std::vector<std::uint8_t> RgbImage::to_8bit() const {
  std::vector<std::uint8_t> out(pixels_.size());
  for (std::size_t i = 0; i < pixels_.size(); ++i) {
    const double v = std::clamp(pixels_[i], 0.0, 1.0);
    out[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
  }
  return out;
}

RgbImage RgbImage::from_8bit(int height, int width, std::span<const std::uint8_t> bytes) {
  if (bytes.size() != static_cast<std::size_t>(height) * width * 3) {
    throw std::invalid_argument("RgbImage::from_8bit: byte count does not match dimensions");
  }
  std::vector<double> pixels(bytes.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) pixels[i] = bytes[i] / 255.0;
  return RgbImage(height, width, std::move(pixels));
}

RgbImage RgbImage::quantized() const {
  const auto bytes = to_8bit();
  return from_8bit(height_, width_, bytes);
}

void require_same_shape(const RgbImage& a, const RgbImage& b, const char* what) {
  if (!a.same_shape(b)) {
    throw std::domain_error(std::string(what) + ": image dimensions differ (" +
                            std::to_string(a.height()) + "x" + std::to_string(a.width()) +
                            " vs " + std::to_string(b.height()) + "x" +
                            std::to_string(b.width()) + ")");
  }
}

}  // namespace impart
