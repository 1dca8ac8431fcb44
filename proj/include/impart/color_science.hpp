#pragma once

#include <vector>

#include "impart/image.hpp"

namespace impart {

struct Lab {
  double L = 0.0;
  double a = 0.0;
  double b = 0.0;
};

// CIE L*a*b* image (D65, 2 degree observer), planar storage.
struct LabImage {
  int height = 0;
  int width = 0;
  std::vector<double> L;
  std::vector<double> a;
  std::vector<double> b;

  Lab pixel(std::size_t i) const { return {L[i], a[i], b[i]}; }
};

// Parametric weighting factors of CIEDE2000.
struct Ciede2000Params {
  double kL = 1.0;
  double kC = 1.0;
  double kH = 1.0;

  void validate() const;
};

// Per-pixel scalar field over an H x W grid, row-major.
struct ScalarMap {
  int height = 0;
  int width = 0;
  std::vector<double> values;
};

Lab srgb_to_lab(double r, double g, double b);

// Throws std::domain_error for channels outside [0, 1].
LabImage srgb_to_lab(const RgbImage& img);

// Standard CIEDE2000 colour difference between two Lab colours.
double ciede2000(const Lab& first, const Lab& second, const Ciede2000Params& params = {});

ScalarMap delta_e00_map(const RgbImage& img_a, const RgbImage& img_b,
                        const Ciede2000Params& params = {});

// l2 norm of the flattened per-pixel difference map.
double delta_e00_norm(const RgbImage& img_a, const RgbImage& img_b,
                      const Ciede2000Params& params = {});

double delta_e00_mean(const RgbImage& img_a, const RgbImage& img_b,
                      const Ciede2000Params& params = {});

struct DeltaE00Gradient {
  double norm = 0.0;
  double mean = 0.0;
  // d norm / d img_a, laid out like RgbImage::data().
  std::vector<double> grad;
};

// Value and gradient of delta_e00_norm with respect to img_a. The gradient is
// exact (forward-mode differentiation through sRGB -> Lab -> CIEDE2000); at
// zero-difference pixels it is defined to vanish.
DeltaE00Gradient delta_e00_norm_gradient(const RgbImage& img_a, const RgbImage& img_b,
                                         const Ciede2000Params& params = {});

}  // namespace impart
