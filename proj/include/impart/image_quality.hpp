#pragma once

#include <utility>
#include <vector>

#include "impart/image.hpp"

namespace impart {

// PSNR reported when the mean squared error vanishes.
inline constexpr double kPsnrCapDb = 100.0;

struct QualityReport {
  double mean_ciede2000 = 0.0;
  // l2 reduction of the per-pixel CIEDE2000 map, logged alongside the mean.
  double norm_ciede2000 = 0.0;
  double ssim = 1.0;
  double psnr_db = kPsnrCapDb;
  bool psnr_capped = true;
  double l2 = 0.0;
  double linf = 0.0;
};

struct LpDistances {
  double l2 = 0.0;
  double linf = 0.0;
};

// 10 log10(1 / MSE); kPsnrCapDb when MSE < 1e-10.
double psnr(const RgbImage& ref, const RgbImage& test);

// Mean local SSIM, 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03,
// valid-region filtering, computed per channel and averaged.
double ssim(const RgbImage& ref, const RgbImage& test);

LpDistances lp_distances(const RgbImage& ref, const RgbImage& test);

QualityReport measure_quality(const RgbImage& ref, const RgbImage& test);

struct BatchQuality {
  QualityReport mean;
  std::vector<QualityReport> records;
};

// Arithmetic mean of every metric over the pairs, in pair order.
BatchQuality batch_quality(const std::vector<std::pair<RgbImage, RgbImage>>& pairs);

// Averages already-computed records (the reduction used by batch_quality).
QualityReport average_quality(const std::vector<QualityReport>& records);

}  // namespace impart
