#include "impart/image_quality.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "impart/color_science.hpp"

namespace impart {
namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

std::array<double, kWindow> gaussian_window() {
  std::array<double, kWindow> w{};
  double total = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kWindow / 2;
    w[i] = std::exp(-(d * d) / (2.0 * kSigma * kSigma));
    total += w[i];
  }
  for (double& v : w) v /= total;
  return w;
}

// Separable valid-mode filtering of one channel plane.
std::vector<double> filter_valid(const std::vector<double>& plane, int h, int w,
                                 const std::array<double, kWindow>& k) {
  const int ow = w - kWindow + 1;
  const int oh = h - kWindow + 1;
  std::vector<double> rows(static_cast<std::size_t>(h) * ow);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < kWindow; ++i) acc += k[i] * plane[static_cast<std::size_t>(y) * w + x + i];
      rows[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < kWindow; ++i) acc += k[i] * rows[static_cast<std::size_t>(y + i) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  return out;
}

}  // namespace

double psnr(const RgbImage& ref, const RgbImage& test) {
  require_same_shape(ref, test, "psnr");
  const auto a = ref.data();
  const auto b = test.data();
  double sq = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sq += (a[i] - b[i]) * (a[i] - b[i]);
  const double mse = sq / static_cast<double>(a.size());
  if (mse < 1e-10) return kPsnrCapDb;
  return std::min(kPsnrCapDb, 10.0 * std::log10(1.0 / mse));
}

double ssim(const RgbImage& ref, const RgbImage& test) {
  require_same_shape(ref, test, "ssim");
  const int h = ref.height();
  const int w = ref.width();
  if (std::min(h, w) < kWindow) {
    throw std::domain_error("ssim: image smaller than the 11x11 window");
  }
  static const auto kernel = gaussian_window();
  const std::size_t n = ref.num_pixels();
  const auto a = ref.data();
  const auto b = test.data();

  double total = 0.0;
  for (int c = 0; c < 3; ++c) {
    std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = a[3 * i + c];
      y[i] = b[3 * i + c];
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = filter_valid(x, h, w, kernel);
    const auto my = filter_valid(y, h, w, kernel);
    const auto sxx = filter_valid(xx, h, w, kernel);
    const auto syy = filter_valid(yy, h, w, kernel);
    const auto sxy = filter_valid(xy, h, w, kernel);
    double channel = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = sxx[i] - mx[i] * mx[i];
      const double vy = syy[i] - my[i] * my[i];
      const double cov = sxy[i] - mx[i] * my[i];
      const double num = (2.0 * mx[i] * my[i] + kC1) * (2.0 * cov + kC2);
      const double den = (mx[i] * mx[i] + my[i] * my[i] + kC1) * (vx + vy + kC2);
      channel += num / den;
    }
    total += channel / static_cast<double>(mx.size());
  }
  return total / 3.0;
}

LpDistances lp_distances(const RgbImage& ref, const RgbImage& test) {
  require_same_shape(ref, test, "lp_distances");
  const auto a = ref.data();
  const auto b = test.data();
  LpDistances out;
  double sq = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::abs(a[i] - b[i]);
    sq += d * d;
    out.linf = std::max(out.linf, d);
  }
  out.l2 = std::sqrt(sq);
  return out;
}

QualityReport measure_quality(const RgbImage& ref, const RgbImage& test) {
  QualityReport r;
  const ScalarMap map = delta_e00_map(test, ref);
  double sum = 0.0;
  double sq = 0.0;
  for (double v : map.values) {
    sum += v;
    sq += v * v;
  }
  r.mean_ciede2000 = sum / static_cast<double>(map.values.size());
  r.norm_ciede2000 = std::sqrt(sq);
  r.ssim = ssim(ref, test);
  r.psnr_db = psnr(ref, test);
  r.psnr_capped = r.psnr_db >= kPsnrCapDb;
  const LpDistances lp = lp_distances(ref, test);
  r.l2 = lp.l2;
  r.linf = lp.linf;
  return r;
}

QualityReport average_quality(const std::vector<QualityReport>& records) {
  if (records.empty()) throw std::invalid_argument("average_quality: empty sequence");
  QualityReport m{0.0, 0.0, 0.0, 0.0, true, 0.0, 0.0};
  for (const auto& r : records) {
    m.mean_ciede2000 += r.mean_ciede2000;
    m.norm_ciede2000 += r.norm_ciede2000;
    m.ssim += r.ssim;
    m.psnr_db += r.psnr_db;
    m.psnr_capped = m.psnr_capped && r.psnr_capped;
    m.l2 += r.l2;
    m.linf += r.linf;
  }
  const double n = static_cast<double>(records.size());
  m.mean_ciede2000 /= n;
  m.norm_ciede2000 /= n;
  m.ssim /= n;
  m.psnr_db /= n;
  m.l2 /= n;
  m.linf /= n;
  return m;
}

BatchQuality batch_quality(const std::vector<std::pair<RgbImage, RgbImage>>& pairs) {
  if (pairs.empty()) throw std::invalid_argument("batch_quality: empty sequence");
  BatchQuality out;
  out.records.reserve(pairs.size());
  for (const auto& [ref, test] : pairs) out.records.push_back(measure_quality(ref, test));
  out.mean = average_quality(out.records);
  return out;
}

}  // namespace impart
