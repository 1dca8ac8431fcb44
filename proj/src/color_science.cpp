#include "impart/color_science.hpp"

#include <Eigen/Core>
#include <unsupported/Eigen/AutoDiff>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace impart {
namespace {

using Dual = Eigen::AutoDiffScalar<Eigen::Vector3d>;

// IEC 61966-2-1 linear sRGB -> XYZ matrix. The reference white is taken as the
// image of (1, 1, 1) so that white maps to L = 100, a = b = 0 exactly.
constexpr double kRgbToXyz[3][3] = {
    {0.4124, 0.3576, 0.1805},
    {0.2126, 0.7152, 0.0722},
    {0.0193, 0.1192, 0.9505},
};
constexpr double kWhite[3] = {
    kRgbToXyz[0][0] + kRgbToXyz[0][1] + kRgbToXyz[0][2],
    kRgbToXyz[1][0] + kRgbToXyz[1][1] + kRgbToXyz[1][2],
    kRgbToXyz[2][0] + kRgbToXyz[2][1] + kRgbToXyz[2][2],
};

constexpr double kDelta = 6.0 / 29.0;
constexpr double kSqrtEps = 1e-9;
// Hue comparisons at exactly 180 degrees must follow the exact-arithmetic branch.
constexpr double kHueTol = 1e-9;
constexpr double kDeg = 180.0 / std::numbers::pi;
constexpr double kRad = std::numbers::pi / 180.0;
constexpr double k25Pow7 = 6103515625.0;

double value_of(double x) { return x; }
double value_of(const Dual& x) { return x.value(); }

double safe_sqrt(double x) { return std::sqrt(std::max(x, 0.0)); }

// Value is the exact root; the derivative carries an epsilon so that points
// where the radicand vanishes yield finite (zero) gradients.
Dual safe_sqrt(const Dual& x) {
  const double v = std::max(x.value(), 0.0);
  return Dual(std::sqrt(v), x.derivatives() * (0.5 / std::sqrt(v + kSqrtEps)));
}

// Hue angle in degrees, [0, 360). Defined as 0 at the achromatic point.
template <class S>
S hue_degrees(const S& b, const S& a_prime) {
  using std::atan2;
  if (value_of(b) == 0.0 && value_of(a_prime) == 0.0) return S(0.0);
  S h = atan2(b, a_prime) * kDeg;
  if (value_of(h) < 0.0) h = h + 360.0;
  return h;
}

template <class S>
S srgb_linearize(const S& c) {
  using std::pow;
  if (value_of(c) <= 0.04045) return c / 12.92;
  return pow((c + 0.055) / 1.055, 2.4);
}

template <class S>
S lab_f(const S& t) {
  using std::pow;
  if (value_of(t) > kDelta * kDelta * kDelta) return pow(t, 1.0 / 3.0);
  return t / (3.0 * kDelta * kDelta) + 4.0 / 29.0;
}

template <class S>
struct LabT {
  S L, a, b;
};

template <class S>
LabT<S> to_lab(const S& r, const S& g, const S& b) {
  const S lr = srgb_linearize(r);
  const S lg = srgb_linearize(g);
  const S lb = srgb_linearize(b);
  const S x = kRgbToXyz[0][0] * lr + kRgbToXyz[0][1] * lg + kRgbToXyz[0][2] * lb;
  const S y = kRgbToXyz[1][0] * lr + kRgbToXyz[1][1] * lg + kRgbToXyz[1][2] * lb;
  const S z = kRgbToXyz[2][0] * lr + kRgbToXyz[2][1] * lg + kRgbToXyz[2][2] * lb;
  const S yr = y / kWhite[1];
  const S fx = lab_f<S>(x / kWhite[0]);
  const S fy = lab_f<S>(yr);
  const S fz = lab_f<S>(z / kWhite[2]);
  // Linear branch written without the offset so that black maps to exactly 0.
  const S L = value_of(yr) > kDelta * kDelta * kDelta ? S(116.0 * fy - 16.0)
                                                       : S(yr * (116.0 / (3.0 * kDelta * kDelta)));
  return {L, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

template <class S>
S ciede2000_t(const LabT<S>& p1, const LabT<S>& p2, const Ciede2000Params& k) {
  using std::cos;
  using std::exp;
  using std::pow;
  using std::sin;

  const S c1 = safe_sqrt(S(p1.a * p1.a + p1.b * p1.b));
  const S c2 = safe_sqrt(S(p2.a * p2.a + p2.b * p2.b));
  const S c_bar = (c1 + c2) / 2.0;
  const S c_bar7 = pow(c_bar, 7.0);
  const S g = 0.5 * (1.0 - safe_sqrt(S(c_bar7 / (c_bar7 + k25Pow7))));

  const S a1p = (1.0 + g) * p1.a;
  const S a2p = (1.0 + g) * p2.a;
  const S c1p = safe_sqrt(S(a1p * a1p + p1.b * p1.b));
  const S c2p = safe_sqrt(S(a2p * a2p + p2.b * p2.b));
  const S h1p = hue_degrees(p1.b, a1p);
  const S h2p = hue_degrees(p2.b, a2p);

  const S dLp = p2.L - p1.L;
  const S dCp = c2p - c1p;

  const bool achromatic = value_of(c1p) * value_of(c2p) == 0.0;
  const double hue_gap = value_of(h2p) - value_of(h1p);

  S dhp(0.0);
  if (!achromatic) {
    if (std::abs(hue_gap) <= 180.0 + kHueTol) {
      dhp = h2p - h1p;
    } else if (hue_gap > 180.0) {
      dhp = h2p - h1p - 360.0;
    } else {
      dhp = h2p - h1p + 360.0;
    }
  }
  const S dHp = 2.0 * safe_sqrt(S(c1p * c2p)) * sin(dhp * (kRad / 2.0));

  const S Lbp = (p1.L + p2.L) / 2.0;
  const S Cbp = (c1p + c2p) / 2.0;

  S hbp = h1p + h2p;
  if (!achromatic) {
    const double hue_sum = value_of(h1p) + value_of(h2p);
    if (std::abs(hue_gap) <= 180.0 + kHueTol) {
      hbp = (h1p + h2p) / 2.0;
    } else if (hue_sum < 360.0) {
      hbp = (h1p + h2p + 360.0) / 2.0;
    } else {
      hbp = (h1p + h2p - 360.0) / 2.0;
    }
  }

  const S t = 1.0 - 0.17 * cos((hbp - 30.0) * kRad) + 0.24 * cos((2.0 * hbp) * kRad) +
              0.32 * cos((3.0 * hbp + 6.0) * kRad) - 0.20 * cos((4.0 * hbp - 63.0) * kRad);
  const S hb_off = (hbp - 275.0) / 25.0;
  const S d_theta = 30.0 * exp(-(hb_off * hb_off));
  const S cbp7 = pow(Cbp, 7.0);
  const S rc = 2.0 * safe_sqrt(S(cbp7 / (cbp7 + k25Pow7)));
  const S lb50 = (Lbp - 50.0) * (Lbp - 50.0);
  const S sl = 1.0 + 0.015 * lb50 / safe_sqrt(S(20.0 + lb50));
  const S sc = 1.0 + 0.045 * Cbp;
  const S sh = 1.0 + 0.015 * Cbp * t;
  const S rt = -sin((2.0 * d_theta) * kRad) * rc;

  const S tl = dLp / (k.kL * sl);
  const S tc = dCp / (k.kC * sc);
  const S th = dHp / (k.kH * sh);
  return safe_sqrt(S(tl * tl + tc * tc + th * th + rt * tc * th));
}

LabT<double> lab_t(const Lab& p) { return {p.L, p.a, p.b}; }

void check_pair(const RgbImage& img_a, const RgbImage& img_b) {
  require_same_shape(img_a, img_b, "delta_e00");
  img_a.validate();
  img_b.validate();
}

}  // namespace

void Ciede2000Params::validate() const {
  if (!(kL > 0.0 && kC > 0.0 && kH > 0.0)) {
    throw std::invalid_argument("Ciede2000Params: kL, kC, kH must be strictly positive");
  }
}

Lab srgb_to_lab(double r, double g, double b) {
  const auto lab = to_lab<double>(r, g, b);
  return {lab.L, lab.a, lab.b};
}

LabImage srgb_to_lab(const RgbImage& img) {
  img.validate();
  LabImage out;
  out.height = img.height();
  out.width = img.width();
  const std::size_t n = img.num_pixels();
  out.L.resize(n);
  out.a.resize(n);
  out.b.resize(n);
  const auto px = img.data();
  for (std::size_t i = 0; i < n; ++i) {
    const Lab lab = srgb_to_lab(px[3 * i], px[3 * i + 1], px[3 * i + 2]);
    out.L[i] = lab.L;
    out.a[i] = lab.a;
    out.b[i] = lab.b;
  }
  return out;
}

double ciede2000(const Lab& first, const Lab& second, const Ciede2000Params& params) {
  params.validate();
  return ciede2000_t<double>(lab_t(first), lab_t(second), params);
}

ScalarMap delta_e00_map(const RgbImage& img_a, const RgbImage& img_b,
                        const Ciede2000Params& params) {
  params.validate();
  check_pair(img_a, img_b);
  const LabImage la = srgb_to_lab(img_a);
  const LabImage lb = srgb_to_lab(img_b);
  ScalarMap out{img_a.height(), img_a.width(), std::vector<double>(img_a.num_pixels())};
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    out.values[i] = ciede2000_t<double>(lab_t(la.pixel(i)), lab_t(lb.pixel(i)), params);
  }
  return out;
}

double delta_e00_norm(const RgbImage& img_a, const RgbImage& img_b,
                      const Ciede2000Params& params) {
  const ScalarMap map = delta_e00_map(img_a, img_b, params);
  double sq = 0.0;
  for (double v : map.values) sq += v * v;
  return std::sqrt(sq);
}

double delta_e00_mean(const RgbImage& img_a, const RgbImage& img_b,
                      const Ciede2000Params& params) {
  const ScalarMap map = delta_e00_map(img_a, img_b, params);
  double sum = 0.0;
  for (double v : map.values) sum += v;
  return sum / static_cast<double>(map.values.size());
}

DeltaE00Gradient delta_e00_norm_gradient(const RgbImage& img_a, const RgbImage& img_b,
                                         const Ciede2000Params& params) {
  params.validate();
  check_pair(img_a, img_b);
  const LabImage lb = srgb_to_lab(img_b);
  const std::size_t n = img_a.num_pixels();
  const auto px = img_a.data();

  std::vector<double> values(n);
  std::vector<Eigen::Vector3d> partials(n);
  double sq = 0.0;
  double sum = 0.0;
  const auto pb = img_b.data();
  for (std::size_t i = 0; i < n; ++i) {
    // Unchanged pixels contribute nothing, value and gradient alike.
    if (px[3 * i] == pb[3 * i] && px[3 * i + 1] == pb[3 * i + 1] && px[3 * i + 2] == pb[3 * i + 2]) {
      partials[i].setZero();
      continue;
    }
    const Dual r(px[3 * i], 3, 0);
    const Dual g(px[3 * i + 1], 3, 1);
    const Dual b(px[3 * i + 2], 3, 2);
    const LabT<Dual> la = to_lab<Dual>(r, g, b);
    const LabT<Dual> ref{Dual(lb.L[i]), Dual(lb.a[i]), Dual(lb.b[i])};
    const Dual e = ciede2000_t<Dual>(la, ref, params);
    values[i] = e.value();
    partials[i] = e.derivatives().size() == 3 ? Eigen::Vector3d(e.derivatives())
                                              : Eigen::Vector3d::Zero();
    sq += e.value() * e.value();
    sum += e.value();
  }

  DeltaE00Gradient out;
  out.norm = std::sqrt(sq);
  out.mean = sum / static_cast<double>(n);
  out.grad.assign(3 * n, 0.0);
  if (out.norm > 0.0) {
    for (std::size_t i = 0; i < n; ++i) {
      const double w = values[i] / out.norm;
      for (int c = 0; c < 3; ++c) out.grad[3 * i + c] = w * partials[i][c];
    }
  }
  return out;
}

}  // namespace impart
