#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "impart/color_science.hpp"
#include "impart/rng.hpp"
#include "ciede2000_pairs.hpp"

using namespace impart;

namespace {

RgbImage random_image(int h, int w, Rng& rng) {
  RgbImage img(h, w);
  for (double& v : img.data()) v = rng.uniform();
  return img;
}

RgbImage uniform_image(int h, int w, double r, double g, double b) {
  RgbImage img(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      img.at(y, x, 0) = r;
      img.at(y, x, 1) = g;
      img.at(y, x, 2) = b;
    }
  }
  return img;
}

}  // namespace

TEST_CASE("white and black map to the Lab endpoints") {
  const LabImage white = srgb_to_lab(RgbImage(2, 3, 1.0));
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(white.L[i] == doctest::Approx(100.0).epsilon(1e-12));
    CHECK(std::abs(white.a[i]) < 1e-3);
    CHECK(std::abs(white.b[i]) < 1e-3);
  }
  const LabImage black = srgb_to_lab(RgbImage(2, 2, 0.0));
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(black.L[i] == 0.0);
    CHECK(black.a[i] == 0.0);
    CHECK(black.b[i] == 0.0);
  }
}

TEST_CASE("sRGB to Lab matches reference colorimetry") {
  // Oracle: colour-science 0.4 (sRGB, D65 white from the sRGB matrix).
  struct Case {
    double r, g, b, L, A, B;
  };
  const Case cases[] = {
      {0.5, 0.25, 0.75, 41.155308033846, 51.418535128159, -56.450216777576},
      {0.2, 0.6, 0.1, 55.643156783124, -51.608385562472, 52.807628734747},
      {0.01, 0.02, 0.03, 1.300131418415, -0.312134984719, -1.199994966395},
      {0.9, 0.1, 0.3, 49.479126397276, 73.227262894408, 27.086748056502},
  };
  for (const Case& c : cases) {
    const Lab lab = srgb_to_lab(c.r, c.g, c.b);
    CHECK(std::abs(lab.L - c.L) < 1e-4);
    CHECK(std::abs(lab.a - c.A) < 1e-4);
    CHECK(std::abs(lab.b - c.B) < 1e-4);
  }
}

TEST_CASE("out-of-range channels are rejected") {
  RgbImage img(1, 1, 0.5);
  img.at(0, 0, 2) = 1.0 + 1e-6;
  CHECK_THROWS_AS(srgb_to_lab(img), std::domain_error);
  img.at(0, 0, 2) = -1e-6;
  CHECK_THROWS_AS(srgb_to_lab(img), std::domain_error);
}

TEST_CASE("CIEDE2000 reproduces the standard test pairs") {
  for (const auto& p : kCiede2000Pairs) {
    CAPTURE(p.id);
    CHECK(std::abs(ciede2000(p.first, p.second) - p.expected) < 1e-4);
    CHECK(std::abs(ciede2000(p.second, p.first) - p.expected) < 1e-4);
  }
}

TEST_CASE("parametric factors must be positive") {
  CHECK_THROWS(Ciede2000Params{0.0, 1.0, 1.0}.validate());
  CHECK_THROWS(Ciede2000Params{1.0, -1.0, 1.0}.validate());
  CHECK_NOTHROW(Ciede2000Params{2.0, 1.0, 1.0}.validate());
  const Lab a{50, 2.5, 0}, b{73, 25, -18};
  // Doubling kL halves the lightness contribution, so the difference shrinks.
  CHECK(ciede2000(a, b, {2.0, 1.0, 1.0}) < ciede2000(a, b));
}

TEST_CASE("difference map identity, symmetry and nonnegativity") {
  Rng rng(11);
  for (int t = 0; t < 20; ++t) {
    const RgbImage a = random_image(5, 4, rng);
    const RgbImage b = random_image(5, 4, rng);
    const ScalarMap self = delta_e00_map(a, a);
    for (double v : self.values) CHECK(std::abs(v) <= 1e-9);
    const ScalarMap ab = delta_e00_map(a, b);
    const ScalarMap ba = delta_e00_map(b, a);
    REQUIRE(ab.values.size() == 20);
    for (std::size_t i = 0; i < ab.values.size(); ++i) {
      CHECK(ab.values[i] >= 0.0);
      CHECK(std::abs(ab.values[i] - ba.values[i]) <= 1e-9);
    }
  }
}

TEST_CASE("norm reduction of the difference map") {
  const RgbImage img = uniform_image(3, 3, 0.3, 0.6, 0.2);
  CHECK(delta_e00_norm(img, img) == 0.0);

  // Single pixel: the norm is the per-pixel value.
  const RgbImage p = uniform_image(1, 1, 0.5, 0.25, 0.75);
  const RgbImage q = uniform_image(1, 1, 0.52, 0.25, 0.70);
  const double d = delta_e00_map(p, q).values[0];
  CHECK(delta_e00_norm(p, q) == doctest::Approx(d).epsilon(1e-12));

  // 2x2 with uniform per-pixel difference d: sqrt(4 d^2) = 2d.
  const RgbImage p4 = uniform_image(2, 2, 0.5, 0.25, 0.75);
  const RgbImage q4 = uniform_image(2, 2, 0.52, 0.25, 0.70);
  CHECK(delta_e00_norm(p4, q4) == doctest::Approx(2.0 * d).epsilon(1e-12));
  CHECK(delta_e00_mean(p4, q4) == doctest::Approx(d).epsilon(1e-12));
}

TEST_CASE("lightness stays within [0, 100]") {
  Rng rng(5);
  for (int i = 0; i < 10000; ++i) {
    const Lab lab = srgb_to_lab(rng.uniform(), rng.uniform(), rng.uniform());
    CHECK_MESSAGE(lab.L >= 0.0, i);
    CHECK_MESSAGE(lab.L <= 100.0 + 1e-9, i);
  }
}

TEST_CASE("analytic gradient of the norm matches central differences") {
  Rng rng(2024);
  const double h = 1e-4;
  int checked = 0;
  while (checked < 100) {
    const RgbImage b = random_image(3, 3, rng);
    RgbImage a = b;
    // Keep every pixel away from the non-smooth zero-difference point and from the box edges.
    for (double& v : a.data()) v = std::clamp(v + rng.uniform(-0.1, 0.1), 0.0, 1.0);
    bool ok = true;
    for (double v : delta_e00_map(a, b).values) ok = ok && v > 0.1;
    for (double v : a.data()) ok = ok && v > 2 * h && v < 1.0 - 2 * h;
    if (!ok) continue;
    ++checked;
    const DeltaE00Gradient g = delta_e00_norm_gradient(a, b);
    CHECK(g.norm == doctest::Approx(delta_e00_norm(a, b)).epsilon(1e-12));
    std::vector<double> fd(a.size());
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      RgbImage plus = a, minus = a;
      plus.data()[i] += h;
      minus.data()[i] -= h;
      fd[i] = (delta_e00_norm(plus, b) - delta_e00_norm(minus, b)) / (2 * h);
      num += (g.grad[i] - fd[i]) * (g.grad[i] - fd[i]);
      den += fd[i] * fd[i];
    }
    CHECK(std::sqrt(num / den) < 1e-2);
  }
}

TEST_CASE("gradient vanishes at identical images and is finite") {
  Rng rng(3);
  const RgbImage a = random_image(4, 4, rng);
  const DeltaE00Gradient g = delta_e00_norm_gradient(a, a);
  CHECK(g.norm == 0.0);
  for (double v : g.grad) CHECK(v == 0.0);

  // One changed pixel: finite everywhere, zero on the untouched pixels.
  RgbImage b = a;
  b.at(1, 2, 0) = std::min(1.0, b.at(1, 2, 0) + 0.05);
  const DeltaE00Gradient g2 = delta_e00_norm_gradient(b, a);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) {
      for (int c = 0; c < 3; ++c) {
        const double v = g2.grad[(static_cast<std::size_t>(y) * 4 + x) * 3 + c];
        CHECK(std::isfinite(v));
        if (y != 1 || x != 2) CHECK(v == 0.0);
      }
    }
  }
}
