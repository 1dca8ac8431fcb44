#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <utility>
#include <vector>

#include "impart/color_science.hpp"
#include "impart/image_quality.hpp"
#include "impart/rng.hpp"

using namespace impart;

namespace {

RgbImage random_image(int h, int w, Rng& rng) {
  RgbImage img(h, w);
  for (double& v : img.data()) v = rng.uniform();
  return img;
}

}  // namespace

TEST_CASE("identical images give the identity values") {
  Rng rng(1);
  const RgbImage a = random_image(16, 16, rng);
  const QualityReport q = measure_quality(a, a);
  CHECK(q.mean_ciede2000 == 0.0);
  CHECK(q.norm_ciede2000 == 0.0);
  CHECK(q.ssim == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(q.psnr_db == kPsnrCapDb);
  CHECK(q.psnr_capped);
  CHECK(q.l2 == 0.0);
  CHECK(q.linf == 0.0);
}

TEST_CASE("PSNR of a single 1/255 step on 32x32x3") {
  RgbImage a(32, 32, 0.5);
  RgbImage b = a;
  b.at(7, 9, 1) += 1.0 / 255.0;
  const double mse = (1.0 / 255.0) * (1.0 / 255.0) / 3072.0;
  CHECK(psnr(a, b) == doctest::Approx(10.0 * std::log10(1.0 / mse)).epsilon(1e-12));
  CHECK(std::abs(psnr(a, b) - 83.0) < 0.1);
  CHECK_FALSE(measure_quality(a, b).psnr_capped);
}

TEST_CASE("SSIM closed forms") {
  const RgbImage zero(16, 16, 0.0), one(16, 16, 1.0);
  const double c1 = 0.01 * 0.01;
  CHECK(std::abs(ssim(zero, one) - c1 / (1.0 + c1)) < 1e-6);

  // Anti-correlated zero-mean patterns around mid grey.
  RgbImage p(16, 16), n(16, 16);
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) {
      const double s = ((x + y) % 2 == 0) ? 0.3 : -0.3;
      for (int c = 0; c < 3; ++c) {
        p.at(y, x, c) = 0.5 + s;
        n.at(y, x, c) = 0.5 - s;
      }
    }
  }
  CHECK(ssim(p, n) < 0.0);
}

TEST_CASE("lp distances") {
  RgbImage a(1, 1, 0.2), b(1, 1, 0.2);
  b.at(0, 0, 1) = 0.7;
  LpDistances d = lp_distances(a, b);
  CHECK(d.l2 == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(d.linf == doctest::Approx(0.5).epsilon(1e-12));

  const RgbImage c(2, 2, 0.3), e(2, 2, 0.4);
  d = lp_distances(c, e);
  CHECK(d.l2 == doctest::Approx(0.1 * std::sqrt(12.0)).epsilon(1e-9));
  CHECK(d.linf == doctest::Approx(0.1).epsilon(1e-9));

  d = lp_distances(c, c);
  CHECK(d.l2 == 0.0);
  CHECK(d.linf == 0.0);
}

TEST_CASE("shape mismatch is rejected") {
  CHECK_THROWS(psnr(RgbImage(2, 2), RgbImage(2, 3)));
  CHECK_THROWS(ssim(RgbImage(12, 12), RgbImage(12, 11)));
  CHECK_THROWS(lp_distances(RgbImage(1, 1), RgbImage(2, 1)));
}

TEST_CASE("batch aggregates are means of the records") {
  const RgbImage a(11, 11, 0.5);
  SUBCASE("one identical pair") {
    const BatchQuality bq = batch_quality({{a, a}});
    REQUIRE(bq.records.size() == 1);
    CHECK(bq.mean.psnr_db == kPsnrCapDb);
    CHECK(bq.mean.ssim == doctest::Approx(1.0));
    CHECK(bq.mean.l2 == 0.0);
  }
  SUBCASE("psnr 40 and 60 average to 50") {
    // Uniform offsets d with 10 log10(1/d^2) = 40 and 60.
    const RgbImage b(11, 11, 0.5 + 1e-2), c(11, 11, 0.5 + 1e-3);
    const BatchQuality bq = batch_quality({{a, b}, {a, c}});
    CHECK(bq.records[0].psnr_db == doctest::Approx(40.0).epsilon(1e-9));
    CHECK(bq.records[1].psnr_db == doctest::Approx(60.0).epsilon(1e-9));
    CHECK(bq.mean.psnr_db == doctest::Approx(50.0).epsilon(1e-9));
  }
  SUBCASE("random batch") {
    Rng rng(9);
    std::vector<std::pair<RgbImage, RgbImage>> pairs;
    for (int i = 0; i < 6; ++i) pairs.emplace_back(random_image(12, 12, rng), random_image(12, 12, rng));
    const BatchQuality bq = batch_quality(pairs);
    REQUIRE(bq.records.size() == pairs.size());
    double e = 0, s = 0, p = 0, l2 = 0, li = 0, ne = 0;
    for (const auto& r : bq.records) {
      e += r.mean_ciede2000;
      ne += r.norm_ciede2000;
      s += r.ssim;
      p += r.psnr_db;
      l2 += r.l2;
      li += r.linf;
    }
    const double n = static_cast<double>(pairs.size());
    CHECK(bq.mean.mean_ciede2000 == doctest::Approx(e / n));
    CHECK(bq.mean.norm_ciede2000 == doctest::Approx(ne / n));
    CHECK(bq.mean.ssim == doctest::Approx(s / n));
    CHECK(bq.mean.psnr_db == doctest::Approx(p / n));
    CHECK(bq.mean.l2 == doctest::Approx(l2 / n));
    CHECK(bq.mean.linf == doctest::Approx(li / n));
  }
}

TEST_CASE("PSNR decreases strictly when a perturbation is scaled up") {
  Rng rng(4);
  const RgbImage a(8, 8, 0.5);
  RgbImage delta(8, 8);
  for (double& v : delta.data()) v = rng.uniform(-0.01, 0.01);
  double prev = kPsnrCapDb + 1;
  for (double k : {1.0, 1.5, 2.0, 4.0, 10.0}) {
    RgbImage b = a;
    for (std::size_t i = 0; i < b.size(); ++i) b.data()[i] += k * delta.data()[i];
    const double p = psnr(a, b);
    CHECK(p < prev);
    prev = p;
  }
}

TEST_CASE("SSIM is bounded on random pairs") {
  Rng rng(77);
  for (int i = 0; i < 1000; ++i) {
    const RgbImage a = random_image(11, 11, rng), b = random_image(11, 11, rng);
    CHECK(std::abs(ssim(a, b)) <= 1.0);
  }
}

TEST_CASE("zero distance agrees across metrics") {
  Rng rng(8);
  for (int i = 0; i < 50; ++i) {
    const RgbImage a = random_image(11, 11, rng);
    RgbImage b = a;
    if (i % 2 == 1) b.at(i % 11, (i / 11) % 11, i % 3) = rng.uniform();
    const QualityReport q = measure_quality(a, b);
    const bool l2z = q.l2 <= 1e-9, linfz = q.linf <= 1e-9, ez = q.mean_ciede2000 <= 1e-9;
    CHECK(l2z == linfz);
    CHECK(linfz == ez);
  }
}
