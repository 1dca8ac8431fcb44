#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "impart/dataset.hpp"
#include "impart/desk_data.hpp"
#include "impart/rng.hpp"

using namespace impart;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("impart_test_dataset_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("8-bit round trip moves a channel by at most 1/255") {
  Rng rng(1);
  RgbImage img(5, 7);
  for (double& v : img.data()) v = rng.uniform();
  const RgbImage q = img.quantized();
  for (std::size_t i = 0; i < img.size(); ++i) {
    CHECK(std::abs(q.data()[i] - img.data()[i]) <= 1.0 / 255.0 + 1e-15);
  }
  CHECK(q.quantized() == q);
  const auto bytes = q.to_8bit();
  CHECK(RgbImage::from_8bit(5, 7, bytes) == q);
}

TEST_CASE("PNG write/read is lossless for 8-bit images") {
  const fs::path dir = scratch("png");
  fs::create_directories(dir);
  Rng rng(2);
  RgbImage img(9, 4);
  for (double& v : img.data()) v = rng.uniform();
  img = img.quantized();
  write_png(dir / "a.png", img);
  CHECK(read_png(dir / "a.png") == img);
  CHECK_THROWS(read_png(dir / "missing.png"));
  fs::remove_all(dir);
}

TEST_CASE("desk dataset is balanced, deterministic and split-dependent") {
  const LabeledDataset a = make_desk_dataset(40, Split::train, 3);
  const LabeledDataset b = make_desk_dataset(40, Split::train, 3);
  const LabeledDataset t = make_desk_dataset(40, Split::test, 3);
  const LabeledDataset c = make_desk_dataset(40, Split::train, 4);
  CHECK(a.size() == 40);
  CHECK(a.num_classes() == 10);
  CHECK(a.height() == 32);
  CHECK(a.width() == 32);
  for (std::size_t n : a.class_counts()) CHECK(n == 4);
  CHECK(a.fingerprint() == b.fingerprint());
  CHECK(a.fingerprint() != t.fingerprint());
  CHECK(a.fingerprint() != c.fingerprint());
  CHECK_NOTHROW(a.validate());
  for (const Sample& s : a.items()) CHECK(*s.image == s.image->quantized());
  CHECK_THROWS(make_desk_dataset(4, Split::train, 1, DeskDataSpec{11}));
}

TEST_CASE("save and load reproduce the dataset") {
  const fs::path root = scratch("saveload");
  const LabeledDataset a = make_desk_dataset(30, Split::train, 5);
  const LabeledDataset t = make_desk_dataset(10, Split::test, 5);
  save_dataset(a, root);
  save_dataset(t, root);
  CHECK(fs::exists(manifest_path(root, Split::train)));
  const LabeledDataset back = load_dataset(root, Split::train, 10);
  CHECK(back.fingerprint() == a.fingerprint());
  CHECK(back.labels() == a.labels());
  CHECK(load_dataset(root, Split::test, 10).fingerprint() == t.fingerprint());
  // Inferred class count from the labels present.
  CHECK(load_dataset(root, Split::train, 0).num_classes() == 10);
  CHECK_THROWS(load_dataset(root / "nowhere", Split::train, 10));
  fs::remove_all(root);
}

TEST_CASE("manifest rows must reference consistent labels") {
  const fs::path root = scratch("badlabel");
  save_dataset(make_desk_dataset(4, Split::train, 6, DeskDataSpec{4}), root);
  CHECK_THROWS(load_dataset(root, Split::train, 2));
  fs::remove_all(root);
}

TEST_CASE("subset keeps order and shares images") {
  const LabeledDataset a = make_desk_dataset(20, Split::train, 7);
  const LabeledDataset s = a.subset({3, 9, 14});
  REQUIRE(s.size() == 3);
  CHECK(s[0].image == a[3].image);
  CHECK(s[2].label == a[14].label);
  CHECK_THROWS(a.subset({20}));
}

TEST_CASE("crop and flip augmentation keeps shape and values") {
  const LabeledDataset a = make_desk_dataset(1, Split::train, 8);
  Rng rng(9);
  const RgbImage out = augment_crop_flip(*a[0].image, 4, rng);
  CHECK(out.same_shape(*a[0].image));
  for (double v : out.data()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  Rng r0(10);
  CHECK(augment_crop_flip(*a[0].image, 0, r0).same_shape(*a[0].image));
}

TEST_CASE("channel statistics of a constant dataset") {
  LabeledDataset d(2, Split::train);
  d.add(RgbImage(4, 4, 0.25), 0);
  d.add(RgbImage(4, 4, 0.75), 1);
  std::vector<float> mean, sd;
  channel_statistics(d, mean, sd);
  REQUIRE(mean.size() == 3);
  for (int c = 0; c < 3; ++c) {
    CHECK(mean[c] == doctest::Approx(0.5));
    CHECK(sd[c] == doctest::Approx(0.25));
  }
}
