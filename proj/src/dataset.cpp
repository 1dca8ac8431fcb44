#include "impart/dataset.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace impart {

std::string to_string(Split split) { return split == Split::train ? "train" : "test"; }

Split parse_split(const std::string& text) {
  if (text == "train") return Split::train;
  if (text == "test") return Split::test;
  throw std::invalid_argument("unknown split '" + text + "'");
}

LabeledDataset::LabeledDataset(int num_classes, Split split)
    : num_classes_(num_classes), split_(split) {
  if (num_classes <= 0) throw std::invalid_argument("LabeledDataset: num_classes must be positive");
}

void LabeledDataset::add(RgbImage image, int label) {
  add(std::make_shared<const RgbImage>(std::move(image)), label);
}

void LabeledDataset::add(std::shared_ptr<const RgbImage> image, int label) {
  if (!image) throw std::invalid_argument("LabeledDataset::add: null image");
  if (label < 0 || label >= num_classes_) {
    throw std::invalid_argument("LabeledDataset::add: label " + std::to_string(label) +
                                " outside [0, " + std::to_string(num_classes_) + ")");
  }
  if (!items_.empty() && !items_.front().image->same_shape(*image)) {
    throw std::invalid_argument("LabeledDataset::add: image dimensions differ from dataset");
  }
  items_.push_back({std::move(image), label});
}

int LabeledDataset::height() const { return items_.empty() ? 0 : items_.front().image->height(); }
int LabeledDataset::width() const { return items_.empty() ? 0 : items_.front().image->width(); }

void LabeledDataset::validate() const {
  for (std::size_t i = 0; i < items_.size(); ++i) {
    const auto& s = items_[i];
    if (s.label < 0 || s.label >= num_classes_) {
      throw std::invalid_argument("LabeledDataset: item " + std::to_string(i) +
                                  " has label outside the class set");
    }
    if (!s.image->same_shape(*items_.front().image)) {
      throw std::invalid_argument("LabeledDataset: item " + std::to_string(i) +
                                  " has mismatched dimensions");
    }
  }
}

std::uint64_t LabeledDataset::fingerprint() const {
  std::uint64_t h = mix64(static_cast<std::uint64_t>(num_classes_) ^ (items_.size() << 8));
  for (const auto& s : items_) {
    const auto bytes = s.image->to_8bit();
    std::uint64_t acc = 1469598103934665603ULL;
    for (std::uint8_t b : bytes) acc = (acc ^ b) * 1099511628211ULL;
    h = mix64(h ^ acc ^ static_cast<std::uint64_t>(s.label));
  }
  return h;
}

std::vector<int> LabeledDataset::labels() const {
  std::vector<int> out;
  out.reserve(items_.size());
  for (const auto& s : items_) out.push_back(s.label);
  return out;
}

std::vector<std::size_t> LabeledDataset::class_counts() const {
  std::vector<std::size_t> counts(num_classes_, 0);
  for (const auto& s : items_) ++counts[s.label];
  return counts;
}

LabeledDataset LabeledDataset::subset(const std::vector<std::size_t>& indices) const {
  LabeledDataset out(num_classes_, split_);
  for (std::size_t i : indices) {
    if (i >= items_.size()) throw std::out_of_range("LabeledDataset::subset: index out of range");
    out.items_.push_back(items_[i]);
  }
  return out;
}

nn::Tensor to_tensor(const std::vector<const RgbImage*>& images) {
  if (images.empty()) throw std::invalid_argument("to_tensor: empty batch");
  const int h = images.front()->height();
  const int w = images.front()->width();
  nn::Tensor t({static_cast<int>(images.size()), 3, h, w});
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (std::size_t n = 0; n < images.size(); ++n) {
    if (images[n]->height() != h || images[n]->width() != w) {
      throw std::invalid_argument("to_tensor: images differ in shape");
    }
    const auto src = images[n]->data();
    auto dst = t.sample(static_cast<int>(n));
    for (std::size_t p = 0; p < plane; ++p) {
      for (int c = 0; c < 3; ++c) dst[c * plane + p] = static_cast<float>(src[3 * p + c]);
    }
  }
  return t;
}

nn::Tensor to_tensor(const RgbImage& image) { return to_tensor(std::vector<const RgbImage*>{&image}); }

RgbImage augment_crop_flip(const RgbImage& image, int pad, Rng& rng) {
  const int h = image.height();
  const int w = image.width();
  const int oy = static_cast<int>(rng.index(2 * pad + 1)) - pad;
  const int ox = static_cast<int>(rng.index(2 * pad + 1)) - pad;
  const bool flip = rng.uniform() < 0.5;
  RgbImage out(h, w, 0.0);
  for (int y = 0; y < h; ++y) {
    const int sy = y + oy;
    if (sy < 0 || sy >= h) continue;
    for (int x = 0; x < w; ++x) {
      const int sx = (flip ? w - 1 - x : x) + ox;
      if (sx < 0 || sx >= w) continue;
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = image.at(sy, sx, c);
    }
  }
  return out;
}

void channel_statistics(const LabeledDataset& data, std::vector<float>& mean,
                        std::vector<float>& stddev) {
  double sum[3] = {0, 0, 0};
  double sq[3] = {0, 0, 0};
  std::size_t count = 0;
  for (const auto& s : data.items()) {
    const auto px = s.image->data();
    for (std::size_t i = 0; i < px.size(); i += 3) {
      for (int c = 0; c < 3; ++c) {
        sum[c] += px[i + c];
        sq[c] += px[i + c] * px[i + c];
      }
    }
    count += s.image->num_pixels();
  }
  mean.assign(3, 0.0f);
  stddev.assign(3, 1.0f);
  if (count == 0) return;
  for (int c = 0; c < 3; ++c) {
    const double m = sum[c] / count;
    const double var = std::max(sq[c] / count - m * m, 1e-12);
    mean[c] = static_cast<float>(m);
    stddev[c] = static_cast<float>(std::sqrt(var));
  }
}

void write_png(const std::filesystem::path& path, const RgbImage& image) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width());
  img.height = static_cast<png_uint_32>(image.height());
  img.format = PNG_FORMAT_RGB;
  const auto bytes = image.to_8bit();
  if (!png_image_write_to_file(&img, path.string().c_str(), 0, bytes.data(), 0, nullptr)) {
    throw std::runtime_error("write_png: " + path.string() + ": " + img.message);
  }
}

RgbImage read_png(const std::filesystem::path& path) {
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.string().c_str())) {
    throw std::runtime_error("read_png: " + path.string() + ": " + img.message);
  }
  img.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> bytes(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, bytes.data(), 0, nullptr)) {
    png_image_free(&img);
    throw std::runtime_error("read_png: " + path.string() + ": " + img.message);
  }
  return RgbImage::from_8bit(static_cast<int>(img.height), static_cast<int>(img.width), bytes);
}

std::filesystem::path manifest_path(const std::filesystem::path& root, Split split) {
  return root / to_string(split) / "manifest.tsv";
}

void save_dataset(const LabeledDataset& data, const std::filesystem::path& root) {
  const std::string split = to_string(data.split());
  std::filesystem::create_directories(root / split);
  std::ofstream manifest(manifest_path(root, data.split()));
  if (!manifest) throw std::runtime_error("save_dataset: cannot write manifest under " + root.string());
  manifest << "index\trelative_path\tlabel\n";
  char name[32];
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::snprintf(name, sizeof(name), "%06zu.png", i);
    const std::filesystem::path rel =
        std::filesystem::path(split) / std::to_string(data[i].label) / name;
    write_png(root / rel, *data[i].image);
    manifest << i << '\t' << rel.generic_string() << '\t' << data[i].label << '\n';
  }
}

LabeledDataset load_dataset(const std::filesystem::path& root, Split split, int num_classes) {
  const auto mpath = manifest_path(root, split);
  std::ifstream in(mpath);
  if (!in) throw std::runtime_error("load_dataset: missing manifest " + mpath.string());
  struct Row {
    std::size_t index;
    std::string rel;
    int label;
  };
  std::vector<Row> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("index\t", 0) == 0) continue;
    std::istringstream ls(line);
    Row r;
    if (!(ls >> r.index >> r.rel >> r.label)) {
      throw std::runtime_error("load_dataset: malformed manifest line '" + line + "'");
    }
    rows.push_back(r);
  }
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.index < b.index; });
  if (num_classes <= 0) {
    for (const auto& r : rows) num_classes = std::max(num_classes, r.label + 1);
  }
  LabeledDataset out(num_classes, split);
  for (const auto& r : rows) out.add(read_png(root / r.rel), r.label);
  return out;
}

}  // namespace impart
