#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "impart/image.hpp"
#include "impart/nn/tensor.hpp"
#include "impart/rng.hpp"

namespace impart {

enum class Split { train, test };

std::string to_string(Split split);
Split parse_split(const std::string& text);

struct Sample {
  std::shared_ptr<const RgbImage> image;
  int label = 0;
};

// Labelled image collection. Images are immutable and shared, so derived
// datasets (e.g. the poisoned mixture) reuse untouched rows without copying.
class LabeledDataset {
 public:
  LabeledDataset() = default;
  LabeledDataset(int num_classes, Split split);

  void add(RgbImage image, int label);
  void add(std::shared_ptr<const RgbImage> image, int label);

  int num_classes() const { return num_classes_; }
  Split split() const { return split_; }
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  const Sample& operator[](std::size_t i) const { return items_[i]; }
  const std::vector<Sample>& items() const { return items_; }

  int height() const;
  int width() const;

  // Throws std::invalid_argument when labels or dimensions are inconsistent.
  void validate() const;

  // Content hash over 8-bit pixels and labels.
  std::uint64_t fingerprint() const;

  std::vector<int> labels() const;
  std::vector<std::size_t> class_counts() const;

  // Deterministic prefix/subset helpers.
  LabeledDataset subset(const std::vector<std::size_t>& indices) const;

 private:
  int num_classes_ = 0;
  Split split_ = Split::train;
  std::vector<Sample> items_;
};

// NCHW float batch of the given images.
nn::Tensor to_tensor(const std::vector<const RgbImage*>& images);
nn::Tensor to_tensor(const RgbImage& image);

// Random crop with zero padding `pad` followed by a horizontal flip with
// probability 1/2.
RgbImage augment_crop_flip(const RgbImage& image, int pad, Rng& rng);

// Per-channel mean and standard deviation over all pixels.
void channel_statistics(const LabeledDataset& data, std::vector<float>& mean,
                        std::vector<float>& stddev);

// ---- on-disk layout: root/<split>/<class_id>/<name>.png + root/<split>/manifest.tsv

void write_png(const std::filesystem::path& path, const RgbImage& image);
RgbImage read_png(const std::filesystem::path& path);

void save_dataset(const LabeledDataset& data, const std::filesystem::path& root);
LabeledDataset load_dataset(const std::filesystem::path& root, Split split, int num_classes);

std::filesystem::path manifest_path(const std::filesystem::path& root, Split split);

}  // namespace impart
