#pragma once

#include <cstdint>
#include <string>

#include "impart/dataset.hpp"

namespace impart {

// Procedural stand-in for a small natural-image benchmark: ten shape classes
// (disk, ring, square, triangle, plus, bar, cross, checker, dumbbell, frame)
// rendered with random colours, pose and scale over textured, noisy
// backgrounds with clutter.
struct DeskDataSpec {
  int num_classes = 10;
  int size = 32;
  double pixel_noise = 0.02;
  double clutter_probability = 0.6;
  // Per-class oriented grating texture of this peak amplitude (scaled by U(0.5, 1.5)
  // per image); an image carries its own class texture with probability
  // texture_consistency and a uniformly drawn other class texture otherwise.
  double texture_strength = 0.0;
  double texture_consistency = 0.6;
};

inline constexpr int kDeskMaxClasses = 10;

const char* desk_class_name(int label);

// Balanced (label = index mod num_classes); deterministic in (seed, split).
// Images are 8-bit exact, so saving and reloading is lossless.
LabeledDataset make_desk_dataset(std::size_t count, Split split, std::uint64_t seed,
                                 const DeskDataSpec& spec = {});

}  // namespace impart
