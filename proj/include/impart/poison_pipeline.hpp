#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "impart/dataset.hpp"
#include "impart/label_mapping.hpp"
#include "impart/trigger_forge.hpp"

namespace impart {

struct PoisonPlan {
  double rho = 0.0;
  // Sorted, unique indices into the training set (D_s).
  std::vector<std::size_t> selected_indices;
  LabelMap map = LabelMap::all_to_all(2);
  std::uint64_t seed = 0;
};

// round(rho * N) indices drawn uniformly without replacement. The draw is a
// prefix of one seeded permutation, so plans for increasing rho are nested.
PoisonPlan select_poison_subset(const LabeledDataset& dataset, double rho, std::uint64_t seed,
                                const LabelMap& map);

// D = D_p u D_r: selected rows replaced by (poisoned image, map(y)); all other
// rows share the original images. Order and size are preserved.
LabeledDataset build_poisoned_dataset(const LabeledDataset& dataset, const PoisonPlan& plan,
                                      const std::vector<TriggerResult>& results);

struct PoisonOptions {
  int workers = 1;
  // Store poisoned images at 8-bit precision; quality and success are re-measured
  // on the stored image so the manifest describes exactly what is on disk.
  bool quantize = true;
  ForgeProgress progress;
};

struct PoisonArtifact {
  LabeledDataset data;
  PoisonPlan plan;
  // One row per selected index, in plan order.
  std::vector<PoisonManifestRow> manifest;
  std::vector<TriggerResult> results;
};

PoisonArtifact generate_poison(const LabeledDataset& dataset, const PoisonPlan& plan,
                               const SurrogateHandle& surrogate, const TriggerConfig& cfg,
                               const PoisonOptions& options = {});

// Every test item poisoned; labels keep the ground truth and manifest rows carry
// the target label used for ASR.
struct PoisonedTestSet {
  LabeledDataset data;
  std::vector<PoisonManifestRow> manifest;
  std::vector<TriggerResult> results;
};

PoisonedTestSet poison_test_set(const LabeledDataset& test, const SurrogateHandle& surrogate,
                                const LabelMap& map, const TriggerConfig& cfg,
                                const PoisonOptions& options = {});

// Rounds a forged result to 8-bit storage and refreshes delta, quality and the
// success flag (re-checked against the surrogate) for the stored image.
void quantize_result(TriggerResult& result, const RgbImage& original,
                     const SurrogateHandle& surrogate, const TriggerConfig& cfg);

// poison_manifest.tsv: index, orig_label, target_label, success, iters_used,
// mean_e00, psnr_db, ssim, l2, linf, then norm_e00, psnr_capped, trivial, failed.
void write_poison_manifest(const std::filesystem::path& path,
                           const std::vector<PoisonManifestRow>& rows,
                           const std::vector<std::string>& header_comments = {});
std::vector<PoisonManifestRow> read_poison_manifest(const std::filesystem::path& path);

}  // namespace impart
