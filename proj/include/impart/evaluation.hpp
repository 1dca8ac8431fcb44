#pragma once

#include <optional>
#include <string>
#include <vector>

#include "impart/dataset.hpp"
#include "impart/image_quality.hpp"
#include "impart/label_mapping.hpp"
#include "impart/nn/network.hpp"
#include "impart/trigger_forge.hpp"

namespace impart {

struct AttackCounts {
  std::size_t total = 0;
  std::size_t hits = 0;
  // Items whose target differs from the true label.
  std::size_t nontrivial_total = 0;
  std::size_t nontrivial_hits = 0;
};

// Counts is_attack_success over (true label, prediction) pairs.
AttackCounts count_attack_success(const LabelMap& map, const std::vector<int>& y_true,
                                  const std::vector<int>& y_pred);

// Percentages in [0, 100].
struct EvalReport {
  double ba = 0.0;
  double asr = 0.0;
  // All-to-one only: ASR over items whose true label is not the target.
  std::optional<double> asr_excluding_trivial;
  std::optional<double> acc_clean_reference;
  std::size_t num_clean = 0;
  std::size_t num_poisoned = 0;
  // Mean forge quality of the poisoned test items against their clean originals.
  QualityReport quality;
  std::string config_hash;

  // Throws std::logic_error if a field violates its bounds.
  void validate() const;
};

// BA on the clean test split and ASR over the poisoned test items (labels hold
// the ground truth, targets come from the map).
EvalReport evaluate_attack(const nn::Network& victim, const LabeledDataset& clean_test,
                           const LabeledDataset& poisoned_test,
                           const std::vector<PoisonManifestRow>& manifest, const LabelMap& map,
                           std::optional<double> acc_clean_reference = std::nullopt);

}  // namespace impart
