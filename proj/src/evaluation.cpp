#include "impart/evaluation.hpp"

#include <cmath>
#include <stdexcept>

#include "impart/training.hpp"

namespace impart {
namespace {

double percent(std::size_t hits, std::size_t total) {
  return total == 0 ? 0.0 : 100.0 * static_cast<double>(hits) / static_cast<double>(total);
}

void check_percent(double v, const char* name) {
  if (!(v >= 0.0 && v <= 100.0)) throw std::logic_error(std::string("EvalReport: ") + name + " outside [0, 100]");
}

}  // namespace

AttackCounts count_attack_success(const LabelMap& map, const std::vector<int>& y_true,
                                  const std::vector<int>& y_pred) {
  if (y_true.size() != y_pred.size()) {
    throw std::invalid_argument("count_attack_success: label and prediction counts differ");
  }
  AttackCounts c;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const bool hit = map.is_attack_success(y_true[i], y_pred[i]);
    ++c.total;
    c.hits += hit;
    if (!map.is_trivial(y_true[i])) {
      ++c.nontrivial_total;
      c.nontrivial_hits += hit;
    }
  }
  return c;
}

void EvalReport::validate() const {
  check_percent(ba, "ba");
  check_percent(asr, "asr");
  if (asr_excluding_trivial) check_percent(*asr_excluding_trivial, "asr_excluding_trivial");
  if (acc_clean_reference) check_percent(*acc_clean_reference, "acc_clean_reference");
  if (num_poisoned == 0) throw std::logic_error("EvalReport: no poisoned items");
  if (quality.mean_ciede2000 < 0.0 || quality.l2 < 0.0 || quality.linf < 0.0 || quality.linf > 1.0 ||
      std::abs(quality.ssim) > 1.0) {
    throw std::logic_error("EvalReport: quality aggregate out of bounds");
  }
}

EvalReport evaluate_attack(const nn::Network& victim, const LabeledDataset& clean_test,
                           const LabeledDataset& poisoned_test,
                           const std::vector<PoisonManifestRow>& manifest, const LabelMap& map,
                           std::optional<double> acc_clean_reference) {
  if (poisoned_test.empty()) throw std::invalid_argument("evaluate_attack: empty poisoned test set");
  if (manifest.size() != poisoned_test.size()) {
    throw std::invalid_argument("evaluate_attack: manifest does not align with the poisoned test set");
  }
  EvalReport r;
  r.ba = accuracy(victim, clean_test);
  r.num_clean = clean_test.size();
  const auto pred = predict_labels(victim, poisoned_test);
  const auto counts = count_attack_success(map, poisoned_test.labels(), pred);
  r.asr = percent(counts.hits, counts.total);
  if (map.mode() == LabelMode::all_to_one) {
    r.asr_excluding_trivial = percent(counts.nontrivial_hits, counts.nontrivial_total);
  }
  r.acc_clean_reference = acc_clean_reference;
  r.num_poisoned = poisoned_test.size();
  std::vector<QualityReport> records;
  records.reserve(manifest.size());
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    if (manifest[i].target_label != map.apply(poisoned_test[i].label)) {
      throw std::invalid_argument("evaluate_attack: manifest target disagrees with the label map");
    }
    records.push_back(manifest[i].quality);
  }
  r.quality = average_quality(records);
  return r;
}

}  // namespace impart
