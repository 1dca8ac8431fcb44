#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "impart/image.hpp"
#include "impart/image_quality.hpp"
#include "impart/label_mapping.hpp"
#include "impart/nn/network.hpp"

namespace impart {

struct TriggerConfig {
  double gamma = 10.0;
  int max_iters = 200;
  double step_cls = 0.03;
  double step_color = 0.005;
  // Maximum admissible mean CIEDE2000; disabled when empty.
  std::optional<double> quality_gate_e00;
  std::uint64_t seed = 0;
  // Judge and return candidates at 8-bit storage precision, so the success flag
  // holds for the image that is written to disk.
  bool quantized_output = true;

  void validate() const;
};

// Step size at iteration `it`: cosine decay from `initial` to initial/10 over max_iters.
double forge_step_size(double initial, int it, int max_iters);

// Read-only view of a trained classifier. Implementations must be safe to
// call concurrently and deterministic (inference mode, frozen statistics).
class SurrogateHandle {
 public:
  enum class Grad { none, always, off_target };

  struct Evaluation {
    std::vector<float> logits;
    double ce = 0.0;
    // d CE(logits, target) / d image, laid out like RgbImage::data(); empty unless requested.
    std::vector<double> grad;
  };

  virtual ~SurrogateHandle() = default;
  virtual int num_classes() const = 0;
  virtual Evaluation evaluate(const RgbImage& image, int target, Grad grad) const = 0;

  int predict(const RgbImage& image) const;
};

// Surrogate backed by a network; input normalization lives inside the network
// so gradients are with respect to image-space intensities.
class NetworkSurrogate final : public SurrogateHandle {
 public:
  explicit NetworkSurrogate(std::shared_ptr<const nn::Network> net);

  int num_classes() const override { return net_->num_classes(); }
  Evaluation evaluate(const RgbImage& image, int target, Grad grad) const override;
  const nn::Network& network() const { return *net_; }

 private:
  std::shared_ptr<const nn::Network> net_;
};

struct LossTerms {
  double ce = 0.0;
  double l2 = 0.0;
  double e00_norm = 0.0;
};

struct TriggerResult {
  int target = 0;
  // poisoned_image - x, HWC.
  std::vector<double> delta;
  RgbImage poisoned_image;
  bool success = false;
  int iters_used = 0;
  int classification_steps = 0;
  int color_steps = 0;
  bool numerical_failure = false;
  bool gate_rejected = false;
  LossTerms final_loss_terms;
  QualityReport quality;
};

// Alternating optimization: starting from delta = 0, every iteration checks the
// surrogate prediction on clamp(x + delta). Off target it steps on
// CE(g(x + delta), target) + gamma * ||delta||_2; on target it steps on
// ||dE00(x + delta, x)||_2. Steps follow the l2-normalized gradient, followed
// by projection onto [0, 1]. Returns the on-target iterate with the smallest
// mean CIEDE2000, or the final iterate when none hit the target. With
// quantized_output, an iterate counts as on target only if its 8-bit rounding is.
TriggerResult forge_trigger(const SurrogateHandle& surrogate, const RgbImage& x, int target,
                            const TriggerConfig& cfg);

struct PoisonManifestRow {
  std::size_t index = 0;
  int orig_label = 0;
  int target_label = 0;
  bool success = false;
  int iters_used = 0;
  // Target equals the true label (all-to-one only); success is trivially satisfiable.
  bool trivial = false;
  // Non-finite gradient or other per-sample failure; the sample is kept unmodified.
  bool failed = false;
  std::string failure;
  QualityReport quality;
};

struct ForgeInput {
  const RgbImage* image = nullptr;
  int label = 0;
  std::size_t source_index = 0;
};

struct ForgeBatch {
  std::vector<TriggerResult> results;
  std::vector<PoisonManifestRow> manifest;
};

using ForgeProgress = std::function<void(std::size_t done, std::size_t total)>;

// Forges every sample towards map.apply(label). Order-preserving and
// independent of `workers`; per-sample failures become flagged rows.
ForgeBatch forge_batch(const SurrogateHandle& surrogate, const std::vector<ForgeInput>& samples,
                       const LabelMap& map, const TriggerConfig& cfg, int workers = 1,
                       const ForgeProgress& progress = {});

}  // namespace impart
