#pragma once

#include <optional>
#include <string>

namespace impart {

enum class LabelMode { all_to_all, all_to_one };

std::string to_string(LabelMode mode);
// Accepts "all2all"/"all_to_all" and "all2one"/"all_to_one".
LabelMode parse_label_mode(const std::string& text);

// Target-label function: one-shift (y + 1) mod |C|, or a constant class.
class LabelMap {
 public:
  static LabelMap all_to_all(int num_classes);
  static LabelMap all_to_one(int num_classes, int fixed_target);

  LabelMode mode() const { return mode_; }
  int num_classes() const { return num_classes_; }
  std::optional<int> fixed_target() const { return fixed_target_; }

  // Throws std::out_of_range for y outside [0, num_classes).
  int apply(int y) const;

  bool is_attack_success(int y_true, int y_pred) const;

  // True when the target already equals the true label (only possible all-to-one).
  bool is_trivial(int y_true) const { return apply(y_true) == y_true; }

  friend bool operator==(const LabelMap&, const LabelMap&) = default;

 private:
  LabelMap(LabelMode mode, int num_classes, std::optional<int> fixed_target);
  void check_index(int y, const char* what) const;

  LabelMode mode_ = LabelMode::all_to_all;
  int num_classes_ = 0;
  std::optional<int> fixed_target_;
};

}  // namespace impart
