#include "impart/label_mapping.hpp"

#include <stdexcept>

namespace impart {

std::string to_string(LabelMode mode) {
  return mode == LabelMode::all_to_all ? "all2all" : "all2one";
}

LabelMode parse_label_mode(const std::string& text) {
  if (text == "all2all" || text == "all_to_all") return LabelMode::all_to_all;
  if (text == "all2one" || text == "all_to_one") return LabelMode::all_to_one;
  throw std::invalid_argument("unknown label mode '" + text + "' (expected all2all or all2one)");
}

LabelMap::LabelMap(LabelMode mode, int num_classes, std::optional<int> fixed_target)
    : mode_(mode), num_classes_(num_classes), fixed_target_(fixed_target) {
  if (num_classes <= 0) throw std::invalid_argument("LabelMap: num_classes must be positive");
}

LabelMap LabelMap::all_to_all(int num_classes) {
  return LabelMap(LabelMode::all_to_all, num_classes, std::nullopt);
}

LabelMap LabelMap::all_to_one(int num_classes, int fixed_target) {
  LabelMap m(LabelMode::all_to_one, num_classes, fixed_target);
  m.check_index(fixed_target, "LabelMap: fixed_target");
  return m;
}

void LabelMap::check_index(int y, const char* what) const {
  if (y < 0 || y >= num_classes_) {
    throw std::out_of_range(std::string(what) + " " + std::to_string(y) + " outside [0, " +
                            std::to_string(num_classes_) + ")");
  }
}

int LabelMap::apply(int y) const {
  check_index(y, "LabelMap::apply: label");
  if (mode_ == LabelMode::all_to_one) return *fixed_target_;
  return (y + 1) % num_classes_;
}

bool LabelMap::is_attack_success(int y_true, int y_pred) const {
  check_index(y_pred, "LabelMap::is_attack_success: prediction");
  return y_pred == apply(y_true);
}

}  // namespace impart
