#include "impart/poison_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "impart/color_science.hpp"

namespace impart {
namespace {

constexpr const char* kManifestColumns[] = {
    "index",   "orig_label", "target_label", "success",  "iters_used",
    "mean_e00", "psnr_db",   "ssim",         "l2",       "linf",
    "norm_e00", "psnr_capped", "trivial",    "failed"};

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, '\t')) out.push_back(cell);
  return out;
}

void sync_row(PoisonManifestRow& row, const TriggerResult& res) {
  row.success = res.success;
  row.iters_used = res.iters_used;
  row.quality = res.quality;
}

}  // namespace

PoisonPlan select_poison_subset(const LabeledDataset& dataset, double rho, std::uint64_t seed,
                                const LabelMap& map) {
  if (!(rho >= 0.0 && rho <= 1.0)) {
    throw std::invalid_argument("select_poison_subset: rho must lie in [0, 1]");
  }
  if (map.num_classes() != dataset.num_classes()) {
    throw std::invalid_argument("select_poison_subset: label map class count differs from dataset");
  }
  const std::size_t n = dataset.size();
  const auto m = static_cast<std::size_t>(std::llround(rho * static_cast<double>(n)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = Rng::derive(seed, 0x504c414eULL);
  rng.shuffle(order);
  order.resize(m);
  std::sort(order.begin(), order.end());
  return {rho, std::move(order), map, seed};
}

LabeledDataset build_poisoned_dataset(const LabeledDataset& dataset, const PoisonPlan& plan,
                                      const std::vector<TriggerResult>& results) {
  if (results.size() != plan.selected_indices.size()) {
    throw std::invalid_argument("build_poisoned_dataset: " + std::to_string(results.size()) +
                                " results for " + std::to_string(plan.selected_indices.size()) +
                                " selected indices");
  }
  LabeledDataset out(dataset.num_classes(), dataset.split());
  std::size_t k = 0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (k < plan.selected_indices.size() && plan.selected_indices[k] == i) {
      const TriggerResult& r = results[k];
      if (!r.poisoned_image.same_shape(*dataset[i].image)) {
        throw std::invalid_argument("build_poisoned_dataset: result " + std::to_string(k) +
                                    " has mismatched dimensions");
      }
      const int target = plan.map.apply(dataset[i].label);
      if (r.target != target) {
        throw std::invalid_argument("build_poisoned_dataset: result " + std::to_string(k) +
                                    " was forged for a different target");
      }
      out.add(r.poisoned_image, target);
      ++k;
    } else {
      out.add(dataset[i].image, dataset[i].label);
    }
  }
  if (k != plan.selected_indices.size()) {
    throw std::invalid_argument("build_poisoned_dataset: plan indices are unsorted or out of range");
  }
  return out;
}

void quantize_result(TriggerResult& result, const RgbImage& original,
                     const SurrogateHandle& surrogate, const TriggerConfig& cfg) {
  result.poisoned_image = result.poisoned_image.quantized();
  const auto stored = result.poisoned_image.data();
  const auto base = original.data();
  result.delta.assign(stored.size(), 0.0);
  double l2 = 0.0;
  for (std::size_t i = 0; i < stored.size(); ++i) {
    result.delta[i] = stored[i] - base[i];
    l2 += result.delta[i] * result.delta[i];
  }
  const auto eval = surrogate.evaluate(result.poisoned_image, result.target, SurrogateHandle::Grad::none);
  result.final_loss_terms = {eval.ce, std::sqrt(l2), delta_e00_norm(result.poisoned_image, original)};
  result.quality = measure_quality(original, result.poisoned_image);
  if (result.success && nn::argmax(eval.logits) != result.target) result.success = false;
  if (result.success && cfg.quality_gate_e00 && result.quality.mean_ciede2000 > *cfg.quality_gate_e00) {
    result.success = false;
    result.gate_rejected = true;
  }
}

PoisonArtifact generate_poison(const LabeledDataset& dataset, const PoisonPlan& plan,
                               const SurrogateHandle& surrogate, const TriggerConfig& cfg,
                               const PoisonOptions& options) {
  PoisonArtifact out;
  out.plan = plan;
  if (!plan.selected_indices.empty()) {
    std::vector<ForgeInput> inputs;
    inputs.reserve(plan.selected_indices.size());
    for (std::size_t i : plan.selected_indices) {
      if (i >= dataset.size()) throw std::out_of_range("generate_poison: plan index out of range");
      inputs.push_back({dataset[i].image.get(), dataset[i].label, i});
    }
    ForgeBatch batch = forge_batch(surrogate, inputs, plan.map, cfg, options.workers, options.progress);
    if (options.quantize) {
      for (std::size_t k = 0; k < batch.results.size(); ++k) {
        if (batch.manifest[k].failed) continue;
        quantize_result(batch.results[k], *inputs[k].image, surrogate, cfg);
        sync_row(batch.manifest[k], batch.results[k]);
      }
    }
    out.manifest = std::move(batch.manifest);
    out.results = std::move(batch.results);
  }
  out.data = build_poisoned_dataset(dataset, plan, out.results);
  return out;
}

PoisonedTestSet poison_test_set(const LabeledDataset& test, const SurrogateHandle& surrogate,
                                const LabelMap& map, const TriggerConfig& cfg,
                                const PoisonOptions& options) {
  if (test.split() != Split::test) throw std::invalid_argument("poison_test_set: expected the test split");
  if (test.empty()) throw std::invalid_argument("poison_test_set: empty test set");
  std::vector<ForgeInput> inputs;
  inputs.reserve(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) inputs.push_back({test[i].image.get(), test[i].label, i});
  ForgeBatch batch = forge_batch(surrogate, inputs, map, cfg, options.workers, options.progress);
  PoisonedTestSet out;
  out.data = LabeledDataset(test.num_classes(), Split::test);
  for (std::size_t k = 0; k < batch.results.size(); ++k) {
    if (options.quantize && !batch.manifest[k].failed) {
      quantize_result(batch.results[k], *inputs[k].image, surrogate, cfg);
      sync_row(batch.manifest[k], batch.results[k]);
    }
    out.data.add(batch.results[k].poisoned_image, test[k].label);
  }
  out.manifest = std::move(batch.manifest);
  out.results = std::move(batch.results);
  return out;
}

void write_poison_manifest(const std::filesystem::path& path,
                           const std::vector<PoisonManifestRow>& rows,
                           const std::vector<std::string>& header_comments) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_poison_manifest: cannot open " + path.string());
  for (const auto& c : header_comments) out << "# " << c << '\n';
  for (std::size_t i = 0; i < std::size(kManifestColumns); ++i) {
    out << (i ? "\t" : "") << kManifestColumns[i];
  }
  out << '\n';
  out.precision(17);
  for (const auto& r : rows) {
    const auto& q = r.quality;
    out << r.index << '\t' << r.orig_label << '\t' << r.target_label << '\t' << int(r.success) << '\t'
        << r.iters_used << '\t' << q.mean_ciede2000 << '\t' << q.psnr_db << '\t' << q.ssim << '\t'
        << q.l2 << '\t' << q.linf << '\t' << q.norm_ciede2000 << '\t' << int(q.psnr_capped) << '\t'
        << int(r.trivial) << '\t' << int(r.failed) << '\n';
  }
}

std::vector<PoisonManifestRow> read_poison_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_poison_manifest: cannot open " + path.string());
  std::vector<PoisonManifestRow> rows;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto cells = split_tabs(line);
    if (!header_seen) {
      if (cells.size() != std::size(kManifestColumns) || cells[0] != "index") {
        throw std::runtime_error("read_poison_manifest: unexpected header in " + path.string());
      }
      header_seen = true;
      continue;
    }
    if (cells.size() != std::size(kManifestColumns)) {
      throw std::runtime_error("read_poison_manifest: malformed row '" + line + "'");
    }
    PoisonManifestRow r;
    r.index = std::stoull(cells[0]);
    r.orig_label = std::stoi(cells[1]);
    r.target_label = std::stoi(cells[2]);
    r.success = cells[3] == "1";
    r.iters_used = std::stoi(cells[4]);
    r.quality.mean_ciede2000 = std::stod(cells[5]);
    r.quality.psnr_db = std::stod(cells[6]);
    r.quality.ssim = std::stod(cells[7]);
    r.quality.l2 = std::stod(cells[8]);
    r.quality.linf = std::stod(cells[9]);
    r.quality.norm_ciede2000 = std::stod(cells[10]);
    r.quality.psnr_capped = cells[11] == "1";
    r.trivial = cells[12] == "1";
    r.failed = cells[13] == "1";
    rows.push_back(r);
  }
  if (!header_seen) throw std::runtime_error("read_poison_manifest: missing header in " + path.string());
  return rows;
}

}  // namespace impart
