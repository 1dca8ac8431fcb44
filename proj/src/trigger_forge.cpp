#include "impart/trigger_forge.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <thread>

#include "impart/color_science.hpp"
#include "impart/dataset.hpp"

namespace impart {
namespace {

double l2_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

bool all_finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

std::vector<double> difference(const RgbImage& a, const RgbImage& b) {
  std::vector<double> d(a.size());
  const auto pa = a.data();
  const auto pb = b.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = pa[i] - pb[i];
  return d;
}

void finish(TriggerResult& r, const SurrogateHandle& surrogate, const RgbImage& x,
            const TriggerConfig& cfg) {
  r.delta = difference(r.poisoned_image, x);
  const auto eval = surrogate.evaluate(r.poisoned_image, r.target, SurrogateHandle::Grad::none);
  r.final_loss_terms = {eval.ce, l2_norm(r.delta), delta_e00_norm(r.poisoned_image, x)};
  r.quality = measure_quality(x, r.poisoned_image);
  if (r.success && cfg.quality_gate_e00 && r.quality.mean_ciede2000 > *cfg.quality_gate_e00) {
    r.success = false;
    r.gate_rejected = true;
  }
}

}  // namespace

void TriggerConfig::validate() const {
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
    throw std::invalid_argument("TriggerConfig: gamma must be finite and nonnegative");
  }
  if (max_iters < 1) throw std::invalid_argument("TriggerConfig: max_iters must be >= 1");
  if (!(step_cls > 0.0) || !(step_color > 0.0)) {
    throw std::invalid_argument("TriggerConfig: step sizes must be positive");
  }
  if (quality_gate_e00 && !(*quality_gate_e00 >= 0.0)) {
    throw std::invalid_argument("TriggerConfig: quality_gate_e00 must be nonnegative");
  }
}

double forge_step_size(double initial, int it, int max_iters) {
  const double floor = 0.1 * initial;
  const double t = static_cast<double>(it) / static_cast<double>(max_iters);
  return floor + 0.5 * (initial - floor) * (1.0 + std::cos(std::numbers::pi * t));
}

int SurrogateHandle::predict(const RgbImage& image) const {
  const auto e = evaluate(image, 0, Grad::none);
  return nn::argmax(e.logits);
}

NetworkSurrogate::NetworkSurrogate(std::shared_ptr<const nn::Network> net) : net_(std::move(net)) {
  if (!net_) throw std::invalid_argument("NetworkSurrogate: null network");
}

SurrogateHandle::Evaluation NetworkSurrogate::evaluate(const RgbImage& image, int target,
                                                       Grad grad) const {
  if (target < 0 || target >= num_classes()) {
    throw std::out_of_range("NetworkSurrogate: target class out of range");
  }
  nn::Tape tape;
  const nn::Tensor logits = net_->forward(to_tensor(image), nn::Mode::eval, tape);
  const int labels[1] = {target};
  const nn::LossResult loss = nn::softmax_cross_entropy(logits, labels);
  Evaluation out;
  out.logits.assign(logits.data().begin(), logits.data().end());
  out.ce = loss.loss;
  const bool want_grad =
      grad == Grad::always || (grad == Grad::off_target && nn::argmax(out.logits) != target);
  if (want_grad) {
    nn::Tensor gx;
    net_->backward(tape, loss.grad_logits, &gx, {});
    const std::size_t plane = image.num_pixels();
    out.grad.resize(image.size());
    for (std::size_t p = 0; p < plane; ++p) {
      for (int c = 0; c < 3; ++c) out.grad[3 * p + c] = gx[c * plane + p];
    }
  }
  return out;
}

TriggerResult forge_trigger(const SurrogateHandle& surrogate, const RgbImage& x, int target,
                            const TriggerConfig& cfg) {
  cfg.validate();
  x.validate();
  if (target < 0 || target >= surrogate.num_classes()) {
    throw std::out_of_range("forge_trigger: target " + std::to_string(target) +
                            " outside the surrogate's classes");
  }

  TriggerResult r;
  r.target = target;
  RgbImage cur = x;
  std::optional<RgbImage> best;
  double best_mean = std::numeric_limits<double>::infinity();
  int cls_steps = 0;
  int color_steps = 0;

  for (int it = 0; it <= cfg.max_iters; ++it) {
    const bool last = it == cfg.max_iters;
    auto eval = surrogate.evaluate(cur, target, SurrogateHandle::Grad::off_target);
    const bool on_target = nn::argmax(eval.logits) == target;

    std::vector<double> g;
    double step = 0.0;
    if (on_target) {
      auto de = delta_e00_norm_gradient(cur, x);
      if (de.mean < best_mean) {
        std::optional<RgbImage> candidate;
        double mean = de.mean;
        if (!cfg.quantized_output) {
          candidate = cur;
        } else {
          RgbImage q = cur.quantized();
          mean = delta_e00_mean(q, x);
          if (mean < best_mean && surrogate.predict(q) == target) candidate = std::move(q);
        }
        if (candidate) {
          best_mean = mean;
          best = std::move(candidate);
          r.iters_used = it;
          r.classification_steps = cls_steps;
          r.color_steps = color_steps;
        }
      }
      if (last) break;
      g = std::move(de.grad);
      step = forge_step_size(cfg.step_color, it, cfg.max_iters);
    } else {
      if (last) break;
      g = std::move(eval.grad);
      if (cfg.gamma > 0.0) {
        const auto delta = difference(cur, x);
        const double n = l2_norm(delta);
        if (n > 0.0) {
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += cfg.gamma * delta[i] / n;
        }
      }
      step = forge_step_size(cfg.step_cls, it, cfg.max_iters);
    }

    if (!all_finite(g)) {
      r.numerical_failure = true;
      break;
    }
    const double gn = l2_norm(g);
    if (gn > 0.0) {
      auto px = cur.data();
      for (std::size_t i = 0; i < g.size(); ++i) px[i] -= step * g[i] / gn;
      cur.clamp();
    }
    ++(on_target ? color_steps : cls_steps);
  }

  if (r.numerical_failure) {
    r.poisoned_image = x;
    r.success = false;
    r.iters_used = cls_steps + color_steps;
  } else if (best) {
    r.poisoned_image = std::move(*best);
    r.success = true;
  } else {
    r.poisoned_image = cfg.quantized_output ? cur.quantized() : cur;
    r.success = false;
    r.iters_used = cfg.max_iters;
    r.classification_steps = cls_steps;
    r.color_steps = color_steps;
  }
  finish(r, surrogate, x, cfg);
  return r;
}

ForgeBatch forge_batch(const SurrogateHandle& surrogate, const std::vector<ForgeInput>& samples,
                       const LabelMap& map, const TriggerConfig& cfg, int workers,
                       const ForgeProgress& progress) {
  if (samples.empty()) throw std::invalid_argument("forge_batch: empty sample sequence");
  cfg.validate();
  if (map.num_classes() != surrogate.num_classes()) {
    throw std::invalid_argument("forge_batch: label map and surrogate disagree on the class count");
  }

  ForgeBatch out;
  out.results.resize(samples.size());
  out.manifest.resize(samples.size());
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::mutex progress_mutex;

  auto work = [&] {
    for (std::size_t i = next++; i < samples.size(); i = next++) {
      const ForgeInput& in = samples[i];
      PoisonManifestRow& row = out.manifest[i];
      TriggerResult& res = out.results[i];
      row.index = in.source_index;
      row.orig_label = in.label;
      try {
        if (in.image == nullptr) throw std::invalid_argument("null image");
        row.target_label = map.apply(in.label);
        row.trivial = map.is_trivial(in.label);
        res = forge_trigger(surrogate, *in.image, row.target_label, cfg);
        if (res.numerical_failure) {
          row.failed = true;
          row.failure = "non-finite gradient";
        }
      } catch (const std::exception& e) {
        row.failed = true;
        row.failure = e.what();
        res = TriggerResult{};
        res.target = row.target_label;
        if (in.image != nullptr) {
          res.poisoned_image = *in.image;
          res.poisoned_image.clamp();
          res.delta.assign(in.image->size(), 0.0);
        }
      }
      row.success = res.success;
      row.iters_used = res.iters_used;
      row.quality = res.quality;
      const std::size_t finished = ++done;
      if (progress) {
        std::lock_guard lock(progress_mutex);
        progress(finished, samples.size());
      }
    }
  };

  const int n_threads = std::max(1, std::min<int>(workers, static_cast<int>(samples.size())));
  if (n_threads == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(work);
  }
  return out;
}

}  // namespace impart
