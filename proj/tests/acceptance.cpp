// Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero
// if any criterion fails. Pipeline stages run through the library at desk scale:
// 10 classes, 32x32, 10,000 train / 2,000 test images, default experiment config.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <memory>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "ciede2000_pairs.hpp"
#include "impart/checkpoint.hpp"
#include "impart/color_science.hpp"
#include "impart/defense_bench.hpp"
#include "impart/desk_data.hpp"
#include "impart/evaluation.hpp"
#include "impart/experiment.hpp"
#include "impart/image_quality.hpp"
#include "impart/label_mapping.hpp"
#include "impart/poison_pipeline.hpp"
#include "impart/rng.hpp"
#include "impart/training.hpp"

namespace fs = std::filesystem;
using namespace impart;

namespace {

constexpr std::size_t kTrainSize = 10000;
constexpr std::size_t kTestSize = 2000;
constexpr int kSpectralSeeds = 5;

class Suite {
 public:
  void record(const std::string& name, bool pass, const std::string& detail) {
    std::printf("%s  %s: %s\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    std::fflush(stdout);
    failures_ += pass ? 0 : 1;
    ++total_;
  }
  int failures() const { return failures_; }
  int total() const { return total_; }

 private:
  int failures_ = 0;
  int total_ = 0;
};

class Clock {
 public:
  void log(const std::string& what) const {
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    std::fprintf(stderr, "[%7.1fs] %s\n", s, what.c_str());
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

RgbImage random_image(int h, int w, Rng& rng) {
  RgbImage img(h, w);
  for (double& v : img.data()) v = rng.uniform();
  return img;
}

std::vector<std::size_t> evenly_spaced(std::size_t n, std::size_t count) {
  count = std::min(count, n);
  std::vector<std::size_t> idx(count);
  for (std::size_t i = 0; i < count; ++i) idx[i] = i * n / count;
  return idx;
}

// ---- metric oracles

void check_ciede2000(Suite& suite) {
  double worst = 0.0;
  for (const auto& p : kCiede2000Pairs) {
    worst = std::max(worst, std::abs(ciede2000(p.first, p.second) - p.expected));
    worst = std::max(worst, std::abs(ciede2000(p.second, p.first) - p.expected));
  }
  suite.record("CIEDE2000 conformance", worst < 1e-4,
               std::to_string(std::size(kCiede2000Pairs)) + " pairs, max |error| " + fmt(worst, 3) + " (tol 1e-4)");
}

void check_gradient(Suite& suite) {
  Rng rng(2024);
  const double h = 1e-4;
  int checked = 0;
  double worst = 0.0;
  while (checked < 100) {
    const RgbImage b = random_image(4, 4, rng);
    RgbImage a = b;
    for (double& v : a.data()) v = std::clamp(v + rng.uniform(-0.1, 0.1), 0.0, 1.0);
    bool ok = true;
    for (double v : delta_e00_map(a, b).values) ok = ok && v > 0.1;
    for (double v : a.data()) ok = ok && v > 2 * h && v < 1.0 - 2 * h;
    if (!ok) continue;
    ++checked;
    const DeltaE00Gradient g = delta_e00_norm_gradient(a, b);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      RgbImage plus = a, minus = a;
      plus.data()[i] += h;
      minus.data()[i] -= h;
      const double fd = (delta_e00_norm(plus, b) - delta_e00_norm(minus, b)) / (2 * h);
      num += (g.grad[i] - fd) * (g.grad[i] - fd);
      den += fd * fd;
    }
    worst = std::max(worst, std::sqrt(num / den));
  }
  suite.record("gradient check", worst < 1e-2,
               "100 random 4x4 pairs, max relative error " + fmt(worst, 3) + " (tol 1e-2)");
}

void check_metric_identities(Suite& suite) {
  std::vector<std::string> failed;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) failed.push_back(what);
  };
  Rng rng(5);
  const RgbImage x = random_image(32, 32, rng);
  const QualityReport q = measure_quality(x, x);
  expect(q.mean_ciede2000 == 0.0 && q.norm_ciede2000 == 0.0, "identical dE00");
  expect(std::abs(q.ssim - 1.0) < 1e-12, "identical SSIM");
  expect(q.l2 == 0.0 && q.linf == 0.0, "identical lp");
  expect(q.psnr_db == kPsnrCapDb && q.psnr_capped, "identical PSNR cap");

  const Lab w = srgb_to_lab(1.0, 1.0, 1.0), k = srgb_to_lab(0.0, 0.0, 0.0);
  expect(std::abs(w.L - 100.0) < 1e-9 && std::abs(w.a) < 1e-3 && std::abs(w.b) < 1e-3, "white point");
  expect(k.L == 0.0 && k.a == 0.0 && k.b == 0.0, "black point");

  RgbImage a(32, 32, 0.5), b = a;
  b.at(7, 9, 1) += 1.0 / 255.0;
  const double mse = (1.0 / 255.0) * (1.0 / 255.0) / 3072.0;
  expect(std::abs(psnr(a, b) - 10.0 * std::log10(1.0 / mse)) < 1e-9, "PSNR single step");

  const RgbImage zero(16, 16, 0.0), one(16, 16, 1.0);
  const double c1 = 0.01 * 0.01;
  expect(std::abs(ssim(zero, one) - c1 / (1.0 + c1)) < 1e-6, "SSIM black/white");

  RgbImage p1(1, 1, 0.2), p2(1, 1, 0.2);
  p2.at(0, 0, 1) = 0.7;
  const LpDistances d = lp_distances(p1, p2);
  expect(std::abs(d.l2 - 0.5) < 1e-12 && std::abs(d.linf - 0.5) < 1e-12, "lp single channel");

  // 2x2 images with uniform per-pixel difference d give norm 2d.
  const RgbImage u(2, 2, 0.3), v(2, 2, 0.35);
  const double per_pixel = delta_e00_map(u, v).values[0];
  expect(std::abs(delta_e00_norm(u, v) - 2.0 * per_pixel) < 1e-9, "dE00 norm 2x2");
  expect(delta_e00_norm(x, x) == 0.0, "dE00 norm identical");
  const auto ab = delta_e00_map(x, random_image(32, 32, rng));
  expect(std::all_of(ab.values.begin(), ab.values.end(), [](double e) { return e >= 0.0; }), "dE00 nonnegative");

  std::string detail = failed.empty() ? "identical-pair values and hand-derived PSNR/SSIM/lp/norm cases hold"
                                      : "failed:";
  for (const auto& f : failed) detail += " [" + f + "]";
  suite.record("metric suite identities", failed.empty(), detail);
}

void check_label_laws(Suite& suite) {
  std::string bad;
  for (int n = 2; n <= 100 && bad.empty(); ++n) {
    const LabelMap m = LabelMap::all_to_all(n);
    std::set<int> image;
    for (int y = 0; y < n; ++y) {
      image.insert(m.apply(y));
      if (m.apply(y) == y) bad = "fixed point at |C|=" + std::to_string(n);
      int z = y;
      for (int k = 0; k < n; ++k) z = m.apply(z);
      if (z != y) bad = "composition at |C|=" + std::to_string(n);
    }
    if (static_cast<int>(image.size()) != n) bad = "not bijective at |C|=" + std::to_string(n);
  }
  suite.record("label-map laws", bad.empty(),
               bad.empty() ? "bijective, fixed-point free, |C|-fold identity for |C| in 2..100" : bad);
}

// ---- desk pipeline

struct Desk {
  ExperimentConfig cfg;
  LabeledDataset train;
  LabeledDataset test;
  std::vector<std::size_t> test_subset;
  fs::path workdir;
  bool reuse = false;
  Clock clock;
};

// Trains, or loads a checkpoint saved by an earlier run when reuse is enabled.
ModelCheckpoint train_or_load(Desk& desk, const std::string& name, const LabeledDataset& data,
                              const TrainConfig& tc) {
  const fs::path path = desk.workdir / (name + ".ckpt");
  if (desk.reuse && fs::exists(path)) {
    desk.clock.log("loaded " + name);
    return load_checkpoint(path);
  }
  desk.clock.log("training " + name);
  ModelCheckpoint ck = train_classifier(data, tc, &desk.test);
  fs::remove(path);
  save_checkpoint(ck, path);
  desk.clock.log(name + ": train " + fmt(ck.metadata.train_accuracy) + " test " +
                 fmt(ck.metadata.test_accuracy.value_or(-1)));
  return ck;
}

struct Attack {
  LabelMap map = LabelMap::all_to_all(2);
  PoisonArtifact poison;
  PoisonedTestSet poisoned_test;
};

Attack forge_attack(Desk& desk, const NetworkSurrogate& surrogate, const LabelMap& map) {
  Attack a;
  a.map = map;
  const PoisonPlan plan = select_poison_subset(desk.train, desk.cfg.rho, desk.cfg.poison_seed(), map);
  a.poison = generate_poison(desk.train, plan, surrogate, desk.cfg.trigger_config());
  std::size_t ok = 0;
  for (const auto& r : a.poison.manifest) ok += r.success;
  desk.clock.log(to_string(map.mode()) + ": forged " + std::to_string(a.poison.manifest.size()) + ", on target " +
                 std::to_string(ok));
  a.poisoned_test = poison_test_set(desk.test.subset(desk.test_subset), surrogate, map, desk.cfg.trigger_config());
  desk.clock.log(to_string(map.mode()) + ": poisoned test set forged");
  return a;
}

std::string report_text(const EvalReport& r) {
  std::string s = "ASR " + fmt(r.asr) + "%, BA " + fmt(r.ba) + "%";
  if (r.asr_excluding_trivial) s += ", ASR excl. trivial " + fmt(*r.asr_excluding_trivial) + "%";
  if (r.acc_clean_reference) s += ", clean ACC " + fmt(*r.acc_clean_reference) + "%";
  s += ", PSNR " + fmt(r.quality.psnr_db) + " dB, mean dE00 " + fmt(r.quality.mean_ciede2000);
  return s;
}

bool same_quality(const QualityReport& a, const QualityReport& b) {
  return a.mean_ciede2000 == b.mean_ciede2000 && a.norm_ciede2000 == b.norm_ciede2000 && a.ssim == b.ssim &&
         a.psnr_db == b.psnr_db && a.psnr_capped == b.psnr_capped && a.l2 == b.l2 && a.linf == b.linf;
}

bool same_rows(const std::vector<PoisonManifestRow>& a, const std::vector<PoisonManifestRow>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto &x = a[i], &y = b[i];
    if (x.index != y.index || x.orig_label != y.orig_label || x.target_label != y.target_label ||
        x.success != y.success || x.iters_used != y.iters_used || x.trivial != y.trivial || x.failed != y.failed ||
        !same_quality(x.quality, y.quality)) {
      return false;
    }
  }
  return true;
}

bool same_images(const LabeledDataset& a, const LabeledDataset& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].label != b[i].label || !(*a[i].image == *b[i].image)) return false;
  }
  return true;
}

bool same_report(const EvalReport& a, const EvalReport& b) {
  return a.ba == b.ba && a.asr == b.asr && a.asr_excluding_trivial == b.asr_excluding_trivial &&
         a.num_clean == b.num_clean && a.num_poisoned == b.num_poisoned && same_quality(a.quality, b.quality);
}

double mean_delta_l2(const std::vector<TriggerResult>& results) {
  double s = 0.0;
  for (const auto& r : results) s += r.quality.l2;
  return s / static_cast<double>(results.size());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"impart acceptance suite"};
  fs::path workdir = "acceptance_work";
  bool reuse = false;
  app.add_option("--workdir", workdir, "scratch directory for checkpoints");
  app.add_flag("--reuse", reuse, "load checkpoints left by a previous run instead of retraining");
  CLI11_PARSE(app, argc, argv);

  Suite suite;
  check_ciede2000(suite);
  check_gradient(suite);
  check_metric_identities(suite);
  check_label_laws(suite);

  Desk desk;
  desk.workdir = workdir;
  desk.reuse = reuse;
  fs::create_directories(workdir);
  desk.train = make_desk_dataset(kTrainSize, Split::train, desk.cfg.seed);
  desk.test = make_desk_dataset(kTestSize, Split::test, desk.cfg.seed);
  desk.test_subset = evenly_spaced(desk.test.size(), static_cast<std::size_t>(desk.cfg.test_poison_count));
  const int classes = desk.train.num_classes();

  ModelCheckpoint sck = train_or_load(desk, "surrogate", desk.train, desk.cfg.surrogate_train());
  const NetworkSurrogate surrogate(std::make_shared<const nn::Network>(std::move(sck.network)));
  const ModelCheckpoint clean = train_or_load(desk, "clean_victim", desk.train, desk.cfg.victim_train());
  const double acc = accuracy(clean.network, desk.test);

  // All-to-one.
  {
    const Attack a = forge_attack(desk, surrogate, LabelMap::all_to_one(classes, desk.cfg.target));
    const ModelCheckpoint v = train_or_load(desk, "victim_all2one", a.poison.data, desk.cfg.victim_train());
    const EvalReport r = evaluate_attack(v.network, desk.test, a.poisoned_test.data, a.poisoned_test.manifest,
                                         a.map, acc);
    suite.record("end-to-end all-to-one", r.asr >= 90.0 && std::abs(r.ba - acc) <= 3.0,
                 report_text(r) + " (need ASR >= 90, |BA - ACC| <= 3)");

    // Determinism of poison generation and evaluation, then of training.
    desk.clock.log("re-running poison generation");
    const Attack again = forge_attack(desk, surrogate, a.map);
    const bool poison_same = same_images(a.poison.data, again.poison.data) &&
                             same_rows(a.poison.manifest, again.poison.manifest) &&
                             same_images(a.poisoned_test.data, again.poisoned_test.data) &&
                             same_rows(a.poisoned_test.manifest, again.poisoned_test.manifest);
    const EvalReport r2 = evaluate_attack(v.network, desk.test, again.poisoned_test.data,
                                          again.poisoned_test.manifest, a.map, acc);
    const bool eval_same = same_report(r, r2);
    desk.clock.log("re-training clean victim");
    const ModelCheckpoint rerun = train_classifier(desk.train, desk.cfg.victim_train(), &desk.test);
    const double acc2 = accuracy(rerun.network, desk.test);
    suite.record("determinism", poison_same && eval_same && std::abs(acc - acc2) <= 0.5,
                 std::string("poison generation ") + (poison_same ? "bitwise identical" : "DIFFERS") +
                     ", evaluation " + (eval_same ? "bitwise identical" : "DIFFERS") + ", clean victim accuracy " +
                     fmt(acc) + " vs " + fmt(acc2) + " (tol 0.5)");
  }

  // All-to-all and the experiments that share its poisoned set.
  const Attack a = forge_attack(desk, surrogate, LabelMap::all_to_all(classes));
  const ModelCheckpoint v = train_or_load(desk, "victim_all2all", a.poison.data, desk.cfg.victim_train());
  const EvalReport r =
      evaluate_attack(v.network, desk.test, a.poisoned_test.data, a.poisoned_test.manifest, a.map, acc);
  const EvalReport control =
      evaluate_attack(clean.network, desk.test, a.poisoned_test.data, a.poisoned_test.manifest, a.map, acc);
  suite.record("end-to-end all-to-all", r.asr >= 60.0 && r.asr >= 10.0 * control.asr,
               report_text(r) + "; clean-victim control ASR " + fmt(control.asr) + "% (need ASR >= 60 and >= 10x control)");

  {
    std::vector<double> rhos{0.001, 0.01, desk.cfg.rho};
    std::vector<EvalReport> reports;
    for (double rho : rhos) {
      if (rho == desk.cfg.rho) {
        reports.push_back(r);
        continue;
      }
      const PoisonPlan plan = select_poison_subset(desk.train, rho, desk.cfg.poison_seed(), a.map);
      std::vector<TriggerResult> results;
      for (std::size_t i : plan.selected_indices) {
        const auto& sel = a.poison.plan.selected_indices;
        const auto it = std::lower_bound(sel.begin(), sel.end(), i);
        results.push_back(a.poison.results.at(static_cast<std::size_t>(it - sel.begin())));
      }
      const LabeledDataset mixed = build_poisoned_dataset(desk.train, plan, results);
      const ModelCheckpoint vr = train_or_load(desk, "victim_rho_" + fmt(rho), mixed, desk.cfg.victim_train());
      reports.push_back(
          evaluate_attack(vr.network, desk.test, a.poisoned_test.data, a.poisoned_test.manifest, a.map, acc));
    }
    double lo = reports[0].ba, hi = reports[0].ba;
    std::string detail;
    for (std::size_t i = 0; i < rhos.size(); ++i) {
      lo = std::min(lo, reports[i].ba);
      hi = std::max(hi, reports[i].ba);
      detail += "rho " + fmt(rhos[i]) + ": ASR " + fmt(reports[i].asr) + " BA " + fmt(reports[i].ba) + "; ";
    }
    const bool order = reports[0].asr < reports[1].asr && reports[1].asr <= reports[2].asr;
    suite.record("rho-sweep direction", order && hi - lo < 3.0,
                 detail + "BA spread " + fmt(hi - lo) + " (need strict then weak ASR increase, spread < 3)");
  }

  {
    const auto idx = evenly_spaced(desk.train.size(), static_cast<std::size_t>(desk.cfg.sweep.gamma_samples));
    std::vector<double> l2, ps;
    std::string detail;
    for (double g : std::vector<double>{0.0, 10.0, 30.0, 50.0, 100.0}) {
      TriggerConfig tc = desk.cfg.trigger_config();
      tc.gamma = g;
      const PoisonArtifact art =
          generate_poison(desk.train, PoisonPlan{0.0, idx, a.map, desk.cfg.poison_seed()}, surrogate, tc);
      std::vector<QualityReport> q;
      for (const auto& row : art.manifest) q.push_back(row.quality);
      l2.push_back(mean_delta_l2(art.results));
      ps.push_back(average_quality(q).psnr_db);
      detail += "gamma " + fmt(g) + ": l2 " + fmt(l2.back()) + " PSNR " + fmt(ps.back()) + "; ";
    }
    desk.clock.log("gamma sweep done");
    bool mono = true;
    for (std::size_t i = 1; i < l2.size(); ++i) mono = mono && l2[i] <= l2[i - 1] && ps[i] >= ps[i - 1];
    suite.record("gamma-sweep direction", mono,
                 detail + "over " + std::to_string(idx.size()) + " items (need l2 non-increasing, PSNR non-decreasing)");
  }

  {
    const std::set<std::size_t> used(desk.test_subset.begin(), desk.test_subset.end());
    const auto n_in = static_cast<std::size_t>(desk.cfg.strip.num_inputs);
    std::vector<RgbImage> benign, poisoned;
    std::vector<std::size_t> overlay_idx;
    for (std::size_t i = 0; i < desk.test.size(); ++i) {
      if (!used.count(i) && benign.size() < n_in) {
        benign.push_back(*desk.test[i].image);
      } else {
        overlay_idx.push_back(i);
      }
    }
    for (std::size_t i = 0; i < std::min(n_in, a.poisoned_test.data.size()); ++i) {
      poisoned.push_back(*a.poisoned_test.data[i].image);
    }
    const LabeledDataset held_out = desk.test.subset(overlay_idx);
    StripConfig sc;
    sc.num_overlays = desk.cfg.strip.num_overlays;
    sc.blend_alpha = desk.cfg.strip.blend_alpha;
    sc.entropy_threshold = desk.cfg.strip.entropy_threshold;
    sc.held_out = &held_out;
    sc.seed = desk.cfg.defense_seed();
    const StripSweep s = strip_sweep(network_probabilities(v.network), benign, poisoned, sc);
    desk.clock.log("STRIP done");
    suite.record("STRIP resistance", s.min_poisoned_entropy > sc.entropy_threshold && s.histograms.overlap > 0.5,
                 "min poisoned entropy " + fmt(s.min_poisoned_entropy) + " (threshold " + fmt(sc.entropy_threshold) +
                     "), min benign " + fmt(s.min_benign_entropy) + ", histogram overlap " +
                     fmt(s.histograms.overlap) + " (need > 0.5), " + std::to_string(benign.size()) + "+" +
                     std::to_string(poisoned.size()) + " inputs");
  }

  {
    SpectralConfig sc;
    sc.removal_fraction = desk.cfg.spectral_removal_fraction;
    const auto membership = poison_membership(a.poison.manifest, a.poison.data.size());
    const auto labels = a.poison.data.labels();
    std::vector<double> recalls;
    std::string detail = "recall per seed:";
    for (int k = 0; k < kSpectralSeeds; ++k) {
      std::optional<ModelCheckpoint> extra;
      const nn::Network* net = &v.network;
      if (k > 0) {
        TrainConfig tc = desk.cfg.victim_train();
        tc.seed = Rng::derive(tc.seed, static_cast<std::uint64_t>(k)).next();
        extra = train_or_load(desk, "victim_all2all_seed" + std::to_string(k), a.poison.data, tc);
        net = &extra->network;
      }
      const auto scores = spectral_scores(*net, a.poison.data, sc);
      const SpectralDetection d = spectral_detect(scores, labels, membership, classes, sc);
      recalls.push_back(d.recall.value_or(0.0));
      detail += " " + fmt(recalls.back());
    }
    const double n = static_cast<double>(recalls.size());
    const double mean = std::accumulate(recalls.begin(), recalls.end(), 0.0) / n;
    double var = 0.0;
    for (double x : recalls) var += (x - mean) * (x - mean);
    const double se = std::sqrt(var / (n - 1.0)) / std::sqrt(n);
    suite.record("Spectral Signatures resistance", std::abs(mean - sc.removal_fraction) <= 2.0 * se,
                 detail + "; mean " + fmt(mean) + ", SE " + fmt(se) + ", baseline " + fmt(sc.removal_fraction) +
                     " (need |mean - baseline| <= 2 SE)");
  }

  desk.clock.log("done");
  std::printf("%d/%d criteria passed\n", suite.total() - suite.failures(), suite.total());
  return suite.failures() == 0 ? 0 : 1;
}
