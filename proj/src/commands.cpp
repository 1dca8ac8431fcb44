#include "impart/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>

#include "impart/checkpoint.hpp"
#include "impart/defense_bench.hpp"
#include "impart/desk_data.hpp"
#include "impart/evaluation.hpp"
#include "impart/poison_pipeline.hpp"
#include "impart/reports.hpp"

namespace impart {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kArtifactFile = "artifact.json";
constexpr const char* kPoisonManifest = "poison_manifest.tsv";

struct Context {
  ExperimentConfig cfg;
  ConfigHashes hashes;
  ArtifactPaths paths;
};

Context prepare(const ExperimentConfig& cfg) {
  cfg.validate(true);
  return {cfg, config_hashes(cfg), ArtifactPaths{cfg.output_dir}};
}

void refuse_existing(const fs::path& p) {
  if (fs::exists(p)) {
    throw ValidationError(p.string() + " already exists; artifacts are immutable, choose a new --out");
  }
}

void require_file(const fs::path& p, const std::string& what) {
  if (!fs::exists(p)) throw ValidationError("missing " + what + ": " + p.string());
}

void check_scope(const std::string& found, const std::string& expected, const fs::path& artifact) {
  if (found != expected) {
    throw ValidationError("refusing " + artifact.string() + ": produced under scope hash " + found +
                          ", current config implies " + expected);
  }
}

json provenance(const Context& ctx, const std::string& scope_hash) {
  return {{"config_hash", ctx.hashes.full}, {"scope_hash", scope_hash}, {"config", ctx.cfg.to_json()}};
}

void dump_config(const fs::path& artifact, const Context& ctx, const std::string& scope_hash) {
  write_json(fs::path(artifact.string() + ".config.json"), provenance(ctx, scope_hash));
}

LabeledDataset load_split(const Context& ctx, Split split, int num_classes = 0) {
  require_file(manifest_path(ctx.cfg.dataset_root, split), to_string(split) + " manifest");
  return load_dataset(ctx.cfg.dataset_root, split, num_classes);
}

ModelCheckpoint load_model(const fs::path& path, const std::string& expected_scope, const std::string& what) {
  require_file(path, what);
  ModelCheckpoint ck = load_checkpoint(path);
  check_scope(ck.metadata.scope_hash, expected_scope, path);
  return ck;
}

std::vector<std::size_t> evenly_spaced(std::size_t n, int count) {
  const std::size_t m = count <= 0 ? n : std::min<std::size_t>(n, static_cast<std::size_t>(count));
  std::vector<std::size_t> idx(m);
  for (std::size_t i = 0; i < m; ++i) idx[i] = i * n / m;
  return idx;
}

ForgeProgress progress_logger(std::ostream& log, const std::string& what) {
  return [&log, what](std::size_t done, std::size_t total) {
    if (done % 100 == 0 || done == total) log << what << ": forged " << done << "/" << total << std::endl;
  };
}

EpochCallback epoch_logger(std::ostream& log, const std::string& what) {
  return [&log, what](const EpochLog& e) {
    log << what << " epoch " << e.epoch + 1 << " loss " << format_number(e.mean_loss) << " running_acc "
        << format_number(e.running_accuracy) << " lr " << format_number(e.last_lr) << std::endl;
  };
}

std::vector<std::string> manifest_comments(const Context& ctx, const std::string& scope) {
  return {"config_hash " + ctx.hashes.full, "scope_hash " + scope,
          "mean_e00 = per-pixel mean CIEDE2000 of the stored image against its clean source; "
          "norm_e00 = l2 norm of the CIEDE2000 map",
          "psnr_db capped at 100 (psnr_capped = 1); l2/linf over normalized intensities",
          "success = surrogate predicts target_label on the stored image; trivial = target equals orig_label; "
          "failed = forging aborted, source image kept"};
}

struct PoisonTestArtifact {
  LabeledDataset data;
  std::vector<PoisonManifestRow> manifest;
  json meta;
};

PoisonTestArtifact load_poison_test(const Context& ctx, int num_classes) {
  const fs::path dir = ctx.paths.poison_test_dir();
  require_file(dir / kArtifactFile, "poisoned test artifact (run generate-poison)");
  PoisonTestArtifact a;
  a.meta = read_json(dir / kArtifactFile);
  check_scope(a.meta.at("scope_hash").get<std::string>(), ctx.hashes.test_poison, dir);
  a.data = load_dataset(dir, Split::test, num_classes);
  require_file(dir / kPoisonManifest, "poisoned test manifest");
  a.manifest = read_poison_manifest(dir / kPoisonManifest);
  if (a.manifest.size() != a.data.size()) {
    throw ValidationError("poisoned test manifest does not align with " + dir.string());
  }
  return a;
}

double mean_l2(const std::vector<TriggerResult>& results) {
  double s = 0.0;
  for (const auto& r : results) s += r.quality.l2;
  return results.empty() ? 0.0 : s / static_cast<double>(results.size());
}

}  // namespace

void cmd_make_dataset(const fs::path& root, std::size_t train_size, std::size_t test_size,
                      std::uint64_t seed, std::ostream& log) {
  if (root.empty()) throw ValidationError("make-dataset: --out is required");
  if (train_size == 0 || test_size == 0) throw ValidationError("make-dataset: sizes must be positive");
  refuse_existing(manifest_path(root, Split::train));
  DirectoryLock lock(root);
  const LabeledDataset train = make_desk_dataset(train_size, Split::train, seed);
  const LabeledDataset test = make_desk_dataset(test_size, Split::test, seed);
  save_dataset(train, root);
  save_dataset(test, root);
  write_json(root / "dataset.json", {{"generator", "desk"},
                                     {"seed", seed},
                                     {"num_classes", train.num_classes()},
                                     {"train_size", train.size()},
                                     {"test_size", test.size()},
                                     {"train_fingerprint", train.fingerprint()},
                                     {"test_fingerprint", test.fingerprint()}});
  log << "wrote " << train.size() << " train and " << test.size() << " test images to " << root.string() << '\n';
}

void cmd_train_surrogate(const ExperimentConfig& config, std::ostream& log) {
  const Context ctx = prepare(config);
  DirectoryLock lock(ctx.paths.root);
  refuse_existing(ctx.paths.surrogate());
  const LabeledDataset train = load_split(ctx, Split::train);
  const LabeledDataset test = load_split(ctx, Split::test, train.num_classes());
  ModelCheckpoint ck = train_classifier(train, ctx.cfg.surrogate_train(), &test, epoch_logger(log, "surrogate"));
  ck.metadata.config_hash = ctx.hashes.full;
  ck.metadata.scope_hash = ctx.hashes.surrogate;
  ck.metadata.extra["role"] = "surrogate";
  save_checkpoint(ck, ctx.paths.surrogate());
  dump_config(ctx.paths.surrogate(), ctx, ctx.hashes.surrogate);
  log << "surrogate " << ck.network.model_id() << " train_acc " << format_number(ck.metadata.train_accuracy)
      << " test_acc " << format_number(ck.metadata.test_accuracy.value_or(NAN)) << " -> "
      << ctx.paths.surrogate().string() << '\n';
}

void cmd_generate_poison(const ExperimentConfig& config, std::ostream& log) {
  const Context ctx = prepare(config);
  DirectoryLock lock(ctx.paths.root);
  refuse_existing(ctx.paths.poison_dir());
  refuse_existing(ctx.paths.poison_test_dir());
  ModelCheckpoint sck = load_model(ctx.paths.surrogate(), ctx.hashes.surrogate, "surrogate checkpoint");
  const LabeledDataset train = load_split(ctx, Split::train);
  const LabeledDataset test = load_split(ctx, Split::test, train.num_classes());
  if (sck.metadata.dataset_fingerprint != train.fingerprint()) {
    throw ValidationError("surrogate checkpoint was trained on a different dataset than " +
                          ctx.cfg.dataset_root.string());
  }
  const LabelMap map = ctx.cfg.label_map(train.num_classes());
  const NetworkSurrogate surrogate(std::make_shared<const nn::Network>(std::move(sck.network)));
  const TriggerConfig tcfg = ctx.cfg.trigger_config();
  PoisonOptions opts;
  opts.workers = ctx.cfg.workers;

  const PoisonPlan plan = select_poison_subset(train, ctx.cfg.rho, ctx.cfg.poison_seed(), map);
  opts.progress = progress_logger(log, "train poison");
  const PoisonArtifact art = generate_poison(train, plan, surrogate, tcfg, opts);
  const fs::path pdir = ctx.paths.poison_dir();
  save_dataset(art.data, pdir);
  write_poison_manifest(pdir / kPoisonManifest, art.manifest, manifest_comments(ctx, ctx.hashes.poison));
  const auto successes = std::count_if(art.manifest.begin(), art.manifest.end(),
                                       [](const PoisonManifestRow& r) { return r.success; });
  json meta = provenance(ctx, ctx.hashes.poison);
  meta["kind"] = "poisoned_train";
  meta["rho"] = ctx.cfg.rho;
  meta["num_poisoned"] = art.manifest.size();
  meta["num_success"] = successes;
  meta["clean_fingerprint"] = train.fingerprint();
  meta["poisoned_fingerprint"] = art.data.fingerprint();
  meta["label_map"] = to_string(map.mode());
  write_json(pdir / kArtifactFile, meta);
  log << "poisoned " << art.manifest.size() << " of " << train.size() << " training items (" << successes
      << " surrogate successes) -> " << pdir.string() << '\n';

  const auto idx = evenly_spaced(test.size(), ctx.cfg.test_poison_count);
  const LabeledDataset subset = test.subset(idx);
  opts.progress = progress_logger(log, "test poison");
  const PoisonedTestSet pts = poison_test_set(subset, surrogate, map, tcfg, opts);
  const fs::path tdir = ctx.paths.poison_test_dir();
  save_dataset(pts.data, tdir);
  write_poison_manifest(tdir / kPoisonManifest, pts.manifest, manifest_comments(ctx, ctx.hashes.test_poison));
  json tmeta = provenance(ctx, ctx.hashes.test_poison);
  tmeta["kind"] = "poisoned_test";
  tmeta["source_indices"] = idx;
  tmeta["clean_test_fingerprint"] = test.fingerprint();
  write_json(tdir / kArtifactFile, tmeta);
  log << "poisoned " << pts.manifest.size() << " test items -> " << tdir.string() << '\n';
}

void cmd_train_victim(const ExperimentConfig& config, bool clean, std::ostream& log) {
  const Context ctx = prepare(config);
  DirectoryLock lock(ctx.paths.root);
  const fs::path out = clean ? ctx.paths.clean_victim() : ctx.paths.victim();
  refuse_existing(out);
  const LabeledDataset clean_train = load_split(ctx, Split::train);
  const LabeledDataset test = load_split(ctx, Split::test, clean_train.num_classes());
  LabeledDataset train;
  std::string scope = ctx.hashes.clean_victim;
  if (clean) {
    train = clean_train;
  } else {
    const fs::path pdir = ctx.paths.poison_dir();
    require_file(pdir / kArtifactFile, "poisoned training artifact (run generate-poison)");
    const json meta = read_json(pdir / kArtifactFile);
    check_scope(meta.at("scope_hash").get<std::string>(), ctx.hashes.poison, pdir);
    train = load_dataset(pdir, Split::train, clean_train.num_classes());
    if (train.fingerprint() != meta.at("poisoned_fingerprint").get<std::uint64_t>()) {
      throw ValidationError("poisoned dataset under " + pdir.string() + " was modified after generation");
    }
    scope = ctx.hashes.victim;
  }
  ModelCheckpoint ck = train_classifier(train, ctx.cfg.victim_train(), &test,
                                        epoch_logger(log, clean ? "clean victim" : "victim"));
  ck.metadata.config_hash = ctx.hashes.full;
  ck.metadata.scope_hash = scope;
  ck.metadata.extra["role"] = clean ? "clean_victim" : "victim";
  // Test accuracy is ACC for the clean victim and BA for the poisoned one.
  ck.metadata.extra[clean ? "acc" : "ba"] = ck.metadata.test_accuracy.value_or(NAN);
  save_checkpoint(ck, out);
  dump_config(out, ctx, scope);
  log << (clean ? "clean victim ACC " : "victim BA ") << format_number(ck.metadata.test_accuracy.value_or(NAN))
      << " train_acc " << format_number(ck.metadata.train_accuracy) << " -> " << out.string() << '\n';
}

void cmd_evaluate(const ExperimentConfig& config, bool clean_victim, std::ostream& log) {
  const Context ctx = prepare(config);
  DirectoryLock lock(ctx.paths.root);
  const fs::path vpath = clean_victim ? ctx.paths.clean_victim() : ctx.paths.victim();
  const ModelCheckpoint victim =
      load_model(vpath, clean_victim ? ctx.hashes.clean_victim : ctx.hashes.victim, "victim checkpoint");
  const LabeledDataset test = load_split(ctx, Split::test);
  const PoisonTestArtifact pts = load_poison_test(ctx, test.num_classes());
  const LabelMap map = ctx.cfg.label_map(test.num_classes());

  std::optional<double> acc_ref;
  if (fs::exists(ctx.paths.clean_victim())) {
    const ModelCheckpoint ref = load_model(ctx.paths.clean_victim(), ctx.hashes.clean_victim, "clean victim");
    acc_ref = ref.metadata.test_accuracy;
  }
  EvalReport report = evaluate_attack(victim.network, test, pts.data, pts.manifest, map, acc_ref);
  report.config_hash = ctx.hashes.full;
  report.validate();
  const std::string label = clean_victim ? "clean_victim" : "victim";
  const auto rpath = write_report(ctx.paths.reports(), "eval_report", eval_report_table(report, label));

  TsvTable quality;
  quality.comments = {"config_hash " + ctx.hashes.full,
                      "per-set means of the forge quality metrics (stored 8-bit images vs clean sources)",
                      "mean_e00 = per-pixel mean CIEDE2000; norm_e00 = l2 norm of the CIEDE2000 map"};
  quality.columns = {"set", "items", "success_rate", "mean_e00", "norm_e00", "ssim", "psnr_db", "l2", "linf"};
  auto add_quality = [&](const std::string& name, const std::vector<PoisonManifestRow>& rows) {
    if (rows.empty()) return;
    std::vector<QualityReport> q;
    double succ = 0;
    for (const auto& r : rows) {
      q.push_back(r.quality);
      succ += r.success;
    }
    const QualityReport m = average_quality(q);
    quality.add_row({name, std::to_string(rows.size()), format_number(100.0 * succ / rows.size()),
                     format_number(m.mean_ciede2000), format_number(m.norm_ciede2000), format_number(m.ssim),
                     format_number(m.psnr_db), format_number(m.l2), format_number(m.linf)});
  };
  const fs::path train_manifest = ctx.paths.poison_dir() / kPoisonManifest;
  if (fs::exists(train_manifest)) add_quality("poisoned_train", read_poison_manifest(train_manifest));
  add_quality("poisoned_test", pts.manifest);
  const auto qpath = write_report(ctx.paths.reports(), "quality_table", quality);

  const auto src = pts.meta.at("source_indices").get<std::vector<std::size_t>>();
  const auto pred = predict_labels(victim.network, pts.data);
  std::vector<GridPair> pairs;
  for (std::size_t k = 0; k < std::min<std::size_t>(8, pts.data.size()); ++k) {
    char caption[160];
    const auto& q = pts.manifest[k].quality;
    std::snprintf(caption, sizeof(caption), "dE00 %.2f  PSNR %.1f dB  SSIM %.3f\ny=%d target=%d pred=%d",
                  q.mean_ciede2000, q.psnr_db, q.ssim, pts.data[k].label, pts.manifest[k].target_label, pred[k]);
    pairs.push_back({test[src.at(k)].image.get(), pts.data[k].image.get(), caption});
  }
  const fs::path grid_png = versioned_path(ctx.paths.reports(), "image_grid_" + label, ".png");
  fs::path grid_svg = grid_png;
  grid_svg.replace_extension(".svg");
  write_image_grid(grid_png, grid_svg, pairs);

  log << label << ": BA " << format_number(report.ba) << " ASR " << format_number(report.asr);
  if (report.asr_excluding_trivial) log << " ASR(excl. trivial) " << format_number(*report.asr_excluding_trivial);
  if (report.acc_clean_reference) log << " ACC " << format_number(*report.acc_clean_reference);
  log << "\nreports: " << rpath.string() << ", " << qpath.string() << ", " << grid_svg.string() << '\n';
}

void cmd_defend(const ExperimentConfig& config, const std::string& defense, std::ostream& log) {
  if (defense != "strip" && defense != "spectral") {
    throw ValidationError("unknown defense '" + defense + "' (expected strip or spectral)");
  }
  const Context ctx = prepare(config);
  DirectoryLock lock(ctx.paths.root);
  const ModelCheckpoint victim = load_model(ctx.paths.victim(), ctx.hashes.victim, "victim checkpoint");
  const LabeledDataset test = load_split(ctx, Split::test);

  if (defense == "strip") {
    const PoisonTestArtifact pts = load_poison_test(ctx, test.num_classes());
    const auto src = pts.meta.at("source_indices").get<std::vector<std::size_t>>();
    const std::set<std::size_t> used(src.begin(), src.end());
    const std::size_t n_in = static_cast<std::size_t>(ctx.cfg.strip.num_inputs);
    std::vector<RgbImage> benign, poisoned;
    std::vector<std::size_t> benign_idx, overlay_idx;
    // Benign inputs are clean test items outside the poisoned subset; overlays come from the rest.
    for (std::size_t i = 0; i < test.size(); ++i) {
      if (!used.count(i) && benign.size() < n_in) {
        benign.push_back(*test[i].image);
        benign_idx.push_back(i);
      } else {
        overlay_idx.push_back(i);
      }
    }
    for (std::size_t i = 0; i < std::min(n_in, pts.data.size()); ++i) poisoned.push_back(*pts.data[i].image);
    if (benign.empty() || poisoned.empty() || overlay_idx.empty()) {
      throw ValidationError("strip: test split too small for the configured input counts");
    }
    const LabeledDataset held_out = test.subset(overlay_idx);
    StripConfig scfg;
    scfg.num_overlays = ctx.cfg.strip.num_overlays;
    scfg.blend_alpha = ctx.cfg.strip.blend_alpha;
    scfg.entropy_threshold = ctx.cfg.strip.entropy_threshold;
    scfg.held_out = &held_out;
    scfg.seed = ctx.cfg.defense_seed();
    const StripSweep sweep = strip_sweep(network_probabilities(victim.network), benign, poisoned, scfg);

    TsvTable t;
    t.comments = {"config_hash " + ctx.hashes.full,
                  "entropy_mean = Shannon entropy (nats) of the victim softmax averaged over " +
                      std::to_string(scfg.num_overlays) + " blends alpha*x + (1-alpha)*overlay, alpha " +
                      format_number(scfg.blend_alpha) + "; compared against the threshold",
                  "entropy_sum = the same entropies summed over overlays (unnormalized)",
                  "threshold " + format_number(scfg.entropy_threshold) + "; min_poisoned_entropy " +
                      format_number(sweep.min_poisoned_entropy) + "; min_benign_entropy " +
                      format_number(sweep.min_benign_entropy),
                  "histogram_overlap " + format_number(sweep.histograms.overlap) + " (intersection of " +
                      std::to_string(kStripHistogramBins) + "-bin normalized histograms of entropy_mean)",
                  "flag_rate benign " + format_number(sweep.benign_flag_rate) + " poisoned " +
                      format_number(sweep.poisoned_flag_rate)};
    t.columns = {"population", "index", "entropy_mean", "entropy_sum", "flagged"};
    for (std::size_t i = 0; i < sweep.benign.size(); ++i) {
      t.add_row({"benign", std::to_string(benign_idx[i]), format_number(sweep.benign[i].mean),
                 format_number(sweep.benign[i].sum), sweep.benign[i].mean < scfg.entropy_threshold ? "1" : "0"});
    }
    for (std::size_t i = 0; i < sweep.poisoned.size(); ++i) {
      t.add_row({"poisoned", std::to_string(i), format_number(sweep.poisoned[i].mean),
                 format_number(sweep.poisoned[i].sum),
                 sweep.poisoned[i].mean < scfg.entropy_threshold ? "1" : "0"});
    }
    const auto path = write_report(ctx.paths.reports(), "strip_report", t);
    const auto fig = versioned_path(ctx.paths.reports(), "strip_histogram", ".svg");
    write_histogram_svg(fig, "STRIP entropy", sweep.histograms, "benign inputs", "poisoned inputs",
                        scfg.entropy_threshold);
    log << "strip: min poisoned entropy " << format_number(sweep.min_poisoned_entropy) << " overlap "
        << format_number(sweep.histograms.overlap) << "\nreports: " << path.string() << ", " << fig.string() << '\n';
    return;
  }

  const fs::path pdir = ctx.paths.poison_dir();
  require_file(pdir / kArtifactFile, "poisoned training artifact (run generate-poison)");
  const json meta = read_json(pdir / kArtifactFile);
  check_scope(meta.at("scope_hash").get<std::string>(), ctx.hashes.poison, pdir);
  const LabeledDataset train = load_dataset(pdir, Split::train, test.num_classes());
  const auto manifest = read_poison_manifest(pdir / kPoisonManifest);
  SpectralConfig scfg;
  scfg.removal_fraction = ctx.cfg.spectral_removal_fraction;
  const auto scores = spectral_scores(victim.network, train, scfg);
  const auto poisoned = poison_membership(manifest, train.size());
  const auto labels = train.labels();
  const SpectralDetection det = spectral_detect(scores, labels, poisoned, train.num_classes(), scfg);

  std::vector<bool> flagged(train.size(), false);
  for (std::size_t i : det.flagged) flagged[i] = true;
  TsvTable t;
  t.comments = {"config_hash " + ctx.hashes.full,
                "score = squared projection of the centred penultimate representation onto the top right-singular "
                "vector of its class",
                "flagged = among the top removal_fraction " + format_number(scfg.removal_fraction) +
                    " scores of its (assigned) class",
                "precision " + format_number(det.precision) + "; recall " +
                    (det.recall ? format_number(*det.recall) : std::string("NA (no poisoned samples)")) +
                    "; poisoned " + std::to_string(det.num_poisoned) + "; flagged " +
                    std::to_string(det.flagged.size())};
  t.columns = {"index", "class", "score", "flagged", "is_poisoned"};
  for (std::size_t i = 0; i < train.size(); ++i) {
    t.add_row({std::to_string(i), std::to_string(labels[i]), format_number(scores[i]), flagged[i] ? "1" : "0",
               poisoned[i] ? "1" : "0"});
  }
  const auto path = write_report(ctx.paths.reports(), "spectral_report", t);
  log << "spectral: precision " << format_number(det.precision) << " recall "
      << (det.recall ? format_number(*det.recall) : std::string("NA")) << "\nreport: " << path.string() << '\n';
  if (det.num_poisoned > 0 && det.num_poisoned < train.size()) {
    std::vector<double> clean_scores, poison_scores;
    for (std::size_t i = 0; i < train.size(); ++i) (poisoned[i] ? poison_scores : clean_scores).push_back(scores[i]);
    const auto fig = versioned_path(ctx.paths.reports(), "spectral_histogram", ".svg");
    write_histogram_svg(fig, "Spectral signature scores", histogram_overlap(clean_scores, poison_scores),
                        "clean samples", "poisoned samples");
  }
}

void cmd_sweep(const ExperimentConfig& config, const std::string& kind, std::ostream& log) {
  if (kind != "rho" && kind != "gamma") throw ValidationError("unknown sweep '" + kind + "' (expected rho or gamma)");
  const Context ctx = prepare(config);
  DirectoryLock lock(ctx.paths.root);
  ModelCheckpoint sck = load_model(ctx.paths.surrogate(), ctx.hashes.surrogate, "surrogate checkpoint");
  const LabeledDataset train = load_split(ctx, Split::train);
  const LabeledDataset test = load_split(ctx, Split::test, train.num_classes());
  const LabelMap map = ctx.cfg.label_map(train.num_classes());
  const NetworkSurrogate surrogate(std::make_shared<const nn::Network>(std::move(sck.network)));
  PoisonOptions opts;
  opts.workers = ctx.cfg.workers;

  if (kind == "gamma") {
    const auto idx = evenly_spaced(train.size(), ctx.cfg.sweep.gamma_samples);
    TsvTable t;
    t.comments = {"config_hash " + ctx.hashes.full,
                  "per gamma: means over " + std::to_string(idx.size()) +
                      " training items forged towards the label-map target (stored 8-bit images)",
                  "l2 = ||delta||_2; success_rate in percent"};
    t.columns = {"gamma", "items", "success_rate", "mean_l2", "mean_psnr_db", "mean_e00", "mean_ssim"};
    PlotSeries l2{"mean ||delta||_2", {}, {}}, psnr{"mean PSNR (dB)", {}, {}};
    for (double g : ctx.cfg.sweep.gammas) {
      TriggerConfig tcfg = ctx.cfg.trigger_config();
      tcfg.gamma = g;
      PoisonPlan plan{0.0, idx, map, ctx.cfg.poison_seed()};
      opts.progress = progress_logger(log, "gamma " + format_number(g));
      const PoisonArtifact art = generate_poison(train, plan, surrogate, tcfg, opts);
      std::vector<QualityReport> q;
      double succ = 0;
      for (const auto& r : art.manifest) {
        q.push_back(r.quality);
        succ += r.success;
      }
      const QualityReport m = average_quality(q);
      t.add_row({format_number(g), std::to_string(idx.size()), format_number(100.0 * succ / idx.size()),
                 format_number(mean_l2(art.results)), format_number(m.psnr_db), format_number(m.mean_ciede2000),
                 format_number(m.ssim)});
      l2.x.push_back(g);
      l2.y.push_back(mean_l2(art.results));
      psnr.x.push_back(g);
      psnr.y.push_back(m.psnr_db);
    }
    const auto path = write_report(ctx.paths.reports(), "sweep_gamma", t);
    write_line_plot_svg(versioned_path(ctx.paths.reports(), "sweep_gamma_l2", ".svg"), "Perturbation size vs gamma",
                        "gamma", "mean ||delta||_2", {l2});
    write_line_plot_svg(versioned_path(ctx.paths.reports(), "sweep_gamma_psnr", ".svg"), "PSNR vs gamma", "gamma",
                        "PSNR (dB)", {psnr});
    log << "gamma sweep -> " << path.string() << '\n';
    return;
  }

  const PoisonTestArtifact pts = load_poison_test(ctx, test.num_classes());
  auto rhos = ctx.cfg.sweep.rhos;
  std::sort(rhos.begin(), rhos.end());
  // Plans share one permutation, so the largest plan's triggers cover every smaller ratio.
  const PoisonPlan full = select_poison_subset(train, rhos.back(), ctx.cfg.poison_seed(), map);
  opts.progress = progress_logger(log, "rho sweep poison");
  const PoisonArtifact art = generate_poison(train, full, surrogate, ctx.cfg.trigger_config(), opts);
  TsvTable t;
  t.comments = {"config_hash " + ctx.hashes.full, "one victim trained per rho; ba/asr in percent",
                "asr over the poisoned test artifact (" + std::to_string(pts.data.size()) + " items)"};
  t.columns = {"rho", "num_poisoned", "ba", "asr"};
  PlotSeries ba{"BA", {}, {}}, asr{"ASR", {}, {}};
  for (double rho : rhos) {
    const PoisonPlan plan = select_poison_subset(train, rho, ctx.cfg.poison_seed(), map);
    std::vector<TriggerResult> results;
    std::vector<PoisonManifestRow> rows;
    for (std::size_t i : plan.selected_indices) {
      const auto it = std::lower_bound(full.selected_indices.begin(), full.selected_indices.end(), i);
      const auto k = static_cast<std::size_t>(it - full.selected_indices.begin());
      results.push_back(art.results.at(k));
      rows.push_back(art.manifest.at(k));
    }
    const LabeledDataset mixed = build_poisoned_dataset(train, plan, results);
    const ModelCheckpoint v =
        train_classifier(mixed, ctx.cfg.victim_train(), nullptr, epoch_logger(log, "rho " + format_number(rho)));
    const EvalReport r = evaluate_attack(v.network, test, pts.data, pts.manifest, map);
    t.add_row({format_number(rho), std::to_string(plan.selected_indices.size()), format_number(r.ba),
               format_number(r.asr)});
    if (rho > 0.0) {
      ba.x.push_back(rho);
      ba.y.push_back(r.ba);
      asr.x.push_back(rho);
      asr.y.push_back(r.asr);
    }
    log << "rho " << format_number(rho) << ": BA " << format_number(r.ba) << " ASR " << format_number(r.asr) << '\n';
  }
  const auto path = write_report(ctx.paths.reports(), "sweep_rho", t);
  if (!ba.x.empty()) {
    write_line_plot_svg(versioned_path(ctx.paths.reports(), "sweep_rho", ".svg"), "BA and ASR vs poison ratio",
                        "poison ratio rho", "percent", {ba, asr}, true);
  }
  log << "rho sweep -> " << path.string() << '\n';
}

}  // namespace impart
