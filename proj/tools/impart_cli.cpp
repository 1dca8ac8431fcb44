#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "impart/commands.hpp"
#include "impart/label_mapping.hpp"

namespace {

struct Overrides {
  std::string config;
  std::string data;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<double> rho;
  std::optional<double> gamma;
  std::optional<std::string> mode;
  std::optional<int> target;
  std::optional<int> workers;
};

void add_common(CLI::App* sub, Overrides& o) {
  sub->add_option("--config", o.config, "JSON experiment config")->check(CLI::ExistingFile);
  sub->add_option("--data", o.data, "dataset root (overrides dataset_root)");
  sub->add_option("--out", o.out, "output directory (overrides output_dir)");
  sub->add_option("--seed", o.seed, "top-level seed");
  sub->add_option("--rho", o.rho, "poison ratio");
  sub->add_option("--gamma", o.gamma, "perturbation weight of the classification phase");
  sub->add_option("--mode", o.mode, "label map")->check(CLI::IsMember({"all2all", "all2one"}));
  sub->add_option("--target", o.target, "fixed target class for all2one");
  sub->add_option("--workers", o.workers, "forging threads");
}

impart::ExperimentConfig resolve(const Overrides& o) {
  impart::ExperimentConfig cfg = o.config.empty() ? impart::ExperimentConfig{} : impart::ExperimentConfig::load(o.config);
  if (!o.data.empty()) cfg.dataset_root = o.data;
  if (!o.out.empty()) cfg.output_dir = o.out;
  if (o.seed) cfg.seed = *o.seed;
  if (o.rho) cfg.rho = *o.rho;
  if (o.gamma) cfg.trigger.gamma = *o.gamma;
  if (o.mode) cfg.mode = impart::parse_label_mode(*o.mode);
  if (o.target) cfg.target = *o.target;
  if (o.workers) cfg.workers = *o.workers;
  if (cfg.output_dir.empty()) throw impart::ValidationError("output directory not set (use --out or output_dir)");
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Label-specific backdoor poisoning with perceptually bounded triggers"};
  app.require_subcommand(1);
  Overrides o;

  auto* surrogate = app.add_subcommand("train-surrogate", "train the surrogate classifier");
  auto* poison = app.add_subcommand("generate-poison", "forge triggers for the training subset and the test set");
  auto* victim = app.add_subcommand("train-victim", "train the victim on the poisoned (or clean) training set");
  auto* evaluate = app.add_subcommand("evaluate", "BA / ASR report, quality table and image grid");
  auto* defend = app.add_subcommand("defend", "run a defense against the victim");
  auto* sweep = app.add_subcommand("sweep", "rho or gamma grid");
  auto* dataset = app.add_subcommand("make-dataset", "render the synthetic desk dataset");
  for (auto* sub : {surrogate, poison, victim, evaluate, defend, sweep}) add_common(sub, o);

  bool clean = false;
  victim->add_flag("--clean", clean, "train on the clean training split");
  bool clean_victim = false;
  evaluate->add_flag("--clean-victim", clean_victim, "evaluate the clean reference victim");
  std::string defense;
  defend->add_option("--defense", defense, "strip or spectral")->required();
  std::string kind;
  sweep->add_option("kind", kind, "rho or gamma")->required();

  std::string ds_out;
  std::size_t train_size = 10000, test_size = 2000;
  std::uint64_t ds_seed = 1;
  dataset->add_option("--out", ds_out, "dataset root")->required();
  dataset->add_option("--train-size", train_size);
  dataset->add_option("--test-size", test_size);
  dataset->add_option("--seed", ds_seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? impart::kExitOk : impart::kExitValidation;
  }

  return impart::run_command(
      [&] {
        if (dataset->parsed()) return impart::cmd_make_dataset(ds_out, train_size, test_size, ds_seed, std::cout);
        const impart::ExperimentConfig cfg = resolve(o);
        if (surrogate->parsed()) impart::cmd_train_surrogate(cfg, std::cout);
        if (poison->parsed()) impart::cmd_generate_poison(cfg, std::cout);
        if (victim->parsed()) impart::cmd_train_victim(cfg, clean, std::cout);
        if (evaluate->parsed()) impart::cmd_evaluate(cfg, clean_victim, std::cout);
        if (defend->parsed()) impart::cmd_defend(cfg, defense, std::cout);
        if (sweep->parsed()) impart::cmd_sweep(cfg, kind, std::cout);
      },
      std::cerr);
}
