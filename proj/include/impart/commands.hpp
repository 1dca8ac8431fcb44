#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>

#include "impart/experiment.hpp"

namespace impart {

// Exit codes of the command-line front end.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitValidation = 2;

// Layout below ExperimentConfig::output_dir.
struct ArtifactPaths {
  std::filesystem::path root;

  std::filesystem::path surrogate() const { return root / "surrogate.ckpt"; }
  std::filesystem::path poison_dir() const { return root / "poison"; }
  std::filesystem::path poison_test_dir() const { return root / "poison_test"; }
  std::filesystem::path victim() const { return root / "victim.ckpt"; }
  std::filesystem::path clean_victim() const { return root / "clean_victim.ckpt"; }
  std::filesystem::path reports() const { return root / "reports"; }
};

// Each command validates its inputs (ValidationError), runs one phase, writes
// its artifacts plus the effective config next to them, and logs to `log`.
void cmd_make_dataset(const std::filesystem::path& root, std::size_t train_size, std::size_t test_size,
                      std::uint64_t seed, std::ostream& log);
void cmd_train_surrogate(const ExperimentConfig& cfg, std::ostream& log);
void cmd_generate_poison(const ExperimentConfig& cfg, std::ostream& log);
void cmd_train_victim(const ExperimentConfig& cfg, bool clean, std::ostream& log);
void cmd_evaluate(const ExperimentConfig& cfg, bool clean_victim, std::ostream& log);
void cmd_defend(const ExperimentConfig& cfg, const std::string& defense, std::ostream& log);
// kind: "rho" (poison + victim training per ratio) or "gamma" (forging only).
void cmd_sweep(const ExperimentConfig& cfg, const std::string& kind, std::ostream& log);

// Runs `fn`, mapping ValidationError to kExitValidation and other exceptions to
// kExitRuntime; the diagnostic goes to `err`.
template <class Fn>
int run_command(Fn&& fn, std::ostream& err) {
  try {
    fn();
    return kExitOk;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace impart
