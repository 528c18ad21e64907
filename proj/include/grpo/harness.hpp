#pragma once

// Training orchestration and the `grpo_echo` command-line interface.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "grpo/grpo.hpp"
#include "grpo/run_config.hpp"

namespace grpo {

/// Vocabulary, initial policy and train/eval splits derived from a config.
struct Setup {
  Vocabulary vocab;
  PolicySnapshot initial;
  std::vector<Task> train_tasks;
  std::vector<Task> eval_tasks;
};

Setup build_setup(const RunConfig& config);

struct TrainResult {
  std::vector<StepMetrics> metrics;
  PolicySnapshot final_policy;
  double eval_accuracy = 0.0;
  std::filesystem::path metrics_csv;
  std::filesystem::path final_checkpoint;
};

/// Runs config.train.steps updates. Writes into config.out_dir:
///   metrics.csv          header + one row per step
///   step_NNNNNN.ckpt     every checkpoint_every steps (0 disables)
///   final.ckpt           after the last step
///   config.txt           resolved configuration
///   run_info.txt         wall-clock timestamps (the only non-deterministic file)
/// Progress and sampled reasoning traces go to `log` every log_every steps.
/// On NumericalError the rows and checkpoints written so far are kept and the
/// error is rethrown.
TrainResult run_training(const RunConfig& config, std::ostream& log);

/// Entry point shared by the executable and tests. args excludes the program
/// name. Exit codes: 0 success, 1 usage error, 2 runtime error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace grpo
