#pragma once

// Flat `key = value` run configuration with `#` comments.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "grpo/grpo.hpp"
#include "grpo/task.hpp"

namespace grpo {

enum class InitKind { zero, format_prior };

struct RunConfig {
  TrainConfig train;

  TaskMode mode = TaskMode::xmodal;
  std::size_t n_options = 4;
  double noise = 0.1;
  std::size_t n_train = 4490;
  std::size_t n_eval = 1911;
  std::uint64_t eval_seed = 1;

  std::size_t batch_size = 64;
  std::size_t window = 3;
  std::size_t fillers = 16;
  InitKind init = InitKind::format_prior;
  double prior_strength = 4.0;
  /// Weight linking each cue one-hot to its percept filler token (0 disables).
  double percept_strength = 2.0;

  std::filesystem::path out_dir = "runs/default";
  std::size_t log_every = 50;
  std::size_t checkpoint_every = 100;

  /// Throws ConfigError on any violated invariant.
  void validate() const;
};

/// Every recognised key, in documentation order.
std::vector<std::string_view> run_config_keys();

/// Applies one `key = value` assignment. Unknown keys and unparsable values
/// throw ConfigError.
void apply_setting(RunConfig& config, std::string_view key, std::string_view value);

/// Parses config text; errors name the offending line.
RunConfig parse_run_config(std::string_view text, RunConfig base = {});
RunConfig load_run_config(const std::filesystem::path& path);

/// Canonical text form; parse_run_config(format_run_config(c)) == c.
std::string format_run_config(const RunConfig& config);

}  // namespace grpo
