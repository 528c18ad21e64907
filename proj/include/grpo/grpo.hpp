#pragma once

// Group-relative policy optimisation.
//
// For each task, G completions are sampled from a frozen copy of the current
// policy (pi_old). Rewards are standardised within the group and the update
// maximises
//
//   J = 1/G * sum_i [ exp(log pi(o_i) - log pi_old(o_i)) * A_i - beta * KL_i ]
//
// where KL_i is the mean over o_i's tokens of the k3 estimate
// rho - log rho - 1, rho = pi_ref(token) / pi(token). pi_ref is the policy at
// step 0 and never changes. No value function is involved.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "grpo/policy.hpp"
#include "grpo/rewards.hpp"
#include "grpo/task.hpp"

namespace grpo {

enum class OptimizerKind { sgd, adam };

OptimizerKind parse_optimizer(std::string_view name);
std::string_view optimizer_name(OptimizerKind kind) noexcept;

struct TrainConfig {
  std::size_t group_size = 8;
  double beta = 0.04;
  RewardWeights weights;
  double lr = 2e-2;
  double temperature = 1.0;
  std::size_t max_len = 24;
  std::uint64_t seed = 0;
  std::size_t steps = 562;
  double eps_std = 1e-8;
  OptimizerKind optimizer = OptimizerKind::adam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  /// PPO-style ratio clipping half-width; 0 disables it.
  double clip_eps = 0.0;
  /// Workers used for rollout generation. Output does not depend on it.
  std::size_t threads = 1;

  /// Throws ConfigError on violated invariants.
  void validate() const;
};

struct GroupSample {
  const Task* task = nullptr;
  std::vector<Completion> completions;
  std::vector<RewardBreakdown> breakdowns;
  std::vector<double> rewards;
  std::vector<double> advantages;
};

struct StepMetrics {
  std::size_t step = 0;
  double loss = 0.0;
  double mean_total_reward = 0.0;
  double mean_acc_reward = 0.0;
  double mean_fmt_reward = 0.0;
  double mean_kl = 0.0;
  double mean_completion_len = 0.0;
};

/// A_i = (r_i - mean) / std with the population standard deviation; all zeros
/// when std < eps_std. Throws ConfigError for fewer than two rewards.
std::vector<double> compute_advantages(std::span<const double> rewards, double eps_std = 1e-8);

/// Per-token k3 values rho_t - log rho_t - 1.
std::vector<double> kl_terms(const PolicyParams& current, const PolicyParams& ref,
                             std::span<const double> task_features, std::span<const TokenId> tokens,
                             double temperature);

/// Mean of kl_terms over the sequence (0 for an empty sequence).
double kl_to_reference(const PolicyParams& current, const PolicySnapshot& ref, const Task& task,
                       std::span<const TokenId> tokens, double temperature);

struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> grad;
  double mean_kl = 0.0;
};

/// loss = -J for one group and its exact gradient with respect to current's
/// flat parameters. Old log-probabilities are taken from the completions.
LossAndGrad grpo_loss_and_grad(const PolicyParams& current, const PolicySnapshot& ref,
                               const GroupSample& group, double beta, double temperature,
                               double clip_eps = 0.0);

/// Parameter update rule. Adam uses bias-corrected moments.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double lr, double beta1, double beta2, double eps, std::size_t size);

  void step(std::span<double> params, std::span<const double> grad);
  std::size_t iterations() const noexcept { return t_; }

 private:
  OptimizerKind kind_;
  double lr_, beta1_, beta2_, eps_;
  std::vector<double> m_, v_;
  std::size_t t_ = 0;
};

/// Samples G completions of `task` from `old`, grades and standardises them.
/// Completion r uses rng stream derive(seed, step, task_index, r).
GroupSample rollout_group(const PolicySnapshot& old, const Task& task, const TrainConfig& config,
                          std::uint64_t step, std::uint64_t task_index);

/// Holds the live parameters, the frozen reference and the optimiser state.
class Trainer {
 public:
  Trainer(TrainConfig config, PolicySnapshot initial);

  /// One update: refresh pi_old, roll out every task in `batch`, average the
  /// per-task losses and gradients, apply the optimiser. Throws
  /// NumericalError (with the step index) on non-finite loss or gradient.
  StepMetrics train_step(std::span<const Task> batch);

  PolicySnapshot snapshot() const;
  const PolicySnapshot& reference() const noexcept { return reference_; }
  const PolicyParams& params() const noexcept { return params_; }
  const TrainConfig& config() const noexcept { return config_; }
  std::size_t steps_done() const noexcept { return step_; }

  /// Groups produced by the most recent train_step.
  const std::vector<GroupSample>& last_groups() const noexcept { return last_groups_; }

 private:
  TrainConfig config_;
  PolicySnapshot reference_;
  PolicyParams params_;
  Optimizer optimizer_;
  std::size_t step_ = 0;
  std::vector<GroupSample> last_groups_;
};

/// Mean greedy-decoded accuracy reward. Throws ConfigError on an empty set.
double evaluate(const PolicySnapshot& snapshot, std::span<const Task> tasks, std::size_t max_len = 24);

/// Indices of the training tasks used at `step`: `batch_size` draws with
/// replacement from stream derive(seed, 0xBA7C4, step).
std::vector<std::size_t> select_batch(std::uint64_t seed, std::uint64_t step, std::size_t batch_size,
                                      std::size_t pool_size);

}  // namespace grpo
