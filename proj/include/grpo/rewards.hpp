#pragma once

// Verifiable rewards: binary answer accuracy, binary format consistency and
// their weighted sum.

#include <string_view>

#include "grpo/policy.hpp"
#include "grpo/task.hpp"

namespace grpo {

struct RewardWeights {
  double lambda_acc = 1.0;
  double lambda_fmt = 1.0;
};

struct RewardBreakdown {
  int r_acc = 0;
  int r_fmt = 0;
  double total = 0.0;
};

/// 1 iff predicted == gold as sets. Throws ConfigError for an empty gold set.
int reward_accuracy(OptionSet predicted, OptionSet gold);

/// 1 iff validate_format(text).
int reward_format(std::string_view text) noexcept;

double combine(int r_acc, int r_fmt, const RewardWeights& weights) noexcept;

RewardBreakdown grade_response(std::string_view text, const Task& task, const RewardWeights& weights);

inline RewardBreakdown grade_completion(const Completion& completion, const Task& task,
                                        const RewardWeights& weights) {
  return grade_response(completion.text, task, weights);
}

}  // namespace grpo
