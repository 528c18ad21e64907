#include "grpo/rewards.hpp"

#include "grpo/errors.hpp"
#include "grpo/structure_parser.hpp"

namespace grpo {

int reward_accuracy(OptionSet predicted, OptionSet gold) {
  if (gold.empty()) throw ConfigError("gold answer set is empty");
  return predicted == gold ? 1 : 0;
}

int reward_format(std::string_view text) noexcept { return validate_format(text) ? 1 : 0; }

double combine(int r_acc, int r_fmt, const RewardWeights& weights) noexcept {
  return weights.lambda_acc * r_acc + weights.lambda_fmt * r_fmt;
}

RewardBreakdown grade_response(std::string_view text, const Task& task, const RewardWeights& weights) {
  RewardBreakdown b;
  b.r_fmt = reward_format(text);
  b.r_acc = reward_accuracy(extract_answer(text, task.option_count()), task.gold);
  b.total = combine(b.r_acc, b.r_fmt, weights);
  return b;
}

}  // namespace grpo
