#pragma once

// Autoregressive linear-softmax policy.
//
// The context feature at step t is the task feature vector followed by k
// one-hot blocks for the k most recent tokens (most recent first); missing
// history slots are zero. The next-token distribution is
// softmax(W * phi / temperature) with W of shape V x (D_task + k*V).

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "grpo/rng.hpp"
#include "grpo/task.hpp"
#include "grpo/vocabulary.hpp"

namespace grpo {

class PolicyParams {
 public:
  PolicyParams() = default;
  /// Zero-initialised parameters.
  PolicyParams(std::size_t vocab_size, std::size_t task_dim, std::size_t window);
  /// Throws ConfigError when weights.size() != V * D or an entry is non-finite.
  PolicyParams(std::size_t vocab_size, std::size_t task_dim, std::size_t window,
               std::vector<double> weights);

  std::size_t vocab_size() const noexcept { return vocab_size_; }
  std::size_t task_dim() const noexcept { return task_dim_; }
  std::size_t window() const noexcept { return window_; }
  std::size_t feature_dim() const noexcept { return task_dim_ + window_ * vocab_size_; }

  std::span<const double> weights() const noexcept { return weights_; }
  std::span<double> weights() noexcept { return weights_; }
  std::span<const double> row(TokenId token) const noexcept {
    return std::span<const double>(weights_).subspan(token * feature_dim(), feature_dim());
  }
  double& at(TokenId token, std::size_t column) noexcept {
    return weights_[token * feature_dim() + column];
  }
  double at(TokenId token, std::size_t column) const noexcept {
    return weights_[token * feature_dim() + column];
  }

  /// Column of the one-hot slot for `token` seen `lag` steps back (lag >= 1).
  std::size_t history_column(std::size_t lag, TokenId token) const noexcept {
    return task_dim_ + (lag - 1) * vocab_size_ + token;
  }

  bool all_finite() const noexcept;

  friend bool operator==(const PolicyParams&, const PolicyParams&) = default;

 private:
  std::size_t vocab_size_ = 0;
  std::size_t task_dim_ = 0;
  std::size_t window_ = 1;
  std::vector<double> weights_;
};

enum class SnapshotRole { current, old, reference };

/// Immutable parameters plus vocabulary. Copies share storage.
class PolicySnapshot {
 public:
  PolicySnapshot(PolicyParams params, Vocabulary vocab, SnapshotRole role = SnapshotRole::current);

  const PolicyParams& params() const noexcept { return *params_; }
  const Vocabulary& vocab() const noexcept { return *vocab_; }
  SnapshotRole role() const noexcept { return role_; }
  /// Same parameters and vocabulary under another role tag.
  PolicySnapshot with_role(SnapshotRole role) const;

 private:
  std::shared_ptr<const PolicyParams> params_;
  std::shared_ptr<const Vocabulary> vocab_;
  SnapshotRole role_;
};

struct Completion {
  std::vector<TokenId> token_ids;
  std::vector<double> step_logprobs;
  std::string text;

  double logprob() const noexcept;
  /// Tokens before `<eos>` (the whole sequence when truncated).
  std::size_t length_before_eos(TokenId eos) const noexcept;
};

/// Writes the context feature into `out` (size D_task + k*V). Throws
/// InvalidTokenError for history ids >= vocab_size.
void featurize_into(std::span<const double> task_features, std::span<const TokenId> history,
                    std::size_t window, std::size_t vocab_size, std::span<double> out);

std::vector<double> featurize(const Task& task, std::span<const TokenId> history, std::size_t window,
                              const Vocabulary& vocab);

/// log softmax(W * phi / temperature) written to `out` (size V). Throws
/// NumericalError on non-finite logits and ConfigError on temperature <= 0.
void token_log_distribution_into(const PolicyParams& params, std::span<const double> phi,
                                 double temperature, std::span<double> out);

std::vector<double> token_log_distribution(const PolicyParams& params, std::span<const double> phi,
                                           double temperature);
std::vector<double> token_distribution(const PolicyParams& params, std::span<const double> phi,
                                       double temperature);

/// Stabilised in-place log-softmax of `logits`.
void log_softmax_inplace(std::span<double> logits);

/// Draws tokens until `<eos>` or max_len. Inverse-CDF sampling: u = rng.uniform(),
/// pick the first token whose cumulative probability exceeds u (the last
/// positive-probability token if rounding leaves u uncovered).
Completion sample_completion(const PolicySnapshot& snapshot, const Task& task, double temperature,
                             std::size_t max_len, SplitMix64& rng);

/// Argmax decoding with ties broken by the lowest token index.
Completion greedy_completion(const PolicySnapshot& snapshot, const Task& task, std::size_t max_len);

/// Per-token log-probabilities of `tokens` under `params`.
std::vector<double> step_logprobs(const PolicyParams& params, std::span<const double> task_features,
                                  std::span<const TokenId> tokens, double temperature);

double sequence_logprob(const PolicyParams& params, std::span<const double> task_features,
                        std::span<const TokenId> tokens, double temperature);
inline double sequence_logprob(const PolicyParams& params, const Task& task,
                               std::span<const TokenId> tokens, double temperature) {
  return sequence_logprob(params, task.features, tokens, temperature);
}

/// grad += sum_t coeff[t] * (onehot(token_t) - p_t) (x) phi_t / temperature.
/// The summand is the gradient of log p_t(token_t) with respect to W.
void accumulate_logprob_grad(const PolicyParams& params, std::span<const double> task_features,
                             std::span<const TokenId> tokens, double temperature,
                             std::span<const double> coeffs, std::span<double> grad);

/// Gradient of sequence_logprob with respect to the flat W.
std::vector<double> grad_sequence_logprob(const PolicyParams& params,
                                          std::span<const double> task_features,
                                          std::span<const TokenId> tokens, double temperature);

/// "Pretrained" starting point: a weak grammar prior over the tag structure
///   start -> <think> -> filler -> </think> -> <answer> -> letter -> </answer> -> <eos>
/// with every preferred transition raised by `strength` nats and uniform
/// choice among fillers and letters. The start preference is carried by the
/// task-feature columns (scaled by 1 / feature_mass, the typical feature sum)
/// and cancelled by every history slot-1 column.
PolicyParams format_prior(const Vocabulary& vocab, std::size_t task_dim, std::size_t window,
                          double strength, double feature_mass);

/// Adds a perception prior on top of format_prior: filler i is linked with
/// weight `strength` to each one-hot of cue pair (i / N, i % N) (xmodal) or
/// class i (unimodal). The link only acts in the slot right after <think>:
/// every other previous token cancels it, and the start preference for
/// <think> is raised by the same peak. No answer letter is favoured.
void add_percept_prior(PolicyParams& params, const Vocabulary& vocab, TaskMode mode, std::size_t option_count,
                       double strength, double feature_mass);

// -- checkpoints -------------------------------------------------------------
//
//   grpo-echo-ckpt v1
//   V D k D_task
//   <V vocabulary symbols separated by single spaces>
//   <V lines, each with D weights printed with 17 significant digits>

void write_checkpoint(const PolicySnapshot& snapshot, std::ostream& out);
void write_checkpoint(const PolicySnapshot& snapshot, const std::filesystem::path& path);
/// Throws ParseError naming the offending line.
PolicySnapshot read_checkpoint(std::istream& in);
PolicySnapshot read_checkpoint(const std::filesystem::path& path);

}  // namespace grpo
