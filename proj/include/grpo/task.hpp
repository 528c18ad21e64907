#pragma once

// Multiple-choice tasks: synthetic two-cue generation and manifest ingestion.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace grpo {

/// Set of option letters A..Z stored as a bitmask.
class OptionSet {
 public:
  static constexpr std::size_t kMaxOptions = 26;

  constexpr OptionSet() noexcept = default;

  /// Parses a string of upper-case letters such as "A" or "AC". Throws
  /// ConfigError on anything else.
  static OptionSet from_letters(std::string_view letters);
  static OptionSet single(std::size_t index);

  void insert(std::size_t index);
  constexpr bool contains(std::size_t index) const noexcept {
    return index < kMaxOptions && ((mask_ >> index) & 1U) != 0;
  }
  constexpr bool empty() const noexcept { return mask_ == 0; }
  std::size_t size() const noexcept;
  /// Index one past the highest letter present, 0 when empty.
  std::size_t span() const noexcept;
  constexpr std::uint32_t mask() const noexcept { return mask_; }

  /// Letters in alphabetical order, e.g. "AC".
  std::string to_string() const;

  friend constexpr bool operator==(OptionSet, OptionSet) noexcept = default;

 private:
  std::uint32_t mask_ = 0;
};

inline char option_letter(std::size_t index) { return static_cast<char>('A' + index); }

struct Task {
  std::string id;
  std::vector<double> features;
  std::vector<std::string> options;
  OptionSet gold;
  std::string question;

  std::size_t option_count() const noexcept { return options.size(); }
};

/// Throws ConfigError when the task violates its invariants.
void validate_task(const Task& task);

enum class TaskMode { unimodal, xmodal };

TaskMode parse_task_mode(std::string_view name);
std::string_view task_mode_name(TaskMode mode) noexcept;

struct TaskGenSpec {
  TaskMode mode = TaskMode::xmodal;
  std::size_t count = 1;
  std::size_t option_count = 4;
  double noise = 0.0;
  std::uint64_t seed = 0;
};

constexpr std::size_t kMinOptions = 2;
constexpr std::size_t kMaxGeneratedOptions = 8;

/// Feature dimension produced by gen_tasks: N for unimodal, 2N for xmodal.
std::size_t task_feature_dim(TaskMode mode, std::size_t option_count) noexcept;

/// Builds one task from explicit latent cues (`cue_v` ignored for unimodal).
/// Noise is drawn from `noise_rng` when noise > 0.
Task make_task(TaskMode mode, std::size_t option_count, std::size_t cue_a, std::size_t cue_v,
               double noise, std::uint64_t noise_seed, std::string id);

/// Unimodal: class c, features onehot(c) + noise, gold letter(c).
/// Xmodal: cues a and v, features onehot(a) ++ onehot(v) + noise, gold
/// letter((a + v) mod N). Task i draws from stream derive(seed, 0x7A5C, i).
std::vector<Task> gen_tasks(const TaskGenSpec& spec);

// -- manifests ---------------------------------------------------------------

/// Default dimension of the hashed text featurization.
constexpr std::size_t kDefaultHashedDim = 8;

/// Hashed bag-of-words: lower-cased alphanumeric words of `text` are hashed
/// with FNV-1a 64; bucket = h mod dim, sign = +1 if bit 63 of h is clear else
/// -1. The signed counts are L2-normalised (left at zero for empty text).
std::vector<double> hashed_text_features(std::string_view text, std::size_t dim);

/// Parses a line-delimited JSON manifest (one object per line; blank lines
/// skipped). Records without `features` are featurized from question and
/// options with hashed_text_features(…, hashed_dim). All offending lines are
/// collected and reported in one LoadError.
std::vector<Task> load_manifest(const std::filesystem::path& path,
                                std::size_t hashed_dim = kDefaultHashedDim);
std::vector<Task> parse_manifest(std::string_view text, std::size_t hashed_dim = kDefaultHashedDim);

/// One JSON object per task, keys in the order id, question, options, answer,
/// features. Doubles are printed in shortest round-trip form.
std::string format_manifest(const std::vector<Task>& tasks);
void write_manifest(const std::vector<Task>& tasks, const std::filesystem::path& path);

}  // namespace grpo
