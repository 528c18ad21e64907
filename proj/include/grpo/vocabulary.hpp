#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace grpo {

using TokenId = std::uint32_t;

namespace symbols {
inline constexpr std::string_view kThinkOpen = "<think>";
inline constexpr std::string_view kThinkClose = "</think>";
inline constexpr std::string_view kAnswerOpen = "<answer>";
inline constexpr std::string_view kAnswerClose = "</answer>";
inline constexpr std::string_view kEos = "<eos>";
}  // namespace symbols

/// Ordered, duplicate-free token inventory. Tags, `<eos>` and option letters
/// are atomic tokens; everything else is a filler reasoning word.
class Vocabulary {
 public:
  static constexpr std::size_t kMinSize = 10;
  static constexpr std::size_t kRequiredLetters = 4;

  /// Validates the symbol list (distinct, every special and the letters A..D
  /// present, size >= kMinSize). Throws ConfigError.
  explicit Vocabulary(std::vector<std::string> symbols);

  /// `<think> </think> <answer> </answer> <eos>`, letters A.. (at least four),
  /// then fillers t0, t1, ...
  static Vocabulary standard(std::size_t letters, std::size_t fillers);

  std::size_t size() const noexcept { return symbols_.size(); }
  const std::string& symbol(TokenId id) const;
  std::span<const std::string> symbols() const noexcept { return symbols_; }

  /// Throws InvalidTokenError for unknown symbols.
  TokenId id(std::string_view symbol) const;
  bool contains(std::string_view symbol) const noexcept;

  TokenId think_open() const noexcept { return think_open_; }
  TokenId think_close() const noexcept { return think_close_; }
  TokenId answer_open() const noexcept { return answer_open_; }
  TokenId answer_close() const noexcept { return answer_close_; }
  TokenId eos() const noexcept { return eos_; }

  /// Number of consecutive option letters A, B, ... present.
  std::size_t letter_count() const noexcept { return letters_.size(); }
  TokenId letter(std::size_t index) const;
  bool is_letter(TokenId id) const noexcept;
  /// Tokens that are neither tags, `<eos>` nor letters.
  std::span<const TokenId> fillers() const noexcept { return fillers_; }

  /// Joins symbols with single spaces, except that no space follows an opener
  /// (`<think>`, `<answer>`) or precedes a closer (`</think>`, `</answer>`).
  /// `<eos>` ends the text and is not rendered.
  std::string detokenize(std::span<const TokenId> ids) const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.symbols_ == b.symbols_; }

 private:
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, TokenId> index_;
  std::vector<TokenId> letters_;
  std::vector<TokenId> fillers_;
  TokenId think_open_ = 0, think_close_ = 0, answer_open_ = 0, answer_close_ = 0, eos_ = 0;
};

}  // namespace grpo
