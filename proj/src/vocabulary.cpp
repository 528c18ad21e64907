#include "grpo/vocabulary.hpp"

#include <array>

#include "grpo/errors.hpp"

namespace grpo {

namespace {

constexpr std::array<std::string_view, 5> kSpecials = {
    symbols::kThinkOpen, symbols::kThinkClose, symbols::kAnswerOpen, symbols::kAnswerClose,
    symbols::kEos};

bool is_letter_symbol(std::string_view s) { return s.size() == 1 && s[0] >= 'A' && s[0] <= 'Z'; }

}  // namespace

Vocabulary::Vocabulary(std::vector<std::string> symbols) : symbols_(std::move(symbols)) {
  if (symbols_.size() < kMinSize) {
    throw ConfigError("vocabulary needs at least " + std::to_string(kMinSize) + " symbols, got " +
                      std::to_string(symbols_.size()));
  }
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    const auto& s = symbols_[i];
    if (s.empty() || s.find_first_of(" \t\r\n") != std::string::npos) {
      throw ConfigError("vocabulary symbol " + std::to_string(i) + " is empty or contains whitespace");
    }
    if (!index_.emplace(s, static_cast<TokenId>(i)).second) {
      throw ConfigError("duplicate vocabulary symbol '" + s + "'");
    }
  }
  for (auto special : kSpecials) {
    if (!contains(special)) throw ConfigError("vocabulary lacks required symbol " + std::string(special));
  }
  think_open_ = id(symbols::kThinkOpen);
  think_close_ = id(symbols::kThinkClose);
  answer_open_ = id(symbols::kAnswerOpen);
  answer_close_ = id(symbols::kAnswerClose);
  eos_ = id(symbols::kEos);

  for (std::size_t i = 0; i < 26; ++i) {
    auto it = index_.find(std::string(1, static_cast<char>('A' + i)));
    if (it == index_.end()) break;
    letters_.push_back(it->second);
  }
  if (letters_.size() < kRequiredLetters) {
    throw ConfigError("vocabulary lacks option letter " +
                      std::string(1, static_cast<char>('A' + letters_.size())));
  }
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    const auto id = static_cast<TokenId>(i);
    const bool special = id == think_open_ || id == think_close_ || id == answer_open_ ||
                         id == answer_close_ || id == eos_;
    if (!special && !is_letter(id) && !is_letter_symbol(symbols_[i])) fillers_.push_back(id);
  }
}

Vocabulary Vocabulary::standard(std::size_t letters, std::size_t fillers) {
  if (letters < kRequiredLetters) letters = kRequiredLetters;
  if (letters > 26) throw ConfigError("at most 26 option letters");
  std::vector<std::string> s;
  for (auto special : kSpecials) s.emplace_back(special);
  for (std::size_t i = 0; i < letters; ++i) s.emplace_back(1, static_cast<char>('A' + i));
  for (std::size_t i = 0; i < fillers; ++i) s.push_back("t" + std::to_string(i));
  return Vocabulary(std::move(s));
}

const std::string& Vocabulary::symbol(TokenId id) const {
  if (id >= symbols_.size()) {
    throw InvalidTokenError("token id " + std::to_string(id) + " outside vocabulary of size " +
                            std::to_string(symbols_.size()));
  }
  return symbols_[id];
}

TokenId Vocabulary::id(std::string_view symbol) const {
  auto it = index_.find(std::string(symbol));
  if (it == index_.end()) throw InvalidTokenError("unknown symbol '" + std::string(symbol) + "'");
  return it->second;
}

bool Vocabulary::contains(std::string_view symbol) const noexcept {
  return index_.contains(std::string(symbol));
}

TokenId Vocabulary::letter(std::size_t index) const {
  if (index >= letters_.size()) throw InvalidTokenError("no option letter with index " + std::to_string(index));
  return letters_[index];
}

bool Vocabulary::is_letter(TokenId id) const noexcept {
  for (auto l : letters_) {
    if (l == id) return true;
  }
  return false;
}

std::string Vocabulary::detokenize(std::span<const TokenId> ids) const {
  std::string out;
  bool previous_opener = true;  // no leading space
  for (TokenId id : ids) {
    if (id == eos_) break;
    const auto& s = symbol(id);
    const bool closer = id == think_close_ || id == answer_close_;
    if (!previous_opener && !closer) out.push_back(' ');
    out += s;
    previous_opener = id == think_open_ || id == answer_open_;
  }
  return out;
}

}  // namespace grpo
