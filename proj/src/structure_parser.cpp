#include "grpo/structure_parser.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <sstream>

#include "grpo/errors.hpp"

namespace grpo {

const char* const kCanonicalFormatPattern =
    R"(^\s*<think>((?:(?!</?think>|</?answer>)[\s\S])*(?:(?!</?think>|</?answer>)\S)(?:(?!</?think>|</?answer>)[\s\S])*)</think>\s*<answer>((?:(?!</?think>|</?answer>)[\s\S])*(?:(?!</?think>|</?answer>)\S)(?:(?!</?think>|</?answer>)[\s\S])*)</answer>\s*$)";

namespace {

constexpr std::string_view kThinkOpen = "<think>";
constexpr std::string_view kThinkClose = "</think>";
constexpr std::string_view kAnswerOpen = "<answer>";
constexpr std::string_view kAnswerClose = "</answer>";

// Same class as ECMAScript \s restricted to ASCII.
bool is_space(char c) noexcept {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool all_space(std::string_view s) noexcept { return std::all_of(s.begin(), s.end(), is_space); }

std::size_t count(std::string_view text, std::string_view needle) noexcept {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string_view::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

struct Spans {
  std::string_view think;
  std::string_view answer;
};

bool split(std::string_view text, Spans& out) noexcept {
  for (auto tag : std::array{kThinkOpen, kThinkClose, kAnswerOpen, kAnswerClose}) {
    if (count(text, tag) != 1) return false;
  }
  const auto think_open = text.find(kThinkOpen);
  const auto think_close = text.find(kThinkClose);
  const auto answer_open = text.find(kAnswerOpen);
  const auto answer_close = text.find(kAnswerClose);
  if (!(think_open < think_close && think_close < answer_open && answer_open < answer_close)) return false;

  const auto think_begin = think_open + kThinkOpen.size();
  const auto answer_begin = answer_open + kAnswerOpen.size();
  const auto gap_begin = think_close + kThinkClose.size();
  const auto tail_begin = answer_close + kAnswerClose.size();
  if (!all_space(text.substr(0, think_open))) return false;
  if (!all_space(text.substr(gap_begin, answer_open - gap_begin))) return false;
  if (!all_space(text.substr(tail_begin))) return false;

  out.think = text.substr(think_begin, think_close - think_begin);
  out.answer = text.substr(answer_begin, answer_close - answer_begin);
  return !all_space(out.think) && !all_space(out.answer);
}

}  // namespace

bool validate_format(std::string_view text) noexcept {
  Spans spans;
  return split(text, spans);
}

OptionSet normalize_answer_span(std::string_view span, std::size_t option_count) {
  if (option_count < kMinOptions || option_count > OptionSet::kMaxOptions) {
    throw ConfigError("option count must be in [2, 26]");
  }
  std::string cleaned;
  cleaned.reserve(span.size());
  for (char c : span) {
    if (c == ',' || c == ';') {
      cleaned.push_back(' ');
    } else if (c == '.' || c == '(' || c == ')') {
      continue;
    } else {
      cleaned.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    }
  }
  for (char& c : cleaned) {
    if (is_space(c)) c = ' ';
  }
  OptionSet out;
  std::istringstream words(cleaned);
  for (std::string word; words >> word;) {
    if (word == "AND") continue;
    if (word.size() != 1 || word[0] < 'A' || static_cast<std::size_t>(word[0] - 'A') >= option_count) {
      return {};
    }
    out.insert(static_cast<std::size_t>(word[0] - 'A'));
  }
  return out;
}

ParsedResponse parse_response(std::string_view text, std::size_t option_count) {
  ParsedResponse r;
  Spans spans;
  if (!split(text, spans)) return r;
  r.is_well_formed = true;
  r.think_span = std::string(spans.think);
  r.answer_span = std::string(spans.answer);
  r.answer_set = normalize_answer_span(spans.answer, option_count);
  return r;
}

OptionSet extract_answer(std::string_view text, std::size_t option_count) {
  return parse_response(text, option_count).answer_set;
}

}  // namespace grpo
