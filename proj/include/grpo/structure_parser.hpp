#pragma once

// Response structure checks for `<think>…</think> <answer>…</answer>` output.
//
// A response is well formed iff it matches (ECMAScript notation, where
// [\s\S] is "any character including newline"):
//
//   ^\s*<think>(BODY)</think>\s*<answer>(BODY)</answer>\s*$
//
// with BODY = (?:(?!TAG)[\s\S])*(?:(?!TAG)\S)(?:(?!TAG)[\s\S])*
// and  TAG  = </?think>|</?answer>
//
// i.e. exactly one think pair followed by exactly one answer pair, both spans
// non-empty after trimming, nothing but whitespace around and between them.
// Tags are matched byte-for-byte; span contents are opaque.

#include <cstddef>
#include <string>
#include <string_view>

#include "grpo/task.hpp"

namespace grpo {

/// The canonical pattern above, for third-party graders and test oracles.
extern const char* const kCanonicalFormatPattern;

struct ParsedResponse {
  bool is_well_formed = false;
  std::string think_span;
  std::string answer_span;
  OptionSet answer_set;
};

/// Linear-time matcher equivalent to kCanonicalFormatPattern.
bool validate_format(std::string_view text) noexcept;

/// Splits a well-formed response; is_well_formed == false leaves every other
/// field empty.
ParsedResponse parse_response(std::string_view text, std::size_t option_count);

/// Option letters named in the answer span. The span is upper-cased, commas
/// and semicolons become spaces, periods and parentheses are removed, and the
/// word AND is dropped; every remaining whitespace-separated token must be a
/// single letter among the first `option_count`, otherwise the result is
/// empty. Malformed responses yield the empty set.
OptionSet extract_answer(std::string_view text, std::size_t option_count);

/// Normalisation step of extract_answer applied to a bare answer span.
OptionSet normalize_answer_span(std::string_view span, std::size_t option_count);

}  // namespace grpo
