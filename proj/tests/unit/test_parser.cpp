#include <doctest.h>

#include <fstream>
#include <json.hpp>
#include <regex>

#include "grpo/errors.hpp"
#include "grpo/rng.hpp"
#include "grpo/structure_parser.hpp"
#include "test_util.hpp"

using namespace grpo;

TEST_CASE("well-formed examples") {
  CHECK(validate_format("<think>x</think><answer>A</answer>"));
  CHECK(validate_format("\n <think> the bell </think>\n\t<answer> D </answer>  \n"));
  CHECK(validate_format("<think>a < b and c > d</think><answer>A</answer>"));
  CHECK_FALSE(validate_format("<think>x</think>y<answer>A</answer>"));
  CHECK_FALSE(validate_format("<think>x</think><answer>A</answer><eos>"));
  CHECK_FALSE(validate_format("<think> \n</think><answer>A</answer>"));
  CHECK_FALSE(validate_format("<think>x</answer><answer>A</answer>"));
  CHECK_FALSE(validate_format("<think>x</think><answer>A</think></answer>"));
}

TEST_CASE("answer normalisation") {
  CHECK(normalize_answer_span(" a ", 4) == OptionSet::from_letters("A"));
  CHECK(normalize_answer_span("(c), a", 4) == OptionSet::from_letters("AC"));
  CHECK(normalize_answer_span("B and D.", 4) == OptionSet::from_letters("BD"));
  CHECK(normalize_answer_span("A A", 4) == OptionSet::from_letters("A"));
  CHECK(normalize_answer_span("AB", 4).empty());
  CHECK(normalize_answer_span("", 4).empty());
  CHECK(normalize_answer_span("E", 4).empty());
  CHECK_THROWS_AS(normalize_answer_span("A", 1), ConfigError);
  CHECK_THROWS_AS(normalize_answer_span("A", 27), ConfigError);
}

TEST_CASE("parse_response splits spans") {
  const auto r = parse_response(" <think> why </think><answer>b</answer>", 4);
  CHECK(r.is_well_formed);
  CHECK(r.think_span == " why ");
  CHECK(r.answer_span == "b");
  CHECK(r.answer_set == OptionSet::from_letters("B"));
  const auto bad = parse_response("<answer>b</answer>", 4);
  CHECK_FALSE(bad.is_well_formed);
  CHECK(bad.answer_span.empty());
  CHECK(bad.answer_set.empty());
}

TEST_CASE("hand-labelled corpus") {
  std::ifstream in(testing::data_dir() / "parser_corpus.json");
  REQUIRE(in);
  const auto corpus = nlohmann::json::parse(in);
  REQUIRE(corpus.size() == 20);
  for (const auto& c : corpus) {
    const std::string text = c["text"];
    const std::size_t n = c["options"];
    INFO(text);
    CHECK(validate_format(text) == c["well_formed"].get<bool>());
    CHECK(extract_answer(text, n).to_string() == c["answer"].get<std::string>());
  }
}

TEST_CASE("linear matcher agrees with the canonical regex on random strings") {
  const std::regex re(kCanonicalFormatPattern, std::regex::ECMAScript);
  const std::vector<std::string> pieces = {"<think>", "</think>", "<answer>", "</answer>", " ", "\n", "A",
                                           "x",       "<",        ">",        "/",         "think", "\t", "B,"};
  SplitMix64 rng(2024);
  int positives = 0;
  for (int i = 0; i < 4000; ++i) {
    std::string s;
    if (rng.uniform() < 0.5) {
      // Bias towards near-valid strings so both outcomes are exercised.
      const char* templ[] = {" ", "<think>", "x", "</think>", " ", "<answer>", "A", "</answer>", " "};
      for (const char* t : templ) {
        if (rng.uniform() < 0.12) s += pieces[rng.below(pieces.size())];
        if (rng.uniform() > 0.05) s += t;
      }
    } else {
      const std::size_t len = rng.below(12);
      for (std::size_t k = 0; k < len; ++k) s += pieces[rng.below(pieces.size())];
    }
    const bool expected = std::regex_search(s, re);
    positives += expected ? 1 : 0;
    INFO(s);
    REQUIRE(validate_format(s) == expected);
  }
  CHECK(positives > 200);
}

TEST_CASE("extract_answer is idempotent on its rendered output") {
  SplitMix64 rng(5);
  for (int i = 0; i < 200; ++i) {
    OptionSet set;
    for (std::size_t k = 0; k < 6; ++k)
      if (rng.uniform() < 0.4) set.insert(k);
    if (set.empty()) continue;
    auto render = [](OptionSet s) {
      std::string span;
      for (char ch : s.to_string()) span += std::string(span.empty() ? "" : ", ") + ch;
      return "<think>t</think><answer>" + span + "</answer>";
    };
    const auto once = extract_answer(render(set), 6);
    CHECK(once == set);
    const auto twice = extract_answer(render(once), 6);
    CHECK(twice == once);
  }
}
