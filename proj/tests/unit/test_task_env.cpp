#include <doctest.h>

#include <cmath>
#include <fstream>
#include <set>

#include "grpo/errors.hpp"
#include "grpo/task.hpp"
#include "test_util.hpp"

using namespace grpo;

TEST_CASE("option sets") {
  const auto s = OptionSet::from_letters("CA");
  CHECK(s.to_string() == "AC");
  CHECK(s.size() == 2);
  CHECK(s.span() == 3);
  CHECK(OptionSet{}.span() == 0);
  CHECK_THROWS_AS(OptionSet::from_letters("a"), ConfigError);
  CHECK_THROWS_AS(OptionSet::single(26), ConfigError);
}

TEST_CASE("xmodal task construction") {
  const auto t = make_task(TaskMode::xmodal, 4, 3, 2, 0.0, 0, "x");
  CHECK(t.features == std::vector<double>{0, 0, 0, 1, 0, 0, 1, 0});
  CHECK(t.gold == OptionSet::single(1));  // (3 + 2) mod 4
  CHECK(t.option_count() == 4);
  const auto u = make_task(TaskMode::unimodal, 3, 2, 0, 0.0, 0, "u");
  CHECK(u.features == std::vector<double>{0, 0, 1});
  CHECK(u.gold == OptionSet::single(2));
}

TEST_CASE("gen_tasks is deterministic and well formed") {
  TaskGenSpec spec{TaskMode::xmodal, 50, 4, 0.1, 17};
  const auto a = gen_tasks(spec);
  const auto b = gen_tasks(spec);
  REQUIRE(a.size() == 50);
  std::set<std::string> ids;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].features == b[i].features);
    CHECK(a[i].features.size() == 8);
    CHECK(a[i].gold.size() == 1);
    CHECK_NOTHROW(validate_task(a[i]));
    ids.insert(a[i].id);
  }
  CHECK(ids.size() == 50);
  CHECK(a[0].id == "xmodal-000000");
  spec.seed = 18;
  CHECK(gen_tasks(spec)[0].features != a[0].features);
}

TEST_CASE("one cue alone carries no information about the gold answer") {
  // For every value of cue a, the N pairs (a, v) cover each answer exactly once.
  const std::size_t n = 4;
  for (std::size_t a = 0; a < n; ++a) {
    std::vector<int> counts(n, 0);
    for (std::size_t v = 0; v < n; ++v) {
      const auto t = make_task(TaskMode::xmodal, n, a, v, 0.0, 0, "t");
      for (std::size_t k = 0; k < n; ++k)
        if (t.gold.contains(k)) ++counts[k];
    }
    for (int c : counts) CHECK(c == 1);
  }
}

TEST_CASE("hashed text features") {
  const auto f = hashed_text_features("Hello, hello WORLD", 8);
  double norm = 0.0;
  for (double x : f) norm += x * x;
  CHECK(norm == doctest::Approx(1.0));
  CHECK(hashed_text_features("hello hello world", 8) == f);
  for (double x : hashed_text_features("", 8)) CHECK(x == 0.0);
}

TEST_CASE("manifest parsing") {
  const std::string text =
      R"({"id":"q1","question":"Which?","options":["a","b","c","d"],"answer":"B","features":[1,0]})"
      "\n\n"
      R"({"id":"q2","question":"Pick two","options":["a","b","c"],"answer":"AC","features":[0,1]})"
      "\n"
      R"({"id":"q3","question":"No features","options":["x","y"],"answer":"A"})"
      "\n";
  const auto tasks = parse_manifest(text, 2);
  REQUIRE(tasks.size() == 3);
  CHECK(tasks[0].gold == OptionSet::from_letters("B"));
  CHECK(tasks[1].gold == OptionSet::from_letters("AC"));
  CHECK(tasks[2].features.size() == 2);
}

TEST_CASE("manifest errors list every bad line") {
  const std::string text =
      R"({"id":"q1","question":"q","options":["a","b"],"answer":"A","features":[1]})"
      "\n"
      R"({"id":"q2","question":"q","options":["a","b"],"features":[1]})"
      "\n"
      R"({"id":"q1","question":"q","options":["a","b"],"answer":"C","features":[1]})"
      "\n"
      "{not json\n"
      R"({"id":"q5","question":"q","options":["a","b"],"answer":"A","features":[1,2]})"
      "\n";
  try {
    parse_manifest(text);
    FAIL("expected LoadError");
  } catch (const LoadError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("line 2") != std::string::npos);
    CHECK(msg.find("answer") != std::string::npos);
    CHECK(msg.find("line 3") != std::string::npos);
    CHECK(msg.find("line 4") != std::string::npos);
    CHECK(msg.find("line 5") != std::string::npos);
    CHECK(msg.find("line 1:") == std::string::npos);
  }
}

TEST_CASE("manifest round trip") {
  const auto tasks = gen_tasks({TaskMode::xmodal, 10, 4, 0.1, 3});
  const auto dir = testing::scratch_dir("manifest");
  write_manifest(tasks, dir / "m.jsonl");
  const auto back = load_manifest(dir / "m.jsonl");
  REQUIRE(back.size() == tasks.size());
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    CHECK(back[i].id == tasks[i].id);
    CHECK(back[i].features == tasks[i].features);
    CHECK(back[i].gold == tasks[i].gold);
    CHECK(back[i].options == tasks[i].options);
  }
  CHECK(format_manifest(back) == format_manifest(tasks));
  CHECK_THROWS_AS(load_manifest(dir / "missing.jsonl"), LoadError);
}
