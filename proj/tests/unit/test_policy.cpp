#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "grpo/errors.hpp"
#include "grpo/policy.hpp"
#include "test_util.hpp"

using namespace grpo;

namespace {

Task plain_task(std::size_t dim, double value = 1.0) {
  Task t;
  t.id = "t";
  t.features.assign(dim, value);
  t.options = {"a", "b", "c", "d"};
  t.gold = OptionSet::single(0);
  return t;
}

}  // namespace

TEST_CASE("vocabulary layout and validation") {
  const auto v = Vocabulary::standard(4, 3);
  CHECK(v.size() == 12);
  CHECK(v.symbol(0) == "<think>");
  CHECK(v.eos() == 4);
  CHECK(v.letter(0) == 5);
  CHECK(v.symbol(v.letter(3)) == "D");
  CHECK(v.fillers().size() == 3);
  CHECK(v.is_letter(6));
  CHECK_FALSE(v.is_letter(9));
  CHECK_THROWS_AS(Vocabulary(std::vector<std::string>{"<think>", "</think>"}), ConfigError);
  CHECK_THROWS_AS(v.id("nope"), InvalidTokenError);

  auto dup = std::vector<std::string>(v.symbols().begin(), v.symbols().end());
  dup.back() = dup.front();
  CHECK_THROWS_AS(Vocabulary{dup}, ConfigError);
}

TEST_CASE("detokenize spacing rule") {
  const auto v = Vocabulary::standard(4, 3);
  const std::vector<TokenId> ids = {v.think_open(), v.id("t0"), v.id("t1"), v.think_close(),
                                    v.answer_open(), v.letter(1), v.answer_close(), v.eos(), v.id("t2")};
  CHECK(v.detokenize(ids) == "<think>t0 t1</think> <answer>B</answer>");
  CHECK(v.detokenize({}) == "");
}

TEST_CASE("featurize places most recent token first") {
  const auto v = Vocabulary::standard(4, 3);
  const Task task = plain_task(2, 0.5);
  const std::vector<TokenId> hist = {1, 7};
  const auto phi = featurize(task, hist, 3, v);
  REQUIRE(phi.size() == 2 + 3 * 12);
  CHECK(phi[0] == 0.5);
  CHECK(phi[1] == 0.5);
  CHECK(phi[2 + 7] == 1.0);
  CHECK(phi[2 + 12 + 1] == 1.0);
  CHECK(std::accumulate(phi.begin() + 2, phi.end(), 0.0) == 2.0);

  const std::vector<TokenId> bad = {12};
  CHECK_THROWS_AS(featurize(task, bad, 3, v), InvalidTokenError);
}

TEST_CASE("token distribution hand examples") {
  PolicyParams p(2, 1, 1);
  p.at(0, 0) = std::log(3.0);
  const std::vector<double> phi = {1.0, 0.0, 0.0};
  const auto probs = token_distribution(p, phi, 1.0);
  CHECK(probs[0] == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(probs[1] == doctest::Approx(0.25).epsilon(1e-15));

  PolicyParams zero(12, 4, 2);
  const std::vector<double> phi0(zero.feature_dim(), 1.0);
  for (double q : token_distribution(zero, phi0, 1.0)) CHECK(q == doctest::Approx(1.0 / 12));

  CHECK_THROWS_AS(token_distribution(p, phi, 0.0), ConfigError);
}

TEST_CASE("token distribution sums to one and is shift invariant") {
  SplitMix64 rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    auto p = testing::random_params(rng, 10, 3, 2, 3.0);
    const auto phi = testing::random_vector(rng, p.feature_dim());
    const auto probs = token_distribution(p, phi, 0.7);
    CHECK(std::accumulate(probs.begin(), probs.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));

    // Adding the same row vector to every row shifts every logit equally.
    auto shifted = p;
    const auto offset = testing::random_vector(rng, p.feature_dim(), 50.0);
    for (TokenId r = 0; r < 10; ++r)
      for (std::size_t c = 0; c < p.feature_dim(); ++c) shifted.at(r, c) += offset[c];
    const auto probs2 = token_distribution(shifted, phi, 0.7);
    for (std::size_t i = 0; i < probs.size(); ++i) CHECK(probs2[i] == doctest::Approx(probs[i]).epsilon(1e-9));
  }
}

TEST_CASE("extreme logits stay finite") {
  PolicyParams p(2, 1, 1);
  p.at(0, 0) = 800.0;
  const std::vector<double> phi = {1.0, 0.0, 0.0};
  const auto lp = token_log_distribution(p, phi, 1.0);
  CHECK(lp[0] == doctest::Approx(0.0));
  CHECK(lp[1] == doctest::Approx(-800.0));
}

TEST_CASE("sampling replays the frozen stream with zero weights") {
  const auto v = Vocabulary::standard(4, 3);
  const PolicySnapshot snap(PolicyParams(12, 4, 2), v);
  const Task task = plain_task(4);
  auto rng = SplitMix64::derive(7, 0, 0, 0);
  const auto c = sample_completion(snap, task, 1.0, 10, rng);
  // tests/oracles/sample_replay.py
  CHECK(c.token_ids == std::vector<TokenId>{10, 2, 3, 7, 8, 2, 11, 1, 3, 5});
  CHECK(c.logprob() == doctest::Approx(-24.849066497880003).epsilon(1e-13));
  CHECK(c.length_before_eos(v.eos()) == 10);
}

TEST_CASE("sampling is reproducible and stops at eos") {
  SplitMix64 init(4);
  const auto v = Vocabulary::standard(4, 3);
  const PolicySnapshot snap(testing::random_params(init, 12, 4, 2), v);
  const Task task = plain_task(4);
  for (std::uint64_t s = 0; s < 30; ++s) {
    auto r1 = SplitMix64::derive(s, 1);
    auto r2 = SplitMix64::derive(s, 1);
    const auto a = sample_completion(snap, task, 1.0, 16, r1);
    const auto b = sample_completion(snap, task, 1.0, 16, r2);
    CHECK(a.token_ids == b.token_ids);
    CHECK(a.text == b.text);
    CHECK(a.token_ids.size() <= 16);
    const auto eos_pos = std::find(a.token_ids.begin(), a.token_ids.end(), v.eos());
    if (eos_pos != a.token_ids.end()) CHECK(eos_pos + 1 == a.token_ids.end());
    // Recorded per-step log-probabilities equal a fresh evaluation.
    const auto lp = step_logprobs(snap.params(), task.features, a.token_ids, 1.0);
    for (std::size_t t = 0; t < lp.size(); ++t) CHECK(lp[t] == doctest::Approx(a.step_logprobs[t]).epsilon(1e-13));
  }
}

TEST_CASE("greedy decoding breaks ties by lowest index") {
  const auto v = Vocabulary::standard(4, 3);
  PolicyParams p(12, 1, 1);
  const PolicySnapshot zero(p, v);
  const Task task = plain_task(1);
  const auto c = greedy_completion(zero, task, 5);
  CHECK(c.token_ids == std::vector<TokenId>(5, 0));
}

TEST_CASE("sequence log-probability examples") {
  PolicyParams p(10, 2, 2);
  const std::vector<double> x = {1.0, -1.0};
  const std::vector<TokenId> toks = {3, 1, 4};
  CHECK(sequence_logprob(p, x, toks, 1.0) == doctest::Approx(3.0 * std::log(0.1)).epsilon(1e-14));
  CHECK(sequence_logprob(p, x, std::span<const TokenId>{}, 1.0) == 0.0);
  const std::vector<TokenId> bad = {10};
  CHECK_THROWS_AS(sequence_logprob(p, x, bad, 1.0), InvalidTokenError);
}

TEST_CASE("gradient hand example") {
  PolicyParams p(2, 1, 1);
  p.at(0, 0) = std::log(3.0);
  const std::vector<double> x = {1.0};
  const std::vector<TokenId> tok = {0};
  const auto g = grad_sequence_logprob(p, x, tok, 1.0);
  REQUIRE(g.size() == 6);
  const std::vector<double> expected = {0.25, 0, 0, -0.25, 0, 0};
  for (std::size_t i = 0; i < 6; ++i) CHECK(g[i] == doctest::Approx(expected[i]).epsilon(1e-15));

  // Temperature 2: p0 = 3^(1/2) / (3^(1/2) + 1), d/dw00 = (1 - p0) / 2.
  const auto g2 = grad_sequence_logprob(p, x, tok, 2.0);
  CHECK(g2[0] == doctest::Approx(0.18301270189221935).epsilon(1e-14));
  CHECK(g2[3] == doctest::Approx(-0.18301270189221935).epsilon(1e-14));
}

TEST_CASE("gradient columns sum to zero over the vocabulary") {
  SplitMix64 rng(8);
  auto p = testing::random_params(rng, 9, 3, 2);
  const auto x = testing::random_vector(rng, 3);
  const auto toks = testing::random_tokens(rng, 6, 9);
  const auto g = grad_sequence_logprob(p, x, toks, 1.3);
  const std::size_t d = p.feature_dim();
  for (std::size_t c = 0; c < d; ++c) {
    double s = 0.0;
    for (std::size_t r = 0; r < 9; ++r) s += g[r * d + c];
    CHECK(std::abs(s) < 1e-12);
  }
}

TEST_CASE("gradient matches central differences") {
  SplitMix64 rng(9);
  for (int rep = 0; rep < 5; ++rep) {
    auto p = testing::random_params(rng, 10, 3, 2);
    const auto x = testing::random_vector(rng, 3);
    const auto toks = testing::random_tokens(rng, 5, 10);
    const double temp = 0.5 + rng.uniform();
    const auto g = grad_sequence_logprob(p, x, toks, temp);
    const auto fd = testing::central_differences(
        p, [&](const PolicyParams& q) { return sequence_logprob(q, x, toks, temp); });
    CHECK(testing::relative_error(g, fd) <= 1e-6);
  }
}

TEST_CASE("accumulate_logprob_grad weights tokens by their coefficient") {
  SplitMix64 rng(10);
  auto p = testing::random_params(rng, 10, 2, 2);
  const auto x = testing::random_vector(rng, 2);
  const std::vector<TokenId> toks = {1, 2};
  std::vector<double> grad(p.weights().size(), 0.0);
  const std::vector<double> coeffs = {2.0, 0.0};
  accumulate_logprob_grad(p, x, toks, 1.0, coeffs, grad);
  const std::vector<TokenId> first = {1};
  const auto g1 = grad_sequence_logprob(p, x, first, 1.0);
  for (std::size_t i = 0; i < grad.size(); ++i) CHECK(grad[i] == doctest::Approx(2.0 * g1[i]).epsilon(1e-13));
}

TEST_CASE("checkpoint round trip is exact") {
  SplitMix64 rng(12);
  const auto v = Vocabulary::standard(4, 3);
  const PolicySnapshot snap(testing::random_params(rng, 12, 4, 3, 1e3), v);
  std::stringstream ss;
  write_checkpoint(snap, ss);
  const auto back = read_checkpoint(ss);
  CHECK(back.params() == snap.params());
  CHECK(back.vocab() == snap.vocab());
}

TEST_CASE("checkpoint text format") {
  const auto v = Vocabulary::standard(4, 1);
  const PolicySnapshot snap(PolicyParams(10, 1, 1), v);
  std::stringstream ss;
  write_checkpoint(snap, ss);
  std::string line;
  std::getline(ss, line);
  CHECK(line == "grpo-echo-ckpt v1");
  std::getline(ss, line);
  CHECK(line == "10 11 1 1");
  std::getline(ss, line);
  CHECK(line == "<think> </think> <answer> </answer> <eos> A B C D t0");
  std::getline(ss, line);
  CHECK(line == "0 0 0 0 0 0 0 0 0 0 0");
}

TEST_CASE("checkpoint errors name the line") {
  const auto v = Vocabulary::standard(4, 1);
  std::stringstream good;
  write_checkpoint(PolicySnapshot(PolicyParams(10, 1, 1), v), good);
  std::string text = good.str();

  std::stringstream wrong_dims(std::string("grpo-echo-ckpt v1\n10 12 1 1\n") + text.substr(text.find('<')));
  try {
    read_checkpoint(wrong_dims);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }

  std::stringstream bad_magic("nope\n");
  CHECK_THROWS_AS(read_checkpoint(bad_magic), ParseError);

  const auto pos = text.rfind("0 0");
  text.replace(pos, 3, "0 x");
  std::stringstream bad_cell(text);
  CHECK_THROWS_AS(read_checkpoint(bad_cell), ParseError);

  CHECK_THROWS_WITH_AS(read_checkpoint(std::filesystem::path("/nonexistent/x.ckpt")),
                       doctest::Contains("/nonexistent/x.ckpt"), std::runtime_error);
}

TEST_CASE("format prior greedy output is well formed") {
  const auto v = Vocabulary::standard(4, 8);
  const std::size_t task_dim = 8;
  const auto p = format_prior(v, task_dim, 3, 4.0, 2.0);
  Task task = plain_task(task_dim, 0.25);
  const auto c = greedy_completion(PolicySnapshot(p, v), task, 24);
  CHECK(c.text == "<think>t0</think> <answer>A</answer>");
  CHECK(c.token_ids.back() == v.eos());
}

TEST_CASE("percept prior links cue pairs to fillers only after <think>") {
  const std::size_t n = 4;
  const auto v = Vocabulary::standard(4, n * n);
  const std::size_t task_dim = 2 * n;
  auto p = format_prior(v, task_dim, 3, 4.0, 2.0);
  add_percept_prior(p, v, TaskMode::xmodal, n, 2.0, 2.0);
  Task task;
  task.id = "x";
  task.options = {"1", "2", "3", "4"};
  task.gold = OptionSet::single(0);
  task.features.assign(task_dim, 0.0);
  task.features[2] = 1.0;      // a = 2
  task.features[n + 3] = 1.0;  // v = 3
  const auto c = greedy_completion(PolicySnapshot(p, v), task, 24);
  REQUIRE(c.token_ids.size() >= 2);
  CHECK(c.token_ids[0] == v.think_open());
  CHECK(c.token_ids[1] == v.fillers()[2 * n + 3]);
  CHECK(c.text.find("<answer>") != std::string::npos);

  // After a filler, the percept link is cancelled: no filler is favoured over </think>.
  const std::vector<TokenId> hist = {v.think_open(), v.fillers()[0]};
  const auto phi = featurize(task, hist, 3, v);
  const auto probs = token_distribution(p, phi, 1.0);
  for (TokenId f : v.fillers()) CHECK(probs[f] < probs[v.think_close()]);
}
