#include <doctest.h>

#include <fstream>
#include <sstream>

#include "grpo/errors.hpp"
#include "grpo/harness.hpp"
#include "grpo/metrics.hpp"
#include "test_util.hpp"

using namespace grpo;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

struct CliResult {
  int code;
  std::string out, err;
};

CliResult cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> small_train(const std::filesystem::path& out) {
  return {"train", "-o", out.string(), "-s", "steps=4", "-s", "n_train=40", "-s", "n_eval=20",
          "-s", "batch_size=4", "-s", "group_size=4", "-s", "checkpoint_every=2", "-s", "log_every=2"};
}

}  // namespace

TEST_CASE("run config parsing") {
  const auto c = parse_run_config("# comment\nsteps = 12\n\nbeta=0.5  # trailing\nmode = unimodal\n");
  CHECK(c.train.steps == 12);
  CHECK(c.train.beta == 0.5);
  CHECK(c.mode == TaskMode::unimodal);
  CHECK(c.n_options == 4);

  try {
    parse_run_config("steps = 3\nbogus = 1\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_run_config("steps = many\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("group_size = 1\n").validate(), ConfigError);
}

TEST_CASE("run config round trip covers every key") {
  RunConfig c;
  c.train.steps = 7;
  c.train.lr = 0.125;
  c.noise = 0.3;
  c.init = InitKind::zero;
  c.out_dir = "somewhere/else";
  const std::string text = format_run_config(c);
  CHECK(format_run_config(parse_run_config(text)) == text);
  for (auto key : run_config_keys()) CHECK(text.find(std::string(key) + " = ") != std::string::npos);
}

TEST_CASE("metrics csv round trip and errors") {
  StepMetrics m{3, -0.5, 1.25, 0.5, 0.75, 0.01, 6.5};
  const std::string text = std::string(kMetricsHeader) + "\n" + format_metrics_row(m) + "\n";
  const auto rows = parse_metrics_csv(text);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].step == 3);
  CHECK(rows[0].mean_completion_len == 6.5);

  CHECK_THROWS_AS(parse_metrics_csv(""), ParseError);
  CHECK_THROWS_AS(parse_metrics_csv(std::string(kMetricsHeader) + "\n"), ParseError);
  try {
    parse_metrics_csv("step,loss\n1,2\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("reward_total") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_metrics_csv(std::string(kMetricsHeader) + "\n1,x,0,0,0,0,0\n"), ParseError);
}

TEST_CASE("svg has two panels and one marker per row") {
  std::vector<StepMetrics> rows;
  for (std::size_t s = 0; s < 5; ++s) rows.push_back({s, 0.0, 1.0, 0.2 * double(s), 1.0, 0.0, 6.0 + double(s)});
  const auto svg = render_training_svg(rows);
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("(a) accuracy reward") != std::string::npos);
  CHECK(svg.find("(b) completion length") != std::string::npos);
  std::size_t circles = 0;
  for (auto pos = svg.find("<circle"); pos != std::string::npos; pos = svg.find("<circle", pos + 1)) ++circles;
  CHECK(circles == 10);

  const auto single = render_training_svg({rows.front()});
  CHECK(single.find("<circle") != std::string::npos);
  CHECK(single.find("nan") == std::string::npos);
}

TEST_CASE("regression slope") {
  CHECK(regression_slope({0, 1, 2, 3}, {1, 3, 5, 7}) == doctest::Approx(2.0));
  CHECK(regression_slope({0, 1, 2}, {4, 4, 4}) == 0.0);
}

TEST_CASE("cli train writes one row per step and is reproducible") {
  const auto dir = testing::scratch_dir("cli_train");
  auto r1 = cli(small_train(dir / "a"));
  REQUIRE_MESSAGE(r1.code == 0, r1.err);
  auto r2 = cli(small_train(dir / "b"));
  REQUIRE(r2.code == 0);
  const auto csv = slurp(dir / "a" / "metrics.csv");
  CHECK(csv.rfind(std::string(kMetricsHeader) + "\n", 0) == 0);
  CHECK(count_lines(csv) == 5);
  CHECK(csv == slurp(dir / "b" / "metrics.csv"));
  CHECK(slurp(dir / "a" / "final.ckpt") == slurp(dir / "b" / "final.ckpt"));
  CHECK(std::filesystem::exists(dir / "a" / "step_000002.ckpt"));
  CHECK(r1.out.find("final steps=4") != std::string::npos);

  auto ev = cli({"eval", "--checkpoint", (dir / "a" / "final.ckpt").string(), "--n", "20"});
  CHECK(ev.code == 0);
  const double acc = std::stod(ev.out);
  CHECK(acc >= 0.0);
  CHECK(acc <= 1.0);

  auto pl = cli({"plot", "--csv", (dir / "a" / "metrics.csv").string(), "--out", (dir / "a" / "plot.svg").string()});
  CHECK(pl.code == 0);
  CHECK(slurp(dir / "a" / "plot.svg").find("</svg>") != std::string::npos);
}

TEST_CASE("cli eval of a zero policy reports zero accuracy") {
  const auto dir = testing::scratch_dir("cli_eval");
  const auto v = Vocabulary::standard(4, 16);
  write_checkpoint(PolicySnapshot(PolicyParams(v.size(), 8, 3), v), dir / "zero.ckpt");
  auto r = cli({"eval", "--checkpoint", (dir / "zero.ckpt").string(), "--n", "50"});
  CHECK(r.code == 0);
  CHECK(r.out == "0.0000\n");

  auto wrong_dim = cli({"eval", "--checkpoint", (dir / "zero.ckpt").string(), "--mode", "unimodal"});
  CHECK(wrong_dim.code == 2);
}

TEST_CASE("cli errors and exit codes") {
  const auto dir = testing::scratch_dir("cli_err");
  const std::string missing = (dir / "missing.ckpt").string();
  auto r = cli({"eval", "--checkpoint", missing});
  CHECK(r.code == 2);
  CHECK(r.err.find(missing) != std::string::npos);

  CHECK(cli({}).code == 1);
  CHECK(cli({"frobnicate"}).code == 1);
  CHECK(cli({"train", "-s", "nonsense=1", "-o", (dir / "x").string()}).code == 1);
  CHECK(cli({"train", "-s", "steps", "-o", (dir / "x").string()}).code == 1);
  CHECK(cli({"plot", "--csv", (dir / "none.csv").string(), "--out", (dir / "p.svg").string()}).code == 2);
  CHECK(cli({"gen-data", "--n", "5"}).code == 1);
}

TEST_CASE("cli gen-data writes deterministic manifests") {
  const auto dir = testing::scratch_dir("cli_gen");
  const auto a = dir / "a.jsonl", b = dir / "b.jsonl";
  REQUIRE(cli({"gen-data", "--n", "100", "--seed", "3", "--out", a.string()}).code == 0);
  REQUIRE(cli({"gen-data", "--n", "100", "--seed", "3", "--out", b.string()}).code == 0);
  const auto text = slurp(a);
  CHECK(count_lines(text) == 100);
  CHECK(text == slurp(b));
  CHECK(load_manifest(a).size() == 100);

  auto ev = cli({"eval", "--checkpoint", (dir / "nope.ckpt").string(), "--manifest", a.string()});
  CHECK(ev.code == 2);
}
