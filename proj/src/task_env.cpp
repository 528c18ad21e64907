#include <algorithm>
#include <bit>
#include <cstdio>
#include <optional>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "grpo/errors.hpp"
#include "grpo/rng.hpp"
#include "grpo/task.hpp"

namespace grpo {

// -- OptionSet ---------------------------------------------------------------

OptionSet OptionSet::from_letters(std::string_view letters) {
  OptionSet s;
  for (char c : letters) {
    if (c < 'A' || c > 'Z') throw ConfigError("invalid option letter '" + std::string(1, c) + "'");
    s.insert(static_cast<std::size_t>(c - 'A'));
  }
  return s;
}

OptionSet OptionSet::single(std::size_t index) {
  OptionSet s;
  s.insert(index);
  return s;
}

void OptionSet::insert(std::size_t index) {
  if (index >= kMaxOptions) throw ConfigError("option index out of range");
  mask_ |= 1U << index;
}

std::size_t OptionSet::size() const noexcept { return static_cast<std::size_t>(std::popcount(mask_)); }

std::size_t OptionSet::span() const noexcept {
  return static_cast<std::size_t>(32 - std::countl_zero(mask_));
}

std::string OptionSet::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < kMaxOptions; ++i) {
    if (contains(i)) out.push_back(option_letter(i));
  }
  return out;
}

// -- tasks -------------------------------------------------------------------

void validate_task(const Task& task) {
  const auto n = task.option_count();
  if (n < kMinOptions || n > OptionSet::kMaxOptions) {
    throw ConfigError("task " + task.id + ": option count " + std::to_string(n) + " outside [2, 26]");
  }
  if (task.gold.empty()) throw ConfigError("task " + task.id + ": empty gold answer");
  if (task.gold.span() > n) throw ConfigError("task " + task.id + ": gold letter beyond the options");
  if (!std::all_of(task.features.begin(), task.features.end(), [](double x) { return std::isfinite(x); })) {
    throw ConfigError("task " + task.id + ": non-finite feature");
  }
}

TaskMode parse_task_mode(std::string_view name) {
  if (name == "unimodal") return TaskMode::unimodal;
  if (name == "xmodal") return TaskMode::xmodal;
  throw ConfigError("unknown task mode '" + std::string(name) + "' (expected unimodal or xmodal)");
}

std::string_view task_mode_name(TaskMode mode) noexcept {
  return mode == TaskMode::unimodal ? "unimodal" : "xmodal";
}

std::size_t task_feature_dim(TaskMode mode, std::size_t option_count) noexcept {
  return mode == TaskMode::unimodal ? option_count : 2 * option_count;
}

namespace {

void check_option_count(std::size_t n) {
  if (n < kMinOptions || n > kMaxGeneratedOptions) {
    throw ConfigError("generated tasks need 2..8 options, got " + std::to_string(n));
  }
}

Task build(TaskMode mode, std::size_t n, std::size_t cue_a, std::size_t cue_v, double noise,
           SplitMix64& rng, std::string id) {
  Task t;
  t.id = std::move(id);
  t.features.assign(task_feature_dim(mode, n), 0.0);
  t.features[cue_a] = 1.0;
  std::size_t gold = cue_a;
  if (mode == TaskMode::xmodal) {
    t.features[n + cue_v] = 1.0;
    gold = (cue_a + cue_v) % n;
    t.question = "Which option is implied jointly by cue " + std::to_string(cue_a) + " and cue " +
                 std::to_string(cue_v) + "?";
  } else {
    t.question = "Which option does cue " + std::to_string(cue_a) + " indicate?";
  }
  if (noise > 0.0) {
    for (double& f : t.features) f += noise * rng.normal();
  }
  for (std::size_t i = 0; i < n; ++i) t.options.push_back("option " + std::to_string(i + 1));
  t.gold = OptionSet::single(gold);
  return t;
}

}  // namespace

Task make_task(TaskMode mode, std::size_t option_count, std::size_t cue_a, std::size_t cue_v, double noise,
               std::uint64_t noise_seed, std::string id) {
  check_option_count(option_count);
  if (cue_a >= option_count || (mode == TaskMode::xmodal && cue_v >= option_count)) {
    throw ConfigError("cue index out of range");
  }
  SplitMix64 rng(noise_seed);
  return build(mode, option_count, cue_a, cue_v, noise, rng, std::move(id));
}

std::vector<Task> gen_tasks(const TaskGenSpec& spec) {
  check_option_count(spec.option_count);
  if (spec.count == 0) throw ConfigError("task count must be >= 1");
  if (!(spec.noise >= 0.0) || !std::isfinite(spec.noise)) throw ConfigError("noise must be >= 0");
  std::vector<Task> out;
  out.reserve(spec.count);
  for (std::size_t i = 0; i < spec.count; ++i) {
    auto rng = SplitMix64::derive(spec.seed, 0x7A5C, i);
    const auto n = spec.option_count;
    const auto a = static_cast<std::size_t>(rng.below(n));
    const auto v = spec.mode == TaskMode::xmodal ? static_cast<std::size_t>(rng.below(n)) : 0;
    char id[48];
    std::snprintf(id, sizeof id, "%s-%06zu", std::string(task_mode_name(spec.mode)).c_str(), i);
    out.push_back(build(spec.mode, n, a, v, spec.noise, rng, id));
  }
  return out;
}

// -- manifests ---------------------------------------------------------------

std::vector<double> hashed_text_features(std::string_view text, std::size_t dim) {
  if (dim == 0) throw ConfigError("hashed feature dimension must be >= 1");
  std::vector<double> out(dim, 0.0);
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && !std::isalnum(static_cast<unsigned char>(text[i]))) ++i;
    if (i >= text.size()) break;
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (; i < text.size() && std::isalnum(static_cast<unsigned char>(text[i])); ++i) {
      h ^= static_cast<unsigned char>(std::tolower(static_cast<unsigned char>(text[i])));
      h *= 0x100000001b3ULL;
    }
    out[h % dim] += (h >> 63) ? -1.0 : 1.0;
  }
  double norm = 0.0;
  for (double x : out) norm += x * x;
  if (norm > 0.0) {
    norm = std::sqrt(norm);
    for (double& x : out) x /= norm;
  }
  return out;
}

std::vector<Task> parse_manifest(std::string_view text, std::size_t hashed_dim) {
  using nlohmann::json;
  std::vector<Task> tasks;
  std::vector<std::string> problems;
  std::unordered_set<std::string> seen;
  std::optional<std::size_t> feature_dim;

  std::size_t lineno = 0;
  std::istringstream lines{std::string(text)};
  for (std::string line; std::getline(lines, line);) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    auto fail = [&](const std::string& why) { problems.push_back("line " + std::to_string(lineno) + ": " + why); };

    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error&) {
      fail("not valid JSON");
      continue;
    }
    if (!rec.is_object()) {
      fail("record is not a JSON object");
      continue;
    }
    bool ok = true;
    for (const char* key : {"id", "question", "options", "answer"}) {
      if (!rec.contains(key)) {
        fail(std::string("missing required field '") + key + "'");
        ok = false;
      }
    }
    if (!ok) continue;

    Task t;
    if (!rec["id"].is_string() || !rec["question"].is_string() || !rec["answer"].is_string()) {
      fail("'id', 'question' and 'answer' must be strings");
      continue;
    }
    t.id = rec["id"].get<std::string>();
    t.question = rec["question"].get<std::string>();
    const auto& opts = rec["options"];
    if (!opts.is_array() || opts.size() < kMinOptions || opts.size() > OptionSet::kMaxOptions ||
        !std::all_of(opts.begin(), opts.end(), [](const json& o) { return o.is_string(); })) {
      fail("'options' must be an array of 2..26 strings");
      continue;
    }
    for (const auto& o : opts) t.options.push_back(o.get<std::string>());

    const auto answer = rec["answer"].get<std::string>();
    const bool letters_ok =
        !answer.empty() && std::all_of(answer.begin(), answer.end(), [&](char c) {
          return c >= 'A' && static_cast<std::size_t>(c - 'A') < t.options.size();
        });
    if (!letters_ok) {
      fail("unknown answer letter in '" + answer + "'");
      continue;
    }
    t.gold = OptionSet::from_letters(answer);

    if (rec.contains("features")) {
      const auto& f = rec["features"];
      if (!f.is_array() || !std::all_of(f.begin(), f.end(), [](const json& x) { return x.is_number(); })) {
        fail("'features' must be an array of numbers");
        continue;
      }
      for (const auto& x : f) t.features.push_back(x.get<double>());
      if (!std::all_of(t.features.begin(), t.features.end(), [](double x) { return std::isfinite(x); })) {
        fail("non-finite feature");
        continue;
      }
    } else {
      std::string joined = t.question;
      for (const auto& o : t.options) joined += " " + o;
      t.features = hashed_text_features(joined, hashed_dim);
    }
    if (!feature_dim) feature_dim = t.features.size();
    if (t.features.size() != *feature_dim) {
      fail("feature dimension " + std::to_string(t.features.size()) + " differs from " +
           std::to_string(*feature_dim));
      continue;
    }
    if (!seen.insert(t.id).second) {
      fail("duplicate id '" + t.id + "'");
      continue;
    }
    tasks.push_back(std::move(t));
  }
  if (!problems.empty()) {
    std::string msg = "manifest rejected " + std::to_string(problems.size()) + " line(s):";
    for (const auto& p : problems) msg += "\n  " + p;
    throw LoadError(msg);
  }
  return tasks;
}

std::vector<Task> load_manifest(const std::filesystem::path& path, std::size_t hashed_dim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open manifest " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_manifest(buf.str(), hashed_dim);
  } catch (const LoadError& e) {
    throw LoadError(path.string() + ": " + e.what());
  }
}

std::string format_manifest(const std::vector<Task>& tasks) {
  std::string out;
  for (const auto& t : tasks) {
    nlohmann::ordered_json rec;
    rec["id"] = t.id;
    rec["question"] = t.question;
    rec["options"] = t.options;
    rec["answer"] = t.gold.to_string();
    rec["features"] = t.features;
    out += rec.dump();
    out.push_back('\n');
  }
  return out;
}

void write_manifest(const std::vector<Task>& tasks, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << format_manifest(tasks);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace grpo
