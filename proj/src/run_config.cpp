#include "grpo/run_config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "grpo/errors.hpp"

namespace grpo {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size()) {
    throw ConfigError("invalid value '" + std::string(value) + "' for " + std::string(key));
  }
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(out)) throw ConfigError("non-finite value for " + std::string(key));
  }
  return out;
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Field {
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Field number_field(std::string_view key, T RunConfig::*member) {
  return {[key, member](RunConfig& c, std::string_view v) { c.*member = parse_number<T>(key, v); },
          [member](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return fmt_double(c.*member);
            else return std::to_string(c.*member);
          }};
}

template <typename T>
Field train_field(std::string_view key, T TrainConfig::*member) {
  return {[key, member](RunConfig& c, std::string_view v) { c.train.*member = parse_number<T>(key, v); },
          [member](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return fmt_double(c.train.*member);
            else return std::to_string(c.train.*member);
          }};
}

const std::vector<std::pair<std::string_view, Field>>& fields() {
  static const std::vector<std::pair<std::string_view, Field>> table = [] {
    std::vector<std::pair<std::string_view, Field>> t;
    // environment
    t.emplace_back("mode", Field{[](RunConfig& c, std::string_view v) { c.mode = parse_task_mode(v); },
                                 [](const RunConfig& c) { return std::string(task_mode_name(c.mode)); }});
    t.emplace_back("n_options", number_field("n_options", &RunConfig::n_options));
    t.emplace_back("noise", number_field("noise", &RunConfig::noise));
    t.emplace_back("n_train", number_field("n_train", &RunConfig::n_train));
    t.emplace_back("n_eval", number_field("n_eval", &RunConfig::n_eval));
    t.emplace_back("eval_seed", number_field("eval_seed", &RunConfig::eval_seed));
    // policy
    t.emplace_back("window", number_field("window", &RunConfig::window));
    t.emplace_back("fillers", number_field("fillers", &RunConfig::fillers));
    t.emplace_back("init", Field{[](RunConfig& c, std::string_view v) {
                                   if (v == "zero") c.init = InitKind::zero;
                                   else if (v == "format_prior") c.init = InitKind::format_prior;
                                   else throw ConfigError("init must be zero or format_prior");
                                 },
                                 [](const RunConfig& c) {
                                   return std::string(c.init == InitKind::zero ? "zero" : "format_prior");
                                 }});
    t.emplace_back("prior_strength", number_field("prior_strength", &RunConfig::prior_strength));
    t.emplace_back("percept_strength", number_field("percept_strength", &RunConfig::percept_strength));
    // optimisation
    t.emplace_back("seed", train_field("seed", &TrainConfig::seed));
    t.emplace_back("steps", train_field("steps", &TrainConfig::steps));
    t.emplace_back("batch_size", number_field("batch_size", &RunConfig::batch_size));
    t.emplace_back("group_size", train_field("group_size", &TrainConfig::group_size));
    t.emplace_back("beta", train_field("beta", &TrainConfig::beta));
    t.emplace_back("lambda_acc", Field{[](RunConfig& c, std::string_view v) {
                                         c.train.weights.lambda_acc = parse_number<double>("lambda_acc", v);
                                       },
                                       [](const RunConfig& c) { return fmt_double(c.train.weights.lambda_acc); }});
    t.emplace_back("lambda_fmt", Field{[](RunConfig& c, std::string_view v) {
                                         c.train.weights.lambda_fmt = parse_number<double>("lambda_fmt", v);
                                       },
                                       [](const RunConfig& c) { return fmt_double(c.train.weights.lambda_fmt); }});
    t.emplace_back("lr", train_field("lr", &TrainConfig::lr));
    t.emplace_back("temperature", train_field("temperature", &TrainConfig::temperature));
    t.emplace_back("max_len", train_field("max_len", &TrainConfig::max_len));
    t.emplace_back("eps_std", train_field("eps_std", &TrainConfig::eps_std));
    t.emplace_back("optimizer", Field{[](RunConfig& c, std::string_view v) { c.train.optimizer = parse_optimizer(v); },
                                      [](const RunConfig& c) { return std::string(optimizer_name(c.train.optimizer)); }});
    t.emplace_back("adam_beta1", train_field("adam_beta1", &TrainConfig::adam_beta1));
    t.emplace_back("adam_beta2", train_field("adam_beta2", &TrainConfig::adam_beta2));
    t.emplace_back("adam_eps", train_field("adam_eps", &TrainConfig::adam_eps));
    t.emplace_back("clip_eps", train_field("clip_eps", &TrainConfig::clip_eps));
    t.emplace_back("threads", train_field("threads", &TrainConfig::threads));
    // output
    t.emplace_back("out_dir", Field{[](RunConfig& c, std::string_view v) { c.out_dir = std::string(v); },
                                    [](const RunConfig& c) { return c.out_dir.string(); }});
    t.emplace_back("log_every", number_field("log_every", &RunConfig::log_every));
    t.emplace_back("checkpoint_every", number_field("checkpoint_every", &RunConfig::checkpoint_every));
    return t;
  }();
  return table;
}

}  // namespace

void RunConfig::validate() const {
  train.validate();
  if (n_options < kMinOptions || n_options > kMaxGeneratedOptions) throw ConfigError("n_options must be in [2, 8]");
  if (!(noise >= 0.0)) throw ConfigError("noise must be >= 0");
  if (n_train == 0) throw ConfigError("n_train must be >= 1");
  if (n_eval == 0) throw ConfigError("n_eval must be >= 1");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (window == 0) throw ConfigError("window must be >= 1");
  if (!(prior_strength >= 0.0)) throw ConfigError("prior_strength must be >= 0");
  if (!(percept_strength >= 0.0)) throw ConfigError("percept_strength must be >= 0");
  if (out_dir.empty()) throw ConfigError("out_dir must not be empty");
}

std::vector<std::string_view> run_config_keys() {
  std::vector<std::string_view> keys;
  for (const auto& [k, f] : fields()) keys.push_back(k);
  return keys;
}

void apply_setting(RunConfig& config, std::string_view key, std::string_view value) {
  for (const auto& [k, f] : fields()) {
    if (k == key) {
      f.set(config, trim(value));
      return;
    }
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

RunConfig parse_run_config(std::string_view text, RunConfig base) {
  std::istringstream in{std::string(text)};
  std::size_t lineno = 0;
  for (std::string raw; std::getline(in, raw);) {
    ++lineno;
    std::string_view line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    try {
      apply_setting(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return base;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_run_config(buf.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string format_run_config(const RunConfig& config) {
  std::string out;
  for (const auto& [k, f] : fields()) {
    out += std::string(k) + " = " + f.get(config) + "\n";
  }
  return out;
}

}  // namespace grpo
