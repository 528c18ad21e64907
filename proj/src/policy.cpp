#include "grpo/policy.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>

#include "grpo/errors.hpp"
#include "grpo/kernels.hpp"

namespace grpo {

// -- params ------------------------------------------------------------------

PolicyParams::PolicyParams(std::size_t vocab_size, std::size_t task_dim, std::size_t window)
    : vocab_size_(vocab_size), task_dim_(task_dim), window_(window),
      weights_(vocab_size * (task_dim + window * vocab_size), 0.0) {
  if (window == 0) throw ConfigError("history window must be >= 1");
}

PolicyParams::PolicyParams(std::size_t vocab_size, std::size_t task_dim, std::size_t window,
                           std::vector<double> weights)
    : vocab_size_(vocab_size), task_dim_(task_dim), window_(window), weights_(std::move(weights)) {
  if (window == 0) throw ConfigError("history window must be >= 1");
  if (weights_.size() != vocab_size_ * feature_dim()) {
    throw ConfigError("parameter vector has " + std::to_string(weights_.size()) + " entries, expected " +
                      std::to_string(vocab_size_ * feature_dim()));
  }
  if (!all_finite()) throw ConfigError("parameter vector has non-finite entries");
}

bool PolicyParams::all_finite() const noexcept {
  return std::all_of(weights_.begin(), weights_.end(), [](double w) { return std::isfinite(w); });
}

PolicySnapshot::PolicySnapshot(PolicyParams params, Vocabulary vocab, SnapshotRole role)
    : params_(std::make_shared<const PolicyParams>(std::move(params))),
      vocab_(std::make_shared<const Vocabulary>(std::move(vocab))),
      role_(role) {
  if (params_->vocab_size() != vocab_->size()) {
    throw ConfigError("parameter rows (" + std::to_string(params_->vocab_size()) +
                      ") do not match vocabulary size (" + std::to_string(vocab_->size()) + ")");
  }
}

PolicySnapshot PolicySnapshot::with_role(SnapshotRole role) const {
  PolicySnapshot copy = *this;
  copy.role_ = role;
  return copy;
}

double Completion::logprob() const noexcept {
  double sum = 0.0;
  for (double lp : step_logprobs) sum += lp;
  return sum;
}

std::size_t Completion::length_before_eos(TokenId eos) const noexcept {
  auto it = std::find(token_ids.begin(), token_ids.end(), eos);
  return static_cast<std::size_t>(it - token_ids.begin());
}

// -- featurization and distributions ------------------------------------------

void featurize_into(std::span<const double> task_features, std::span<const TokenId> history,
                    std::size_t window, std::size_t vocab_size, std::span<double> out) {
  if (window == 0) throw ConfigError("history window must be >= 1");
  const std::size_t task_dim = task_features.size();
  if (out.size() != task_dim + window * vocab_size) {
    throw ConfigError("feature buffer has wrong dimension");
  }
  std::copy(task_features.begin(), task_features.end(), out.begin());
  std::fill(out.begin() + static_cast<std::ptrdiff_t>(task_dim), out.end(), 0.0);
  const std::size_t visible = std::min(window, history.size());
  for (std::size_t lag = 1; lag <= visible; ++lag) {
    const TokenId token = history[history.size() - lag];
    if (token >= vocab_size) {
      throw InvalidTokenError("history token id " + std::to_string(token) + " >= vocabulary size " +
                              std::to_string(vocab_size));
    }
    out[task_dim + (lag - 1) * vocab_size + token] = 1.0;
  }
}

std::vector<double> featurize(const Task& task, std::span<const TokenId> history, std::size_t window,
                              const Vocabulary& vocab) {
  std::vector<double> phi(task.features.size() + window * vocab.size());
  featurize_into(task.features, history, window, vocab.size(), phi);
  return phi;
}

void log_softmax_inplace(std::span<double> logits) {
  double max = -std::numeric_limits<double>::infinity();
  for (double z : logits) {
    if (!std::isfinite(z)) throw NumericalError("non-finite logit");
    max = std::max(max, z);
  }
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - max);
  const double lse = max + std::log(sum);
  for (double& z : logits) z -= lse;
}

void token_log_distribution_into(const PolicyParams& params, std::span<const double> phi,
                                 double temperature, std::span<double> out) {
  if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
  if (phi.size() != params.feature_dim()) throw ConfigError("feature vector has wrong dimension");
  kernels::gemv(params.weights(), params.vocab_size(), params.feature_dim(), phi, out);
  if (temperature != 1.0) {
    for (double& z : out) z /= temperature;
  }
  log_softmax_inplace(out);
}

std::vector<double> token_log_distribution(const PolicyParams& params, std::span<const double> phi,
                                           double temperature) {
  std::vector<double> out(params.vocab_size());
  token_log_distribution_into(params, phi, temperature, out);
  return out;
}

std::vector<double> token_distribution(const PolicyParams& params, std::span<const double> phi,
                                       double temperature) {
  auto out = token_log_distribution(params, phi, temperature);
  for (double& v : out) v = std::exp(v);
  return out;
}

// -- decoding -----------------------------------------------------------------

namespace {

void check_task_dim(const PolicyParams& params, std::span<const double> features) {
  if (features.size() != params.task_dim()) {
    throw ConfigError("task has " + std::to_string(features.size()) +
                      " features but the policy expects " + std::to_string(params.task_dim()));
  }
}

TokenId draw(std::span<const double> logp, double u) {
  double cumulative = 0.0;
  TokenId last_positive = 0;
  for (std::size_t i = 0; i < logp.size(); ++i) {
    const double p = std::exp(logp[i]);
    if (p > 0.0) last_positive = static_cast<TokenId>(i);
    cumulative += p;
    if (u < cumulative) return static_cast<TokenId>(i);
  }
  return last_positive;
}

TokenId argmax(std::span<const double> logp) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < logp.size(); ++i) {
    if (logp[i] > logp[best]) best = i;
  }
  return static_cast<TokenId>(best);
}

template <typename Pick>
Completion decode(const PolicySnapshot& snapshot, const Task& task, double temperature,
                  std::size_t max_len, Pick&& pick) {
  if (max_len == 0) throw ConfigError("max_len must be >= 1");
  const auto& params = snapshot.params();
  check_task_dim(params, task.features);
  Completion c;
  std::vector<double> phi(params.feature_dim());
  std::vector<double> logp(params.vocab_size());
  const TokenId eos = snapshot.vocab().eos();
  while (c.token_ids.size() < max_len) {
    featurize_into(task.features, c.token_ids, params.window(), params.vocab_size(), phi);
    token_log_distribution_into(params, phi, temperature, logp);
    const TokenId next = pick(std::span<const double>(logp));
    c.token_ids.push_back(next);
    c.step_logprobs.push_back(logp[next]);
    if (next == eos) break;
  }
  c.text = snapshot.vocab().detokenize(c.token_ids);
  return c;
}

}  // namespace

Completion sample_completion(const PolicySnapshot& snapshot, const Task& task, double temperature,
                             std::size_t max_len, SplitMix64& rng) {
  return decode(snapshot, task, temperature, max_len,
                [&rng](std::span<const double> logp) { return draw(logp, rng.uniform()); });
}

Completion greedy_completion(const PolicySnapshot& snapshot, const Task& task, std::size_t max_len) {
  return decode(snapshot, task, 1.0, max_len, [](std::span<const double> logp) { return argmax(logp); });
}

// -- log-probabilities and gradients -------------------------------------------

std::vector<double> step_logprobs(const PolicyParams& params, std::span<const double> task_features,
                                  std::span<const TokenId> tokens, double temperature) {
  check_task_dim(params, task_features);
  std::vector<double> out;
  out.reserve(tokens.size());
  std::vector<double> phi(params.feature_dim());
  std::vector<double> logp(params.vocab_size());
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    if (tokens[t] >= params.vocab_size()) {
      throw InvalidTokenError("token id " + std::to_string(tokens[t]) + " >= vocabulary size " +
                              std::to_string(params.vocab_size()));
    }
    featurize_into(task_features, tokens.first(t), params.window(), params.vocab_size(), phi);
    token_log_distribution_into(params, phi, temperature, logp);
    out.push_back(logp[tokens[t]]);
  }
  return out;
}

double sequence_logprob(const PolicyParams& params, std::span<const double> task_features,
                        std::span<const TokenId> tokens, double temperature) {
  double sum = 0.0;
  for (double lp : step_logprobs(params, task_features, tokens, temperature)) sum += lp;
  return sum;
}

void accumulate_logprob_grad(const PolicyParams& params, std::span<const double> task_features,
                             std::span<const TokenId> tokens, double temperature,
                             std::span<const double> coeffs, std::span<double> grad) {
  check_task_dim(params, task_features);
  if (coeffs.size() != tokens.size()) throw ConfigError("one coefficient per token required");
  if (grad.size() != params.weights().size()) throw ConfigError("gradient buffer has wrong size");
  std::vector<double> phi(params.feature_dim());
  std::vector<double> delta(params.vocab_size());
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    if (tokens[t] >= params.vocab_size()) {
      throw InvalidTokenError("token id " + std::to_string(tokens[t]) + " >= vocabulary size " +
                              std::to_string(params.vocab_size()));
    }
    if (coeffs[t] == 0.0) continue;
    featurize_into(task_features, tokens.first(t), params.window(), params.vocab_size(), phi);
    token_log_distribution_into(params, phi, temperature, delta);
    const double scale = coeffs[t] / temperature;
    for (double& d : delta) d = -std::exp(d) * scale;
    delta[tokens[t]] += scale;
    kernels::ger(delta, phi, grad);
  }
}

std::vector<double> grad_sequence_logprob(const PolicyParams& params,
                                          std::span<const double> task_features,
                                          std::span<const TokenId> tokens, double temperature) {
  std::vector<double> grad(params.weights().size(), 0.0);
  const std::vector<double> ones(tokens.size(), 1.0);
  accumulate_logprob_grad(params, task_features, tokens, temperature, ones, grad);
  return grad;
}

// -- initialisation -------------------------------------------------------------

PolicyParams format_prior(const Vocabulary& vocab, std::size_t task_dim, std::size_t window,
                          double strength, double feature_mass) {
  if (!(feature_mass > 0.0)) throw ConfigError("feature mass must be positive");
  PolicyParams p(vocab.size(), task_dim, window);
  const TokenId think = vocab.think_open();

  for (std::size_t j = 0; j < task_dim; ++j) p.at(think, j) = strength / feature_mass;
  // Any previous token cancels the start preference.
  for (std::size_t prev = 0; prev < vocab.size(); ++prev) {
    p.at(think, p.history_column(1, static_cast<TokenId>(prev))) = -2.0 * strength;
  }

  auto raise = [&](TokenId prev, TokenId next) { p.at(next, p.history_column(1, prev)) += strength; };
  for (TokenId f : vocab.fillers()) {
    raise(think, f);
    raise(f, vocab.think_close());
  }
  raise(vocab.think_close(), vocab.answer_open());
  for (std::size_t i = 0; i < vocab.letter_count(); ++i) {
    raise(vocab.answer_open(), vocab.letter(i));
    raise(vocab.letter(i), vocab.answer_close());
  }
  raise(vocab.answer_close(), vocab.eos());
  return p;
}

void add_percept_prior(PolicyParams& params, const Vocabulary& vocab, TaskMode mode, std::size_t n,
                       double strength, double feature_mass) {
  const std::size_t percepts = mode == TaskMode::xmodal ? n * n : n;
  if (vocab.fillers().size() < percepts) {
    throw ConfigError("percept prior needs at least " + std::to_string(percepts) + " filler tokens");
  }
  const double peak = mode == TaskMode::xmodal ? 2.0 * strength : strength;
  for (std::size_t i = 0; i < percepts; ++i) {
    const TokenId token = vocab.fillers()[i];
    if (mode == TaskMode::xmodal) {
      params.at(token, i / n) += strength;
      params.at(token, n + i % n) += strength;
    } else {
      params.at(token, i) += strength;
    }
  }
  for (TokenId f : vocab.fillers()) {
    for (std::size_t prev = 0; prev < vocab.size(); ++prev) {
      if (prev != vocab.think_open()) params.at(f, params.history_column(1, static_cast<TokenId>(prev))) -= peak;
    }
  }
  for (std::size_t j = 0; j < params.task_dim(); ++j) params.at(vocab.think_open(), j) += peak / feature_mass;
}

// -- checkpoints ------------------------------------------------------------------

namespace {

constexpr std::string_view kCheckpointMagic = "grpo-echo-ckpt v1";

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

[[noreturn]] void parse_fail(std::size_t line, const std::string& what) {
  throw ParseError("checkpoint line " + std::to_string(line) + ": " + what);
}

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  for (std::string tok; ss >> tok;) out.push_back(tok);
  return out;
}

std::size_t parse_size(const std::string& s, std::size_t line) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) parse_fail(line, "expected integer, got '" + s + "'");
  return v;
}

double parse_double(const std::string& s, std::size_t line) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) {
    parse_fail(line, "expected finite number, got '" + s + "'");
  }
  return v;
}

}  // namespace

void write_checkpoint(const PolicySnapshot& snapshot, std::ostream& out) {
  const auto& p = snapshot.params();
  out << kCheckpointMagic << '\n';
  out << p.vocab_size() << ' ' << p.feature_dim() << ' ' << p.window() << ' ' << p.task_dim() << '\n';
  const auto syms = snapshot.vocab().symbols();
  for (std::size_t i = 0; i < syms.size(); ++i) out << (i ? " " : "") << syms[i];
  out << '\n';
  for (std::size_t r = 0; r < p.vocab_size(); ++r) {
    const auto row = p.row(static_cast<TokenId>(r));
    std::string line;
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) line.push_back(' ');
      line += format_double(row[c]);
    }
    out << line << '\n';
  }
}

void write_checkpoint(const PolicySnapshot& snapshot, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_checkpoint(snapshot, out);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

PolicySnapshot read_checkpoint(std::istream& in) {
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line) || line != kCheckpointMagic) {
    parse_fail(1, "expected header '" + std::string(kCheckpointMagic) + "'");
  }
  ++lineno;
  if (!std::getline(in, line)) parse_fail(lineno, "missing dimensions");
  auto dims = split_ws(line);
  if (dims.size() != 4) parse_fail(lineno, "expected 'V D k D_task'");
  const std::size_t v = parse_size(dims[0], lineno);
  const std::size_t d = parse_size(dims[1], lineno);
  const std::size_t k = parse_size(dims[2], lineno);
  const std::size_t task_dim = parse_size(dims[3], lineno);
  if (k == 0) parse_fail(lineno, "window k must be >= 1");
  if (d != task_dim + k * v) parse_fail(lineno, "D must equal D_task + k*V");

  ++lineno;
  if (!std::getline(in, line)) parse_fail(lineno, "missing vocabulary");
  auto syms = split_ws(line);
  if (syms.size() != v) {
    parse_fail(lineno, "vocabulary has " + std::to_string(syms.size()) + " symbols, header says " +
                           std::to_string(v));
  }
  std::optional<Vocabulary> vocab;
  try {
    vocab.emplace(std::move(syms));
  } catch (const ConfigError& e) {
    parse_fail(lineno, e.what());
  }

  std::vector<double> weights;
  weights.reserve(v * d);
  for (std::size_t r = 0; r < v; ++r) {
    ++lineno;
    if (!std::getline(in, line)) parse_fail(lineno, "missing weight row " + std::to_string(r));
    auto cells = split_ws(line);
    if (cells.size() != d) {
      parse_fail(lineno, "row has " + std::to_string(cells.size()) + " values, expected " + std::to_string(d));
    }
    for (const auto& cell : cells) weights.push_back(parse_double(cell, lineno));
  }
  while (std::getline(in, line)) {
    ++lineno;
    if (!split_ws(line).empty()) parse_fail(lineno, "unexpected data after last weight row");
  }
  return PolicySnapshot(PolicyParams(v, task_dim, k, std::move(weights)), std::move(*vocab));
}

PolicySnapshot read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  try {
    return read_checkpoint(in);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace grpo
