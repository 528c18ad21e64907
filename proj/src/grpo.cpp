#include "grpo/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "grpo/errors.hpp"
#include "grpo/kernels.hpp"

namespace grpo {

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "adam") return OptimizerKind::adam;
  if (name == "sgd") return OptimizerKind::sgd;
  throw ConfigError("unknown optimizer '" + std::string(name) + "' (expected sgd or adam)");
}

std::string_view optimizer_name(OptimizerKind kind) noexcept {
  return kind == OptimizerKind::adam ? "adam" : "sgd";
}

void TrainConfig::validate() const {
  if (group_size < 2) throw ConfigError("group_size must be >= 2");
  if (!(beta >= 0.0)) throw ConfigError("beta must be >= 0");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be finite and >= 0");
  if (!(temperature > 0.0)) throw ConfigError("temperature must be > 0");
  if (max_len == 0) throw ConfigError("max_len must be >= 1");
  if (!(eps_std >= 0.0)) throw ConfigError("eps_std must be >= 0");
  if (!(weights.lambda_acc >= 0.0) || !(weights.lambda_fmt >= 0.0)) {
    throw ConfigError("reward weights must be >= 0");
  }
  if (!(clip_eps >= 0.0)) throw ConfigError("clip_eps must be >= 0");
  if (threads == 0) throw ConfigError("threads must be >= 1");
}

std::vector<double> compute_advantages(std::span<const double> rewards, double eps_std) {
  const std::size_t g = rewards.size();
  if (g < 2) throw ConfigError("advantages need a group of at least 2 rewards");
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(g);
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  const double sd = std::sqrt(var / static_cast<double>(g));
  std::vector<double> out(g, 0.0);
  if (sd < eps_std) return out;
  for (std::size_t i = 0; i < g; ++i) out[i] = (rewards[i] - mean) / sd;
  return out;
}

std::vector<double> kl_terms(const PolicyParams& current, const PolicyParams& ref,
                             std::span<const double> task_features, std::span<const TokenId> tokens,
                             double temperature) {
  const auto cur = step_logprobs(current, task_features, tokens, temperature);
  const auto rf = step_logprobs(ref, task_features, tokens, temperature);
  std::vector<double> out(tokens.size());
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const double log_ratio = rf[t] - cur[t];
    // expm1 keeps the estimate exactly zero for equal log-probabilities.
    out[t] = std::expm1(log_ratio) - log_ratio;
  }
  return out;
}

double kl_to_reference(const PolicyParams& current, const PolicySnapshot& ref, const Task& task,
                       std::span<const TokenId> tokens, double temperature) {
  if (tokens.empty()) return 0.0;
  double sum = 0.0;
  for (double k : kl_terms(current, ref.params(), task.features, tokens, temperature)) sum += k;
  return sum / static_cast<double>(tokens.size());
}

LossAndGrad grpo_loss_and_grad(const PolicyParams& current, const PolicySnapshot& ref,
                               const GroupSample& group, double beta, double temperature,
                               double clip_eps) {
  const std::size_t g = group.completions.size();
  if (g == 0 || group.advantages.size() != g || group.task == nullptr) {
    throw ConfigError("group sample is incomplete");
  }
  const auto& features = group.task->features;
  LossAndGrad out;
  out.grad.assign(current.weights().size(), 0.0);
  const double inv_g = 1.0 / static_cast<double>(g);
  double objective = 0.0;

  for (std::size_t i = 0; i < g; ++i) {
    const auto& c = group.completions[i];
    const auto cur = step_logprobs(current, features, c.token_ids, temperature);
    const auto rf = step_logprobs(ref.params(), features, c.token_ids, temperature);
    const std::size_t len = cur.size();

    double logp = 0.0;
    for (double lp : cur) logp += lp;
    const double log_ratio = logp - c.logprob();
    const double ratio = std::exp(log_ratio);
    const double adv = group.advantages[i];

    double surrogate = ratio * adv;
    double surrogate_slope = ratio * adv;  // d surrogate / d log pi(o_i)
    if (clip_eps > 0.0) {
      const double clipped = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * adv;
      if (clipped < surrogate) {
        surrogate = clipped;
        surrogate_slope = 0.0;
      }
    }

    double kl = 0.0;
    std::vector<double> coeffs(len);
    for (std::size_t t = 0; t < len; ++t) {
      const double lr = rf[t] - cur[t];
      const double rho_minus_one = std::expm1(lr);
      kl += rho_minus_one - lr;
      // d k3 / d log pi_t = 1 - rho_t
      const double kl_slope = len ? -rho_minus_one / static_cast<double>(len) : 0.0;
      coeffs[t] = -inv_g * (surrogate_slope - beta * kl_slope);
    }
    if (len) kl /= static_cast<double>(len);

    objective += inv_g * (surrogate - beta * kl);
    out.mean_kl += inv_g * kl;
    accumulate_logprob_grad(current, features, c.token_ids, temperature, coeffs, out.grad);
  }
  out.loss = -objective;
  return out;
}

Optimizer::Optimizer(OptimizerKind kind, double lr, double beta1, double beta2, double eps,
                     std::size_t size)
    : kind_(kind), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  if (kind_ == OptimizerKind::adam) {
    m_.assign(size, 0.0);
    v_.assign(size, 0.0);
  }
}

void Optimizer::step(std::span<double> params, std::span<const double> grad) {
  ++t_;
  if (kind_ == OptimizerKind::sgd) {
    kernels::axpy(-lr_, grad, params);
    return;
  }
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t j = 0; j < params.size(); ++j) {
    m_[j] = beta1_ * m_[j] + (1.0 - beta1_) * grad[j];
    v_[j] = beta2_ * v_[j] + (1.0 - beta2_) * grad[j] * grad[j];
    params[j] -= lr_ * (m_[j] / c1) / (std::sqrt(v_[j] / c2) + eps_);
  }
}

GroupSample rollout_group(const PolicySnapshot& old, const Task& task, const TrainConfig& config,
                          std::uint64_t step, std::uint64_t task_index) {
  GroupSample g;
  g.task = &task;
  for (std::size_t r = 0; r < config.group_size; ++r) {
    auto rng = SplitMix64::derive(config.seed, step, task_index, r);
    g.completions.push_back(sample_completion(old, task, config.temperature, config.max_len, rng));
    g.breakdowns.push_back(grade_completion(g.completions.back(), task, config.weights));
    g.rewards.push_back(g.breakdowns.back().total);
  }
  g.advantages = compute_advantages(g.rewards, config.eps_std);
  return g;
}

Trainer::Trainer(TrainConfig config, PolicySnapshot initial)
    : config_(std::move(config)),
      reference_(initial.with_role(SnapshotRole::reference)),
      params_(initial.params()),
      optimizer_(config_.optimizer, config_.lr, config_.adam_beta1, config_.adam_beta2, config_.adam_eps,
                 initial.params().weights().size()) {
  config_.validate();
}

PolicySnapshot Trainer::snapshot() const {
  return PolicySnapshot(params_, reference_.vocab(), SnapshotRole::current);
}

StepMetrics Trainer::train_step(std::span<const Task> batch) {
  if (batch.empty()) throw ConfigError("training batch is empty");
  const PolicySnapshot old(params_, reference_.vocab(), SnapshotRole::old);
  const std::uint64_t step = step_;

  std::vector<GroupSample> groups(batch.size());
  const std::size_t workers = std::min(config_.threads, batch.size());
  if (workers <= 1) {
    for (std::size_t b = 0; b < batch.size(); ++b) groups[b] = rollout_group(old, batch[b], config_, step, b);
  } else {
    std::vector<std::jthread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t b = w; b < batch.size(); b += workers) {
            groups[b] = rollout_group(old, batch[b], config_, step, b);
          }
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    pool.clear();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  StepMetrics m;
  m.step = step;
  std::vector<double> grad(params_.weights().size(), 0.0);
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  double samples = 0.0;
  for (const auto& g : groups) {
    auto lg = grpo_loss_and_grad(params_, reference_, g, config_.beta, config_.temperature, config_.clip_eps);
    m.loss += inv_b * lg.loss;
    m.mean_kl += inv_b * lg.mean_kl;
    kernels::axpy(inv_b, lg.grad, grad);
    for (std::size_t i = 0; i < g.completions.size(); ++i) {
      m.mean_total_reward += g.breakdowns[i].total;
      m.mean_acc_reward += g.breakdowns[i].r_acc;
      m.mean_fmt_reward += g.breakdowns[i].r_fmt;
      m.mean_completion_len += static_cast<double>(g.completions[i].length_before_eos(old.vocab().eos()));
      samples += 1.0;
    }
  }
  m.mean_total_reward /= samples;
  m.mean_acc_reward /= samples;
  m.mean_fmt_reward /= samples;
  m.mean_completion_len /= samples;

  if (!std::isfinite(m.loss) || !std::all_of(grad.begin(), grad.end(), [](double x) { return std::isfinite(x); })) {
    throw NumericalError("step " + std::to_string(step) + ": non-finite loss or gradient (loss=" +
                         std::to_string(m.loss) + ", kl=" + std::to_string(m.mean_kl) + ")");
  }
  optimizer_.step(params_.weights(), grad);
  if (!params_.all_finite()) {
    throw NumericalError("step " + std::to_string(step) + ": optimizer produced non-finite parameters");
  }
  last_groups_ = std::move(groups);
  ++step_;
  return m;
}

double evaluate(const PolicySnapshot& snapshot, std::span<const Task> tasks, std::size_t max_len) {
  if (tasks.empty()) throw ConfigError("empty evaluation set");
  double correct = 0.0;
  for (const auto& t : tasks) {
    const auto c = greedy_completion(snapshot, t, max_len);
    correct += grade_completion(c, t, RewardWeights{}).r_acc;
  }
  return correct / static_cast<double>(tasks.size());
}

std::vector<std::size_t> select_batch(std::uint64_t seed, std::uint64_t step, std::size_t batch_size,
                                      std::size_t pool_size) {
  if (pool_size == 0) throw ConfigError("training pool is empty");
  auto rng = SplitMix64::derive(seed, 0xBA7C4, step);
  std::vector<std::size_t> out(batch_size);
  for (auto& i : out) i = static_cast<std::size_t>(rng.below(pool_size));
  return out;
}

}  // namespace grpo
