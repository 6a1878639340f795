#include "ncmdp/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ncmdp/error.hpp"
#include "ncmdp/oracle.hpp"

namespace ncmdp {

namespace {

constexpr std::size_t kEpisodeStepCap = 1000000;

double max_of(const std::vector<double>& values) {
  return *std::max_element(values.begin(), values.end());
}

}  // namespace

void validate(const ExplicitMdp& model) {
  if (model.states.size() != model.transitions.size()) {
    throw Error(ErrorCode::InvalidModel, "state and transition tables differ in size");
  }
  if (model.start >= model.size()) throw Error(ErrorCode::InvalidModel, "start state out of range");
  for (std::size_t s = 0; s < model.size(); ++s) {
    for (const auto& row : model.transitions[s]) {
      double total = 0.0;
      for (const auto& tr : row) {
        if (!tr.terminal && (tr.next >= model.size() || model.transitions[tr.next].empty())) {
          throw Error(ErrorCode::InvalidModel, "dangling successor from state " + std::to_string(s));
        }
        total += tr.probability;
      }
      if (row.empty() || std::abs(total - 1.0) > 1e-12) {
        throw Error(ErrorCode::InvalidModel, "transition row of state " + std::to_string(s) +
                                                 " is not a distribution");
      }
    }
  }
}

std::vector<double>& QTable::row(const StateKey& key, std::size_t actions) {
  auto [it, inserted] = rows_.try_emplace(key);
  if (inserted) it->second.assign(actions, 0.0);
  return it->second;
}

const std::vector<double>* QTable::find(const StateKey& key) const {
  auto it = rows_.find(key);
  return it == rows_.end() ? nullptr : &it->second;
}

double QTable::value(const StateKey& key, std::size_t action) const {
  const auto* r = find(key);
  return (r && action < r->size()) ? (*r)[action] : 0.0;
}

std::size_t GreedyPolicy::action(const StateKey& key) const {
  auto it = actions_.find(key);
  return it == actions_.end() ? 0 : it->second;
}

std::size_t argmax(const std::vector<double>& values) {
  std::size_t best = 0;
  for (std::size_t a = 1; a < values.size(); ++a) {
    if (values[a] > values[best]) best = a;
  }
  return best;
}

GreedyPolicy greedy_policy(const QTable& q, KeyMode mode) {
  GreedyPolicy policy(mode);
  for (const auto& [key, values] : q) {
    if (!values.empty()) policy.set(key, argmax(values));
  }
  return policy;
}

std::vector<std::vector<double>> value_iteration_dense(const ExplicitMdp& model, double tol,
                                                       std::size_t max_iterations) {
  if (!(tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "tolerance must be positive");
  validate(model);
  std::vector<std::vector<double>> q(model.size());
  for (std::size_t s = 0; s < model.size(); ++s) q[s].assign(model.transitions[s].size(), 0.0);

  for (std::size_t it = 0; it < max_iterations; ++it) {
    double change = 0.0;
    for (std::size_t s = 0; s < model.size(); ++s) {
      for (std::size_t a = 0; a < q[s].size(); ++a) {
        double v = 0.0;
        for (const auto& tr : model.transitions[s][a]) {
          v += tr.probability * (tr.reward + (tr.terminal ? 0.0 : max_of(q[tr.next])));
        }
        change = std::max(change, std::abs(v - q[s][a]));
        q[s][a] = v;
      }
    }
    if (change < tol) return q;
  }
  throw Error(ErrorCode::IterationCap, "value iteration did not converge in " +
                                           std::to_string(max_iterations) + " sweeps");
}

QTable value_iteration(const ExplicitMdp& model, double tol, std::size_t max_iterations) {
  const auto dense = value_iteration_dense(model, tol, max_iterations);
  QTable q;
  for (std::size_t s = 0; s < model.size(); ++s) {
    if (dense[s].empty()) continue;
    q.row(make_key(model.states[s], KeyMode::Augmented), dense[s].size()) = dense[s];
  }
  return q;
}

QTable cui_value_iteration(const TabularNcmdp& model, double tol, CuiTerminal terminal,
                           std::size_t max_iterations) {
  if (!(tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "tolerance must be positive");
  const std::size_t n = model.state_count();
  std::vector<std::vector<double>> q(n);
  for (std::size_t s = 0; s < n; ++s) q[s].assign(model.action_count(s), 0.0);

  bool converged = false;
  for (std::size_t it = 0; it < max_iterations && !converged; ++it) {
    double change = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t a = 0; a < q[s].size(); ++a) {
        double v = 0.0;
        for (const auto& o : model.outcomes(s, a)) {
          double target = o.reward;
          if (!o.terminal) {
            target = std::min(o.reward, max_of(q[o.next]));
          } else if (terminal == CuiTerminal::ZeroContinuation) {
            target = std::min(o.reward, 0.0);
          }
          v += o.probability * target;
        }
        change = std::max(change, std::abs(v - q[s][a]));
        q[s][a] = v;
      }
    }
    converged = change < tol;
  }
  if (!converged) throw Error(ErrorCode::IterationCap, "min-update value iteration did not converge");

  QTable table;
  for (std::size_t s = 0; s < n; ++s) {
    if (!q[s].empty()) table.row(raw_key(static_cast<RawState>(s)), q[s].size()) = q[s];
  }
  return table;
}

// ---------------------------------------------------------------------------
// Q-learning

void validate(const TrainConfig& config) {
  if (!(config.epsilon >= 0.0 && config.epsilon <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "epsilon must lie in [0, 1]");
  }
  if (!(config.alpha_start > 0.0 && config.alpha_end > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "learning rates must be positive");
  }
  if (config.total_steps == 0) throw Error(ErrorCode::InvalidArgument, "total_steps must be positive");
  if (config.eval_episodes == 0) throw Error(ErrorCode::InvalidArgument, "eval_episodes must be positive");
}

double evaluate_policy(Environment& env, const Objective& objective, const GreedyPolicy& policy,
                       std::size_t episodes, std::uint64_t seed) {
  if (episodes == 0) throw Error(ErrorCode::InvalidArgument, "need at least one episode");
  MdpAdapter adapter(env, objective);
  CounterRng rng(seed);
  std::vector<double> rewards;
  double total = 0.0;
  for (std::size_t e = 0; e < episodes; ++e) {
    AugmentedState state = adapter.reset(rng());
    rewards.clear();
    while (true) {
      if (rewards.size() >= kEpisodeStepCap) throw Error(ErrorCode::HorizonExceeded, "episode never terminated");
      const std::size_t actions = adapter.action_count(state);
      std::size_t a = policy.action(state);
      if (a >= actions) a = 0;
      const AugmentedStep step = adapter.step(a);
      rewards.push_back(step.raw_reward);
      state = step.next;
      if (step.terminal) break;
    }
    total += objective.value(rewards);
  }
  return total / static_cast<double>(episodes);
}

double evaluate_policy_exact(const TabularNcmdp& model, const Objective& objective,
                             const GreedyPolicy& policy) {
  return exact_return(model, objective, as_stochastic(policy)).objective;
}

QLearningResult q_learning(Environment& env, const Objective& objective, const TrainConfig& config) {
  validate(config);
  const bool cui = config.rule == UpdateRule::CuiMin;
  const KeyMode mode = cui ? KeyMode::Raw : config.key_mode;

  QLearningResult result;
  QTable& q = result.q;
  MdpAdapter adapter(env, objective);
  CounterRng rng(config.seed);
  CounterRng eval_rng(config.seed, 1);

  std::size_t steps = 0;
  auto alpha_at = [&](std::size_t step) {
    const double frac = config.total_steps > 1
                            ? static_cast<double>(step) / static_cast<double>(config.total_steps - 1)
                            : 1.0;
    return config.alpha_start + (config.alpha_end - config.alpha_start) * frac;
  };
  std::unordered_map<StateKey, std::vector<std::size_t>, StateKeyHash> visits;
  auto step_size = [&](const StateKey& key, std::size_t a, std::size_t actions) {
    if (config.schedule == AlphaSchedule::Linear) return alpha_at(steps);
    auto& n = visits[key];
    n.resize(actions, 0);
    return 1.0 / static_cast<double>(++n[a]);
  };
  auto row_for = [&](const StateKey& key, std::size_t actions) -> std::vector<double>& {
    auto& r = q.row(key, actions);
    if (q.size() > config.state_cap) {
      throw Error(ErrorCode::StateCapExceeded, "Q-table exceeded " + std::to_string(config.state_cap) + " states");
    }
    return r;
  };
  auto evaluate = [&](std::size_t step) {
    const GreedyPolicy policy = greedy_policy(q, mode);
    result.curve.push_back({step, evaluate_policy(env, objective, policy, config.eval_episodes, eval_rng())});
  };

  std::size_t next_eval = config.eval_interval;
  while (steps < config.total_steps) {
    AugmentedState state = adapter.reset(rng());
    while (steps < config.total_steps) {
      const StateKey key = make_key(state, mode);
      const std::size_t actions = adapter.action_count(state);
      std::size_t a = 0;
      {
        const auto& values = row_for(key, actions);
        a = rng.uniform() < config.epsilon ? static_cast<std::size_t>(rng.below(actions)) : argmax(values);
      }
      const AugmentedStep step = adapter.step(a);

      double target = 0.0;
      if (cui) {
        target = step.raw_reward;
        if (!step.terminal) {
          const auto& next = row_for(make_key(step.next, mode), adapter.action_count(step.next));
          target = std::min(step.raw_reward, max_of(next));
        } else if (config.cui_terminal == CuiTerminal::ZeroContinuation) {
          target = std::min(step.raw_reward, 0.0);
        }
      } else {
        target = step.reward;
        if (!step.terminal) {
          target += max_of(row_for(make_key(step.next, mode), adapter.action_count(step.next)));
        }
      }
      auto& values = row_for(key, actions);
      values[a] += step_size(key, a, actions) * (target - values[a]);
      ++steps;
      state = step.next;
      if (step.terminal) break;
    }
    if (config.eval_interval > 0 && steps >= next_eval && steps < config.total_steps) {
      evaluate(steps);
      while (next_eval <= steps) next_eval += config.eval_interval;
    }
  }
  evaluate(steps);
  result.policy = greedy_policy(q, mode);
  return result;
}

// ---------------------------------------------------------------------------
// Policy gradient

std::vector<double> softmax(const std::vector<double>& logits) {
  std::vector<double> p(logits.size());
  const double top = max_of(logits);
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - top);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

std::vector<double>& SoftmaxPolicyTable::logits(const StateKey& key, std::size_t actions) {
  auto [it, inserted] = logits_.try_emplace(key);
  if (inserted) it->second.assign(actions, 0.0);
  return it->second;
}

std::vector<double> SoftmaxPolicyTable::probabilities(const StateKey& key, std::size_t actions) const {
  auto it = logits_.find(key);
  if (it == logits_.end()) return std::vector<double>(actions, 1.0 / static_cast<double>(actions));
  return softmax(it->second);
}

std::size_t SoftmaxPolicyTable::sample(const StateKey& key, std::size_t actions, CounterRng& rng) const {
  const auto probs = probabilities(key, actions);
  const double u = rng.uniform();
  double cumulative = 0.0;
  for (std::size_t a = 0; a < probs.size(); ++a) {
    cumulative += probs[a];
    if (u < cumulative) return a;
  }
  return probs.size() - 1;
}

double SoftmaxPolicyTable::entropy(const StateKey& key, std::size_t actions) const {
  double h = 0.0;
  for (double p : probabilities(key, actions)) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

SparseGradient episode_gradient(const SoftmaxPolicyTable& policy, const PolicySample& sample,
                                std::span<const double> rewards) {
  const std::size_t steps = sample.actions.size();
  if (sample.keys.size() != steps || sample.action_counts.size() != steps || rewards.size() != steps) {
    throw Error(ErrorCode::InconsistentRecord, "policy sample and rewards differ in length");
  }
  SparseGradient grad;
  double to_go = 0.0;
  for (std::size_t i = steps; i-- > 0;) {
    to_go += rewards[i];
    const std::size_t n = sample.action_counts[i];
    const auto probs = policy.probabilities(sample.keys[i], n);
    auto [it, inserted] = grad.try_emplace(sample.keys[i]);
    if (inserted) it->second.assign(n, 0.0);
    for (std::size_t a = 0; a < n; ++a) {
      const double indicator = a == sample.actions[i] ? 1.0 : 0.0;
      it->second[a] += to_go * (indicator - probs[a]);
    }
  }
  return grad;
}

namespace {

struct Rollout {
  PolicySample sample;
  std::vector<double> raw;
  std::vector<double> adapted;
  double entropy = 0.0;
};

// One episode through a PrefixMax adapter; records both reward streams.
Rollout roll_out(MdpAdapter& adapter, const SoftmaxPolicyTable& policy, CounterRng& rng) {
  Rollout out;
  AugmentedState state = adapter.reset(rng());
  while (true) {
    if (out.raw.size() >= kEpisodeStepCap) throw Error(ErrorCode::HorizonExceeded, "episode never terminated");
    const StateKey key = make_key(state, policy.key_mode());
    const std::size_t n = adapter.action_count(state);
    const std::size_t a = policy.sample(key, n, rng);
    out.entropy += policy.entropy(key, n);
    const AugmentedStep step = adapter.step(a);
    out.sample.keys.push_back(key);
    out.sample.action_counts.push_back(n);
    out.sample.actions.push_back(a);
    out.raw.push_back(step.raw_reward);
    out.adapted.push_back(step.reward);
    state = step.next;
    if (step.terminal) break;
  }
  return out;
}

// Running per-coordinate mean and sum of squared deviations (Welford).
// Coordinates first seen late are treated as zero in earlier samples.
class GradientMoments {
 public:
  void add(const SparseGradient& g) {
    ++count_;
    const double n = static_cast<double>(count_);
    for (const auto& [key, values] : g) {
      auto [it, inserted] = moments_.try_emplace(key);
      if (inserted) it->second.assign(values.size(), {0.0, 0.0});
    }
    for (auto& [key, coords] : moments_) {
      auto it = g.find(key);
      for (std::size_t a = 0; a < coords.size(); ++a) {
        const double x = it == g.end() ? 0.0 : it->second[a];
        auto& [mean, m2] = coords[a];
        const double delta = x - mean;
        mean += delta / n;
        m2 += delta * (x - mean);
      }
    }
  }

  double variance() const {
    double v = 0.0;
    for (const auto& [key, coords] : moments_) {
      for (const auto& c : coords) v += c.second;
    }
    return v / static_cast<double>(count_);
  }

  double mean_norm2() const {
    double v = 0.0;
    for (const auto& [key, coords] : moments_) {
      for (const auto& c : coords) v += c.first * c.first;
    }
    return v;
  }

  double mean_dot(const GradientMoments& other) const {
    double v = 0.0;
    for (const auto& [key, coords] : moments_) {
      auto it = other.moments_.find(key);
      if (it == other.moments_.end()) continue;
      for (std::size_t a = 0; a < coords.size() && a < it->second.size(); ++a) {
        v += coords[a].first * it->second[a].first;
      }
    }
    return v;
  }

 private:
  std::size_t count_ = 0;
  std::unordered_map<StateKey, std::vector<std::pair<double, double>>, StateKeyHash> moments_;
};

}  // namespace

ReinforceResult reinforce(Environment& env, ReturnMode mode, const ReinforceConfig& config,
                          const CheckpointFn& on_checkpoint) {
  if (!(config.learning_rate >= 0.0)) throw Error(ErrorCode::InvalidArgument, "learning rate must be non-negative");
  if (config.log_interval == 0) throw Error(ErrorCode::InvalidArgument, "log_interval must be positive");

  const KeyMode key_mode = mode == ReturnMode::Cumulative ? KeyMode::Raw : config.key_mode;
  ReinforceResult result{SoftmaxPolicyTable(key_mode), {}};
  SoftmaxPolicyTable& policy = result.policy;
  const Objective prefix_max = Objective::prefix_max();
  MdpAdapter adapter(env, prefix_max);
  CounterRng rng(config.seed);

  if (on_checkpoint) on_checkpoint(0, policy);
  double improvement_sum = 0.0;
  double entropy_sum = 0.0;
  std::size_t logged = 0;

  for (std::size_t episode = 1; episode <= config.episodes; ++episode) {
    const Rollout r = roll_out(adapter, policy, rng);
    const auto& rewards = mode == ReturnMode::Cumulative ? r.raw : r.adapted;
    if (config.learning_rate > 0.0) {
      const SparseGradient grad = episode_gradient(policy, r.sample, rewards);
      for (const auto& [key, g] : grad) {
        auto& logits = policy.logits(key, g.size());
        for (std::size_t a = 0; a < g.size(); ++a) {
          logits[a] = std::clamp(logits[a] + config.learning_rate * g[a], -config.logit_clamp,
                                 config.logit_clamp);
        }
      }
    }
    improvement_sum += prefix_max.value(r.raw);
    entropy_sum += r.entropy / static_cast<double>(r.raw.size());
    ++logged;
    if (episode % config.log_interval == 0) {
      result.curve.push_back({episode, improvement_sum / static_cast<double>(logged),
                              entropy_sum / static_cast<double>(logged)});
      improvement_sum = entropy_sum = 0.0;
      logged = 0;
    }
    if (on_checkpoint && config.checkpoint_interval > 0 && episode % config.checkpoint_interval == 0) {
      on_checkpoint(episode, policy);
    }
  }
  return result;
}

GradientDiagnostics gradient_diagnostics(const SoftmaxPolicyTable& policy, Environment& env,
                                         std::size_t n, std::uint64_t seed) {
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "need at least two episodes");
  if (policy.key_mode() != KeyMode::Raw) {
    throw Error(ErrorCode::InvalidArgument, "diagnostics need a policy keyed by raw states");
  }
  MdpAdapter adapter(env, Objective::prefix_max());
  CounterRng rng(seed);
  GradientMoments max_moments;
  GradientMoments sum_moments;
  for (std::size_t i = 0; i < n; ++i) {
    const Rollout r = roll_out(adapter, policy, rng);
    max_moments.add(episode_gradient(policy, r.sample, r.adapted));
    sum_moments.add(episode_gradient(policy, r.sample, r.raw));
  }

  GradientDiagnostics d;
  d.raw_var_max = max_moments.variance();
  d.raw_var_sum = sum_moments.variance();
  const double norm2_max = max_moments.mean_norm2();
  const double norm2_sum = sum_moments.mean_norm2();
  d.mean_norm_max = std::sqrt(norm2_max);
  d.mean_norm_sum = std::sqrt(norm2_sum);
  if (norm2_max == 0.0 || norm2_sum == 0.0) {
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    d.defined = false;
    d.var_max = norm2_max == 0.0 ? nan : d.raw_var_max / norm2_max;
    d.var_sum = norm2_sum == 0.0 ? nan : d.raw_var_sum / norm2_sum;
    d.dot = nan;
    return d;
  }
  d.var_max = d.raw_var_max / norm2_max;
  d.var_sum = d.raw_var_sum / norm2_sum;
  d.dot = max_moments.mean_dot(sum_moments) / (d.mean_norm_max * d.mean_norm_sum);
  return d;
}

}  // namespace ncmdp
