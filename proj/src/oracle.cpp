#include "ncmdp/oracle.hpp"

#include <bit>
#include <cmath>
#include <deque>
#include <limits>
#include <string>
#include <unordered_map>

#include "ncmdp/error.hpp"

namespace ncmdp {

namespace {

std::vector<double> checked_distribution(const StochasticPolicy& policy, const AugmentedState& state,
                                         std::size_t actions) {
  std::vector<double> probs = policy(state, actions);
  if (probs.size() != actions) {
    throw Error(ErrorCode::InvalidArgument, "policy returned " + std::to_string(probs.size()) +
                                                " probabilities for " + std::to_string(actions) + " actions");
  }
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) throw Error(ErrorCode::InvalidArgument, "negative action probability");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw Error(ErrorCode::InvalidArgument, "action probabilities do not sum to 1");
  return probs;
}

// Expected return of fixed per-state action distributions, by memoised
// recursion. Revisiting a state that is still being evaluated means the
// policy can loop forever.
class IndexedEvaluator {
 public:
  IndexedEvaluator(const ExplicitMdp& model, const std::vector<std::vector<double>>& probs)
      : model_(model), probs_(probs), value_(model.size(), 0.0), mark_(model.size(), 0) {}

  double operator()(std::size_t i) {
    if (mark_[i] == 2) return value_[i];
    if (mark_[i] == 1) throw Error(ErrorCode::HorizonExceeded, "policy loops without terminating");
    mark_[i] = 1;
    double v = 0.0;
    for (std::size_t a = 0; a < model_.transitions[i].size(); ++a) {
      const double pa = probs_[i][a];
      if (pa == 0.0) continue;
      double q = 0.0;
      for (const auto& tr : model_.transitions[i][a]) {
        q += tr.probability * (tr.reward + (tr.terminal ? 0.0 : (*this)(tr.next)));
      }
      v += pa * q;
    }
    mark_[i] = 2;
    value_[i] = v;
    return v;
  }

 private:
  const ExplicitMdp& model_;
  const std::vector<std::vector<double>>& probs_;
  std::vector<double> value_;
  std::vector<unsigned char> mark_;
};

}  // namespace

StochasticPolicy as_stochastic(const GreedyPolicy& policy) {
  return [policy](const AugmentedState& state, std::size_t actions) {
    std::vector<double> probs(actions, 0.0);
    const std::size_t a = policy.action(state);
    probs[a < actions ? a : 0] = 1.0;
    return probs;
  };
}

StochasticPolicy uniform_policy() {
  return [](const AugmentedState&, std::size_t actions) {
    return std::vector<double>(actions, 1.0 / static_cast<double>(actions));
  };
}

StochasticPolicy random_policy(std::uint64_t seed, KeyMode mode) {
  return [seed, mode](const AugmentedState& state, std::size_t actions) {
    CounterRng rng(seed, StateKeyHash{}(make_key(state, mode)));
    std::vector<double> probs(actions);
    double total = 0.0;
    for (double& p : probs) {
      p = 0.05 + rng.uniform();
      total += p;
    }
    for (double& p : probs) p /= total;
    return probs;
  };
}

ExplicitMdp augmented_model(const TabularNcmdp& model, const Objective& objective,
                            const ModelOptions& options) {
  ExplicitMdp mdp;
  std::unordered_map<StateKey, std::size_t, StateKeyHash> index;
  std::deque<std::size_t> queue;

  auto intern = [&](const AugmentedState& state) {
    StateKey key = make_key(state, KeyMode::Augmented);
    auto it = index.find(key);
    if (it != index.end()) return it->second;
    if (mdp.states.size() >= options.state_cap) {
      throw Error(ErrorCode::StateCapExceeded,
                  "more than " + std::to_string(options.state_cap) + " augmented states");
    }
    const std::size_t i = mdp.states.size();
    index.emplace(std::move(key), i);
    mdp.states.push_back(state);
    mdp.transitions.emplace_back();
    queue.push_back(i);
    return i;
  };

  mdp.start = intern({static_cast<RawState>(model.start()), objective.init()});
  while (!queue.empty()) {
    const std::size_t i = queue.front();
    queue.pop_front();
    const AugmentedState state = mdp.states[i];
    const auto raw = static_cast<std::size_t>(state.raw);
    std::vector<std::vector<Transition>> rows(model.action_count(raw));
    for (std::size_t a = 0; a < rows.size(); ++a) {
      for (const Outcome& o : model.outcomes(raw, a)) {
        Transition tr;
        tr.probability = o.probability;
        tr.reward = objective.adapted_reward(state.obj, o.reward);
        tr.terminal = o.terminal;
        if (!o.terminal) {
          tr.next = intern({static_cast<RawState>(o.next), objective.update(state.obj, o.reward)});
        }
        bool merged = false;
        if (options.merge_outcomes) {
          for (auto& existing : rows[a]) {
            if (existing.terminal == tr.terminal && (tr.terminal || existing.next == tr.next) &&
                std::bit_cast<std::uint64_t>(existing.reward) == std::bit_cast<std::uint64_t>(tr.reward)) {
              existing.probability += tr.probability;
              merged = true;
              break;
            }
          }
        }
        if (!merged) rows[a].push_back(tr);
      }
    }
    mdp.transitions[i] = std::move(rows);
  }
  return mdp;
}

TrajectoryDistribution trajectory_distribution(const TabularNcmdp& model, const Objective& objective,
                                               const StochasticPolicy& policy, std::size_t horizon) {
  TrajectoryDistribution out;
  std::vector<double> rewards;

  auto visit = [&](auto&& self, std::size_t raw, const ObjectiveState& obj, double prob) -> void {
    if (rewards.size() >= horizon) {
      throw Error(ErrorCode::HorizonExceeded, "trajectory longer than " + std::to_string(horizon) + " steps");
    }
    const AugmentedState state{static_cast<RawState>(raw), obj};
    const std::size_t actions = model.action_count(raw);
    const std::vector<double> probs = checked_distribution(policy, state, actions);
    for (std::size_t a = 0; a < actions; ++a) {
      if (probs[a] == 0.0) continue;
      for (const Outcome& o : model.outcomes(raw, a)) {
        const double p = prob * probs[a] * o.probability;
        rewards.push_back(o.reward);
        if (o.terminal) {
          out.push_back({p, rewards});
        } else {
          self(self, o.next, objective.update(obj, o.reward), p);
        }
        rewards.pop_back();
      }
    }
  };
  visit(visit, model.start(), objective.init(), 1.0);
  return out;
}

double policy_value(const ExplicitMdp& model, const StochasticPolicy& policy) {
  std::vector<std::vector<double>> probs(model.size());
  for (std::size_t i = 0; i < model.size(); ++i) {
    if (!model.transitions[i].empty()) {
      probs[i] = checked_distribution(policy, model.states[i], model.transitions[i].size());
    }
  }
  return IndexedEvaluator(model, probs)(model.start);
}

ExactReturn exact_return(const TabularNcmdp& model, const Objective& objective,
                         const StochasticPolicy& policy, const ModelOptions& options,
                         std::size_t horizon) {
  ExactReturn result;
  for (const auto& traj : trajectory_distribution(model, objective, policy, horizon)) {
    result.objective += traj.probability * objective.value(traj.rewards);
  }
  result.mdp = policy_value(augmented_model(model, objective, options), policy);
  return result;
}

OptimalReturn exact_optimal_return(const TabularNcmdp& model, const Objective& objective,
                                   const ModelOptions& options, std::size_t enumeration_limit) {
  const ExplicitMdp mdp = augmented_model(model, objective, options);
  const auto q = value_iteration_dense(mdp, 1e-12);

  OptimalReturn result;
  result.states = mdp.size();
  result.policy = GreedyPolicy(KeyMode::Augmented);
  std::vector<std::size_t> greedy(mdp.size(), 0);
  for (std::size_t i = 0; i < mdp.size(); ++i) {
    if (q[i].empty()) continue;
    greedy[i] = argmax(q[i]);
    result.policy.set(make_key(mdp.states[i], KeyMode::Augmented), greedy[i]);
  }
  result.value = q[mdp.start][greedy[mdp.start]];

  // Exhaustive check over all deterministic policies when there are few.
  double count = 1.0;
  for (const auto& rows : mdp.transitions) {
    if (!rows.empty()) count *= static_cast<double>(rows.size());
  }
  if (count > static_cast<double>(enumeration_limit)) return result;

  std::vector<std::size_t> choice(mdp.size(), 0);
  std::vector<std::vector<double>> probs(mdp.size());
  double best = -std::numeric_limits<double>::infinity();
  while (true) {
    for (std::size_t i = 0; i < mdp.size(); ++i) {
      probs[i].assign(mdp.transitions[i].size(), 0.0);
      if (!probs[i].empty()) probs[i][choice[i]] = 1.0;
    }
    best = std::max(best, IndexedEvaluator(mdp, probs)(mdp.start));
    std::size_t i = 0;
    for (; i < mdp.size(); ++i) {
      if (mdp.transitions[i].empty()) continue;
      if (++choice[i] < mdp.transitions[i].size()) break;
      choice[i] = 0;
    }
    if (i == mdp.size()) break;
  }
  if (std::abs(best - result.value) > 1e-9 * std::max(1.0, std::abs(best))) {
    throw Error(ErrorCode::InvalidModel, "value iteration (" + std::to_string(result.value) +
                                             ") disagrees with policy enumeration (" + std::to_string(best) + ")");
  }
  result.cross_checked = true;
  return result;
}

}  // namespace ncmdp
