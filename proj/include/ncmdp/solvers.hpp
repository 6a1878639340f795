#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <unordered_map>
#include <vector>

#include "ncmdp/environments.hpp"
#include "ncmdp/mapping.hpp"
#include "ncmdp/objectives.hpp"
#include "ncmdp/rng.hpp"

namespace ncmdp {

struct Transition {
  double probability = 1.0;
  double reward = 0.0;
  std::size_t next = 0;  // unused when terminal
  bool terminal = false;
};

/// Fully enumerated episodic MDP. `states[i]` is the augmented state behind
/// index i; transitions are indexed [state][action].
struct ExplicitMdp {
  std::vector<AugmentedState> states;
  std::vector<std::vector<std::vector<Transition>>> transitions;
  std::size_t start = 0;

  std::size_t size() const noexcept { return states.size(); }
};

void validate(const ExplicitMdp& model);

/// Action values keyed by state. Rows are created on first write and hold
/// one value per action; missing rows read as zeros.
class QTable {
 public:
  using Map = std::unordered_map<StateKey, std::vector<double>, StateKeyHash>;

  std::vector<double>& row(const StateKey& key, std::size_t actions);
  const std::vector<double>* find(const StateKey& key) const;
  double value(const StateKey& key, std::size_t action) const;

  std::size_t size() const noexcept { return rows_.size(); }
  bool empty() const noexcept { return rows_.empty(); }
  Map::const_iterator begin() const { return rows_.begin(); }
  Map::const_iterator end() const { return rows_.end(); }

 private:
  Map rows_;
};

/// Deterministic policy from a table; unseen states take action 0.
class GreedyPolicy {
 public:
  GreedyPolicy() = default;
  explicit GreedyPolicy(KeyMode mode) : mode_(mode) {}

  std::size_t action(const StateKey& key) const;
  std::size_t action(const AugmentedState& state) const { return action(make_key(state, mode_)); }
  void set(const StateKey& key, std::size_t action) { actions_[key] = action; }

  KeyMode key_mode() const noexcept { return mode_; }
  void set_key_mode(KeyMode mode) noexcept { mode_ = mode; }
  std::size_t size() const noexcept { return actions_.size(); }

 private:
  KeyMode mode_ = KeyMode::Augmented;
  std::unordered_map<StateKey, std::size_t, StateKeyHash> actions_;
};

/// Argmax of each row, ties to the lowest action index.
std::size_t argmax(const std::vector<double>& values);
GreedyPolicy greedy_policy(const QTable& q, KeyMode mode = KeyMode::Augmented);

inline constexpr std::size_t kDefaultIterationCap = 100000;

/// Q(s,a) = sum p (r + max_a' Q(s',a')), terminal continuation 0, iterated
/// until the largest change is below `tol`. Keys use KeyMode::Augmented.
QTable value_iteration(const ExplicitMdp& model, double tol,
                       std::size_t max_iterations = kDefaultIterationCap);

/// Dense form of value_iteration: q[state][action] by model index.
std::vector<std::vector<double>> value_iteration_dense(const ExplicitMdp& model, double tol,
                                                       std::size_t max_iterations = kDefaultIterationCap);

/// What the min-update sees after a terminal transition.
enum class CuiTerminal {
  ZeroContinuation,  // min(r, 0): terminal states carry value 0
  RewardOnly,        // r: the last reward is the minimum of what remains
};

/// Q'(s,a) = sum p min(r, max_a' Q'(s',a')) on raw states. Keys are raw keys.
QTable cui_value_iteration(const TabularNcmdp& model, double tol,
                           CuiTerminal terminal = CuiTerminal::ZeroContinuation,
                           std::size_t max_iterations = kDefaultIterationCap);

enum class UpdateRule { Standard, CuiMin };

/// Linear: alpha_start to alpha_end over total_steps.
/// InverseVisits: 1/n(s, a), the sample average of the targets.
enum class AlphaSchedule { Linear, InverseVisits };

struct TrainConfig {
  double alpha_start = 0.5;
  double alpha_end = 0.01;
  AlphaSchedule schedule = AlphaSchedule::Linear;
  double epsilon = 0.1;
  std::size_t total_steps = 100000;
  std::uint64_t seed = 0;
  UpdateRule rule = UpdateRule::Standard;
  KeyMode key_mode = KeyMode::Augmented;
  CuiTerminal cui_terminal = CuiTerminal::RewardOnly;
  std::size_t eval_interval = 1000;
  std::size_t eval_episodes = 1;
  std::size_t state_cap = 1000000;
};

void validate(const TrainConfig& config);

struct CurvePoint {
  std::size_t step = 0;
  double greedy_return = 0.0;
};

struct QLearningResult {
  QTable q;
  std::vector<CurvePoint> curve;
  GreedyPolicy policy;
};

/// Tabular epsilon-greedy Q-learning with a linearly decaying step size.
/// Standard rule: TD update on adapted rewards through an MdpAdapter.
/// CuiMin rule: Q <- Q + alpha (min(r, max Q(s')) - Q) on raw rewards and raw
/// states. The greedy policy is evaluated after the first episode that ends
/// past each `eval_interval` boundary and once more at the end.
QLearningResult q_learning(Environment& env, const Objective& objective, const TrainConfig& config);

/// Monte Carlo mean of f over `episodes` rollouts of a deterministic policy.
double evaluate_policy(Environment& env, const Objective& objective, const GreedyPolicy& policy,
                       std::size_t episodes, std::uint64_t seed = 0);

/// Exact expectation of f for a deterministic policy on a tabular model.
double evaluate_policy_exact(const TabularNcmdp& model, const Objective& objective,
                             const GreedyPolicy& policy);

// ---------------------------------------------------------------------------
// Policy gradient

/// Tabular softmax policy. Unseen states have zero logits.
class SoftmaxPolicyTable {
 public:
  using Map = std::unordered_map<StateKey, std::vector<double>, StateKeyHash>;

  explicit SoftmaxPolicyTable(KeyMode mode = KeyMode::Raw) : mode_(mode) {}

  KeyMode key_mode() const noexcept { return mode_; }
  std::vector<double>& logits(const StateKey& key, std::size_t actions);
  std::vector<double> probabilities(const StateKey& key, std::size_t actions) const;
  std::size_t sample(const StateKey& key, std::size_t actions, CounterRng& rng) const;
  double entropy(const StateKey& key, std::size_t actions) const;

  std::size_t size() const noexcept { return logits_.size(); }
  Map::const_iterator begin() const { return logits_.begin(); }
  Map::const_iterator end() const { return logits_.end(); }

 private:
  KeyMode mode_;
  Map logits_;
};

std::vector<double> softmax(const std::vector<double>& logits);

/// Sparse gradient with respect to the logits: state key -> d/d logits.
using SparseGradient = std::unordered_map<StateKey, std::vector<double>, StateKeyHash>;

/// One recorded episode as seen by a policy.
struct PolicySample {
  std::vector<StateKey> keys;
  std::vector<std::size_t> action_counts;
  std::vector<std::size_t> actions;
};

/// REINFORCE estimate sum_t grad log pi(a_t|s_t) G_t with reward-to-go G_t.
SparseGradient episode_gradient(const SoftmaxPolicyTable& policy, const PolicySample& sample,
                                std::span<const double> rewards);

enum class ReturnMode { Cumulative, MappedPrefixMax };

struct ReinforceConfig {
  double learning_rate = 1.0 / 1024.0;
  std::size_t episodes = 10000;
  std::uint64_t seed = 0;
  KeyMode key_mode = KeyMode::Augmented;  // used by MappedPrefixMax only
  std::size_t log_interval = 100;
  std::size_t checkpoint_interval = 0;  // 0 = never
  double logit_clamp = 50.0;
};

struct ReinforcePoint {
  std::size_t episode = 0;         // episodes completed
  double cost_improvement = 0.0;   // mean PrefixMax value over the interval
  double entropy = 0.0;            // mean policy entropy over visited states
};

struct ReinforceResult {
  SoftmaxPolicyTable policy;
  std::vector<ReinforcePoint> curve;
};

using CheckpointFn = std::function<void(std::size_t episodes_done, const SoftmaxPolicyTable& policy)>;

/// Episodic REINFORCE with a tabular softmax policy, updated after every
/// episode. Cumulative mode learns from raw rewards on raw states; mapped
/// mode from PrefixMax-adapted rewards, keyed per `config.key_mode`.
/// `on_checkpoint` runs before training and after every
/// `checkpoint_interval` episodes.
ReinforceResult reinforce(Environment& env, ReturnMode mode, const ReinforceConfig& config,
                          const CheckpointFn& on_checkpoint = {});

struct GradientDiagnostics {
  double var_max = 0.0;  // normalized variance, mapped PrefixMax estimator
  double var_sum = 0.0;  // normalized variance, cumulative estimator
  double dot = 0.0;      // dot product of the unit mean gradients
  double raw_var_max = 0.0;
  double raw_var_sum = 0.0;
  double mean_norm_max = 0.0;
  double mean_norm_sum = 0.0;
  bool defined = true;   // false when a mean gradient vanished
};

/// Runs n frozen-policy episodes and compares both estimators on the same
/// trajectories. VAR = mean |g|^2 - |mean g|^2, normalized by |mean g|^2.
/// The policy must be keyed by raw states.
GradientDiagnostics gradient_diagnostics(const SoftmaxPolicyTable& policy, Environment& env,
                                         std::size_t n, std::uint64_t seed);

}  // namespace ncmdp
