#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "ncmdp/environments.hpp"
#include "ncmdp/objectives.hpp"
#include "ncmdp/solvers.hpp"

namespace ncmdp {

/// Action distribution for a state. Must depend on the state only through
/// its augmented key, because enumeration merges states with equal keys.
using StochasticPolicy =
    std::function<std::vector<double>(const AugmentedState& state, std::size_t action_count)>;

StochasticPolicy as_stochastic(const GreedyPolicy& policy);
StochasticPolicy uniform_policy();
/// Fixed random distribution per state key, reproducible from `seed`.
StochasticPolicy random_policy(std::uint64_t seed, KeyMode mode = KeyMode::Augmented);

struct ModelOptions {
  std::size_t state_cap = 100000;
  bool merge_outcomes = true;
};

inline constexpr std::size_t kDefaultHorizonCap = 32;

/// Breadth-first enumeration of the corresponding MDP reachable from
/// (start, h_0). Outcomes that land on the same (next state, adapted reward)
/// are merged by adding their probabilities unless merging is disabled.
ExplicitMdp augmented_model(const TabularNcmdp& model, const Objective& objective,
                            const ModelOptions& options = {});

struct WeightedTrajectory {
  double probability = 0.0;
  std::vector<double> rewards;  // raw rewards
};

using TrajectoryDistribution = std::vector<WeightedTrajectory>;

/// Every trajectory of the environment under `policy`, with its probability.
TrajectoryDistribution trajectory_distribution(const TabularNcmdp& model, const Objective& objective,
                                               const StochasticPolicy& policy,
                                               std::size_t horizon = kDefaultHorizonCap);

/// Expected return of `policy` on an explicit MDP (sum of rewards).
double policy_value(const ExplicitMdp& model, const StochasticPolicy& policy);

struct ExactReturn {
  double objective = 0.0;  // E[f(raw rewards)] over raw trajectories
  double mdp = 0.0;        // E[sum of adapted rewards] on the augmented model
};

/// Both sides of the return equality, computed along independent routes:
/// raw trajectory enumeration with direct evaluation of f, and policy
/// evaluation on the enumerated augmented model.
ExactReturn exact_return(const TabularNcmdp& model, const Objective& objective,
                         const StochasticPolicy& policy, const ModelOptions& options = {},
                         std::size_t horizon = kDefaultHorizonCap);

struct OptimalReturn {
  double value = 0.0;
  GreedyPolicy policy;
  bool cross_checked = false;  // exhaustive policy enumeration agreed
  std::size_t states = 0;
};

/// Optimal expected f through value iteration on the augmented model. When
/// the model has at most `enumeration_limit` deterministic policies they are
/// all evaluated and the best must match value iteration.
OptimalReturn exact_optimal_return(const TabularNcmdp& model, const Objective& objective,
                                   const ModelOptions& options = {},
                                   std::size_t enumeration_limit = 10000);

}  // namespace ncmdp
