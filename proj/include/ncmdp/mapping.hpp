#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ncmdp/objectives.hpp"

namespace ncmdp {

/// Environment states are encoded as integers by every environment.
using RawState = std::int64_t;

struct StepResult {
  double reward = 0.0;
  RawState next = 0;
  bool terminal = false;
};

/// Episodic environment whose objective is some f of the reward sequence.
/// `step` is legal only between `reset` and the first terminal transition.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual RawState reset(std::uint64_t seed) = 0;
  virtual StepResult step(std::size_t action) = 0;
  virtual std::size_t action_count(RawState state) const = 0;
};

/// State of the corresponding MDP: environment state plus objective state.
struct AugmentedState {
  RawState raw = 0;
  ObjectiveState obj;

  friend bool operator==(const AugmentedState&, const AugmentedState&) = default;
};

enum class KeyMode { Augmented, Raw };

/// Hashable identity of a state for tables and enumeration. In augmented
/// mode the key holds the raw state, the bit patterns of h and whether any
/// reward has been consumed; the step counter itself is not part of it.
struct StateKey {
  RawState raw = 0;
  bool started = false;
  std::vector<std::uint64_t> h_bits;

  friend bool operator==(const StateKey&, const StateKey&) = default;
};

struct StateKeyHash {
  std::size_t operator()(const StateKey& key) const noexcept;
};

StateKey make_key(const AugmentedState& state, KeyMode mode);
StateKey raw_key(RawState raw);

struct AugmentedStep {
  double reward = 0.0;      // adapted reward r_t
  double raw_reward = 0.0;  // environment reward
  AugmentedState next;
  bool terminal = false;
};

/// Presents an environment with objective f as an ordinary MDP: states are
/// augmented with the objective state and rewards are telescoped so that the
/// episode return equals f of the raw rewards. The wrapped environment is
/// borrowed and must outlive the adapter.
class MdpAdapter {
 public:
  MdpAdapter(Environment& env, Objective objective);

  AugmentedState reset(std::uint64_t seed);
  AugmentedStep step(std::size_t action);
  std::size_t action_count(const AugmentedState& state) const;

  const AugmentedState& state() const noexcept { return state_; }
  const Objective& objective() const noexcept { return objective_; }
  bool active() const noexcept { return active_; }

 private:
  Environment* env_;
  Objective objective_;
  AugmentedState state_;
  bool active_ = false;
};

inline MdpAdapter wrap(Environment& env, Objective objective) {
  return MdpAdapter(env, std::move(objective));
}

template <typename State>
struct Trajectory {
  std::vector<State> states;
  std::vector<std::size_t> actions;
  std::vector<double> rewards;
  bool terminal = false;
};

using RawTrajectory = Trajectory<RawState>;
using MappedTrajectory = Trajectory<AugmentedState>;

/// Offline replay of the adapter over a recorded episode: same actions,
/// augmented states and adapted rewards.
MappedTrajectory map_trajectory(const RawTrajectory& raw, const Objective& objective);

/// Adapted rewards only; cheaper than map_trajectory when states are unused.
std::vector<double> adapted_rewards(std::span<const double> rewards, const Objective& objective);

}  // namespace ncmdp
