#include "ncmdp/mapping.hpp"

#include <bit>
#include <string>

#include "ncmdp/error.hpp"

namespace ncmdp {

std::size_t StateKeyHash::operator()(const StateKey& key) const noexcept {
  std::uint64_t h = static_cast<std::uint64_t>(key.raw) * 0x9e3779b97f4a7c15ULL;
  h ^= key.started ? 0x51ed270b27a1c3d5ULL : 0;
  for (std::uint64_t bits : key.h_bits) {
    h ^= bits + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  }
  return static_cast<std::size_t>(h);
}

StateKey make_key(const AugmentedState& state, KeyMode mode) {
  if (mode == KeyMode::Raw) return raw_key(state.raw);
  StateKey key;
  key.raw = state.raw;
  key.started = state.obj.started();
  key.h_bits.reserve(state.obj.h.size());
  for (double v : state.obj.h) {
    // +0 and -0 compare equal and must share a key.
    key.h_bits.push_back(std::bit_cast<std::uint64_t>(v == 0.0 ? 0.0 : v));
  }
  return key;
}

StateKey raw_key(RawState raw) {
  StateKey key;
  key.raw = raw;
  return key;
}

MdpAdapter::MdpAdapter(Environment& env, Objective objective)
    : env_(&env), objective_(std::move(objective)) {}

AugmentedState MdpAdapter::reset(std::uint64_t seed) {
  state_.raw = env_->reset(seed);
  state_.obj = objective_.init();
  active_ = true;
  return state_;
}

AugmentedStep MdpAdapter::step(std::size_t action) {
  if (!active_) throw Error(ErrorCode::EpisodeState, "adapter step outside an active episode");
  const StepResult raw = env_->step(action);
  AugmentedStep out;
  out.raw_reward = raw.reward;
  out.reward = objective_.adapted_reward(state_.obj, raw.reward);
  out.next.raw = raw.next;
  out.next.obj = objective_.update(state_.obj, raw.reward);
  out.terminal = raw.terminal;
  state_ = out.next;
  active_ = !raw.terminal;
  return out;
}

std::size_t MdpAdapter::action_count(const AugmentedState& state) const {
  return env_->action_count(state.raw);
}

MappedTrajectory map_trajectory(const RawTrajectory& raw, const Objective& objective) {
  const std::size_t steps = raw.actions.size();
  const bool states_ok = raw.terminal ? raw.states.size() == steps + 1
                                      : (raw.states.size() == steps || raw.states.size() == steps + 1);
  if (raw.rewards.size() != steps || !states_ok) {
    throw Error(ErrorCode::InconsistentRecord,
                std::to_string(raw.states.size()) + " states, " + std::to_string(steps) +
                    " actions, " + std::to_string(raw.rewards.size()) + " rewards");
  }
  MappedTrajectory mapped;
  mapped.actions = raw.actions;
  mapped.terminal = raw.terminal;
  mapped.rewards.reserve(steps);
  mapped.states.reserve(raw.states.size());

  ObjectiveState obj = objective.init();
  for (std::size_t t = 0; t < raw.states.size(); ++t) {
    mapped.states.push_back({raw.states[t], obj});
    if (t < steps) {
      mapped.rewards.push_back(objective.adapted_reward(obj, raw.rewards[t]));
      obj = objective.update(obj, raw.rewards[t]);
    }
  }
  return mapped;
}

std::vector<double> adapted_rewards(std::span<const double> rewards, const Objective& objective) {
  std::vector<double> out;
  out.reserve(rewards.size());
  ObjectiveState obj = objective.init();
  for (double r : rewards) {
    out.push_back(objective.adapted_reward(obj, r));
    obj = objective.update(obj, r);
  }
  return out;
}

}  // namespace ncmdp
