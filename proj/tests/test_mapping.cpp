#include <doctest.h>

#include <random>
#include <set>
#include <tuple>

#include "ncmdp/environments.hpp"
#include "ncmdp/mapping.hpp"
#include "support/check.hpp"
#include "support/reference.hpp"

using namespace ncmdp;

namespace {

// First seed whose first toy reward equals `r0` and whose second reward, under
// `action`, equals `r1`.
std::uint64_t toy_seed(double r0, std::size_t action, double r1) {
  TabularEnv env(make_two_step());
  for (std::uint64_t seed = 0; seed < 10000; ++seed) {
    env.reset(seed);
    if (env.step(0).reward != r0) continue;
    if (env.step(action).reward == r1) return seed;
  }
  FAIL("no seed produces the requested outcome");
  return 0;
}

}  // namespace

TEST_CASE("wrapping the two-step process under min: every outcome telescopes") {
  TabularEnv env(make_two_step());
  MdpAdapter adapter = wrap(env, Objective::min());
  std::set<std::tuple<double, std::size_t, double>> seen;
  for (std::uint64_t seed = 0; seed < 400; ++seed) {
    const std::size_t action = seed % 2;
    adapter.reset(seed);
    const AugmentedStep first = adapter.step(0);
    const AugmentedStep second = adapter.step(action);
    CHECK(second.terminal);
    CHECK_FALSE(adapter.active());
    CHECK(first.reward + second.reward == std::min(first.raw_reward, second.raw_reward));
    seen.emplace(first.raw_reward, action, second.raw_reward);
  }
  CHECK(seen.size() == 6);
}

TEST_CASE("reset gives the initial objective state") {
  TabularEnv toy(make_two_step());
  MdpAdapter a(toy, Objective::max());
  const AugmentedState s = a.reset(3);
  CHECK(s.raw == 0);
  CHECK(s.obj.t == 0);
  CHECK(s.obj == Objective::max().init());

  GridWorld grid = make_grid(4, 1);
  MdpAdapter g(grid, Objective::min());
  CHECK(g.action_count(g.reset(0)) == 3);
  const AugmentedState first = wrap(grid, Objective::min()).reset(7);
  const AugmentedState second = wrap(grid, Objective::min()).reset(7);
  CHECK(first == second);

  PeakEnv peak;
  CHECK(wrap(peak, Objective::prefix_max()).reset(0).raw == 2);
}

TEST_CASE("adapter step examples on the two-step process") {
  TabularEnv env(make_two_step());
  MdpAdapter adapter(env, Objective::min());

  adapter.reset(toy_seed(1, 1, -2));
  AugmentedStep s = adapter.step(0);
  CHECK(s.reward == 1);
  CHECK(s.next.obj.h == std::vector<double>{1});
  s = adapter.step(1);
  CHECK(s.raw_reward == -2);
  CHECK(s.reward == -3);

  adapter.reset(toy_seed(-1, 0, 0));
  s = adapter.step(0);
  CHECK(s.next.obj.h == std::vector<double>{-1});
  s = adapter.step(0);
  CHECK(s.reward == 0);
}

TEST_CASE("stepping outside an episode is an error") {
  TabularEnv env(make_two_step());
  MdpAdapter adapter(env, Objective::min());
  check_error([&] { adapter.step(0); }, ErrorCode::EpisodeState);
  adapter.reset(0);
  adapter.step(0);
  adapter.step(0);
  check_error([&] { adapter.step(0); }, ErrorCode::EpisodeState);
}

TEST_CASE("map_trajectory examples") {
  RawTrajectory raw{{0, 1, 2}, {0, 0}, {1, -2}, true};
  const MappedTrajectory m = map_trajectory(raw, Objective::min());
  CHECK(m.rewards == std::vector<double>{1, -3});
  CHECK(m.actions == raw.actions);
  CHECK(m.states.size() == 3);
  CHECK(m.states[2].obj.h == std::vector<double>{-2});

  RawTrajectory p{{0, 0, 0, 0}, {1, 1, 1}, {2, -1, 3}, true};
  CHECK(map_trajectory(p, Objective::prefix_max()).rewards == std::vector<double>{2, 0, 2});

  for (const auto& f : table_objectives()) {
    RawTrajectory one{{0, 1}, {0}, {1.5}, true};
    const auto mapped = map_trajectory(one, f);
    CHECK(mapped.rewards.size() == 1);
    CHECK(ref::close_rel(mapped.rewards[0], f.value(one.rewards), 1e-12));
  }

  RawTrajectory bad{{0, 1}, {0, 1}, {1, 2}, true};
  check_error([&] { map_trajectory(bad, Objective::min()); }, ErrorCode::InconsistentRecord);
  RawTrajectory bad_rewards{{0, 1, 2}, {0, 1}, {1}, true};
  check_error([&] { map_trajectory(bad_rewards, Objective::min()); }, ErrorCode::InconsistentRecord);
}

TEST_CASE("replaying an adapter episode reproduces it bit for bit") {
  std::mt19937_64 gen(9);
  for (const auto& f : table_objectives()) {
    if (f.family() == ObjectiveFamily::HarmonicMean) continue;  // peak rewards can be 0
    CAPTURE(f.id());
    for (int episode = 0; episode < 20; ++episode) {
      PeakEnv env;
      MdpAdapter adapter(env, f);
      RawTrajectory raw;
      std::vector<AugmentedState> states{adapter.reset(0)};
      std::vector<double> adapted;
      raw.states.push_back(states.back().raw);
      while (true) {
        const std::size_t n = adapter.action_count(states.back());
        CHECK(n == env.action_count(states.back().raw));
        const std::size_t a = gen() % n;
        const AugmentedStep s = adapter.step(a);
        raw.actions.push_back(a);
        raw.rewards.push_back(s.raw_reward);
        raw.states.push_back(s.next.raw);
        adapted.push_back(s.reward);
        states.push_back(s.next);
        if (s.terminal) break;
      }
      raw.terminal = true;
      const MappedTrajectory m = map_trajectory(raw, f);
      CHECK(m.rewards == adapted);
      CHECK(m.states == states);
      double total = 0.0;
      for (double r : adapted) total += r;
      CHECK(ref::close_rel(total, f.value(raw.rewards), 1e-9));
    }
  }
}

TEST_CASE("state keys") {
  const AugmentedState pos{4, {{0.0}, 1}};
  const AugmentedState neg{4, {{-0.0}, 1}};
  CHECK(make_key(pos, KeyMode::Augmented) == make_key(neg, KeyMode::Augmented));
  CHECK(StateKeyHash{}(make_key(pos, KeyMode::Augmented)) == StateKeyHash{}(make_key(neg, KeyMode::Augmented)));
  const AugmentedState fresh{4, {{0.0}, 0}};
  CHECK_FALSE(make_key(pos, KeyMode::Augmented) == make_key(fresh, KeyMode::Augmented));
  CHECK(make_key(pos, KeyMode::Raw) == raw_key(4));
  CHECK(make_key(fresh, KeyMode::Raw) == make_key(pos, KeyMode::Raw));
  // The step counter beyond "started" is not part of the key.
  const AugmentedState later{4, {{0.0}, 5}};
  CHECK(make_key(pos, KeyMode::Augmented) == make_key(later, KeyMode::Augmented));
}
