#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "ncmdp/environments.hpp"
#include "ncmdp/oracle.hpp"
#include "ncmdp/solvers.hpp"
#include "support/check.hpp"
#include "support/reference.hpp"

using namespace ncmdp;

namespace {

const Objective kMin = Objective::min();

StateKey toy_key(RawState raw, const ObjectiveState& h) { return make_key({raw, h}, KeyMode::Augmented); }
StateKey after(double r0) { return toy_key(1, kMin.update(kMin.init(), r0)); }

TabularNcmdp bandit(double r0, double r1) {
  return TabularNcmdp(0, {{{{1.0, r0, 0, true}}, {{1.0, r1, 0, true}}}});
}

StochasticPolicy from_table(const SoftmaxPolicyTable& table) {
  return [&table](const AugmentedState& s, std::size_t n) {
    return table.probabilities(make_key(s, table.key_mode()), n);
  };
}

}  // namespace

TEST_CASE("value iteration on the two-step process") {
  const QTable q = value_iteration(augmented_model(make_two_step(), kMin), 1e-12);
  CHECK(q.size() == 3);
  CHECK(std::abs(q.value(toy_key(0, kMin.init()), 0) - -0.15) <= 1e-9);
  CHECK(std::abs(q.value(after(1), 0) - -1.0) <= 1e-9);
  CHECK(std::abs(q.value(after(1), 1) - -0.3) <= 1e-9);
  CHECK(std::abs(q.value(after(-1), 0) - 0.0) <= 1e-9);
  CHECK(std::abs(q.value(after(-1), 1) - -0.1) <= 1e-9);
}

TEST_CASE("value iteration trivial model and fixed point") {
  const QTable single = value_iteration(augmented_model(bandit(5, 5), kMin), 1e-12);
  CHECK(single.value(toy_key(0, kMin.init()), 0) == 5);

  GridWorld grid = make_grid(4, 2);
  const ExplicitMdp model = augmented_model(grid.tabular(), kMin);
  const double tol = 1e-10;
  const QTable q = value_iteration(model, tol);
  double worst = 0.0;
  for (std::size_t i = 0; i < model.size(); ++i) {
    const StateKey key = make_key(model.states[i], KeyMode::Augmented);
    for (std::size_t a = 0; a < model.transitions[i].size(); ++a) {
      double backup = 0.0;
      for (const Transition& tr : model.transitions[i][a]) {
        double cont = 0.0;
        if (!tr.terminal) {
          const auto* row = q.find(make_key(model.states[tr.next], KeyMode::Augmented));
          REQUIRE(row != nullptr);
          cont = *std::max_element(row->begin(), row->end());
        }
        backup += tr.probability * (tr.reward + cont);
      }
      worst = std::max(worst, std::abs(backup - q.value(key, a)));
    }
  }
  CHECK(worst <= tol);
}

TEST_CASE("min-update value iteration") {
  const QTable q = cui_value_iteration(make_two_step(), 1e-12);
  CHECK(std::abs(q.value(raw_key(0), 0) - -0.5) <= 1e-9);
  CHECK(std::abs(q.value(raw_key(1), 0) - 0.0) <= 1e-9);
  CHECK(std::abs(q.value(raw_key(1), 1) - -0.2) <= 1e-9);

  // Reward-only terminal targets give E[r] = 1.6 at the risky action instead.
  const QTable r = cui_value_iteration(make_two_step(), 1e-12, CuiTerminal::RewardOnly);
  CHECK(r.value(raw_key(1), 1) == doctest::Approx(1.6));

  // Deterministic chain whose smallest reward comes last.
  const TabularNcmdp chain(0, {{{{1.0, -1, 1, false}}}, {{{1.0, -2, 2, false}}}, {{{1.0, -3, 0, true}}}});
  CHECK(cui_value_iteration(chain, 1e-12).value(raw_key(0), 0) == -3);
  CHECK(cui_value_iteration(chain, 1e-12).value(raw_key(0), 0) ==
        exact_optimal_return(chain, kMin).value);
  const TabularNcmdp positive(0, {{{{1.0, 3, 1, false}}}, {{{1.0, 2, 2, false}}}, {{{1.0, 1, 0, true}}}});
  CHECK(cui_value_iteration(positive, 1e-12, CuiTerminal::RewardOnly).value(raw_key(0), 0) == 1);
  const TabularNcmdp single(0, {{{{1.0, -1, 0, true}}}});
  CHECK(cui_value_iteration(single, 1e-12).value(raw_key(0), 0) == -1);
}

TEST_CASE("iteration cap is reported") {
  check_error([] { value_iteration(augmented_model(make_grid(5, 0).tabular(), kMin), 1e-12, 1); },
              ErrorCode::IterationCap);
}

TEST_CASE("greedy policies and the min-update failure on the two-step process") {
  QTable q;
  q.row(raw_key(3), 2) = {-1, -0.3};
  q.row(raw_key(4), 3) = {2, 2, 1};
  const GreedyPolicy p = greedy_policy(q, KeyMode::Raw);
  CHECK(p.action(raw_key(3)) == 1);
  CHECK(p.action(raw_key(4)) == 0);
  CHECK(p.action(raw_key(99)) == 0);

  const TabularNcmdp toy = make_two_step();
  const double ours = evaluate_policy_exact(
      toy, kMin, greedy_policy(value_iteration(augmented_model(toy, kMin), 1e-12), KeyMode::Augmented));
  const double cui = evaluate_policy_exact(toy, kMin, greedy_policy(cui_value_iteration(toy, 1e-12), KeyMode::Raw));
  CHECK(ours == doctest::Approx(-0.15).epsilon(1e-12));
  CHECK(cui == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(cui < ours);
}

TEST_CASE("training configuration is validated") {
  TrainConfig c;
  c.epsilon = 1.5;
  check_error([&] { validate(c); }, ErrorCode::InvalidArgument);
  c = {};
  c.alpha_start = 0.0;
  check_error([&] { validate(c); }, ErrorCode::InvalidArgument);
}

TEST_CASE("q-learning on a bandit picks the better arm") {
  TabularEnv env(bandit(0, 1));
  TrainConfig c;
  c.total_steps = 2000;
  c.eval_interval = 500;
  const auto result = q_learning(env, kMin, c);
  CHECK(result.policy.action(toy_key(0, kMin.init())) == 1);
  CHECK(result.curve.back().greedy_return == 1);
  CHECK(result.curve.size() == 4);
}

TEST_CASE("inverse-visit step size averages the targets") {
  // One arm pays 3 or -1 with equal odds; the estimate is the running sample mean.
  TabularEnv env(TabularNcmdp(0, {{{{0.5, 3.0, 0, true}, {0.5, -1.0, 0, true}}}}));
  TrainConfig c;
  c.schedule = AlphaSchedule::InverseVisits;
  c.total_steps = 20000;
  c.eval_interval = 0;
  const auto result = q_learning(env, kMin, c);
  CHECK(result.q.value(toy_key(0, kMin.init()), 0) == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("q-learning approaches the value-iteration table on the two-step process") {
  const TabularNcmdp toy = make_two_step();
  const QTable vi = value_iteration(augmented_model(toy, kMin), 1e-12);
  int good = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    TabularEnv env(toy);
    TrainConfig c;
    // The linear schedule ends at 0.01, whose noise floor on the start state alone is ~0.07.
    c.schedule = AlphaSchedule::InverseVisits;
    c.total_steps = 100000;
    c.seed = seed;
    const auto result = q_learning(env, kMin, c);
    double worst = 0.0;
    for (const auto& [key, row] : vi) {
      for (std::size_t a = 0; a < row.size(); ++a) worst = std::max(worst, std::abs(result.q.value(key, a) - row[a]));
    }
    MESSAGE("seed " << seed << " max deviation " << worst);
    good += worst <= 0.05;
  }
  CHECK(good == 5);
}

TEST_CASE("q-learning reaches the grid optimum with either rule") {
  GridWorld grid = make_grid(3, 0);
  const double oracle = exact_optimal_return(grid.tabular(), kMin).value;
  TrainConfig c;
  c.total_steps = 100000;
  const auto standard = q_learning(grid, kMin, c);
  CHECK(std::abs(standard.curve.back().greedy_return - oracle) <= 1e-6);
  c.rule = UpdateRule::CuiMin;
  const auto cui = q_learning(grid, kMin, c);
  CHECK(std::abs(cui.curve.back().greedy_return - oracle) <= 1e-6);
  // Same seed, same run.
  c.rule = UpdateRule::Standard;
  const auto again = q_learning(grid, kMin, c);
  REQUIRE(again.curve.size() == standard.curve.size());
  for (std::size_t i = 0; i < again.curve.size(); ++i) {
    CHECK(again.curve[i].step == standard.curve[i].step);
    CHECK(again.curve[i].greedy_return == standard.curve[i].greedy_return);
  }
}

TEST_CASE("q-learning state cap") {
  GridWorld grid = make_grid(6, 1);
  TrainConfig c;
  c.total_steps = 10000;
  c.state_cap = 10;
  check_error([&] { q_learning(grid, kMin, c); }, ErrorCode::StateCapExceeded);
}

TEST_CASE("one Monte Carlo episode is exact on a deterministic environment") {
  GridWorld grid = make_grid(4, 3);
  const OptimalReturn best = exact_optimal_return(grid.tabular(), kMin);
  CHECK(evaluate_policy(grid, kMin, best.policy, 1) == best.value);
  CHECK(evaluate_policy_exact(grid.tabular(), kMin, best.policy) == best.value);
}

TEST_CASE("softmax table") {
  SoftmaxPolicyTable t(KeyMode::Raw);
  const auto uniform = t.probabilities(raw_key(0), 4);
  for (double p : uniform) CHECK(p == 0.25);
  CHECK(t.entropy(raw_key(0), 4) == doctest::Approx(std::log(4.0)));
  t.logits(raw_key(1), 3) = {1000, 0, -1000};
  const auto p = t.probabilities(raw_key(1), 3);
  CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(p[0] == 1.0);
  const auto q = softmax({0.1, -0.4, 2.0});
  CHECK(std::accumulate(q.begin(), q.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
  for (double v : q) CHECK(v > 0.0);
}

TEST_CASE("zero learning rate leaves the policy unchanged") {
  PeakEnv env;
  ReinforceConfig c;
  c.learning_rate = 0.0;
  c.episodes = 200;
  for (ReturnMode mode : {ReturnMode::Cumulative, ReturnMode::MappedPrefixMax}) {
    const auto result = reinforce(env, mode, c);
    for (const auto& [key, logits] : result.policy) {
      for (double l : logits) CHECK(l == 0.0);
    }
    CHECK(result.curve.size() == 2);
  }
  c.learning_rate = -1;
  check_error([&] { reinforce(env, ReturnMode::Cumulative, c); }, ErrorCode::InvalidArgument);
}

TEST_CASE("bandit gradient raises the better arm on average") {
  TabularEnv env(bandit(0, 1));
  double mean_p1 = 0.0;
  const int runs = 400;
  for (int s = 0; s < runs; ++s) {
    ReinforceConfig c;
    c.learning_rate = 0.5;
    c.episodes = 1;
    c.seed = static_cast<std::uint64_t>(s);
    const auto result = reinforce(env, ReturnMode::Cumulative, c);
    mean_p1 += result.policy.probabilities(raw_key(0), 2)[1] / runs;
  }
  CHECK(mean_p1 > 0.5);
  // Longer training on the same arm keeps improving.
  ReinforceConfig c;
  c.learning_rate = 0.1;
  c.episodes = 2000;
  CHECK(reinforce(env, ReturnMode::Cumulative, c).policy.probabilities(raw_key(0), 2)[1] > 0.95);
}

TEST_CASE("expected REINFORCE gradient matches finite differences on the two-step process") {
  const TabularNcmdp toy = make_two_step();
  SoftmaxPolicyTable table(KeyMode::Augmented);
  table.logits(after(1), 2) = {0.3, -0.4};
  table.logits(after(-1), 2) = {-0.2, 0.5};

  // Exact expectation of the estimator over all six outcomes.
  SparseGradient expected;
  const StateKey k0 = toy_key(0, kMin.init());
  for (const Outcome& first : toy.outcomes(0, 0)) {
    const StateKey k1 = after(first.reward);
    const auto pi = table.probabilities(k1, 2);
    for (std::size_t a = 0; a < 2; ++a) {
      for (const Outcome& second : toy.outcomes(1, a)) {
        const double p = first.probability * pi[a] * second.probability;
        const std::vector<double> raw{first.reward, second.reward};
        const PolicySample sample{{k0, k1}, {1, 2}, {0, a}};
        for (const auto& [key, g] : episode_gradient(table, sample, adapted_rewards(raw, kMin))) {
          auto& acc = expected[key];
          acc.resize(g.size(), 0.0);
          for (std::size_t i = 0; i < g.size(); ++i) acc[i] += p * g[i];
        }
      }
    }
  }

  const double h = 1e-5;
  for (const StateKey& key : {after(1), after(-1)}) {
    for (std::size_t i = 0; i < 2; ++i) {
      auto& logit = table.logits(key, 2)[i];
      const double saved = logit;
      logit = saved + h;
      const double up = exact_return(toy, kMin, from_table(table)).objective;
      logit = saved - h;
      const double down = exact_return(toy, kMin, from_table(table)).objective;
      logit = saved;
      CHECK(std::abs(expected[key][i] - (up - down) / (2 * h)) <= 1e-6);
    }
  }
  // The single-action first state carries no gradient.
  for (double g : expected[k0]) CHECK(g == 0.0);
}

TEST_CASE("diagnostics: identical trajectories have zero variance") {
  PeakEnv env;
  SoftmaxPolicyTable t(KeyMode::Raw);
  std::size_t pos = PeakEnv::kStart;
  for (std::size_t step = 0; step < PeakEnv::kHorizon; ++step) {
    const std::size_t a = step < 5 ? 2 : 1;
    t.logits(raw_key(PeakEnv::encode(step, pos)), 3) = {a == 0 ? 50.0 : -50.0, a == 1 ? 50.0 : -50.0,
                                                       a == 2 ? 50.0 : -50.0};
    pos = PeakEnv::move(pos, a);
  }
  const GradientDiagnostics d = gradient_diagnostics(t, env, 50, 1);
  CHECK(d.raw_var_max == 0.0);
  CHECK(d.raw_var_sum == 0.0);
  if (d.defined) {
    CHECK(d.var_max == 0.0);
    CHECK(d.var_sum == 0.0);
  }
}

TEST_CASE("diagnostics: equal reward streams give parallel gradients") {
  // All rewards non-negative: the prefix maximum is the running sum.
  const TabularNcmdp model(0, {{{{0.5, 1.0, 1, false}, {0.5, 0.25, 1, false}}, {{1.0, 2.0, 1, false}}},
                               {{{0.3, 0.0, 0, true}, {0.7, 3.0, 0, true}}, {{1.0, 0.5, 0, true}}}});
  TabularEnv env(model);
  SoftmaxPolicyTable t(KeyMode::Raw);
  t.logits(raw_key(0), 2) = {0.2, -0.1};
  const GradientDiagnostics d = gradient_diagnostics(t, env, 500, 4);
  REQUIRE(d.defined);
  CHECK(d.dot == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(d.var_max == doctest::Approx(d.var_sum).epsilon(1e-12));
}

TEST_CASE("diagnostics on the peak environment under the uniform policy") {
  PeakEnv env;
  const GradientDiagnostics d = gradient_diagnostics(SoftmaxPolicyTable(KeyMode::Raw), env, 1000, 0);
  REQUIRE(d.defined);
  CHECK(d.dot > 0.0);
  CHECK(d.dot < 1.0);
  CHECK(d.var_max < d.var_sum);
}

TEST_CASE("diagnostics preconditions and degenerate gradients") {
  PeakEnv env;
  check_error([&] { gradient_diagnostics(SoftmaxPolicyTable(KeyMode::Augmented), env, 10, 0); },
              ErrorCode::InvalidArgument);
  check_error([&] { gradient_diagnostics(SoftmaxPolicyTable(KeyMode::Raw), env, 1, 0); },
              ErrorCode::InvalidArgument);
  TabularEnv zero(bandit(0, 0));
  const GradientDiagnostics d = gradient_diagnostics(SoftmaxPolicyTable(KeyMode::Raw), zero, 10, 0);
  CHECK_FALSE(d.defined);
  CHECK(std::isnan(d.var_max));
  CHECK(std::isnan(d.dot));
}
