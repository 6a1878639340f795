#include "ncmdp/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <future>
#include <istream>
#include <ostream>
#include <sstream>

#include "ncmdp/error.hpp"
#include "ncmdp/oracle.hpp"

namespace ncmdp {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_short(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

// Runs task(i) for i in [0, count) on up to `threads` workers; results keep index order.
template <typename Result>
std::vector<Result> parallel_map(std::size_t count, std::size_t threads,
                                 const std::function<Result(std::size_t)>& task) {
  std::vector<Result> results(count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) results[i] = task(i);
    return results;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::future<void>> workers;
  for (std::size_t w = 0; w < std::min(threads, count); ++w) {
    workers.push_back(std::async(std::launch::async, [&] {
      for (std::size_t i = next++; i < count; i = next++) results[i] = task(i);
    }));
  }
  for (auto& w : workers) w.get();
  return results;
}

bool close_rel(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

std::vector<double> random_sequence(CounterRng& rng, ObjectiveFamily family, std::size_t min_len,
                                    bool dyadic = false) {
  const std::size_t len = min_len + static_cast<std::size_t>(rng.below(20 - min_len + 1));
  std::vector<double> seq(len);
  for (double& r : seq) {
    do {
      r = rng.uniform(-5.0, 5.0);
      if (dyadic) r = std::round(r * 8.0) / 8.0;
    } while (family == ObjectiveFamily::HarmonicMean && r == 0.0);
  }
  return seq;
}

double telescoped(const Objective& objective, std::span<const double> rewards) {
  double total = 0.0;
  for (double r : adapted_rewards(rewards, objective)) total += r;
  return total;
}

StateKey toy_key(RawState raw, const ObjectiveState& obj) { return make_key({raw, obj}, KeyMode::Augmented); }

ObjectiveState min_state_after(double reward) {
  const Objective min = Objective::min();
  return min.update(min.init(), reward);
}

}  // namespace

BootstrapResult bootstrap_ci(std::span<const double> samples, std::size_t resamples, std::uint64_t seed) {
  if (samples.size() < 2) throw Error(ErrorCode::TooFewSamples, "bootstrap needs at least two samples");
  if (resamples == 0) throw Error(ErrorCode::InvalidArgument, "resamples must be positive");
  const std::size_t n = samples.size();
  double sum = 0.0;
  for (double x : samples) sum += x;

  CounterRng rng(seed);
  std::vector<double> means(resamples);
  for (double& m : means) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += samples[rng.below(n)];
    m = s / static_cast<double>(n);
  }
  std::sort(means.begin(), means.end());
  return {sum / static_cast<double>(n), quantile(means, 0.025), quantile(means, 0.975), resamples, seed};
}

std::map<std::string, std::string> parse_config(std::istream& in) {
  std::map<std::string, std::string> values;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string content = trim(line);
    if (content.empty() || content[0] == '#') continue;
    const auto eq = content.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::MalformedFile, "config line " + std::to_string(number) + " has no '='");
    }
    const std::string key = trim(content.substr(0, eq));
    if (key.empty()) throw Error(ErrorCode::MalformedFile, "config line " + std::to_string(number) + " has no key");
    values[key] = trim(content.substr(eq + 1));
  }
  return values;
}

std::map<std::string, std::string> read_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open config " + path.string());
  return parse_config(in);
}

bool CheckReport::passed() const noexcept { return failures() == 0; }

std::size_t CheckReport::failures() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(checks.begin(), checks.end(), [](const CheckResult& c) { return !c.passed; }));
}

void CheckReport::add(std::string name, bool ok, std::string detail) {
  checks.push_back({std::move(name), ok, std::move(detail)});
}

const char* to_string(UpdateRule rule) noexcept { return rule == UpdateRule::Standard ? "standard" : "cui"; }
const char* to_string(ReturnMode mode) noexcept { return mode == ReturnMode::Cumulative ? "sum" : "max"; }

// ---------------------------------------------------------------------------
// verify / toy

ToyReport run_toy() {
  const TabularNcmdp toy = make_two_step();
  const Objective min = Objective::min();
  ToyReport report;
  report.ours = value_iteration(augmented_model(toy, min), 1e-12);
  report.cui = cui_value_iteration(toy, 1e-12);
  report.ours_return = evaluate_policy_exact(toy, min, greedy_policy(report.ours, KeyMode::Augmented));
  report.cui_return = evaluate_policy_exact(toy, min, greedy_policy(report.cui, KeyMode::Raw));

  auto& c = report.checks;
  auto expect = [&c](const std::string& name, double actual, double expected) {
    c.add(name, std::abs(actual - expected) <= 1e-9, "expected " + fmt_short(expected) + ", got " + fmt_short(actual));
  };
  const StateKey s0 = toy_key(0, min.init());
  const StateKey s1_up = toy_key(1, min_state_after(1.0));
  const StateKey s1_down = toy_key(1, min_state_after(-1.0));
  expect("Q(s0)", report.ours.value(s0, 0), -0.15);
  expect("Q((s1,1),a0)", report.ours.value(s1_up, 0), -1.0);
  expect("Q((s1,1),a1)", report.ours.value(s1_up, 1), -0.3);
  expect("Q((s1,-1),a0)", report.ours.value(s1_down, 0), 0.0);
  expect("Q((s1,-1),a1)", report.ours.value(s1_down, 1), -0.1);
  expect("Q'(s0)", report.cui.value(raw_key(0), 0), -0.5);
  expect("Q'(s1,a0)", report.cui.value(raw_key(1), 0), 0.0);
  expect("Q'(s1,a1)", report.cui.value(raw_key(1), 1), -0.2);
  expect("expected return, augmented greedy", report.ours_return, -0.15);
  expect("expected return, min-update greedy", report.cui_return, -0.5);
  return report;
}

void print_toy(std::ostream& out, const ToyReport& report) {
  const Objective min = Objective::min();
  const struct {
    const char* label;
    StateKey key;
  } rows[] = {{"s0", toy_key(0, min.init())},
              {"(s1, 1)", toy_key(1, min_state_after(1.0))},
              {"(s1, -1)", toy_key(1, min_state_after(-1.0))}};

  out << "Augmented model, value iteration (min objective)\n";
  out << "  state       action  Q\n";
  for (const auto& row : rows) {
    const auto* values = report.ours.find(row.key);
    if (!values) continue;
    for (std::size_t a = 0; a < values->size(); ++a) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "  %-10s  %-6s  %.10g\n", row.label,
                    values->size() == 1 ? "-" : (a == 0 ? "a0" : "a1"), (*values)[a]);
      out << buf;
    }
  }
  out << "  expected return of greedy policy: " << fmt_short(report.ours_return) << "\n\n";

  out << "Raw states, min-update value iteration\n";
  out << "  state       action  Q'\n";
  for (RawState s : {RawState{0}, RawState{1}}) {
    const auto* values = report.cui.find(raw_key(s));
    if (!values) continue;
    for (std::size_t a = 0; a < values->size(); ++a) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "  %-10s  %-6s  %.10g\n", s == 0 ? "s0" : "s1",
                    values->size() == 1 ? "-" : (a == 0 ? "a0" : "a1"), (*values)[a]);
      out << buf;
    }
  }
  out << "  expected return of greedy policy: " << fmt_short(report.cui_return) << "\n\n";

  for (const auto& check : report.checks.checks) {
    out << (check.passed ? "PASS  " : "FAIL  ") << check.name << "  (" << check.detail << ")\n";
  }
}

CheckReport run_verify() {
  CheckReport report;
  const auto objectives = table_objectives(0.9);

  // Telescoping: sum of adapted rewards equals f.
  CounterRng rng(20240601);
  std::size_t total_pass = 0;
  for (const auto& objective : objectives) {
    std::size_t pass = 0;
    std::string first_failure;
    for (int i = 0; i < 1000; ++i) {
      const auto seq = random_sequence(rng, objective.family(), 1);
      const double direct = objective.value(seq);
      const double sum = telescoped(objective, seq);
      if (close_rel(sum, direct, 1e-9)) {
        ++pass;
      } else if (first_failure.empty()) {
        first_failure = "; sequence " + std::to_string(i) + ": f=" + fmt_short(direct) + " sum=" + fmt_short(sum);
      }
    }
    total_pass += pass;
    report.add("telescoping " + objective.id(), pass == 1000, std::to_string(pass) + "/1000" + first_failure);
  }
  report.add("telescoping total", total_pass == 8000, std::to_string(total_pass) + "/8000");

  // Builder equivalence against the specialised adapters.
  for (const auto& objective : objectives) {
    const Objective generic = Objective::generic(generic_form(objective), objective.id() + "-generic");
    const auto family = objective.family();
    const bool exact_family = family == ObjectiveFamily::Max || family == ObjectiveFamily::Min ||
                              family == ObjectiveFamily::Product || family == ObjectiveFamily::PrefixMax;
    std::size_t pass = 0;
    for (int i = 0; i < 100; ++i) {
      // PrefixMax sums in a different order; it is exact on dyadic rewards.
      const bool dyadic = family == ObjectiveFamily::PrefixMax;
      const auto seq = random_sequence(rng, family, 1, dyadic);
      const auto a = adapted_rewards(seq, objective);
      const auto b = adapted_rewards(seq, generic);
      bool ok = true;
      for (std::size_t t = 0; t < a.size(); ++t) {
        ok = ok && (exact_family ? a[t] == b[t] : close_rel(a[t], b[t], 1e-9));
      }
      pass += ok;
    }
    report.add("builder " + objective.id(), pass == 100,
               std::to_string(pass) + "/100" + (exact_family ? " exact" : " within 1e-9"));
  }

  // Return equality on the two-step process.
  const TabularNcmdp toy = make_two_step();
  const Objective min = Objective::min();
  std::vector<std::pair<std::string, StochasticPolicy>> policies;
  policies.emplace_back("optimal", as_stochastic(exact_optimal_return(toy, min).policy));
  policies.emplace_back("min-update greedy", as_stochastic(greedy_policy(cui_value_iteration(toy, 1e-12), KeyMode::Raw)));
  for (std::uint64_t s = 0; s < 20; ++s) policies.emplace_back("random " + std::to_string(s), random_policy(s));
  std::size_t equal = 0;
  double worst = 0.0;
  for (const auto& [name, policy] : policies) {
    const ExactReturn r = exact_return(toy, min, policy);
    worst = std::max(worst, std::abs(r.mdp - r.objective));
    equal += std::abs(r.mdp - r.objective) <= 1e-9;
  }
  report.add("return equality (two-step, min)", equal == policies.size(),
             std::to_string(equal) + "/" + std::to_string(policies.size()) + " policies, max gap " + fmt_short(worst));

  for (auto& check : run_toy().checks.checks) report.checks.push_back(std::move(check));
  return report;
}

// ---------------------------------------------------------------------------
// grid

std::vector<GridRun> run_grid(const GridExperiment& config) {
  if (config.n < 2) throw Error(ErrorCode::InvalidArgument, "grid side must be at least 2");
  if (config.grids == 0 || config.seeds == 0) throw Error(ErrorCode::InvalidArgument, "need grids and seeds");
  const Objective min = Objective::min();

  std::vector<double> oracle(config.grids);
  for (std::size_t g = 0; g < config.grids; ++g) {
    oracle[g] = exact_optimal_return(make_grid(config.n, g).tabular(), min).value;
  }

  const std::size_t count = config.grids * config.seeds;
  return parallel_map<GridRun>(count, config.threads, [&](std::size_t index) {
    const std::size_t g = index / config.seeds;
    const std::size_t a = index % config.seeds;
    GridWorld grid = make_grid(config.n, g);
    TrainConfig train;
    train.total_steps = config.steps;
    train.eval_interval = config.eval_interval;
    train.epsilon = config.epsilon;
    train.rule = config.rule;
    train.seed = CounterRng(config.master_seed, index)();
    GridRun run;
    run.grid_seed = g;
    run.agent_seed = a;
    run.oracle_return = oracle[g];
    run.curve = q_learning(grid, min, train).curve;
    return run;
  });
}

void write_grid_csv(std::ostream& out, const GridExperiment& config, const std::vector<GridRun>& runs) {
  out << "# rng=" << CounterRng::kAlgorithm << " n=" << config.n << " grids=" << config.grids
      << " seeds=" << config.seeds << " rule=" << to_string(config.rule) << " steps=" << config.steps
      << " master_seed=" << config.master_seed << "\n";
  out << "grid_seed,agent_seed,rule,step,greedy_return,oracle_return\n";
  for (const auto& run : runs) {
    for (const auto& p : run.curve) {
      out << run.grid_seed << ',' << run.agent_seed << ',' << to_string(config.rule) << ',' << p.step << ','
          << fmt(p.greedy_return) << ',' << fmt(run.oracle_return) << '\n';
    }
  }
}

std::size_t count_optimal(const std::vector<GridRun>& runs, double tol) {
  return static_cast<std::size_t>(std::count_if(runs.begin(), runs.end(), [tol](const GridRun& r) {
    return std::abs(r.final_return() - r.oracle_return) <= tol;
  }));
}

void print_grid_summary(std::ostream& out, const GridExperiment& config, const std::vector<GridRun>& runs) {
  out << "grid_seed,oracle_return,final_mean,ci_lower,ci_upper,optimal_runs\n";
  for (std::size_t g = 0; g < config.grids; ++g) {
    std::vector<double> finals;
    std::vector<GridRun> mine;
    for (const auto& r : runs) {
      if (r.grid_seed == g) {
        finals.push_back(r.final_return());
        mine.push_back(r);
      }
    }
    out << g << ',' << fmt(mine.front().oracle_return) << ',';
    if (finals.size() >= 2) {
      const auto ci = bootstrap_ci(finals, 10000, g);
      out << fmt(ci.mean) << ',' << fmt(ci.lower) << ',' << fmt(ci.upper);
    } else {
      out << fmt(finals.front()) << ",,";
    }
    out << ',' << count_optimal(mine) << '/' << mine.size() << '\n';
  }
  out << "# runs at oracle optimum: " << count_optimal(runs) << '/' << runs.size() << '\n';
}

// ---------------------------------------------------------------------------
// peak

namespace {

double greedy_improvement(const SoftmaxPolicyTable& policy) {
  PeakEnv env;
  MdpAdapter adapter(env, Objective::prefix_max());
  AugmentedState state = adapter.reset(0);
  std::vector<double> rewards;
  while (true) {
    const auto probs = policy.probabilities(make_key(state, policy.key_mode()), 3);
    const AugmentedStep step = adapter.step(argmax(probs));
    rewards.push_back(step.raw_reward);
    state = step.next;
    if (step.terminal) break;
  }
  return Objective::prefix_max().value(rewards);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::vector<PeakRun> run_peak(const PeakExperiment& config) {
  if (config.episodes == 0) throw Error(ErrorCode::InvalidArgument, "episodes must be positive");
  if (config.seeds == 0 || config.modes.empty()) throw Error(ErrorCode::InvalidArgument, "need seeds and modes");
  const std::size_t count = config.modes.size() * config.seeds;
  return parallel_map<PeakRun>(count, config.threads, [&](std::size_t index) {
    const ReturnMode mode = config.modes[index / config.seeds];
    const std::size_t s = index % config.seeds;
    PeakRun run;
    run.mode = mode;
    run.seed = s;
    const std::uint64_t run_seed = CounterRng(config.master_seed, s)();

    ReinforceConfig rc;
    rc.learning_rate = config.learning_rate;
    rc.episodes = config.episodes;
    rc.seed = run_seed;
    rc.key_mode = config.key_mode;
    rc.log_interval = config.log_interval;
    rc.checkpoint_interval = config.checkpoint_interval;

    PeakEnv env;
    PeakEnv probe;
    CheckpointFn checkpoint;
    if (config.checkpoint_interval > 0 && config.diagnostics_episodes >= 2) {
      checkpoint = [&](std::size_t episode, const SoftmaxPolicyTable& policy) {
        if (policy.key_mode() != KeyMode::Raw) return;
        const std::uint64_t diag_seed = CounterRng(run_seed, 2 + episode)();
        run.checkpoints.push_back(
            {episode, gradient_diagnostics(policy, probe, config.diagnostics_episodes, diag_seed)});
      };
    }
    ReinforceResult result = reinforce(env, mode, rc, checkpoint);
    run.curve = std::move(result.curve);
    run.greedy_improvement = greedy_improvement(result.policy);
    return run;
  });
}

void write_peak_csv(std::ostream& out, const PeakExperiment& config, const std::vector<PeakRun>& runs) {
  out << "# rng=" << CounterRng::kAlgorithm << " seeds=" << config.seeds << " episodes=" << config.episodes
      << " learning_rate=" << fmt(config.learning_rate) << " master_seed=" << config.master_seed << "\n";
  out << "mode,seed,episode,cost_improvement,entropy,var_max,var_sum,dot\n";
  for (const auto& run : runs) {
    std::size_t c = 0;
    auto emit_checkpoint = [&](const Checkpoint& cp) {
      const auto& d = cp.diagnostics;
      out << ',' << fmt(d.var_max) << ',' << fmt(d.var_sum) << ',' << fmt(d.dot);
    };
    for (const auto& p : run.curve) {
      while (c < run.checkpoints.size() && run.checkpoints[c].episode < p.episode) {
        out << to_string(run.mode) << ',' << run.seed << ',' << run.checkpoints[c].episode << ",,";
        emit_checkpoint(run.checkpoints[c++]);
        out << '\n';
      }
      out << to_string(run.mode) << ',' << run.seed << ',' << p.episode << ',' << fmt(p.cost_improvement) << ','
          << fmt(p.entropy);
      if (c < run.checkpoints.size() && run.checkpoints[c].episode == p.episode) {
        emit_checkpoint(run.checkpoints[c++]);
      } else {
        out << ",,,";
      }
      out << '\n';
    }
    for (; c < run.checkpoints.size(); ++c) {
      out << to_string(run.mode) << ',' << run.seed << ',' << run.checkpoints[c].episode << ",,";
      emit_checkpoint(run.checkpoints[c]);
      out << '\n';
    }
  }
}

std::optional<std::size_t> episodes_to_reach(const PeakRun& run, double threshold) {
  for (const auto& p : run.curve) {
    if (p.cost_improvement >= threshold) return p.episode;
  }
  return std::nullopt;
}

PeakSummary summarize_peak(const PeakExperiment& config, const std::vector<PeakRun>& runs, double optimum) {
  PeakSummary s;
  std::vector<double> cumulative;
  std::vector<double> mapped;
  const double budget = static_cast<double>(config.episodes + 1);
  for (const auto& run : runs) {
    const auto reached = episodes_to_reach(run, 0.9 * optimum);
    const double episodes = reached ? static_cast<double>(*reached) : budget;
    if (run.mode == ReturnMode::Cumulative) {
      cumulative.push_back(episodes);
    } else {
      mapped.push_back(episodes);
      ++s.mapped_runs;
      s.mapped_optimal += run.greedy_improvement >= optimum - 1e-9;
    }
  }
  if (!cumulative.empty()) s.median_episodes_cumulative = median(cumulative);
  if (!mapped.empty()) s.median_episodes_mapped = median(mapped);

  // Early checkpoints: both estimators on the same trajectories, averaged over runs.
  const std::size_t quarter = config.episodes / 4;
  std::map<std::size_t, std::pair<std::vector<double>, std::vector<double>>> by_episode;
  double dot_sum = 0.0;
  std::size_t dot_count = 0;
  for (const auto& run : runs) {
    for (const auto& cp : run.checkpoints) {
      if (cp.episode > quarter) continue;
      auto& slot = by_episode[cp.episode];
      const auto& d = cp.diagnostics;
      if (!d.defined) continue;
      slot.first.push_back(d.var_max);
      slot.second.push_back(d.var_sum);
      dot_sum += d.dot;
      ++dot_count;
    }
  }
  for (const auto& [episode, slot] : by_episode) {
    ++s.early_checkpoints;
    if (slot.first.empty()) continue;
    double vm = 0.0, vs = 0.0;
    for (double v : slot.first) vm += v;
    for (double v : slot.second) vs += v;
    s.variance_wins += vm < vs;
  }
  s.mean_early_dot = dot_count ? dot_sum / static_cast<double>(dot_count) : std::nan("");
  return s;
}

void print_peak_summary(std::ostream& out, const PeakSummary& s) {
  out << "# median episodes to 0.9 of optimum: sum=" << fmt(s.median_episodes_cumulative)
      << " max=" << fmt(s.median_episodes_mapped) << '\n';
  out << "# early checkpoints with lower mapped variance: " << s.variance_wins << '/' << s.early_checkpoints << '\n';
  out << "# mean early gradient dot product: " << fmt(s.mean_early_dot) << '\n';
  if (s.mapped_runs) {
    out << "# mapped runs whose greedy policy is optimal: " << s.mapped_optimal << '/' << s.mapped_runs << '\n';
  }
}

}  // namespace ncmdp
