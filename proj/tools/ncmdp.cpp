// Command-line runner: verify, toy, grid, peak.
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "ncmdp/error.hpp"
#include "ncmdp/experiments.hpp"

namespace {

constexpr int kExitCheckFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Config values fill options that were not given on the command line.
void apply_config(CLI::App& cmd, const std::string& path) {
  if (path.empty()) return;
  for (const auto& [name, value] : ncmdp::read_config(path)) {
    std::string key = name;
    for (char& c : key) {
      if (c == '_') c = '-';
    }
    if (key == "config") continue;
    CLI::Option* opt = nullptr;
    try {
      opt = cmd.get_option("--" + key);
    } catch (const CLI::OptionNotFound&) {
      throw UsageError("unknown config key '" + key + "' for " + cmd.get_name());
    }
    if (opt->count() > 0) continue;
    try {
      opt->add_result(value);
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw UsageError("config key '" + key + "': " + e.what());
    }
  }
}

std::ostream& open_output(const std::string& path, std::unique_ptr<std::ofstream>& holder) {
  if (path.empty() || path == "-") return std::cout;
  holder = std::make_unique<std::ofstream>(path);
  if (!*holder) throw ncmdp::Error(ncmdp::ErrorCode::Io, "cannot write " + path);
  return *holder;
}

std::size_t default_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Non-cumulative objectives mapped to standard MDPs"};
  app.require_subcommand(1);

  std::string config_path;

  auto* verify = app.add_subcommand("verify", "Run the invariant suite");
  verify->add_option("--config", config_path, "key = value config file");

  auto* toy = app.add_subcommand("toy", "Value iteration on the two-step example");
  toy->add_option("--config", config_path, "key = value config file");

  ncmdp::GridExperiment grid_cfg;
  grid_cfg.threads = default_threads();
  std::string grid_rule = "standard";
  std::string grid_out;
  auto* grid = app.add_subcommand("grid", "Q-learning on random min-objective grids");
  grid->add_option("--config", config_path, "key = value config file");
  grid->add_option("--n", grid_cfg.n, "grid side")->check(CLI::Range(2, 64));
  grid->add_option("--grids", grid_cfg.grids, "number of grid seeds")->check(CLI::PositiveNumber);
  grid->add_option("--seeds", grid_cfg.seeds, "agent seeds per grid")->check(CLI::PositiveNumber);
  grid->add_option("--rule", grid_rule, "update rule")->check(CLI::IsMember({"standard", "cui"}));
  grid->add_option("--steps", grid_cfg.steps, "environment steps per run")->check(CLI::PositiveNumber);
  grid->add_option("--eval-interval", grid_cfg.eval_interval, "steps between evaluations")
      ->check(CLI::PositiveNumber);
  grid->add_option("--epsilon", grid_cfg.epsilon, "exploration rate")->check(CLI::Range(0.0, 1.0));
  grid->add_option("--master-seed", grid_cfg.master_seed, "seed for agent streams");
  grid->add_option("--threads", grid_cfg.threads, "worker threads")->check(CLI::PositiveNumber);
  grid->add_option("--out", grid_out, "CSV path (stdout when omitted)");

  ncmdp::PeakExperiment peak_cfg;
  peak_cfg.threads = default_threads();
  std::string peak_mode = "both";
  std::string peak_out;
  auto* peak = app.add_subcommand("peak", "REINFORCE on the peak-cost environment");
  peak->add_option("--config", config_path, "key = value config file");
  peak->add_option("--mode", peak_mode, "return mode")->check(CLI::IsMember({"sum", "max", "both"}));
  peak->add_option("--seeds", peak_cfg.seeds, "seeds per mode")->check(CLI::PositiveNumber);
  peak->add_option("--episodes", peak_cfg.episodes, "training episodes")->check(CLI::PositiveNumber);
  peak->add_option("--lr", peak_cfg.learning_rate, "learning rate")->check(CLI::PositiveNumber);
  peak->add_option("--log-interval", peak_cfg.log_interval, "episodes per curve point")
      ->check(CLI::PositiveNumber);
  peak->add_option("--checkpoint-interval", peak_cfg.checkpoint_interval, "episodes between diagnostics, 0 = off");
  peak->add_option("--diagnostics", peak_cfg.diagnostics_episodes, "episodes per diagnostic")
      ->check(CLI::Range(2, 1000000));
  std::string policy_state = "raw";
  peak->add_option("--policy-state", policy_state, "state seen by the mapped-mode policy")
      ->check(CLI::IsMember({"raw", "augmented"}));
  peak->add_option("--master-seed", peak_cfg.master_seed, "seed for run streams");
  peak->add_option("--threads", peak_cfg.threads, "worker threads")->check(CLI::PositiveNumber);
  peak->add_option("--out", peak_out, "CSV path (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    CLI::App* cmd = app.get_subcommands().front();
    apply_config(*cmd, config_path);

    if (cmd == verify) {
      const auto report = ncmdp::run_verify();
      for (const auto& c : report.checks) {
        std::cout << (c.passed ? "PASS  " : "FAIL  ") << c.name << "  (" << c.detail << ")\n";
      }
      std::cout << (report.checks.size() - report.failures()) << '/' << report.checks.size() << " checks passed\n";
      return report.passed() ? 0 : kExitCheckFailure;
    }
    if (cmd == toy) {
      const auto report = ncmdp::run_toy();
      ncmdp::print_toy(std::cout, report);
      return report.checks.passed() ? 0 : kExitCheckFailure;
    }
    if (cmd == grid) {
      grid_cfg.rule = grid_rule == "cui" ? ncmdp::UpdateRule::CuiMin : ncmdp::UpdateRule::Standard;
      const auto runs = ncmdp::run_grid(grid_cfg);
      std::unique_ptr<std::ofstream> file;
      ncmdp::write_grid_csv(open_output(grid_out, file), grid_cfg, runs);
      ncmdp::print_grid_summary(file ? std::cout : std::cerr, grid_cfg, runs);
      return 0;
    }
    if (cmd == peak) {
      if (peak_mode == "sum") peak_cfg.modes = {ncmdp::ReturnMode::Cumulative};
      if (peak_mode == "max") peak_cfg.modes = {ncmdp::ReturnMode::MappedPrefixMax};
      peak_cfg.key_mode = policy_state == "augmented" ? ncmdp::KeyMode::Augmented : ncmdp::KeyMode::Raw;
      const auto runs = ncmdp::run_peak(peak_cfg);
      std::unique_ptr<std::ofstream> file;
      ncmdp::write_peak_csv(open_output(peak_out, file), peak_cfg, runs);
      ncmdp::print_peak_summary(file ? std::cout : std::cerr, ncmdp::summarize_peak(peak_cfg, runs));
      return 0;
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ncmdp::Error& e) {
    std::cerr << "error [" << ncmdp::to_string(e.code()) << "]: " << e.what() << '\n';
    return e.code() == ncmdp::ErrorCode::InvalidArgument ? kExitUsage : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
