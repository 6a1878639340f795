#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ncmdp/solvers.hpp"

namespace ncmdp {

struct BootstrapResult {
  double mean = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  std::size_t resamples = 0;
  std::uint64_t seed = 0;
};

/// Percentile bootstrap (95%) of the sample mean.
BootstrapResult bootstrap_ci(std::span<const double> samples, std::size_t resamples = 10000,
                             std::uint64_t seed = 0);

/// `key = value` lines; blank lines and lines starting with '#' are ignored.
std::map<std::string, std::string> parse_config(std::istream& in);
std::map<std::string, std::string> read_config(const std::filesystem::path& path);

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct CheckReport {
  std::vector<CheckResult> checks;

  bool passed() const noexcept;
  void add(std::string name, bool ok, std::string detail = {});
  std::size_t failures() const noexcept;
};

/// Telescoping, builder equivalence, return equality on the two-step
/// process and its golden Q-values.
CheckReport run_verify();

struct ToyReport {
  QTable ours;
  QTable cui;
  double ours_return = 0.0;
  double cui_return = 0.0;
  CheckReport checks;
};

ToyReport run_toy();
void print_toy(std::ostream& out, const ToyReport& report);

// ---------------------------------------------------------------------------
// Grid experiment

struct GridExperiment {
  std::size_t n = 3;
  std::size_t grids = 10;
  std::size_t seeds = 5;
  UpdateRule rule = UpdateRule::Standard;
  std::size_t steps = 100000;
  std::size_t eval_interval = 1000;
  double epsilon = 0.1;
  std::uint64_t master_seed = 0;
  std::size_t threads = 1;
};

struct GridRun {
  std::uint64_t grid_seed = 0;
  std::uint64_t agent_seed = 0;
  double oracle_return = 0.0;
  std::vector<CurvePoint> curve;

  double final_return() const { return curve.back().greedy_return; }
};

std::vector<GridRun> run_grid(const GridExperiment& config);
void write_grid_csv(std::ostream& out, const GridExperiment& config, const std::vector<GridRun>& runs);
void print_grid_summary(std::ostream& out, const GridExperiment& config, const std::vector<GridRun>& runs);
std::size_t count_optimal(const std::vector<GridRun>& runs, double tol = 1e-6);

// ---------------------------------------------------------------------------
// Peak experiment

struct PeakExperiment {
  std::vector<ReturnMode> modes = {ReturnMode::Cumulative, ReturnMode::MappedPrefixMax};
  std::size_t seeds = 10;
  std::size_t episodes = 100000;
  double learning_rate = 1.0 / 1024.0;
  KeyMode key_mode = KeyMode::Raw;
  std::size_t log_interval = 100;
  std::size_t checkpoint_interval = 500;
  std::size_t diagnostics_episodes = 1000;
  std::uint64_t master_seed = 0;
  std::size_t threads = 1;
};

struct Checkpoint {
  std::size_t episode = 0;
  GradientDiagnostics diagnostics;
};

struct PeakRun {
  ReturnMode mode = ReturnMode::Cumulative;
  std::uint64_t seed = 0;
  std::vector<ReinforcePoint> curve;
  std::vector<Checkpoint> checkpoints;
  double greedy_improvement = 0.0;  // improvement of the argmax policy
};

std::vector<PeakRun> run_peak(const PeakExperiment& config);
void write_peak_csv(std::ostream& out, const PeakExperiment& config, const std::vector<PeakRun>& runs);

/// First logged episode whose interval-mean improvement reaches `threshold`;
/// empty when never reached.
std::optional<std::size_t> episodes_to_reach(const PeakRun& run, double threshold);

struct PeakSummary {
  double median_episodes_cumulative = 0.0;  // unreached runs count as budget + 1
  double median_episodes_mapped = 0.0;
  std::size_t early_checkpoints = 0;
  std::size_t variance_wins = 0;  // early checkpoints where mean var_max < mean var_sum
  double mean_early_dot = 0.0;
  std::size_t mapped_optimal = 0;  // mapped runs whose greedy policy reaches the optimum
  std::size_t mapped_runs = 0;
};

PeakSummary summarize_peak(const PeakExperiment& config, const std::vector<PeakRun>& runs,
                           double optimum = 1.0);
void print_peak_summary(std::ostream& out, const PeakSummary& summary);

const char* to_string(UpdateRule rule) noexcept;
const char* to_string(ReturnMode mode) noexcept;

}  // namespace ncmdp
