#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "ncmdp/mapping.hpp"
#include "ncmdp/rng.hpp"

namespace ncmdp {

/// One possible result of taking an action.
struct Outcome {
  double probability = 1.0;
  double reward = 0.0;
  std::size_t next = 0;
  bool terminal = false;
};

/// Explicit finite NCMDP. Transitions are indexed [state][action] and list
/// the outcomes of that action. The constructor validates that every row is
/// a probability distribution and that non-terminal successors have actions.
class TabularNcmdp {
 public:
  using Transitions = std::vector<std::vector<std::vector<Outcome>>>;

  TabularNcmdp(std::size_t start, Transitions transitions);

  std::size_t state_count() const noexcept { return transitions_.size(); }
  std::size_t start() const noexcept { return start_; }
  std::size_t action_count(std::size_t state) const { return transitions_.at(state).size(); }
  const std::vector<Outcome>& outcomes(std::size_t state, std::size_t action) const {
    return transitions_.at(state).at(action);
  }
  bool deterministic() const noexcept;

 private:
  std::size_t start_;
  Transitions transitions_;
};

/// Samples episodes from a TabularNcmdp. Stochastic outcomes are drawn from
/// a generator reseeded by every reset.
class TabularEnv : public Environment {
 public:
  explicit TabularEnv(TabularNcmdp model);

  RawState reset(std::uint64_t seed) override;
  StepResult step(std::size_t action) override;
  std::size_t action_count(RawState state) const override;

  const TabularNcmdp& model() const noexcept { return model_; }

 private:
  TabularNcmdp model_;
  CounterRng rng_;
  std::size_t state_ = 0;
  bool active_ = false;
};

/// Two-step process: one forced action with reward +1 or -1 (each 1/2),
/// then a choice between a safe action (reward 0) and a risky one
/// (+2 with probability 0.9, -2 with probability 0.1).
/// States: 0 = first step, 1 = second step, 2 = absorbing end.
TabularNcmdp make_two_step();

enum class GridAction : std::size_t { Left = 0, Straight = 1, Right = 2 };

/// N x N grid crossed column by column. Each move enters the next column and
/// shifts the row by -1, 0 or +1 (clamped); the reward is the entered tile's.
/// Raw state = column * N + row.
class GridWorld : public Environment {
 public:
  /// `tiles` is column-major: tiles[column * n + row].
  GridWorld(std::size_t n, std::vector<double> tiles);

  RawState reset(std::uint64_t seed) override;
  StepResult step(std::size_t action) override;
  std::size_t action_count(RawState) const override { return 3; }

  std::size_t size() const noexcept { return n_; }
  double tile(std::size_t column, std::size_t row) const { return tiles_.at(column * n_ + row); }
  std::span<const double> tiles() const noexcept { return tiles_; }
  std::size_t column() const noexcept { return column_; }
  std::size_t row() const noexcept { return row_; }
  std::size_t start_row() const noexcept { return n_ / 2; }

  RawState encode(std::size_t column, std::size_t row) const noexcept {
    return static_cast<RawState>(column * n_ + row);
  }

  TabularNcmdp tabular() const;

  friend bool operator==(const GridWorld& a, const GridWorld& b) {
    return a.n_ == b.n_ && a.tiles_ == b.tiles_;
  }

 private:
  std::size_t n_;
  std::vector<double> tiles_;
  std::size_t column_ = 0;
  std::size_t row_ = 0;
  bool active_ = false;
};

/// Grid with tiles drawn uniformly from [-1, 1].
GridWorld make_grid(std::size_t n, std::uint64_t seed);

void write_grid(std::ostream& out, const GridWorld& grid);
GridWorld read_grid(std::istream& in);
void save_grid(const GridWorld& grid, const std::filesystem::path& path);
GridWorld load_grid(const std::filesystem::path& path);

/// One-dimensional cost landscape walked for a fixed number of steps. The
/// reward is the cost decrease of each move, so the PrefixMax objective of
/// an episode is the start cost minus the lowest cost visited.
/// Raw state = steps_taken * positions + position.
class PeakEnv : public Environment {
 public:
  static constexpr std::size_t kHorizon = 10;
  static constexpr std::array<double, 9> kCosts = {3, 2, 1, 2, 3, 2, 1, 0, 1};
  static constexpr std::size_t kStart = 2;

  PeakEnv() = default;

  RawState reset(std::uint64_t seed) override;
  StepResult step(std::size_t action) override;
  std::size_t action_count(RawState) const override { return 3; }

  std::size_t position() const noexcept { return position_; }
  std::size_t steps_taken() const noexcept { return steps_; }
  static std::size_t positions() noexcept { return kCosts.size(); }
  static double cost(std::size_t position) { return kCosts.at(position); }
  static std::size_t move(std::size_t position, std::size_t action) noexcept;

  static RawState encode(std::size_t steps, std::size_t position) noexcept {
    return static_cast<RawState>(steps * kCosts.size() + position);
  }
  static std::size_t position_of(RawState state) noexcept {
    return static_cast<std::size_t>(state) % kCosts.size();
  }

  static TabularNcmdp tabular();

 private:
  std::size_t position_ = kStart;
  std::size_t steps_ = 0;
  bool active_ = false;
};

inline PeakEnv make_peak() { return PeakEnv{}; }

}  // namespace ncmdp
