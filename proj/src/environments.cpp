#include "ncmdp/environments.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "ncmdp/error.hpp"

namespace ncmdp {

TabularNcmdp::TabularNcmdp(std::size_t start, Transitions transitions)
    : start_(start), transitions_(std::move(transitions)) {
  const std::size_t n = transitions_.size();
  if (start_ >= n) throw Error(ErrorCode::InvalidModel, "start state out of range");
  if (transitions_[start_].empty()) throw Error(ErrorCode::InvalidModel, "start state has no actions");
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t a = 0; a < transitions_[s].size(); ++a) {
      const auto& row = transitions_[s][a];
      const std::string where = "(" + std::to_string(s) + ", " + std::to_string(a) + ")";
      if (row.empty()) throw Error(ErrorCode::InvalidModel, "no outcomes for " + where);
      double total = 0.0;
      for (const auto& o : row) {
        if (!(o.probability > 0.0)) throw Error(ErrorCode::InvalidModel, "non-positive probability at " + where);
        if (!std::isfinite(o.reward)) throw Error(ErrorCode::InvalidModel, "non-finite reward at " + where);
        if (o.next >= n) throw Error(ErrorCode::InvalidModel, "successor out of range at " + where);
        if (!o.terminal && transitions_[o.next].empty()) {
          throw Error(ErrorCode::InvalidModel, "non-terminal successor without actions at " + where);
        }
        total += o.probability;
      }
      if (std::abs(total - 1.0) > 1e-12) {
        throw Error(ErrorCode::InvalidModel, "probabilities at " + where + " do not sum to 1");
      }
    }
  }
}

bool TabularNcmdp::deterministic() const noexcept {
  for (const auto& actions : transitions_) {
    for (const auto& row : actions) {
      if (row.size() != 1) return false;
    }
  }
  return true;
}

TabularEnv::TabularEnv(TabularNcmdp model) : model_(std::move(model)) {}

RawState TabularEnv::reset(std::uint64_t seed) {
  rng_ = CounterRng(seed);
  state_ = model_.start();
  active_ = true;
  return static_cast<RawState>(state_);
}

StepResult TabularEnv::step(std::size_t action) {
  if (!active_) throw Error(ErrorCode::EpisodeState, "step on a finished or unstarted episode");
  if (action >= model_.action_count(state_)) {
    throw Error(ErrorCode::InvalidArgument, "action " + std::to_string(action) + " not available");
  }
  const auto& row = model_.outcomes(state_, action);
  const double u = rng_.uniform();
  double cumulative = 0.0;
  const Outcome* chosen = &row.back();
  for (const auto& o : row) {
    cumulative += o.probability;
    if (u < cumulative) {
      chosen = &o;
      break;
    }
  }
  state_ = chosen->next;
  active_ = !chosen->terminal;
  return {chosen->reward, static_cast<RawState>(state_), chosen->terminal};
}

std::size_t TabularEnv::action_count(RawState state) const {
  return model_.action_count(static_cast<std::size_t>(state));
}

TabularNcmdp make_two_step() {
  TabularNcmdp::Transitions t(3);
  t[0] = {{{0.5, 1.0, 1, false}, {0.5, -1.0, 1, false}}};
  t[1] = {{{1.0, 0.0, 2, true}}, {{0.9, 2.0, 2, true}, {0.1, -2.0, 2, true}}};
  return TabularNcmdp(0, std::move(t));
}

// ---------------------------------------------------------------------------
// Grid

GridWorld::GridWorld(std::size_t n, std::vector<double> tiles) : n_(n), tiles_(std::move(tiles)) {
  if (n_ < 2) throw Error(ErrorCode::InvalidArgument, "grid side must be at least 2");
  if (tiles_.size() != n_ * n_) {
    throw Error(ErrorCode::DimensionMismatch, "expected " + std::to_string(n_ * n_) + " tiles, got " +
                                                  std::to_string(tiles_.size()));
  }
  row_ = start_row();
}

RawState GridWorld::reset(std::uint64_t) {
  column_ = 0;
  row_ = start_row();
  active_ = true;
  return encode(column_, row_);
}

StepResult GridWorld::step(std::size_t action) {
  if (!active_ || column_ + 1 >= n_) throw Error(ErrorCode::EpisodeState, "grid episode is over");
  switch (static_cast<GridAction>(action)) {
    case GridAction::Left:
      row_ = row_ == 0 ? 0 : row_ - 1;
      break;
    case GridAction::Straight:
      break;
    case GridAction::Right:
      row_ = std::min(row_ + 1, n_ - 1);
      break;
    default:
      throw Error(ErrorCode::InvalidArgument, "grid action must be 0, 1 or 2");
  }
  ++column_;
  const bool terminal = column_ + 1 == n_;
  active_ = !terminal;
  return {tile(column_, row_), encode(column_, row_), terminal};
}

TabularNcmdp GridWorld::tabular() const {
  TabularNcmdp::Transitions t(n_ * n_);
  for (std::size_t c = 0; c + 1 < n_; ++c) {
    for (std::size_t r = 0; r < n_; ++r) {
      auto& actions = t[encode(c, r)];
      const std::size_t rows[3] = {r == 0 ? 0 : r - 1, r, std::min(r + 1, n_ - 1)};
      for (std::size_t next_row : rows) {
        const bool terminal = c + 2 == n_;
        actions.push_back({{1.0, tile(c + 1, next_row), static_cast<std::size_t>(encode(c + 1, next_row)),
                            terminal}});
      }
    }
  }
  return TabularNcmdp(static_cast<std::size_t>(encode(0, start_row())), std::move(t));
}

GridWorld make_grid(std::size_t n, std::uint64_t seed) {
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "grid side must be at least 2");
  CounterRng rng(seed);
  std::vector<double> tiles(n * n);
  for (double& v : tiles) v = rng.uniform(-1.0, 1.0);
  return GridWorld(n, std::move(tiles));
}

// File layout: first line N, then one line per row listing the tiles of
// columns 0..N-1.
void write_grid(std::ostream& out, const GridWorld& grid) {
  const std::size_t n = grid.size();
  out << n << '\n' << std::setprecision(17);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      if (c) out << ' ';
      out << grid.tile(c, r);
    }
    out << '\n';
  }
}

GridWorld read_grid(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::MalformedFile, "missing size line");
  std::size_t n = 0;
  {
    auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), n);
    if (ec != std::errc{} || ptr != line.data() + line.size()) {
      throw Error(ErrorCode::MalformedFile, "bad size line '" + line + "'");
    }
  }
  if (n < 2) throw Error(ErrorCode::MalformedFile, "grid side must be at least 2");

  std::vector<double> tiles(n * n);
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (rows == n) throw Error(ErrorCode::DimensionMismatch, "more than " + std::to_string(n) + " rows");
    std::istringstream fields(line);
    std::string field;
    std::size_t c = 0;
    while (fields >> field) {
      if (c == n) throw Error(ErrorCode::DimensionMismatch, "row " + std::to_string(rows) + " too long");
      double value = 0.0;
      auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
      if (ec != std::errc{} || ptr != field.data() + field.size()) {
        throw Error(ErrorCode::MalformedFile, "bad value '" + field + "'");
      }
      tiles[c * n + rows] = value;
      ++c;
    }
    if (c != n) throw Error(ErrorCode::DimensionMismatch, "row " + std::to_string(rows) + " too short");
    ++rows;
  }
  if (rows != n) {
    throw Error(ErrorCode::DimensionMismatch,
                "expected " + std::to_string(n) + " rows, got " + std::to_string(rows));
  }
  return GridWorld(n, std::move(tiles));
}

void save_grid(const GridWorld& grid, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  write_grid(out, grid);
  if (!out.flush()) throw Error(ErrorCode::Io, "write to " + path.string() + " failed");
}

GridWorld load_grid(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return read_grid(in);
}

// ---------------------------------------------------------------------------
// Peak

std::size_t PeakEnv::move(std::size_t position, std::size_t action) noexcept {
  if (action == 0) return position == 0 ? 0 : position - 1;
  if (action == 2) return std::min(position + 1, kCosts.size() - 1);
  return position;
}

RawState PeakEnv::reset(std::uint64_t) {
  position_ = kStart;
  steps_ = 0;
  active_ = true;
  return encode(steps_, position_);
}

StepResult PeakEnv::step(std::size_t action) {
  if (!active_) throw Error(ErrorCode::EpisodeState, "peak episode is over");
  if (action > 2) throw Error(ErrorCode::InvalidArgument, "peak action must be 0, 1 or 2");
  const std::size_t next = move(position_, action);
  const double reward = kCosts[position_] - kCosts[next];
  position_ = next;
  ++steps_;
  const bool terminal = steps_ == kHorizon;
  active_ = !terminal;
  return {reward, encode(steps_, position_), terminal};
}

TabularNcmdp PeakEnv::tabular() {
  const std::size_t n = kCosts.size();
  TabularNcmdp::Transitions t((kHorizon + 1) * n);
  for (std::size_t step = 0; step < kHorizon; ++step) {
    for (std::size_t p = 0; p < n; ++p) {
      auto& actions = t[encode(step, p)];
      for (std::size_t a = 0; a < 3; ++a) {
        const std::size_t q = move(p, a);
        actions.push_back({{1.0, kCosts[p] - kCosts[q], static_cast<std::size_t>(encode(step + 1, q)),
                            step + 1 == kHorizon}});
      }
    }
  }
  return TabularNcmdp(static_cast<std::size_t>(encode(0, kStart)), std::move(t));
}

}  // namespace ncmdp
