#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ncmdp {

enum class ObjectiveFamily {
  Max,
  Min,
  Sharpe,
  PrefixMax,
  Product,
  HarmonicMean,
  LengthDiscounted,
  Mean,
  Generic,
};

/// Extra state h_t carried next to the environment state, plus the number of
/// rewards folded into it so far.
struct ObjectiveState {
  std::vector<double> h;
  std::int64_t t = 0;

  bool started() const noexcept { return t > 0; }

  friend bool operator==(const ObjectiveState&, const ObjectiveState&) = default;
};

/// One accumulator b_j of a generic objective. Each reward is first mapped
/// by `map(step, reward)` and then combined as `fold(mapped, b_j)`.
struct Accumulator {
  std::function<double(double step, double reward)> map;
  std::function<double(double mapped, double acc)> fold;
  /// Value of b_j before the first reward. When empty the first mapped
  /// reward becomes b_j directly (no identity element needed for max/min).
  std::optional<double> seed;
};

/// Objective of the form f = F(count, b_0, ..., b_{k-1}).
struct GenericSpec {
  std::vector<Accumulator> accumulators;
  std::function<double(double count, std::span<const double> acc)> finish;
};

/// Variance floor below which the Sharpe ratio is reported as 0.
inline constexpr double kSharpeVarianceFloor = 1e-12;

/// A non-cumulative objective f together with its telescoping adapter
/// (initial state, state update and adapted reward).
///
/// The adapter guarantees that summing `adapted_reward` along a reward
/// sequence, with `update` applied after every reward, reproduces
/// `value(sequence)`. Instances are cheap to copy and immutable.
class Objective {
 public:
  static Objective max();
  static Objective min();
  static Objective sharpe();
  static Objective prefix_max();
  static Objective product();
  static Objective harmonic_mean();
  static Objective length_discounted(double delta);
  static Objective mean();
  static Objective generic(GenericSpec spec, std::string name = "generic");

  /// Parses the lowercase identifiers used by the CLI:
  /// max, min, sharpe, prefixmax, product, harmonic, discounted:<delta>, mean.
  static Objective parse(std::string_view id);

  ObjectiveFamily family() const noexcept { return family_; }
  double discount() const noexcept { return delta_; }
  std::string id() const;
  std::size_t state_size() const;

  ObjectiveState init() const;
  ObjectiveState update(const ObjectiveState& state, double reward) const;
  double adapted_reward(const ObjectiveState& state, double reward) const;

  /// Direct evaluation of f on a complete sequence (no telescoping).
  double value(std::span<const double> rewards) const;

 private:
  Objective(ObjectiveFamily family, double delta, std::shared_ptr<const GenericSpec> spec,
            std::string name);

  void check_reward(double reward) const;
  void check_state(const ObjectiveState& state) const;
  double generic_finish(const std::vector<double>& h) const;

  ObjectiveFamily family_;
  double delta_ = 0.0;
  std::shared_ptr<const GenericSpec> spec_;
  std::string name_;
};

/// Generic construction: wraps `spec` into an adapter with a k+1 dimensional
/// state whose last entry counts steps.
Objective build_generic(GenericSpec spec);

/// The (F, B_j, phi_j) form of one of the specialised objectives. Throws for
/// Generic.
GenericSpec generic_form(const Objective& objective);

/// Sharpe ratio of (mean, mean of squares), 0 when the variance is degenerate.
double guarded_sharpe(double mean, double mean_of_squares) noexcept;

std::vector<Objective> table_objectives(double delta = 0.9);

}  // namespace ncmdp
