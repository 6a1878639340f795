#include "ncmdp/objectives.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <utility>

#include "ncmdp/error.hpp"

namespace ncmdp {

namespace {

double parse_double(std::string_view text) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw Error(ErrorCode::InvalidArgument, "not a number: '" + std::string(text) + "'");
  }
  return value;
}

std::string shortest(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

double discounted(double delta, double count, double sum) {
  // delta^(count-1) * sum, with the empty prefix worth 0.
  return count == 0.0 ? 0.0 : std::pow(delta, count - 1.0) * sum;
}

}  // namespace

double guarded_sharpe(double mean, double mean_of_squares) noexcept {
  const double variance = mean_of_squares - mean * mean;
  if (!(variance > kSharpeVarianceFloor)) return 0.0;
  return mean / std::sqrt(variance);
}

Objective::Objective(ObjectiveFamily family, double delta, std::shared_ptr<const GenericSpec> spec,
                     std::string name)
    : family_(family), delta_(delta), spec_(std::move(spec)), name_(std::move(name)) {}

Objective Objective::max() { return {ObjectiveFamily::Max, 0.0, nullptr, "max"}; }
Objective Objective::min() { return {ObjectiveFamily::Min, 0.0, nullptr, "min"}; }
Objective Objective::sharpe() { return {ObjectiveFamily::Sharpe, 0.0, nullptr, "sharpe"}; }
Objective Objective::prefix_max() { return {ObjectiveFamily::PrefixMax, 0.0, nullptr, "prefixmax"}; }
Objective Objective::product() { return {ObjectiveFamily::Product, 0.0, nullptr, "product"}; }
Objective Objective::harmonic_mean() {
  return {ObjectiveFamily::HarmonicMean, 0.0, nullptr, "harmonic"};
}
Objective Objective::mean() { return {ObjectiveFamily::Mean, 0.0, nullptr, "mean"}; }

Objective Objective::length_discounted(double delta) {
  if (!(delta > 0.0 && delta < 1.0)) {
    throw Error(ErrorCode::InvalidArgument,
                "discount must lie strictly inside (0, 1), got " + shortest(delta));
  }
  return {ObjectiveFamily::LengthDiscounted, delta, nullptr, "discounted"};
}

Objective Objective::generic(GenericSpec spec, std::string name) {
  if (spec.accumulators.empty()) {
    throw Error(ErrorCode::MalformedSpec, "at least one accumulator is required");
  }
  for (const auto& acc : spec.accumulators) {
    if (!acc.map || !acc.fold) {
      throw Error(ErrorCode::MalformedSpec, "accumulator without map or fold");
    }
  }
  if (!spec.finish) throw Error(ErrorCode::MalformedSpec, "missing finishing map");
  return {ObjectiveFamily::Generic, 0.0, std::make_shared<const GenericSpec>(std::move(spec)),
          std::move(name)};
}

Objective build_generic(GenericSpec spec) { return Objective::generic(std::move(spec)); }

Objective Objective::parse(std::string_view id) {
  if (id == "max") return max();
  if (id == "min") return min();
  if (id == "sharpe") return sharpe();
  if (id == "prefixmax") return prefix_max();
  if (id == "product") return product();
  if (id == "harmonic") return harmonic_mean();
  if (id == "mean") return mean();
  constexpr std::string_view prefix = "discounted:";
  if (id.starts_with(prefix)) return length_discounted(parse_double(id.substr(prefix.size())));
  throw Error(ErrorCode::InvalidArgument, "unknown objective '" + std::string(id) + "'");
}

std::string Objective::id() const {
  if (family_ == ObjectiveFamily::LengthDiscounted) return "discounted:" + shortest(delta_);
  return name_;
}

std::size_t Objective::state_size() const {
  switch (family_) {
    case ObjectiveFamily::Max:
    case ObjectiveFamily::Min:
    case ObjectiveFamily::PrefixMax:
    case ObjectiveFamily::Product:
    case ObjectiveFamily::HarmonicMean:
      return 1;
    case ObjectiveFamily::LengthDiscounted:
    case ObjectiveFamily::Mean:
      return 2;
    case ObjectiveFamily::Sharpe:
      return 3;
    case ObjectiveFamily::Generic:
      return spec_->accumulators.size() + 1;
  }
  return 0;
}

ObjectiveState Objective::init() const {
  ObjectiveState state;
  state.h.assign(state_size(), 0.0);
  if (family_ == ObjectiveFamily::Product) state.h[0] = 1.0;
  if (family_ == ObjectiveFamily::Generic) {
    for (std::size_t j = 0; j < spec_->accumulators.size(); ++j) {
      state.h[j] = spec_->accumulators[j].seed.value_or(0.0);
    }
  }
  return state;
}

void Objective::check_reward(double reward) const {
  if (!std::isfinite(reward)) throw Error(ErrorCode::NonFinite, "reward " + shortest(reward));
  if (family_ == ObjectiveFamily::HarmonicMean && reward == 0.0) {
    throw Error(ErrorCode::HarmonicZeroReward, "harmonic objective needs nonzero rewards");
  }
}

void Objective::check_state(const ObjectiveState& state) const {
  if (state.h.size() != state_size() || state.t < 0) {
    throw Error(ErrorCode::InvalidArgument, "objective state does not belong to " + id());
  }
}

double Objective::generic_finish(const std::vector<double>& h) const {
  const std::size_t k = spec_->accumulators.size();
  return spec_->finish(h[k], std::span<const double>(h.data(), k));
}

ObjectiveState Objective::update(const ObjectiveState& state, double reward) const {
  check_state(state);
  check_reward(reward);
  ObjectiveState next = state;
  next.t = state.t + 1;
  auto& h = next.h;
  switch (family_) {
    case ObjectiveFamily::Max:
      h[0] = state.started() ? std::max(h[0], reward) : reward;
      break;
    case ObjectiveFamily::Min:
      h[0] = state.started() ? std::min(h[0], reward) : reward;
      break;
    case ObjectiveFamily::Sharpe: {
      const double n = h[2];
      h[0] = n / (n + 1.0) * h[0] + reward / (n + 1.0);
      h[1] = n / (n + 1.0) * h[1] + reward * reward / (n + 1.0);
      h[2] = n + 1.0;
      break;
    }
    case ObjectiveFamily::PrefixMax:
      h[0] = std::max(0.0, h[0] - reward);
      break;
    case ObjectiveFamily::Product:
      h[0] = reward * h[0];
      break;
    case ObjectiveFamily::HarmonicMean:
      h[0] = h[0] + 1.0 / reward;
      break;
    case ObjectiveFamily::LengthDiscounted:
    case ObjectiveFamily::Mean:
      h[0] = h[0] + reward;
      h[1] = h[1] + 1.0;
      break;
    case ObjectiveFamily::Generic: {
      const std::size_t k = spec_->accumulators.size();
      const double step = h[k];
      for (std::size_t j = 0; j < k; ++j) {
        const auto& acc = spec_->accumulators[j];
        const double mapped = acc.map(step, reward);
        h[j] = (!state.started() && !acc.seed) ? mapped : acc.fold(mapped, h[j]);
        if (!std::isfinite(h[j])) {
          throw Error(ErrorCode::NonFinite, "accumulator " + std::to_string(j) + " of " + id());
        }
      }
      h[k] = step + 1.0;
      break;
    }
  }
  return next;
}

double Objective::adapted_reward(const ObjectiveState& state, double reward) const {
  check_state(state);
  check_reward(reward);
  const auto& h = state.h;
  switch (family_) {
    case ObjectiveFamily::Max:
      return state.started() ? std::max(0.0, reward - h[0]) : reward;
    case ObjectiveFamily::Min:
      return state.started() ? std::min(0.0, reward - h[0]) : reward;
    case ObjectiveFamily::Sharpe: {
      const ObjectiveState next = update(state, reward);
      return guarded_sharpe(next.h[0], next.h[1]) - guarded_sharpe(h[0], h[1]);
    }
    case ObjectiveFamily::PrefixMax:
      return std::max(0.0, reward - h[0]);
    case ObjectiveFamily::Product:
      return state.started() ? reward * h[0] - h[0] : reward;
    case ObjectiveFamily::HarmonicMean:
      return state.started() ? 1.0 / (h[0] + 1.0 / reward) - 1.0 / h[0] : reward;
    case ObjectiveFamily::LengthDiscounted:
      return discounted(delta_, h[1] + 1.0, h[0] + reward) - discounted(delta_, h[1], h[0]);
    case ObjectiveFamily::Mean:
      return state.started() ? (h[0] + reward) / (h[1] + 1.0) - h[0] / h[1] : reward;
    case ObjectiveFamily::Generic: {
      const ObjectiveState next = update(state, reward);
      const double before = state.started() ? generic_finish(h) : 0.0;
      return generic_finish(next.h) - before;
    }
  }
  return 0.0;
}

double Objective::value(std::span<const double> rewards) const {
  if (rewards.empty()) throw Error(ErrorCode::EmptySequence, id());
  for (double r : rewards) check_reward(r);
  const double n = static_cast<double>(rewards.size());
  double sum = 0.0;
  for (double r : rewards) sum += r;

  switch (family_) {
    case ObjectiveFamily::Max:
      return *std::max_element(rewards.begin(), rewards.end());
    case ObjectiveFamily::Min:
      return *std::min_element(rewards.begin(), rewards.end());
    case ObjectiveFamily::Sharpe: {
      const double mean = sum / n;
      double squares = 0.0;
      for (double r : rewards) squares += (r - mean) * (r - mean);
      const double variance = squares / n;
      return variance > kSharpeVarianceFloor ? mean / std::sqrt(variance) : 0.0;
    }
    case ObjectiveFamily::PrefixMax: {
      double best = 0.0;  // empty prefix
      double partial = 0.0;
      for (double r : rewards) {
        partial += r;
        best = std::max(best, partial);
      }
      return best;
    }
    case ObjectiveFamily::Product: {
      double product = 1.0;
      for (double r : rewards) product *= r;
      return product;
    }
    case ObjectiveFamily::HarmonicMean: {
      double reciprocal = 0.0;
      for (double r : rewards) reciprocal += 1.0 / r;
      return 1.0 / reciprocal;
    }
    case ObjectiveFamily::LengthDiscounted:
      return std::pow(delta_, n - 1.0) * sum;
    case ObjectiveFamily::Mean:
      return sum / n;
    case ObjectiveFamily::Generic: {
      const std::size_t k = spec_->accumulators.size();
      std::vector<double> acc(k);
      for (std::size_t j = 0; j < k; ++j) {
        const auto& a = spec_->accumulators[j];
        for (std::size_t i = 0; i < rewards.size(); ++i) {
          const double mapped = a.map(static_cast<double>(i), rewards[i]);
          if (i == 0) {
            acc[j] = a.seed ? a.fold(mapped, *a.seed) : mapped;
          } else {
            acc[j] = a.fold(mapped, acc[j]);
          }
        }
      }
      return spec_->finish(n, acc);
    }
  }
  return 0.0;
}

GenericSpec generic_form(const Objective& objective) {
  const auto identity = [](double, double r) { return r; };
  const auto plus = [](double m, double b) { return m + b; };
  const auto first = [](double, std::span<const double> b) { return b[0]; };

  GenericSpec spec;
  switch (objective.family()) {
    case ObjectiveFamily::Max:
      spec.accumulators = {{identity, [](double m, double b) { return std::max(m, b); }, {}}};
      spec.finish = first;
      break;
    case ObjectiveFamily::Min:
      spec.accumulators = {{identity, [](double m, double b) { return std::min(m, b); }, {}}};
      spec.finish = first;
      break;
    case ObjectiveFamily::Sharpe:
      spec.accumulators = {{identity, plus, 0.0}, {[](double, double r) { return r * r; }, plus, 0.0}};
      spec.finish = [](double t, std::span<const double> b) {
        return guarded_sharpe(b[0] / t, b[1] / t);
      };
      break;
    case ObjectiveFamily::PrefixMax:
      // b_0 = (best prefix sum) - (current sum), b_1 = current sum.
      spec.accumulators = {
          {identity, [](double m, double b) { return std::max(0.0, b - m); }, 0.0},
          {identity, plus, 0.0}};
      spec.finish = [](double, std::span<const double> b) { return b[1] + b[0]; };
      break;
    case ObjectiveFamily::Product:
      spec.accumulators = {{identity, [](double m, double b) { return m * b; }, 1.0}};
      spec.finish = first;
      break;
    case ObjectiveFamily::HarmonicMean:
      spec.accumulators = {{[](double, double r) { return 1.0 / r; }, plus, 0.0}};
      spec.finish = [](double, std::span<const double> b) { return 1.0 / b[0]; };
      break;
    case ObjectiveFamily::LengthDiscounted: {
      const double delta = objective.discount();
      spec.accumulators = {{identity, plus, 0.0}};
      spec.finish = [delta](double t, std::span<const double> b) {
        return std::pow(delta, t - 1.0) * b[0];
      };
      break;
    }
    case ObjectiveFamily::Mean:
      spec.accumulators = {{identity, plus, 0.0}};
      spec.finish = [](double t, std::span<const double> b) { return b[0] / t; };
      break;
    case ObjectiveFamily::Generic:
      throw Error(ErrorCode::InvalidArgument, "objective is already generic");
  }
  return spec;
}

std::vector<Objective> table_objectives(double delta) {
  return {Objective::max(),          Objective::min(),     Objective::sharpe(),
          Objective::prefix_max(),   Objective::product(), Objective::harmonic_mean(),
          Objective::length_discounted(delta), Objective::mean()};
}

}  // namespace ncmdp
