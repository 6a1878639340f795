#pragma once

#include <cstdint>
#include <limits>

namespace ncmdp {

/// Counter-based generator: output i of stream (seed, stream) is
/// splitmix64(key + (i + 1) * golden), with key derived from seed and stream.
/// Every draw depends only on (seed, stream, counter), so results are
/// identical on every platform and streams can be split without coordination.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  static constexpr const char* kAlgorithm = "splitmix64-counter/v1";

  explicit CounterRng(std::uint64_t seed = 0, std::uint64_t stream = 0) noexcept
      : key_(mix(seed ^ mix(stream + 0x632be59bd9b4e019ULL))) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept { return mix(key_ + (++counter_) * kGolden); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n); n must be positive.
  std::uint64_t below(std::uint64_t n) noexcept {
    __extension__ using u128 = unsigned __int128;
    return static_cast<std::uint64_t>((static_cast<u128>((*this)()) * n) >> 64);
  }

  /// Independent generator for sub-task `index` (e.g. one training run).
  CounterRng split(std::uint64_t index) const noexcept {
    CounterRng child;
    child.key_ = mix(key_ ^ mix(index + 0x9e3779b97f4a7c15ULL));
    return child;
  }

  std::uint64_t counter() const noexcept { return counter_; }

 private:
  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace ncmdp
