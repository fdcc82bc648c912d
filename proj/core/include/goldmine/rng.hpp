#pragma once

#include <cstdint>
#include <random>

namespace goldmine {

/// Seeded generator with platform-independent variate conversions.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard; the conversions below are written out so that draws do not
/// depend on the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on (0, 1]; safe as a log argument.
  double uniform_pos();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double exponential(double rate);
  double normal();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

 private:
  std::mt19937_64 engine_;
};

/// Per-sample seed derivation: sample i of a batch with base seed b uses b + i.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) { return base + index; }

}  // namespace goldmine
