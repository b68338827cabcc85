#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace treerl {

using Real = double;

/// Caller broke a documented precondition.
struct ContractViolation : std::logic_error {
  using std::logic_error::logic_error;
};

/// Internal data structure is inconsistent (broken parent chain, stale cache entry).
struct IntegrityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A computation produced a non-finite value.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A run exceeded a configured resource cap.
struct ResourceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invalid or incomplete configuration.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}
}  // namespace detail

/**
 * Deterministic random stream with hierarchical forking.
 *
 * fork(tag) derives an independent child stream from the parent's base seed
 * alone, so sibling streams can be consumed in any order (or in parallel)
 * without affecting each other. All draws are produced by hand-rolled
 * mappings over mt19937_64 output; no std::*_distribution is used, so a
 * given seed yields the same sequence on every platform.
 */
class Rng {
 public:
  explicit Rng(std::uint64_t seed)
      : base_seed_(seed), engine_(detail::splitmix64(seed)) {}

  /// Independent child stream; pure function of (base seed, tag).
  Rng fork(std::uint64_t tag) const {
    return Rng(detail::splitmix64(base_seed_ ^ (0x9e3779b97f4a7c15ull * (tag + 1))));
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [lo, hi], inclusive. Unbiased via rejection.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    if (lo > hi) throw ContractViolation("uniform_int: lo > hi");
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) return static_cast<std::int64_t>(next_u64());  // full range
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t draw;
    do {
      draw = next_u64();
    } while (draw >= limit);
    return lo + static_cast<std::int64_t>(draw % span);
  }

  std::uint64_t base_seed() const { return base_seed_; }

 private:
  std::uint64_t base_seed_;
  std::mt19937_64 engine_;
};

}  // namespace treerl
