#pragma once
/// @file rng.hpp
/// @brief Counter-based random generator with a pinned algorithm: output i is
///        a pure function of (seed, stream, i), so seeded runs are
///        bit-identical across platforms and thread counts, and any
///        subsequence can be generated independently.

#include <cstdint>

namespace tmm {

/// splitmix64 finalizer; the mixing primitive behind all randomness here.
std::uint64_t mix64(std::uint64_t x);

/// Inverse standard-normal CDF (double-precision rational approximation);
/// exposed for direct testing against quantile oracles.
double inverse_normal_cdf(double p);

class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0);

  /// 64 uniform bits for counter index i.
  [[nodiscard]] std::uint64_t bits(std::uint64_t i) const;

  /// Uniform double strictly inside (0, 1).
  [[nodiscard]] double uniform(std::uint64_t i) const;

  /// Standard normal deviate via the inverse CDF.
  [[nodiscard]] double normal(std::uint64_t i) const;

  /// Uniform integer in [0, n) by rejection-free scaling; n >= 1.
  [[nodiscard]] std::uint64_t below(std::uint64_t i, std::uint64_t n) const;

  /// Child-seed derivation for named sub-streams (command, purpose, index).
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t purpose,
                              std::uint64_t index);

  /// FNV-1a hash of a short tag naming a purpose ("simulate", "bootstrap").
  static std::uint64_t tag(const char* name);

 private:
  std::uint64_t key_;
};

}  // namespace tmm
