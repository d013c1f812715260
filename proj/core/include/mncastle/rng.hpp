#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <string_view>

namespace mncastle {

/// Counter-based generator keyed by (master seed, stream label).
///
/// Output i of a stream is splitmix64(key + i * golden), so a stream's
/// draws depend only on its key and how many values were taken from it.
/// `split` derives child streams from the key alone, which keeps results
/// independent of the order in which sibling tasks run.
class Rng {
 public:
  using result_type = std::uint64_t;

  Rng(std::uint64_t seed, std::string_view label);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept;

  Rng split(std::string_view label) const;
  Rng split(std::uint64_t index) const;

  std::uint64_t key() const noexcept { return key_; }

  /// Uniform on the open interval (0, 1).
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  explicit Rng(std::uint64_t key) : key_(key) {}

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// 64-bit FNV-1a of a byte string.
std::uint64_t fnv1a(std::string_view bytes) noexcept;
std::uint64_t splitmix64(std::uint64_t x) noexcept;

}  // namespace mncastle
