#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace gazebar {

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Seed for a named stream derived from a master seed. Streams with different
/// names (or indices) are statistically independent.
std::uint64_t stream_seed(std::uint64_t master, std::string_view name, std::uint64_t index = 0) noexcept;

/// mt19937_64 with distribution code written out here, so sequences are
/// identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  static Rng stream(std::uint64_t master, std::string_view name, std::uint64_t index = 0) {
    return Rng(stream_seed(master, name, index));
  }

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal via Box-Muller (one value per call).
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  /// Unbiased integer in [0, n).
  std::size_t below(std::size_t n);
  void shuffle(std::span<std::size_t> items);

 private:
  std::mt19937_64 engine_;
};

}  // namespace gazebar
