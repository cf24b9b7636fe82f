#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace stylemetric {

/// Seeded generator with platform-independent draws.
///
/// std::uniform_*_distribution is implementation-defined, so every draw here
/// is derived directly from the raw 64-bit engine output.
class Rng {
public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);
  /// Standard normal via Box-Muller.
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  /// k distinct indices from [0, n), in draw order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

private:
  std::mt19937_64 engine_;
};

/// SplitMix64 finalizer, used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);
/// FNV-1a 64-bit hash of a string.
std::uint64_t hash_string(std::string_view s);

}  // namespace stylemetric
