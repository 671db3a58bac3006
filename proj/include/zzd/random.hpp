#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace zzd {

/// SplitMix64: a counter-based 64-bit generator. Output i is a pure function
/// of (seed + i * gamma), so streams are reproducible on every platform.
/// All seeded sampling in the library goes through this type; std::
/// distributions are avoided because their algorithms are implementation
/// defined.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next();

  /// Uniform integer in [0, bound) by rejection; bound must be > 0.
  std::uint64_t below(std::uint64_t bound);

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();

  /// Standard normal via Box-Muller (one value per call, second discarded).
  double normal();

 private:
  std::uint64_t state_;
};

/// FNV-1a 64 over the seed's 8 little-endian bytes followed by `bytes`.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0);

/// Derives an independent seed from a parent seed and a stream index.
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t stream);

/// Fisher-Yates shuffle driven by SplitMix64.
template <typename T>
void shuffle(std::vector<T>& items, SplitMix64& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(items[i - 1], items[j]);
  }
}

/// Indices of a uniform sample of `count` out of `population`, without
/// replacement, in draw order (partial Fisher-Yates).
std::vector<std::size_t> sample_indices(std::size_t population, std::size_t count,
                                        SplitMix64& rng);

}  // namespace zzd
