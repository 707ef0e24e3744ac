#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace floodline {

/// SplitMix64 finalizer, used for seed expansion and stream derivation.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// 64-bit FNV-1a, for turning identifiers such as AOI names into stream keys.
constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// PCG-XSH-RR 64/32 generator. All derived quantities (bounded integers,
/// unit doubles, normals, shuffles) are computed here rather than through
/// <random> distributions so results are identical across standard libraries.
class Pcg32 {
 public:
  Pcg32(std::uint64_t seed, std::uint64_t stream) noexcept;

  std::uint32_t next_u32() noexcept;
  std::uint64_t next_u64() noexcept;

  /// Uniform integer in [0, bound). bound must be > 0.
  std::uint32_t bounded(std::uint32_t bound) noexcept;
  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Standard normal via Box-Muller (one value per call, no caching).
  double normal() noexcept;

  template <typename T>
  void shuffle(std::span<T> items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = bounded(static_cast<std::uint32_t>(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  /// k distinct values from [0, n), in draw order (partial Fisher-Yates).
  std::vector<std::uint32_t> sample_without_replacement(std::uint32_t n, std::uint32_t k);

 private:
  std::uint64_t state_;
  std::uint64_t inc_;
};

/// A node in a tree of independent random streams. Every randomized step is
/// keyed by its position (AOI, outlier config, search iteration, fold, tree),
/// never by evaluation order, so serial and parallel runs draw identical numbers.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) noexcept : key_(splitmix64(seed)) {}

  RngStream child(std::uint64_t index) const noexcept;
  RngStream child(std::string_view label) const noexcept { return child(fnv1a64(label)); }

  Pcg32 engine() const noexcept { return Pcg32(key_, splitmix64(key_ ^ 0xA5A5A5A5A5A5A5A5ULL)); }
  std::uint64_t key() const noexcept { return key_; }

 private:
  struct Raw {};
  RngStream(Raw, std::uint64_t key) noexcept : key_(key) {}
  std::uint64_t key_;
};

}  // namespace floodline
