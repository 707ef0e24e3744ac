#include "floodline/rng.hpp"

#include <bit>
#include <cmath>
#include <numbers>
#include <numeric>

namespace floodline {

Pcg32::Pcg32(std::uint64_t seed, std::uint64_t stream) noexcept : state_(0), inc_((stream << 1u) | 1u) {
  next_u32();
  state_ += seed;
  next_u32();
}

std::uint32_t Pcg32::next_u32() noexcept {
  const std::uint64_t old = state_;
  state_ = old * 6364136223846793005ULL + inc_;
  const auto xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
  const auto rot = static_cast<int>(old >> 59u);
  return std::rotr(xorshifted, rot);
}

std::uint64_t Pcg32::next_u64() noexcept {
  const std::uint64_t hi = next_u32();
  return (hi << 32) | next_u32();
}

std::uint32_t Pcg32::bounded(std::uint32_t bound) noexcept {
  // Rejection on the low residue class keeps the result unbiased.
  const std::uint32_t threshold = (0u - bound) % bound;
  for (;;) {
    const std::uint32_t r = next_u32();
    if (r >= threshold) return r % bound;
  }
}

double Pcg32::uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Pcg32::normal() noexcept {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<std::uint32_t> Pcg32::sample_without_replacement(std::uint32_t n, std::uint32_t k) {
  std::vector<std::uint32_t> pool(n);
  std::iota(pool.begin(), pool.end(), 0u);
  if (k > n) k = n;
  for (std::uint32_t i = 0; i < k; ++i) {
    const std::uint32_t j = i + bounded(n - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

RngStream RngStream::child(std::uint64_t index) const noexcept {
  return RngStream(Raw{}, splitmix64(key_ ^ splitmix64(index + 0x632BE59BD9B4E019ULL)));
}

}  // namespace floodline
