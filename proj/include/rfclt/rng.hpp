#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace rfclt {

namespace detail {

// Philox4x32-10 (Salmon et al., "Parallel random numbers: as easy as 1, 2, 3").
using Philox4x32 = std::array<std::uint32_t, 4>;

inline Philox4x32 philox4x32_10(Philox4x32 ctr, std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t kMul0 = 0xD2511F53u;
  constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_tag(std::string_view tag) {
  std::uint64_t h = 0xCBF29CE484222325ull;  // FNV-1a
  for (unsigned char ch : tag) {
    h ^= ch;
    h *= 0x100000001B3ull;
  }
  return h;
}

// 53-bit uniform in (0, 1).
inline double to_open_unit(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

}  // namespace detail

/// Counter-based random stream: every draw is a pure function of
/// (seed, stream id, counter), so results do not depend on evaluation
/// order or on how work is split between threads.
struct RngStream {
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;

  /// Independent child stream identified by a tag and an index.
  [[nodiscard]] RngStream derive(std::string_view tag, std::uint64_t index = 0) const {
    std::uint64_t h = detail::splitmix64(stream_id ^ detail::hash_tag(tag));
    h = detail::splitmix64(h ^ detail::splitmix64(index + 0x632BE59BD9B4E019ull));
    return {seed, h};
  }

  [[nodiscard]] std::array<std::uint32_t, 4> block(std::uint64_t counter) const {
    const detail::Philox4x32 ctr = {static_cast<std::uint32_t>(counter),
                                    static_cast<std::uint32_t>(counter >> 32),
                                    static_cast<std::uint32_t>(stream_id),
                                    static_cast<std::uint32_t>(stream_id >> 32)};
    return detail::philox4x32_10(
        ctr, {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)});
  }

  /// Uniform in (0, 1).
  [[nodiscard]] double uniform(std::uint64_t counter) const {
    const auto b = block(counter);
    return detail::to_open_unit(b[0], b[1]);
  }

  /// Standard normal via Box-Muller on one Philox block.
  [[nodiscard]] double normal(std::uint64_t counter) const {
    const auto b = block(counter);
    const double u1 = detail::to_open_unit(b[0], b[1]);
    const double u2 = detail::to_open_unit(b[2], b[3]);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// +1 or -1 with equal probability.
  [[nodiscard]] double sign(std::uint64_t counter) const {
    return (block(counter)[0] & 1u) != 0u ? 1.0 : -1.0;
  }
};

/// Counter for lattice cell (i, j); coordinates are folded into 32 bits each.
inline std::uint64_t cell_counter(int i, int j) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(i)) << 32) |
         static_cast<std::uint32_t>(j);
}

}  // namespace rfclt
