#pragma once

#include <cstdint>
#include <random>

namespace spfit {

/// splitmix64 step; used to derive well-mixed seeds from structured input.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d4a769394b96f4ULL;  // 0x94d049bb133111eb variant constant
  return z ^ (z >> 31);
}

/// Deterministic substream keyed by (master seed, index, tag). Independent of
/// how many other substreams were created before it, so parallel consumers can
/// draw in any schedule and still reproduce bitwise-identical output.
inline std::mt19937_64 substream(std::uint64_t master, std::uint64_t index,
                                 std::uint64_t tag = 0) {
  std::uint64_t s = master;
  std::uint64_t a = splitmix64(s);
  s ^= index * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL;
  std::uint64_t b = splitmix64(s);
  s ^= tag * 0xda942042e4dd58b5ULL + 0x9e3779b97f4a7c15ULL;
  std::uint64_t c = splitmix64(s);
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                    static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32)};
  return std::mt19937_64(seq);
}

/// Stream tags keeping distinct random purposes decorrelated under one master seed.
namespace stream {
inline constexpr std::uint64_t kSimulate = 1;
inline constexpr std::uint64_t kPath = 2;
inline constexpr std::uint64_t kAugment = 3;
inline constexpr std::uint64_t kStart = 4;
inline constexpr std::uint64_t kMcmc = 5;
}  // namespace stream

}  // namespace spfit
