#pragma once

// Counter-based random streams: draw i of stream `seed` is a pure function
// of (seed, i), so results do not depend on evaluation order or threading.

#include "crf/stats.hpp"

#include <cstdint>

namespace crf {

namespace detail {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Counter-based seed derivation: hash64(seed, counter).
constexpr std::uint64_t hash64(std::uint64_t seed, std::uint64_t counter) {
  return detail::mix64(detail::mix64(seed + 0x9e3779b97f4a7c15ULL) ^ (counter * 0xd1b54a32d192ed03ULL + 1));
}

/// Uniform in (0, 1) from the top 53 bits, never exactly 0 or 1.
constexpr double to_unit_interval(std::uint64_t bits) {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

/// Standard normal draw number `counter` of stream `seed`.
inline double standard_normal(std::uint64_t seed, std::uint64_t counter) {
  return normal_quantile(to_unit_interval(hash64(seed, counter)));
}

}  // namespace crf
