#pragma once

#include <cstdint>

namespace tempmask {

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Sub-seed for stream `index` under `master`. Used for per-column sampling
// seeds (index = mask_index * p + class_index) and per-frame simulator noise
// (index = frame). Distinct indices give decorrelated streams.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
  return mix64(master ^ mix64(index));
}

}  // namespace tempmask
