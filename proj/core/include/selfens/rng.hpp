#pragma once

#include <cstdint>
#include <span>
#include <string_view>

namespace selfens {

/// SplitMix64 generator. Chosen over the <random> engines because its
/// output sequence is fixed by a few lines of arithmetic, so partitions and
/// weights reproduce bit-for-bit on any platform or language port.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next();

  /// Unbiased integer in [0, bound) by rejection. bound must be > 0.
  std::uint64_t uniform_below(std::uint64_t bound);

  /// Double in [0, 1) built from the top 53 bits of next().
  double uniform01();

  /// Double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

 private:
  std::uint64_t state_;
};

/// 64-bit FNV-1a over raw bytes.
std::uint64_t fnv1a64(std::span<const std::byte> bytes,
                      std::uint64_t basis = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64(std::string_view text,
                      std::uint64_t basis = 0xcbf29ce484222325ULL);

}  // namespace selfens
