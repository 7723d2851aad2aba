#pragma once

#include <cstdint>
#include <limits>

namespace brwre {

/// SplitMix64 generator. Cheap to seed, so every replicate, subtree and
/// environment index can own an independent stream derived from a counter.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) noexcept : state_(seed) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix(state_);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() noexcept { return to_unit((*this)()); }

  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  static constexpr double to_unit(std::uint64_t bits) noexcept {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
  }

 private:
  std::uint64_t state_;
};

/// Counter-based splitter: the child seed is a pure function of
/// (parent, index), so replicate k gets the same stream regardless of how
/// work is partitioned.
constexpr std::uint64_t derive_seed(std::uint64_t parent,
                                    std::uint64_t index) noexcept {
  return Rng::mix(parent ^ Rng::mix(index + 0x632be59bd9b4e019ULL));
}

/// Stream tags keep the sub-streams of one run apart.
namespace stream {
inline constexpr std::uint64_t environment = 0x454e56;  // "ENV"
inline constexpr std::uint64_t excursions = 0x455843;   // "EXC"
inline constexpr std::uint64_t subtrees = 0x535542;     // "SUB"
inline constexpr std::uint64_t tree = 0x545245;         // "TRE"
}  // namespace stream

}  // namespace brwre
