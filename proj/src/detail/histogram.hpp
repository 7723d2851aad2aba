#pragma once

#include <cstdint>
#include <vector>

#include "brwre/offspring.hpp"
#include "brwre/steps.hpp"

namespace brwre::detail {

/// Particle counts on the contiguous positions lo, lo+1, ...
struct Histogram {
  int lo = 0;
  std::vector<std::int64_t> counts;

  int hi() const noexcept { return lo + static_cast<int>(counts.size()) - 1; }
  bool empty() const noexcept { return counts.empty(); }
  std::int64_t total() const noexcept {
    std::int64_t t = 0;
    for (auto c : counts) t += c;
    return t;
  }
  void clear() noexcept { counts.clear(); }
  void trim();
};

/// One generation: every particle reproduces by `law` and each child takes an
/// independent step. Writes the children into `out` (which may not alias `in`).
void branch_and_step(const Histogram& in, const OffspringLaw& law, const StepLaw& step,
                     Rng& rng, Histogram& out);

/// Scatters `n` children of a parent at `pos` over the step law into `out`,
/// whose span must already cover pos + min_step .. pos + 1.
void scatter_steps(std::int64_t n, int pos, const StepLaw& step, Rng& rng, Histogram& out);

}  // namespace brwre::detail
