#include "detail/histogram.hpp"

namespace brwre::detail {

void Histogram::trim() {
  std::size_t first = 0;
  while (first < counts.size() && counts[first] == 0) ++first;
  if (first == counts.size()) {
    counts.clear();
    return;
  }
  std::size_t last = counts.size();
  while (counts[last - 1] == 0) --last;
  if (first > 0 || last < counts.size()) {
    counts.erase(counts.begin() + static_cast<std::ptrdiff_t>(last), counts.end());
    counts.erase(counts.begin(), counts.begin() + static_cast<std::ptrdiff_t>(first));
    lo += static_cast<int>(first);
  }
}

void scatter_steps(std::int64_t n, int pos, const StepLaw& step, Rng& rng, Histogram& out) {
  if (n <= 0) return;
  const auto& disp = step.displacements();
  if (n == 1) {
    const int h = disp[inverse_cdf(step.cdf(), rng.uniform())];
    out.counts[static_cast<std::size_t>(pos + h - out.lo)] += 1;
    return;
  }
  thread_local std::vector<std::int64_t> tally;
  sample_multinomial(n, step.probs(), step.cdf(), rng, tally);
  for (std::size_t i = 0; i < disp.size(); ++i) {
    out.counts[static_cast<std::size_t>(pos + disp[i] - out.lo)] += tally[i];
  }
}

void branch_and_step(const Histogram& in, const OffspringLaw& law, const StepLaw& step,
                     Rng& rng, Histogram& out) {
  out.counts.clear();
  if (in.empty()) return;
  out.lo = in.lo + step.min_step();
  out.counts.assign(static_cast<std::size_t>(in.hi() + 1 - out.lo + 1), 0);
  for (std::size_t i = 0; i < in.counts.size(); ++i) {
    const std::int64_t c = in.counts[i];
    if (c == 0) continue;
    const std::int64_t kids = law.sample_total(c, rng);
    scatter_steps(kids, in.lo + static_cast<int>(i), step, rng, out);
  }
  out.trim();
}

}  // namespace brwre::detail
