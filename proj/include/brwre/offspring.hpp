#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "brwre/rng.hpp"

namespace brwre {

/// Finite-support offspring distribution on {0, 1, 2, ...}.
///
/// Immutable after construction. Carries the mean F̄ and the normalized
/// second factorial moment eta = sum k(k-1) p_k / mean^2.
class OffspringLaw {
 public:
  using Entry = std::pair<int, double>;

  /// Validates and normalizes. Throws BadPmf for negative or unnormalized
  /// probabilities (tolerance 1e-9), negative or repeated counts;
  /// NonPositiveMean when the law is a point mass at 0.
  static OffspringLaw make(std::vector<Entry> entries);

  const std::vector<int>& counts() const noexcept { return counts_; }
  const std::vector<double>& probs() const noexcept { return probs_; }
  std::vector<Entry> entries() const;

  double mean() const noexcept { return mean_; }
  double eta() const noexcept { return eta_; }
  int support_max() const noexcept { return counts_.back(); }
  double prob_of(int k) const noexcept;

  /// Generating function sum p_k s^k on [0, 1].
  double gf(double s) const;

  /// 1 - F(1 - v) for v in [0, 1], evaluated without cancellation when v
  /// is tiny: the probability that at least one of the children succeeds
  /// when each succeeds independently with probability v.
  double gf_complement(double v) const noexcept;

  /// k p_k / mean, supported on k >= 1.
  OffspringLaw size_biased() const;

  /// (1/mean^2) sum_{y >= a} y^2 p_y.
  double truncated_second_moment(int a) const noexcept;

  /// Inverse-CDF draw over the sorted support.
  int sample(Rng& rng) const noexcept;

  /// Total number of children of `parents` independent individuals.
  std::int64_t sample_total(std::int64_t parents, Rng& rng) const;

 private:
  std::vector<int> counts_;
  std::vector<double> probs_;
  std::vector<double> cdf_;
  double mean_ = 0.0;
  double eta_ = 0.0;
};

inline OffspringLaw make_offspring_law(std::vector<OffspringLaw::Entry> e) {
  return OffspringLaw::make(std::move(e));
}

/// Draws a multinomial(n, probs) vector into `out` (resized to probs.size()).
/// Small n uses one inverse-CDF draw per trial, large n sequential
/// binomials; both are exact.
void sample_multinomial(std::int64_t n, const std::vector<double>& probs,
                        const std::vector<double>& cdf, Rng& rng,
                        std::vector<std::int64_t>& out);

/// Inverse-CDF lookup into a cumulative table whose last entry is 1.
std::size_t inverse_cdf(const std::vector<double>& cdf, double u) noexcept;

}  // namespace brwre
