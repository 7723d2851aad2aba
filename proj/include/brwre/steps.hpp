#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "brwre/rng.hpp"

namespace brwre {

class TiltedStepLaw;

/// Mean-zero jump law on the integers with no mass above +1 (upward
/// skip-free), finite support {min_step, ..., +1}.
class StepLaw {
 public:
  using Entry = std::pair<int, double>;

  /// Throws BadPmf, SupportAbovePlusOne, TrivialLaw, MissingUpStep or
  /// MeanNotZero (|sum y p_y| > 1e-12 after normalization).
  static StepLaw make(std::vector<Entry> entries);

  const std::vector<int>& displacements() const noexcept { return steps_; }
  const std::vector<double>& probs() const noexcept { return probs_; }
  const std::vector<double>& cdf() const noexcept { return cdf_; }
  int min_step() const noexcept { return steps_.front(); }
  double up_prob() const noexcept { return probs_.back(); }

  /// Λ_s(λ) = log E[e^{λh}].
  double log_laplace(double lam) const noexcept;

  /// Exact tilted mean and variance: (Λ_s'(λ), Λ_s''(λ)).
  std::pair<double, double> log_laplace_derivs(double lam) const noexcept;

  /// κ(δ): the unique λ > 0 with Λ_s(λ) = δ, to |Λ_s(λ) - δ| <= 1e-12.
  /// Throws DomainError for δ <= 0.
  double inverse_log_laplace(double delta) const;

  /// The one-step law p_y e^{λy - Λ_s(λ)}.
  TiltedStepLaw tilt(double lam) const;

  int sample(Rng& rng) const noexcept;

 private:
  std::vector<int> steps_;  // ascending, last is +1
  std::vector<double> probs_;
  std::vector<double> cdf_;
};

class TiltedStepLaw {
 public:
  const StepLaw& base() const noexcept { return base_; }
  double lambda() const noexcept { return lambda_; }
  const std::vector<int>& displacements() const noexcept {
    return base_.displacements();
  }
  const std::vector<double>& probs() const noexcept { return probs_; }
  double mean() const noexcept;

  int sample(Rng& rng) const noexcept;

 private:
  friend class StepLaw;
  TiltedStepLaw(StepLaw base, double lam, std::vector<double> probs);

  StepLaw base_;
  double lambda_;
  std::vector<double> probs_;
  std::vector<double> cdf_;
};

inline StepLaw make_step_law(std::vector<StepLaw::Entry> e) {
  return StepLaw::make(std::move(e));
}

/// Default cap on (time, position) cells visited by the first-passage DP.
inline constexpr std::size_t kDefaultCellBudget = 200'000'000;

/// entry[n] = Q(τ_x = n) for n = 0..n_max under the untilted walk
/// (entry[0] = 0). Positions that can no longer reach x by n_max are
/// dropped exactly. Throws CapacityError past `cell_budget`.
std::vector<double> first_passage_pmf(const StepLaw& law, int x, int n_max,
                                      std::size_t cell_budget = kDefaultCellBudget);

/// entry[n] = Q(τ_x = n) e^{λx - nΛ_s(λ)}, the passage-time pmf of the
/// λ-tilted walk.
std::vector<double> tilted_first_passage(const StepLaw& law, double lam, int x,
                                         int n_max,
                                         std::size_t cell_budget = kDefaultCellBudget);

}  // namespace brwre
