#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

#include "brwre/offspring.hpp"

namespace brwre {

/// I.i.d. random environment given as a finite mixture of offspring laws.
class EnvModel {
 public:
  struct State {
    double weight;
    OffspringLaw law;
  };

  /// Throws BadWeights (non-positive weight, sum off 1 by more than 1e-9)
  /// and NotSubcritical when a = E[log F̄] >= 0.
  static EnvModel make(std::vector<State> states);

  /// Same validation minus the subcriticality check, for degenerate
  /// (critical or supercritical) test systems.
  static EnvModel make_unchecked(std::vector<State> states);

  std::size_t size() const noexcept { return laws_.size(); }
  double weight(std::size_t i) const noexcept { return weights_[i]; }
  const std::vector<double>& weights() const noexcept { return weights_; }
  const OffspringLaw& law(std::size_t i) const noexcept { return laws_[i]; }
  const OffspringLaw& size_biased_law(std::size_t i) const noexcept {
    return biased_[i];
  }
  double mean(std::size_t i) const noexcept { return laws_[i].mean(); }
  double log_mean(std::size_t i) const noexcept { return log_means_[i]; }
  double eta(std::size_t i) const noexcept { return laws_[i].eta(); }
  double max_mean() const noexcept;

  /// a = E[X].
  double drift() const noexcept { return lambda_e_prime(0.0); }

  /// Λ_e(ρ) = log sum w_i m_i^ρ.
  double lambda_e(double rho) const noexcept;
  /// Λ_e'(ρ): mean of X under the ρ-tilt.
  double lambda_e_prime(double rho) const noexcept;
  /// Λ_e''(ρ): variance of X under the ρ-tilt.
  double lambda_e_second(double rho) const noexcept;

  /// Weights w_i m_i^ρ / sum_j w_j m_j^ρ over the same states. The result
  /// skips the subcriticality check.
  EnvModel tilted(double rho) const;

  std::size_t state_for(double u) const noexcept;
  std::vector<State> states() const;

 private:
  static EnvModel build(std::vector<State> states, bool check_subcritical);

  std::vector<double> weights_;
  std::vector<double> cdf_;
  std::vector<OffspringLaw> laws_;
  std::vector<OffspringLaw> biased_;
  std::vector<double> log_means_;
};

inline EnvModel make_env_model(std::vector<EnvModel::State> states) {
  return EnvModel::make(std::move(states));
}

/// Realized two-sided environment ξ. The state at index k is a pure function
/// of (seed, k), drawn from `nonpositive` weights for k <= 0 and from the
/// model weights for k >= 1. A cached window [lo, hi] holds states and the
/// associated walk S; state lookups outside the window are
/// recomputed on the fly, so const access is safe from several threads.
class EnvSequence {
 public:
  EnvSequence(std::shared_ptr<const EnvModel> model, std::uint64_t seed,
              std::vector<double> nonpositive_weights = {});

  const EnvModel& model() const noexcept { return *model_; }
  std::shared_ptr<const EnvModel> model_ptr() const noexcept { return model_; }
  std::uint64_t seed() const noexcept { return seed_; }
  int lo() const noexcept { return -static_cast<int>(neg_.size()) + 1; }
  int hi() const noexcept { return static_cast<int>(pos_.size()) - 1; }

  /// Grows the cached window to cover [lo, hi].
  void ensure(int lo, int hi);

  std::size_t state(int k) const noexcept;
  const OffspringLaw& law(int k) const noexcept { return model_->law(state(k)); }
  const OffspringLaw& size_biased_law(int k) const noexcept {
    return model_->size_biased_law(state(k));
  }
  double log_mean(int k) const noexcept { return model_->log_mean(state(k)); }

  /// S_k with S_0 = 0 and S_k - S_{k-1} = X_k. Needs X on the indices
  /// between k and 0; throws OutOfWindow otherwise.
  double walk(int k) const;

  /// S_lo..S_hi; throws OutOfWindow.
  std::vector<double> assoc_walk(int lo, int hi) const;

 private:
  std::size_t draw_state(int k) const noexcept;

  std::shared_ptr<const EnvModel> model_;
  std::uint64_t seed_;
  std::vector<double> pos_cdf_;
  std::vector<double> neg_cdf_;
  // pos_[n] = state at index n (n >= 1, pos_[0] unused), neg_[j] = state at -j.
  std::vector<std::size_t> pos_;
  std::vector<std::size_t> neg_;
  std::vector<double> s_pos_;  // S_n, n >= 0
  std::vector<double> s_neg_;  // S_{-j}, j >= 0
};

/// Samples an environment with window [lo, hi] under the model weights.
EnvSequence sample_env_seq(std::shared_ptr<const EnvModel> model, int lo, int hi,
                           std::uint64_t seed);

}  // namespace brwre
