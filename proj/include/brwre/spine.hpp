#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "brwre/environment.hpp"
#include "brwre/rng.hpp"
#include "brwre/steps.hpp"

namespace brwre {

/// Inverse excursion ε(j) = H_{θ-j} - 1, j = 0..θ, of a λ-tilted walk H
/// started at 0 and stopped on first reaching +1 at time θ.
struct Excursion {
  std::vector<int> steps;
  int length = 0;
};

inline constexpr std::int64_t kExcursionCap = 10'000'000;

Excursion sample_excursion(const TiltedStepLaw& tilted, Rng& rng,
                           std::int64_t cap = kExcursionCap);

/// θ alone, without storing the path.
std::int64_t sample_excursion_length(const TiltedStepLaw& tilted, Rng& rng,
                                     std::int64_t cap = kExcursionCap);

/// First passage time of level x by the tilted walk started at 0.
std::int64_t sample_tilted_passage(const TiltedStepLaw& tilted, int x, Rng& rng,
                                   std::int64_t cap = kExcursionCap);

/// Ȳ on indices -T_x..0, stored as y[j] = Ȳ_{-j}; ends[m] = T_m for m = 0..x.
struct Trajectory {
  std::vector<int> y;
  std::vector<int> ends;
  int T_x = 0;

  int at(int k) const { return y[static_cast<std::size_t>(-k)]; }
};

/// Concatenates the first x excursions into the path and time-reverses it.
Trajectory build_trajectory(const std::vector<Excursion>& excursions, int x);

struct SubtreeCaps {
  int max_gen = 400;
  std::int64_t max_particles = 1'000'000'000'000'000;
  /// When a cap fires, add the conditional mean of the unfinished part (the
  /// additive martingale of the live particles) instead of dropping it.
  bool complete_on_cap = true;
};

struct PhiSample {
  double phi = 0.0;
  bool truncated = false;  // a cap fired and phi is a lower bound
  bool completed = false;  // a cap fired and phi holds the conditional mean
  std::int64_t absorbed = 0;
};

/// Φ_k for the subtree rooted at generation k and level y_k < 0: the root
/// has D-1 children with D ~ size-biased F_{k+1}, later generations branch
/// by F_{t+1}, and particles are absorbed on reaching 0, each contributing
/// e^{-λ y_k - (t-k)Λ_s(λ) - (S_t - S_k)}.
PhiSample sample_phi_subtree(const EnvSequence& seq, const StepLaw& step, double lam, int k,
                             int y_k, const SubtreeCaps& caps, Rng& rng);

enum class Measure { forward_quenched, annealed_base, tilted_rho1, tilted_rho };

std::string_view to_string(Measure m) noexcept;
Measure parse_measure(std::string_view s);

struct CouplingRun {
  int x = 0;
  Measure measure = Measure::annealed_base;
  double lambda_used = 0.0;
  double rho = 1.0;
  int T_x = 0;
  double R_x = 0.0;
  double log_B = 0.0;
  double B_x = 1.0;
  /// Φ_k for k = -T_x..-1 (forward runs: spine times 0..τ-1), in that order.
  std::vector<double> phi_values;
  /// J_k matching phi_values.
  std::vector<double> J;
  int truncated_subtrees = 0;
  int completed_subtrees = 0;
  std::uint64_t seed = 0;

  /// Log of the per-run estimator value: R + log B (forward_quenched,
  /// annealed_base), log B (tilted_rho1), (1-ρ)R + log B (tilted_rho).
  double log_weight() const noexcept;
};

/// Precomputed sampler for one (model, step, measure, λ, ρ) setting.
class CouplingSampler {
 public:
  /// forward_quenched needs `seq` and `lambda`; annealed_base uses `lambda`
  /// or λ_1; tilted_rho1 uses λ_1 (AlphaTooSmall when α <= 1); tilted_rho
  /// uses λ_ρ at `rho`.
  CouplingSampler(std::shared_ptr<const EnvModel> model, StepLaw step, Measure measure,
                  std::optional<double> lambda = std::nullopt,
                  std::optional<double> rho = std::nullopt, SubtreeCaps caps = {},
                  std::shared_ptr<const EnvSequence> seq = nullptr);

  Measure measure() const noexcept { return measure_; }
  double lambda() const noexcept { return lambda_; }
  double rho() const noexcept { return rho_; }

  CouplingRun run(int x, std::uint64_t seed) const;

  /// R_1..R_x of the excursion walk alone (no subtrees). Not available for
  /// forward_quenched.
  std::vector<double> r_walk(int x, std::uint64_t seed) const;

 private:
  CouplingRun run_backward(int x, std::uint64_t seed) const;
  CouplingRun run_forward(int x, std::uint64_t seed) const;
  EnvSequence environment(std::uint64_t seed) const;

  std::shared_ptr<const EnvModel> model_;
  StepLaw step_;
  Measure measure_;
  double lambda_ = 0.0;
  double rho_ = 1.0;
  double log_laplace_ = 0.0;
  std::optional<TiltedStepLaw> tilted_;
  std::vector<double> nonpositive_weights_;
  SubtreeCaps caps_;
  std::shared_ptr<const EnvSequence> seq_;
};

CouplingRun sample_coupling_run(std::shared_ptr<const EnvModel> model, const StepLaw& step,
                                int x, Measure measure, std::optional<double> rho,
                                const SubtreeCaps& caps, std::uint64_t seed,
                                std::optional<double> lambda = std::nullopt);

}  // namespace brwre
