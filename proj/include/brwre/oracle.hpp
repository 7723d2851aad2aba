#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "brwre/environment.hpp"
#include "brwre/steps.hpp"

namespace brwre {

struct OracleResult {
  double value = 0.0;
  int horizon = 0;
  /// One-sided certificate: the untruncated probability lies in
  /// [value, value + error_bound]. Equals e^{min_{k<=T} S_k} for a single
  /// sequence and its P_E-average for annealed results.
  double error_bound = 1.0;
  /// Exact P_ξ(Z_T > 0) (averaged likewise), never above error_bound.
  double survival_bound = 1.0;
  /// Monte Carlo standard error; zero for exact modes.
  double stderr_ = 0.0;
  int y_min = 0;
  int x = 0;
};

/// Default budget on (generation, position) cells per recursion.
inline constexpr std::size_t kOracleCellBudget = 50'000'000;

/// P_ξ(M >= x restricted to generations <= T) by backward recursion on
/// u_k(y), the chance that a generation-k particle at y < x has a
/// descendant at or above x by generation T.
OracleResult quenched_hit_prob(const EnvSequence& seq, const StepLaw& step, int x, int T,
                               std::size_t cell_budget = kOracleCellBudget);

/// Same recursion on an explicit list of per-generation states (the law of
/// generation k+1 is model.law(states[k])).
OracleResult quenched_hit_prob(const EnvModel& model, const std::vector<std::size_t>& states,
                               const StepLaw& step, int x,
                               std::size_t cell_budget = kOracleCellBudget);

/// Doubles T from `T_start` until error_bound <= rel_tol * value (or value
/// is zero and the bound alone is below rel_tol). Throws CapacityError when
/// T would exceed T_max.
OracleResult quenched_hit_prob_certified(const EnvSequence& seq, const StepLaw& step, int x,
                                         double rel_tol, int T_start = 32, int T_max = 4096);

enum class AnnealedMode { enumerate, average };

/// Annealed value of P(M >= x by generation T). `enumerate` sums over every
/// state sequence of length T, `average` samples n_env sequences.
OracleResult annealed_hit_prob_small(const EnvModel& model, const StepLaw& step, int x,
                                     int T, AnnealedMode mode, std::int64_t n_env = 0,
                                     std::uint64_t seed = 0,
                                     std::size_t sequence_budget = std::size_t{1} << 22);

}  // namespace brwre
