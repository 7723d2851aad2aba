#pragma once

#include <climits>
#include <cstdint>
#include <optional>
#include <vector>

#include "brwre/environment.hpp"
#include "brwre/rng.hpp"
#include "brwre/steps.hpp"

namespace brwre {

struct TreeCaps {
  int max_gen = 500;
  std::int64_t max_particles = 10'000'000;
};

struct TreeStats {
  int max_disp = 0;                       // M
  std::vector<int> max_disp_by_gen;       // M_n while the tree is alive
  std::vector<std::int64_t> pop_by_gen;   // Z_n, ending with the first 0 if extinct
  std::optional<int> extinct_at;
  bool truncated = false;
  // Simulation stopped once M reached the requested level; M is then a
  // lower bound but the event {M >= level} is decided.
  bool stopped_at_level = false;
  std::int64_t particles_total = 0;
};

/// Genealogy summary: per generation, particle counts keyed by position and
/// the maximum position over strict ancestors (INT_MIN for the root).
struct TreeTrace {
  struct Cell {
    int pos;
    int anc_max;
    std::int64_t count;
  };
  std::vector<std::vector<Cell>> gens;
  std::vector<double> walk;  // S_0 .. S_{gens.size()-1}
  bool truncated = false;
};

struct TracedTree {
  TreeStats stats;
  TreeTrace trace;
};

inline constexpr int kNoAncestor = INT_MIN;

/// Generation-by-generation simulation from one particle at 0 at generation
/// 0. A generation-(k-1) particle reproduces by F_k. With `stop_at_level`
/// the run ends as soon as some particle reaches that level.
TreeStats simulate_tree(const EnvSequence& seq, const StepLaw& step, const TreeCaps& caps,
                        Rng& rng, std::optional<int> stop_at_level = std::nullopt);

/// Same law as simulate_tree, retaining the genealogy summary.
TracedTree simulate_tree_traced(const EnvSequence& seq, const StepLaw& step,
                                const TreeCaps& caps, Rng& rng);

/// W_n(λ) = sum over generation-n particles of e^{λV - nΛ_s(λ) - S_n}.
/// Throws TraceUnavailable when generation n is not in the trace and the
/// tree was truncated before reaching it.
double additive_martingale(const TreeTrace& trace, const StepLaw& step, double lam, int n);

struct LineWeight {
  double value = 0.0;
  bool truncated = false;  // value is then a lower bound
};

/// W over the optional line L_x: first-crossing particles of level x.
LineWeight optional_line_weight(const TreeTrace& trace, const StepLaw& step, double lam,
                                int x);

/// 1 iff M >= x. Throws Inconclusive when the run was truncated below x.
int naive_indicator(const TreeStats& stats, int x);

}  // namespace brwre
