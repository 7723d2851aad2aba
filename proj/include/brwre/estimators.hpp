#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "brwre/environment.hpp"
#include "brwre/forest.hpp"
#include "brwre/spine.hpp"
#include "brwre/steps.hpp"

namespace brwre {

/// Streaming count/mean/M2 with Chan's pairwise merge.
struct Moments {
  std::int64_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double v) noexcept;
  void merge(const Moments& other) noexcept;
  double variance() const noexcept { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
};

struct Estimate {
  int x = 0;
  std::string scheme;
  std::int64_t n = 0;
  double mean = 0.0;
  double stderr_ = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double truncated_fraction = 0.0;
  // Fraction of runs where a subtree cap fired and was completed by its
  // conditional mean.
  double completed_fraction = 0.0;
  bool zero_hits = false;
  std::uint64_t seed = 0;
  // Kept so estimates can be merged.
  double m2 = 0.0;
  std::int64_t truncated = 0;
  std::int64_t completed = 0;
};

/// Fills stderr and ci95 from the moments; applies the rule of three when
/// `zero_hit_rule` is set and every value was 0.
Estimate summarize(const Moments& m, std::int64_t truncated, int x, std::string scheme,
                   std::uint64_t seed, bool zero_hit_rule = false, std::int64_t completed = 0);

/// Combines estimates of the same (x, scheme). Throws MixedTargets.
Estimate merge(const std::vector<Estimate>& parts);

struct ReplicateValue {
  double value = 0.0;
  bool truncated = false;
  bool inconclusive = false;
  bool completed = false;
};

struct ReplicateTotals {
  Moments moments;
  std::int64_t truncated = 0;
  std::int64_t inconclusive = 0;
  std::int64_t completed = 0;
};

/// Runs replicates first..first+n-1 on `workers` threads. Replicates are
/// grouped into fixed blocks that are reduced in index order, so the result
/// does not depend on the worker count.
ReplicateTotals run_replicates(std::int64_t first, std::int64_t n, int workers,
                               const std::function<ReplicateValue(std::int64_t)>& fn);

/// Vector-valued variant: fn(i, values) writes `dim` values per replicate.
std::vector<Moments> run_replicates_vec(
    std::int64_t first, std::int64_t n, std::size_t dim, int workers,
    const std::function<void(std::int64_t, std::vector<double>&)>& fn);

/// Calls fn(i) for i = 0..n-1 on `workers` threads. Callers write results
/// into slots indexed by i, so output order never depends on scheduling.
void parallel_for(std::int64_t n, int workers, const std::function<void(std::int64_t)>& fn);

int default_workers() noexcept;

struct RunOptions {
  int workers = 0;  // 0: hardware concurrency
  std::int64_t first_replicate = 0;
  TreeCaps tree_caps{};
  SubtreeCaps subtree_caps{};
};

/// Seed of replicate i under master seed s.
inline std::uint64_t replicate_seed(std::uint64_t master, std::int64_t i) noexcept {
  return derive_seed(master, static_cast<std::uint64_t>(i));
}

/// Fraction of trees with M >= x, a fresh environment per tree. A truncated
/// run below x counts as 0 and as truncated. Throws AllTruncated.
Estimate estimate_naive(std::shared_ptr<const EnvModel> model, const StepLaw& step, int x,
                        std::int64_t n, std::uint64_t seed, const RunOptions& opt = {});

/// Same on one fixed sequence.
Estimate estimate_naive_quenched(std::shared_ptr<const EnvSequence> seq, const StepLaw& step,
                                 int x, std::int64_t n, std::uint64_t seed,
                                 const RunOptions& opt = {});

/// Mean of e^{R_x} B_x over annealed_base runs at tilt λ.
Estimate estimate_spine(std::shared_ptr<const EnvModel> model, const StepLaw& step, int x,
                        double lam, std::int64_t n, std::uint64_t seed,
                        const RunOptions& opt = {});

/// Mean of e^{R_x} B_x over forward runs on a fixed sequence.
Estimate estimate_spine_quenched(std::shared_ptr<const EnvSequence> seq, const StepLaw& step,
                                 int x, double lam, std::int64_t n, std::uint64_t seed,
                                 const RunOptions& opt = {});

/// Mean of B_x under the ρ = 1 tilt: estimates e^{λ_1 x} P(M >= x).
Estimate estimate_class1(std::shared_ptr<const EnvModel> model, const StepLaw& step, int x,
                         std::int64_t n, std::uint64_t seed, const RunOptions& opt = {});

/// Mean of e^{(1-ρ)R_x} B_x under the ρ tilt: estimates e^{ρλ_ρ x} P(M >= x).
/// Without `rho` the system must be Class III and ρ* is used (NotClassIII).
Estimate estimate_class3(std::shared_ptr<const EnvModel> model, const StepLaw& step, int x,
                         std::int64_t n, std::uint64_t seed, std::optional<double> rho = {},
                         const RunOptions& opt = {});

/// Mean of R_1 under `measure`, i.e. the drift of the R-walk.
Estimate estimate_r_drift(std::shared_ptr<const EnvModel> model, const StepLaw& step,
                          Measure measure, std::optional<double> rho, std::int64_t n,
                          std::uint64_t seed, const RunOptions& opt = {});

struct RateFit {
  std::vector<double> xs;
  std::vector<double> log_values;
  double exp_rate = 0.0;    // λ̂
  double poly_power = 0.0;  // β̂
  double intercept = 0.0;   // c
  double residual = 0.0;    // RMS
  double exp_rate_diff = 0.0;
};

/// Least squares for log p = -λx - β log x + c. Throws DegenerateFit.
RateFit fit_rate(const std::vector<std::pair<double, double>>& pairs);

struct DecayPoint {
  int x = 0;
  double value = 0.0;  // sqrt(x) P(max_{j<=x} R_j <= 0)
  double stderr_ = 0.0;
};

/// √x·P(max_{0<=j<=x} R_j <= 0) under the ρ = 1 tilt, for each x in `xs`,
/// from n R-walks sampled without subtrees.
std::vector<DecayPoint> diagnostic_sqrt_decay(std::shared_ptr<const EnvModel> model,
                                              const StepLaw& step, std::int64_t n,
                                              const std::vector<int>& xs, std::uint64_t seed,
                                              const RunOptions& opt = {});

/// The same statistic for a walk with standard normal increments.
std::vector<DecayPoint> gaussian_sqrt_decay(std::int64_t n, const std::vector<int>& xs,
                                            std::uint64_t seed, const RunOptions& opt = {});

/// P(max_{j<=n} S_j <= 0) = C(2n, n) / 4^n for a symmetric continuous walk.
double sparre_andersen(int n) noexcept;

}  // namespace brwre
