#include "brwre/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "brwre/errors.hpp"

namespace brwre {

namespace {

// Backward recursion over generations T-1..0. law_of(k) is the law used by
// generation-k parents (F_{k+1}); log_mean_of(k) is X_k for k >= 1.
template <class LawOf, class LogMeanOf>
OracleResult run_recursion(LawOf&& law_of, LogMeanOf&& log_mean_of, const StepLaw& step,
                           int x, int T, std::size_t cell_budget) {
  if (x < 1) throw Error(ErrorKind::DomainError, "x must be >= 1");
  if (T < 0) throw Error(ErrorKind::DomainError, "horizon must be >= 0");
  OracleResult res;
  res.x = x;
  res.horizon = T;
  res.y_min = x - T;

  double s = 0.0;
  double s_min = 0.0;
  for (int k = 1; k <= T; ++k) {
    s += log_mean_of(k);
    s_min = std::min(s_min, s);
  }
  res.error_bound = std::exp(s_min);

  double surv = 1.0;
  for (int k = T - 1; k >= 0; --k) surv = law_of(k).gf_complement(surv);
  res.survival_bound = std::min(surv, res.error_bound);

  if (T < x) return res;  // 0 cannot reach x within T steps

  const int down = -step.min_step();
  const auto& disp = step.displacements();
  const auto& probs = step.probs();

  // Generation k holds y in [lo_k, hi_k]: able to reach x by T and reachable
  // from 0 at generation k.
  const auto lo_of = [&](int k) { return std::max(x - (T - k), -down * k); };
  const auto hi_of = [&](int k) { return std::min(x - 1, k); };

  std::size_t cells = 0;
  for (int k = 0; k < T; ++k) {
    if (hi_of(k) >= lo_of(k)) cells += static_cast<std::size_t>(hi_of(k) - lo_of(k) + 1);
  }
  if (cells > cell_budget) {
    throw Error(ErrorKind::CapacityError,
                "oracle grid needs " + std::to_string(cells) + " cells");
  }

  std::vector<double> next;  // u_{k+1} on [lo_{k+1}, hi_{k+1}]
  int next_lo = 0;
  int next_hi = -1;
  std::vector<double> cur;
  for (int k = T - 1; k >= 0; --k) {
    const int lo = lo_of(k);
    const int hi = hi_of(k);
    cur.assign(hi >= lo ? static_cast<std::size_t>(hi - lo + 1) : 0, 0.0);
    const OffspringLaw& law = law_of(k);
    for (int y = lo; y <= hi; ++y) {
      double v = 0.0;
      for (std::size_t i = 0; i < disp.size(); ++i) {
        const int z = y + disp[i];
        double u_next = 0.0;
        if (z >= x) {
          u_next = 1.0;
        } else if (z >= next_lo && z <= next_hi) {
          u_next = next[static_cast<std::size_t>(z - next_lo)];
        }
        v += probs[i] * u_next;
      }
      cur[static_cast<std::size_t>(y - lo)] = law.gf_complement(std::min(v, 1.0));
    }
    std::swap(cur, next);
    next_lo = lo;
    next_hi = hi;
  }
  if (0 >= next_lo && 0 <= next_hi) res.value = next[static_cast<std::size_t>(-next_lo)];
  return res;
}

}  // namespace

OracleResult quenched_hit_prob(const EnvSequence& seq, const StepLaw& step, int x, int T,
                               std::size_t cell_budget) {
  return run_recursion([&](int k) -> const OffspringLaw& { return seq.law(k + 1); },
                       [&](int k) { return seq.log_mean(k); }, step, x, T, cell_budget);
}

OracleResult quenched_hit_prob(const EnvModel& model, const std::vector<std::size_t>& states,
                               const StepLaw& step, int x, std::size_t cell_budget) {
  return run_recursion(
      [&](int k) -> const OffspringLaw& { return model.law(states[static_cast<std::size_t>(k)]); },
      [&](int k) { return model.log_mean(states[static_cast<std::size_t>(k - 1)]); }, step, x,
      static_cast<int>(states.size()), cell_budget);
}

OracleResult quenched_hit_prob_certified(const EnvSequence& seq, const StepLaw& step, int x,
                                         double rel_tol, int T_start, int T_max) {
  int T = std::max(T_start, x);
  for (;;) {
    OracleResult r = quenched_hit_prob(seq, step, x, T);
    const double target = r.value > 0.0 ? rel_tol * r.value : rel_tol;
    if (r.error_bound <= target) return r;
    if (T >= T_max) {
      throw Error(ErrorKind::CapacityError,
                  "no horizon up to " + std::to_string(T_max) + " certifies x = " +
                      std::to_string(x));
    }
    T = std::min(2 * T, T_max);
  }
}

OracleResult annealed_hit_prob_small(const EnvModel& model, const StepLaw& step, int x,
                                     int T, AnnealedMode mode, std::int64_t n_env,
                                     std::uint64_t seed, std::size_t sequence_budget) {
  OracleResult out;
  out.x = x;
  out.horizon = T;
  out.y_min = x - T;
  if (mode == AnnealedMode::enumerate) {
    const std::size_t m = model.size();
    double count = 1.0;
    for (int k = 0; k < T; ++k) count *= static_cast<double>(m);
    if (count > static_cast<double>(sequence_budget)) {
      throw Error(ErrorKind::CapacityError,
                  "enumeration needs " + std::to_string(count) + " sequences");
    }
    // Odometer over state sequences in lexicographic order.
    std::vector<std::size_t> states(static_cast<std::size_t>(T), 0);
    double value = 0.0, bound = 0.0, surv = 0.0;
    for (;;) {
      double w = 1.0;
      for (std::size_t s : states) w *= model.weight(s);
      const OracleResult r = quenched_hit_prob(model, states, step, x);
      value += w * r.value;
      bound += w * r.error_bound;
      surv += w * r.survival_bound;
      std::size_t pos = 0;
      while (pos < states.size() && ++states[pos] == m) states[pos++] = 0;
      if (pos == states.size()) break;
    }
    out.value = value;
    out.error_bound = bound;
    out.survival_bound = surv;
    return out;
  }

  if (n_env < 2) throw Error(ErrorKind::DomainError, "average mode needs n_env >= 2");
  auto shared = std::make_shared<const EnvModel>(model);
  double mean = 0.0, m2 = 0.0, bound = 0.0, surv = 0.0;
  for (std::int64_t i = 0; i < n_env; ++i) {
    EnvSequence seq(shared, derive_seed(seed, static_cast<std::uint64_t>(i)));
    const OracleResult r = quenched_hit_prob(seq, step, x, T);
    const double d = r.value - mean;
    mean += d / static_cast<double>(i + 1);
    m2 += d * (r.value - mean);
    bound += (r.error_bound - bound) / static_cast<double>(i + 1);
    surv += (r.survival_bound - surv) / static_cast<double>(i + 1);
  }
  out.value = mean;
  out.error_bound = bound;
  out.survival_bound = surv;
  out.stderr_ = std::sqrt(m2 / static_cast<double>(n_env - 1) / static_cast<double>(n_env));
  return out;
}

}  // namespace brwre
