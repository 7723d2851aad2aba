#include "brwre/forest.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "brwre/errors.hpp"
#include "detail/histogram.hpp"

namespace brwre {

TreeStats simulate_tree(const EnvSequence& seq, const StepLaw& step, const TreeCaps& caps,
                        Rng& rng, std::optional<int> stop_at_level) {
  TreeStats st;
  detail::Histogram cur{0, {1}};
  detail::Histogram next;
  st.pop_by_gen.push_back(1);
  st.max_disp_by_gen.push_back(0);
  st.particles_total = 1;
  if (stop_at_level && *stop_at_level <= 0) {
    st.stopped_at_level = true;
    return st;
  }
  for (int n = 1;; ++n) {
    if (n > caps.max_gen) {
      st.truncated = true;
      break;
    }
    detail::branch_and_step(cur, seq.law(n), step, rng, next);
    std::swap(cur, next);
    const std::int64_t z = cur.total();
    st.pop_by_gen.push_back(z);
    st.particles_total += z;
    if (z == 0) {
      st.extinct_at = n;
      break;
    }
    const int m = cur.hi();
    st.max_disp_by_gen.push_back(m);
    st.max_disp = std::max(st.max_disp, m);
    if (stop_at_level && st.max_disp >= *stop_at_level) {
      st.stopped_at_level = true;
      break;
    }
    if (z > caps.max_particles) {
      st.truncated = true;
      break;
    }
  }
  return st;
}

namespace {

using Cell = TreeTrace::Cell;

// Children of every cell in `in`, merged by (pos, anc_max).
void branch_cells(const std::vector<Cell>& in, const OffspringLaw& law, const StepLaw& step,
                  Rng& rng, std::vector<Cell>& out) {
  out.clear();
  thread_local std::vector<std::int64_t> tally;
  const auto& disp = step.displacements();
  for (const Cell& c : in) {
    const std::int64_t kids = law.sample_total(c.count, rng);
    if (kids == 0) continue;
    sample_multinomial(kids, step.probs(), step.cdf(), rng, tally);
    const int anc = std::max(c.anc_max, c.pos);
    for (std::size_t i = 0; i < disp.size(); ++i) {
      if (tally[i] > 0) out.push_back({c.pos + disp[i], anc, tally[i]});
    }
  }
  std::sort(out.begin(), out.end(), [](const Cell& a, const Cell& b) {
    return a.pos != b.pos ? a.pos < b.pos : a.anc_max < b.anc_max;
  });
  std::size_t w = 0;
  for (std::size_t r = 0; r < out.size(); ++r) {
    if (w > 0 && out[w - 1].pos == out[r].pos && out[w - 1].anc_max == out[r].anc_max) {
      out[w - 1].count += out[r].count;
    } else {
      out[w++] = out[r];
    }
  }
  out.resize(w);
}

}  // namespace

TracedTree simulate_tree_traced(const EnvSequence& seq, const StepLaw& step,
                                const TreeCaps& caps, Rng& rng) {
  TracedTree out;
  TreeStats& st = out.stats;
  TreeTrace& tr = out.trace;
  tr.gens.push_back({{0, kNoAncestor, 1}});
  tr.walk.push_back(0.0);
  st.pop_by_gen.push_back(1);
  st.max_disp_by_gen.push_back(0);
  st.particles_total = 1;
  std::vector<Cell> next;
  double s = 0.0;
  for (int n = 1;; ++n) {
    if (n > caps.max_gen) {
      st.truncated = true;
      break;
    }
    branch_cells(tr.gens.back(), seq.law(n), step, rng, next);
    s += seq.log_mean(n);
    std::int64_t z = 0;
    for (const Cell& c : next) z += c.count;
    st.pop_by_gen.push_back(z);
    st.particles_total += z;
    if (z == 0) {
      st.extinct_at = n;
      break;
    }
    tr.gens.push_back(next);
    tr.walk.push_back(s);
    int m = next.back().pos;
    st.max_disp_by_gen.push_back(m);
    st.max_disp = std::max(st.max_disp, m);
    if (z > caps.max_particles) {
      st.truncated = true;
      break;
    }
  }
  tr.truncated = st.truncated;
  return out;
}

double additive_martingale(const TreeTrace& trace, const StepLaw& step, double lam, int n) {
  if (n < 0) throw Error(ErrorKind::DomainError, "generation must be nonnegative");
  if (static_cast<std::size_t>(n) >= trace.gens.size()) {
    if (trace.truncated) {
      throw Error(ErrorKind::TraceUnavailable,
                  "generation " + std::to_string(n) + " beyond the truncated trace");
    }
    return 0.0;  // extinct before n
  }
  const double shift = -n * step.log_laplace(lam) - trace.walk[static_cast<std::size_t>(n)];
  double w = 0.0;
  for (const Cell& c : trace.gens[static_cast<std::size_t>(n)]) {
    w += static_cast<double>(c.count) * std::exp(lam * c.pos + shift);
  }
  return w;
}

LineWeight optional_line_weight(const TreeTrace& trace, const StepLaw& step, double lam,
                                int x) {
  LineWeight out;
  const double ls = step.log_laplace(lam);
  for (std::size_t n = 0; n < trace.gens.size(); ++n) {
    for (const Cell& c : trace.gens[n]) {
      if (c.pos >= x && c.anc_max < x) {
        out.value += static_cast<double>(c.count) *
                     std::exp(lam * c.pos - static_cast<double>(n) * ls - trace.walk[n]);
      }
    }
  }
  if (trace.truncated) {
    // Live particles that have not yet crossed could still join the line.
    for (const Cell& c : trace.gens.back()) {
      if (c.pos < x && c.anc_max < x) out.truncated = true;
    }
  }
  return out;
}

int naive_indicator(const TreeStats& stats, int x) {
  if (stats.max_disp >= x) return 1;
  if (stats.truncated || stats.stopped_at_level) {
    throw Error(ErrorKind::Inconclusive,
                "run truncated with M = " + std::to_string(stats.max_disp) + " < x = " +
                    std::to_string(x));
  }
  return 0;
}

}  // namespace brwre
