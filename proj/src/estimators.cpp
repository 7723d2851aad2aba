#include "brwre/estimators.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <thread>

#include "brwre/asymptotics.hpp"
#include "brwre/errors.hpp"

namespace brwre {

namespace {

constexpr std::int64_t kBlock = 1024;
constexpr double kZ95 = 1.96;

}  // namespace

void Moments::add(double v) noexcept {
  ++n;
  const double d = v - mean;
  mean += d / static_cast<double>(n);
  m2 += d * (v - mean);
}

void Moments::merge(const Moments& o) noexcept {
  if (o.n == 0) return;
  if (n == 0) {
    *this = o;
    return;
  }
  const double na = static_cast<double>(n);
  const double nb = static_cast<double>(o.n);
  const double tot = na + nb;
  const double d = o.mean - mean;
  mean += d * nb / tot;
  m2 += o.m2 + d * d * na * nb / tot;
  n += o.n;
}

Estimate summarize(const Moments& m, std::int64_t truncated, int x, std::string scheme,
                   std::uint64_t seed, bool zero_hit_rule, std::int64_t completed) {
  Estimate e;
  e.x = x;
  e.scheme = std::move(scheme);
  e.n = m.n;
  e.mean = m.mean;
  e.m2 = m.m2;
  e.seed = seed;
  e.truncated = truncated;
  e.completed = completed;
  e.completed_fraction =
      m.n > 0 ? static_cast<double>(completed) / static_cast<double>(m.n) : 0.0;
  e.truncated_fraction = m.n > 0 ? static_cast<double>(truncated) / static_cast<double>(m.n) : 0.0;
  e.stderr_ = m.n > 1 ? std::sqrt(m.variance() / static_cast<double>(m.n)) : 0.0;
  e.ci_lo = e.mean - kZ95 * e.stderr_;
  e.ci_hi = e.mean + kZ95 * e.stderr_;
  if (zero_hit_rule && m.n > 0 && m.mean == 0.0 && m.m2 == 0.0) {
    e.zero_hits = true;
    e.ci_lo = 0.0;
    e.ci_hi = 3.0 / static_cast<double>(m.n);
  }
  return e;
}

Estimate merge(const std::vector<Estimate>& parts) {
  if (parts.empty()) throw Error(ErrorKind::MixedTargets, "nothing to merge");
  Moments m;
  std::int64_t truncated = 0;
  std::int64_t completed = 0;
  bool zero_rule = false;
  for (const Estimate& p : parts) {
    if (p.x != parts.front().x || p.scheme != parts.front().scheme) {
      throw Error(ErrorKind::MixedTargets, "estimates target different (x, scheme)");
    }
    m.merge({p.n, p.mean, p.m2});
    truncated += p.truncated;
    completed += p.completed;
    zero_rule = zero_rule || p.zero_hits || p.scheme.rfind("naive", 0) == 0;
  }
  return summarize(m, truncated, parts.front().x, parts.front().scheme, parts.front().seed,
                   zero_rule, completed);
}

int default_workers() noexcept {
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

namespace {

// Runs fn(block_index, lo, hi) for every block on a small thread pool.
template <class BlockFn>
void for_each_block(std::int64_t n, int workers, BlockFn&& block_fn) {
  const std::int64_t blocks = (n + kBlock - 1) / kBlock;
  std::atomic<std::int64_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  const auto work = [&] {
    for (;;) {
      const std::int64_t b = next.fetch_add(1);
      if (b >= blocks || failed.load()) return;
      try {
        block_fn(b, b * kBlock, std::min(n, (b + 1) * kBlock));
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
        return;
      }
    }
  };
  if (workers <= 0) workers = default_workers();
  const int used = static_cast<int>(std::min<std::int64_t>(workers, blocks));
  if (used <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(used));
    for (int w = 0; w < used; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
}

std::int64_t block_count(std::int64_t n) { return (n + kBlock - 1) / kBlock; }

}  // namespace

void parallel_for(std::int64_t n, int workers, const std::function<void(std::int64_t)>& fn) {
  if (n <= 0) return;
  for_each_block(n, workers, [&](std::int64_t, std::int64_t lo, std::int64_t hi) {
    for (std::int64_t i = lo; i < hi; ++i) fn(i);
  });
}

ReplicateTotals run_replicates(std::int64_t first, std::int64_t n, int workers,
                               const std::function<ReplicateValue(std::int64_t)>& fn) {
  if (n <= 0) return {};
  std::vector<ReplicateTotals> per_block(static_cast<std::size_t>(block_count(n)));
  for_each_block(n, workers, [&](std::int64_t b, std::int64_t lo, std::int64_t hi) {
    ReplicateTotals& t = per_block[static_cast<std::size_t>(b)];
    for (std::int64_t i = lo; i < hi; ++i) {
      const ReplicateValue r = fn(first + i);
      t.moments.add(r.value);
      t.truncated += r.truncated ? 1 : 0;
      t.inconclusive += r.inconclusive ? 1 : 0;
      t.completed += r.completed ? 1 : 0;
    }
  });
  ReplicateTotals total;
  for (const auto& t : per_block) {
    total.moments.merge(t.moments);
    total.truncated += t.truncated;
    total.inconclusive += t.inconclusive;
    total.completed += t.completed;
  }
  return total;
}

std::vector<Moments> run_replicates_vec(
    std::int64_t first, std::int64_t n, std::size_t dim, int workers,
    const std::function<void(std::int64_t, std::vector<double>&)>& fn) {
  std::vector<Moments> total(dim);
  if (n <= 0) return total;
  std::vector<std::vector<Moments>> per_block(static_cast<std::size_t>(block_count(n)),
                                              std::vector<Moments>(dim));
  for_each_block(n, workers, [&](std::int64_t b, std::int64_t lo, std::int64_t hi) {
    auto& acc = per_block[static_cast<std::size_t>(b)];
    std::vector<double> values(dim);
    for (std::int64_t i = lo; i < hi; ++i) {
      fn(first + i, values);
      for (std::size_t d = 0; d < dim; ++d) acc[d].add(values[d]);
    }
  });
  for (const auto& acc : per_block) {
    for (std::size_t d = 0; d < dim; ++d) total[d].merge(acc[d]);
  }
  return total;
}

namespace {

ReplicateValue naive_value(const EnvSequence& seq, const StepLaw& step, int x,
                           const TreeCaps& caps, std::uint64_t rep_seed) {
  Rng rng(derive_seed(rep_seed, stream::tree));
  const TreeStats st = simulate_tree(seq, step, caps, rng, x);
  if (st.max_disp >= x) return {1.0, false, false};
  if (st.truncated) return {0.0, true, true};
  return {0.0, false, false};
}

Estimate finish_naive(const ReplicateTotals& t, int x, const char* scheme, std::uint64_t seed) {
  if (t.moments.n > 0 && t.inconclusive == t.moments.n) {
    throw Error(ErrorKind::AllTruncated, "every naive replicate was truncated below x");
  }
  return summarize(t.moments, t.truncated, x, scheme, seed, true);
}

Estimate coupling_estimate(const CouplingSampler& sampler, int x, std::int64_t n,
                           std::uint64_t seed, const RunOptions& opt, const char* scheme) {
  const auto t = run_replicates(opt.first_replicate, n, opt.workers, [&](std::int64_t i) {
    const CouplingRun run = sampler.run(x, replicate_seed(seed, i));
    return ReplicateValue{std::exp(run.log_weight()), run.truncated_subtrees > 0, false,
                          run.completed_subtrees > 0};
  });
  return summarize(t.moments, t.truncated, x, scheme, seed, false, t.completed);
}

}  // namespace

Estimate estimate_naive(std::shared_ptr<const EnvModel> model, const StepLaw& step, int x,
                        std::int64_t n, std::uint64_t seed, const RunOptions& opt) {
  const auto t = run_replicates(opt.first_replicate, n, opt.workers, [&](std::int64_t i) {
    const std::uint64_t rs = replicate_seed(seed, i);
    const EnvSequence seq(model, derive_seed(rs, stream::environment));
    return naive_value(seq, step, x, opt.tree_caps, rs);
  });
  return finish_naive(t, x, "naive", seed);
}

Estimate estimate_naive_quenched(std::shared_ptr<const EnvSequence> seq, const StepLaw& step,
                                 int x, std::int64_t n, std::uint64_t seed,
                                 const RunOptions& opt) {
  const auto t = run_replicates(opt.first_replicate, n, opt.workers, [&](std::int64_t i) {
    return naive_value(*seq, step, x, opt.tree_caps, replicate_seed(seed, i));
  });
  return finish_naive(t, x, "naive_quenched", seed);
}

Estimate estimate_spine(std::shared_ptr<const EnvModel> model, const StepLaw& step, int x,
                        double lam, std::int64_t n, std::uint64_t seed, const RunOptions& opt) {
  if (!(lam > 0.0)) throw Error(ErrorKind::DomainError, "lambda must be positive");
  const CouplingSampler sampler(std::move(model), step, Measure::annealed_base, lam,
                                std::nullopt, opt.subtree_caps);
  return coupling_estimate(sampler, x, n, seed, opt, "spine");
}

Estimate estimate_spine_quenched(std::shared_ptr<const EnvSequence> seq, const StepLaw& step,
                                 int x, double lam, std::int64_t n, std::uint64_t seed,
                                 const RunOptions& opt) {
  const CouplingSampler sampler(seq->model_ptr(), step, Measure::forward_quenched, lam,
                                std::nullopt, opt.subtree_caps, seq);
  return coupling_estimate(sampler, x, n, seed, opt, "spine_quenched");
}

Estimate estimate_class1(std::shared_ptr<const EnvModel> model, const StepLaw& step, int x,
                         std::int64_t n, std::uint64_t seed, const RunOptions& opt) {
  const CouplingSampler sampler(std::move(model), step, Measure::tilted_rho1, std::nullopt,
                                std::nullopt, opt.subtree_caps);
  return coupling_estimate(sampler, x, n, seed, opt, "class1");
}

Estimate estimate_class3(std::shared_ptr<const EnvModel> model, const StepLaw& step, int x,
                         std::int64_t n, std::uint64_t seed, std::optional<double> rho,
                         const RunOptions& opt) {
  if (!rho) {
    const ClassificationReport rep = classify(*model, step);
    if (rep.class_label != RegimeClass::III) {
      throw Error(ErrorKind::NotClassIII, "system is Class " +
                                              std::string(to_string(rep.class_label)));
    }
    rho = rep.rho_star;
  }
  const CouplingSampler sampler(std::move(model), step, Measure::tilted_rho, std::nullopt, rho,
                                opt.subtree_caps);
  return coupling_estimate(sampler, x, n, seed, opt, "class3");
}

Estimate estimate_r_drift(std::shared_ptr<const EnvModel> model, const StepLaw& step,
                          Measure measure, std::optional<double> rho, std::int64_t n,
                          std::uint64_t seed, const RunOptions& opt) {
  const CouplingSampler sampler(std::move(model), step, measure, std::nullopt, rho,
                                opt.subtree_caps);
  const auto t = run_replicates(opt.first_replicate, n, opt.workers, [&](std::int64_t i) {
    return ReplicateValue{sampler.r_walk(1, replicate_seed(seed, i)).front(), false, false};
  });
  return summarize(t.moments, 0, 1, "r_drift", seed);
}

RateFit fit_rate(const std::vector<std::pair<double, double>>& pairs) {
  if (pairs.size() < 4) throw Error(ErrorKind::DegenerateFit, "need at least 4 points");
  RateFit f;
  const auto rows = static_cast<Eigen::Index>(pairs.size());
  Eigen::MatrixXd a(rows, 3);
  Eigen::VectorXd b(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto [x, p] = pairs[static_cast<std::size_t>(i)];
    if (!(p > 0.0) || !std::isfinite(p)) {
      throw Error(ErrorKind::DegenerateFit, "estimates must be positive and finite");
    }
    if (!(x > 0.0)) throw Error(ErrorKind::DegenerateFit, "x must be positive");
    f.xs.push_back(x);
    f.log_values.push_back(std::log(p));
    a(i, 0) = -x;
    a(i, 1) = -std::log(x);
    a(i, 2) = 1.0;
    b(i) = std::log(p);
  }
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  if (qr.rank() < 3) throw Error(ErrorKind::DegenerateFit, "design matrix is rank deficient");
  const Eigen::VectorXd sol = qr.solve(b);
  f.exp_rate = sol(0);
  f.poly_power = sol(1);
  f.intercept = sol(2);
  f.residual = std::sqrt((a * sol - b).squaredNorm() / static_cast<double>(rows));
  const double x0 = f.xs.front(), x1 = f.xs.back();
  if (x1 == x0) throw Error(ErrorKind::DegenerateFit, "first and last x coincide");
  f.exp_rate_diff = (f.log_values.front() - f.log_values.back()) / (x1 - x0);
  return f;
}

namespace {

// √x P(max_{j<=x} R_j <= 0) from per-replicate walks; walk(i, out) fills
// R_1..R_xmax for replicate i.
std::vector<DecayPoint> decay_from_walks(
    std::int64_t n, const std::vector<int>& xs, const RunOptions& opt,
    const std::function<void(std::int64_t, std::vector<double>&)>& walk) {
  for (int x : xs) {
    if (x < 1) throw Error(ErrorKind::DomainError, "x must be >= 1");
  }
  const auto m = run_replicates_vec(
      opt.first_replicate, n, xs.size(), opt.workers,
      [&](std::int64_t i, std::vector<double>& values) {
        thread_local std::vector<double> r;
        walk(i, r);
        // Running maximum of R_0 = 0, R_1, ... read off at each requested x.
        for (std::size_t d = 0; d < xs.size(); ++d) {
          double peak = 0.0;
          for (int j = 0; j < xs[d]; ++j) peak = std::max(peak, r[static_cast<std::size_t>(j)]);
          values[d] = peak <= 0.0 ? 1.0 : 0.0;
        }
      });
  std::vector<DecayPoint> out;
  for (std::size_t d = 0; d < xs.size(); ++d) {
    const double scale = std::sqrt(static_cast<double>(xs[d]));
    const double se =
        m[d].n > 1 ? std::sqrt(m[d].variance() / static_cast<double>(m[d].n)) : 0.0;
    out.push_back({xs[d], scale * m[d].mean, scale * se});
  }
  return out;
}

}  // namespace

std::vector<DecayPoint> diagnostic_sqrt_decay(std::shared_ptr<const EnvModel> model,
                                              const StepLaw& step, std::int64_t n,
                                              const std::vector<int>& xs, std::uint64_t seed,
                                              const RunOptions& opt) {
  const CouplingSampler sampler(std::move(model), step, Measure::tilted_rho1);
  const int x_max = xs.empty() ? 0 : *std::max_element(xs.begin(), xs.end());
  return decay_from_walks(n, xs, opt, [&](std::int64_t i, std::vector<double>& r) {
    r = sampler.r_walk(x_max, replicate_seed(seed, i));
  });
}

std::vector<DecayPoint> gaussian_sqrt_decay(std::int64_t n, const std::vector<int>& xs,
                                            std::uint64_t seed, const RunOptions& opt) {
  const int x_max = xs.empty() ? 0 : *std::max_element(xs.begin(), xs.end());
  return decay_from_walks(n, xs, opt, [&](std::int64_t i, std::vector<double>& r) {
    Rng rng(replicate_seed(seed, i));
    std::normal_distribution<double> normal(0.0, 1.0);
    r.resize(static_cast<std::size_t>(x_max));
    double s = 0.0;
    for (auto& v : r) v = (s += normal(rng));
  });
}

double sparre_andersen(int n) noexcept {
  // C(2n, n) / 4^n = prod_{j=1}^n (2j - 1) / (2j).
  double p = 1.0;
  for (int j = 1; j <= n; ++j) p *= (2.0 * j - 1.0) / (2.0 * j);
  return p;
}

}  // namespace brwre
