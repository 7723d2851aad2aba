#include "brwre/spine.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "brwre/asymptotics.hpp"
#include "brwre/errors.hpp"
#include "detail/histogram.hpp"

namespace brwre {

namespace {

[[noreturn]] void runaway(std::int64_t cap) {
  throw Error(ErrorKind::RunawayError,
              "tilted walk did not pass its target within " + std::to_string(cap) + " steps");
}

std::uint64_t excursion_seed(std::uint64_t run_seed, int m) {
  return derive_seed(derive_seed(run_seed, stream::excursions), static_cast<std::uint64_t>(m));
}

std::uint64_t subtree_seed(std::uint64_t run_seed, int k) {
  // k is negative for backward runs and nonnegative for forward ones; the
  // cast keeps the two ranges distinct.
  return derive_seed(derive_seed(run_seed, stream::subtrees),
                     static_cast<std::uint64_t>(static_cast<std::int64_t>(k)));
}

// log(1 + sum_i e^{a_i}) with a max shift and compensated summation.
double log1p_sum_exp(const std::vector<double>& a) {
  double top = 0.0;
  for (double v : a) top = std::max(top, v);
  double sum = std::exp(-top);
  double comp = 0.0;
  for (double v : a) {
    const double term = std::exp(v - top);
    const double t = sum + term;
    comp += std::abs(sum) >= std::abs(term) ? (sum - t) + term : (term - t) + sum;
    sum = t;
  }
  return top + std::log(sum + comp);
}

}  // namespace

Excursion sample_excursion(const TiltedStepLaw& tilted, Rng& rng, std::int64_t cap) {
  std::vector<int> h{0};
  int pos = 0;
  while (pos < 1) {
    if (static_cast<std::int64_t>(h.size()) > cap) runaway(cap);
    pos += tilted.sample(rng);
    h.push_back(pos);
  }
  Excursion e;
  e.length = static_cast<int>(h.size()) - 1;
  e.steps.resize(h.size());
  for (int j = 0; j <= e.length; ++j) {
    e.steps[static_cast<std::size_t>(j)] = h[static_cast<std::size_t>(e.length - j)] - 1;
  }
  return e;
}

std::int64_t sample_excursion_length(const TiltedStepLaw& tilted, Rng& rng,
                                     std::int64_t cap) {
  return sample_tilted_passage(tilted, 1, rng, cap);
}

std::int64_t sample_tilted_passage(const TiltedStepLaw& tilted, int x, Rng& rng,
                                   std::int64_t cap) {
  std::int64_t n = 0;
  int pos = 0;
  while (pos < x) {
    if (n >= cap) runaway(cap);
    pos += tilted.sample(rng);
    ++n;
  }
  return n;
}

Trajectory build_trajectory(const std::vector<Excursion>& excursions, int x) {
  if (x < 1 || static_cast<std::size_t>(x) > excursions.size()) {
    throw Error(ErrorKind::DomainError, "need at least x excursions");
  }
  Trajectory t;
  t.y.push_back(0);
  t.ends.push_back(0);
  for (int m = 1; m <= x; ++m) {
    const Excursion& e = excursions[static_cast<std::size_t>(m - 1)];
    for (int j = 1; j <= e.length; ++j) {
      t.y.push_back(-(m - 1) + e.steps[static_cast<std::size_t>(j)]);
    }
    t.ends.push_back(t.ends.back() + e.length);
  }
  t.T_x = t.ends.back();
  return t;
}

PhiSample sample_phi_subtree(const EnvSequence& seq, const StepLaw& step, double lam, int k,
                             int y_k, const SubtreeCaps& caps, Rng& rng) {
  if (y_k >= 0) throw Error(ErrorKind::DomainError, "subtree root must sit below 0");
  PhiSample out;
  const std::int64_t d = seq.size_biased_law(k + 1).sample(rng);
  if (d <= 1) return out;

  const double ls = step.log_laplace(lam);
  thread_local detail::Histogram cur;
  thread_local detail::Histogram next;
  cur.lo = y_k + step.min_step();
  cur.counts.assign(static_cast<std::size_t>(1 - step.min_step() + 1), 0);
  detail::scatter_steps(d - 1, y_k, step, rng, cur);
  double ds = seq.log_mean(k + 1);  // S_t - S_k

  for (int t = k + 1;; ++t) {
    // Absorb generation-t particles that reached 0 (never above: skip-free).
    cur.trim();
    if (!cur.empty() && cur.hi() >= 0) {
      const std::int64_t hit = cur.counts.back();
      out.absorbed += hit;
      out.phi += static_cast<double>(hit) *
                 std::exp(-lam * y_k - static_cast<double>(t - k) * ls - ds);
      cur.counts.pop_back();
      cur.trim();
    }
    if (cur.empty()) break;
    if (t - k >= caps.max_gen || cur.total() > caps.max_particles) {
      if (!caps.complete_on_cap) {
        out.truncated = true;
        break;
      }
      out.completed = true;
      const double base = -lam * y_k - static_cast<double>(t - k) * ls - ds;
      for (std::size_t i = 0; i < cur.counts.size(); ++i) {
        if (cur.counts[i] == 0) continue;
        out.phi += static_cast<double>(cur.counts[i]) *
                   std::exp(lam * (cur.lo + static_cast<int>(i)) + base);
      }
      break;
    }
    detail::branch_and_step(cur, seq.law(t + 1), step, rng, next);
    std::swap(cur, next);
    ds += seq.log_mean(t + 1);
  }
  return out;
}

std::string_view to_string(Measure m) noexcept {
  switch (m) {
    case Measure::forward_quenched: return "forward_quenched";
    case Measure::annealed_base: return "annealed_base";
    case Measure::tilted_rho1: return "tilted_rho1";
    case Measure::tilted_rho: return "tilted_rho";
  }
  return "?";
}

Measure parse_measure(std::string_view s) {
  for (Measure m : {Measure::forward_quenched, Measure::annealed_base, Measure::tilted_rho1,
                    Measure::tilted_rho}) {
    if (to_string(m) == s) return m;
  }
  throw Error(ErrorKind::ConfigError, "unknown measure '" + std::string(s) + "'");
}

double CouplingRun::log_weight() const noexcept {
  switch (measure) {
    case Measure::forward_quenched:
    case Measure::annealed_base: return R_x + log_B;
    case Measure::tilted_rho1: return log_B;
    case Measure::tilted_rho: return (1.0 - rho) * R_x + log_B;
  }
  return log_B;
}

CouplingSampler::CouplingSampler(std::shared_ptr<const EnvModel> model, StepLaw step,
                                 Measure measure, std::optional<double> lambda,
                                 std::optional<double> rho, SubtreeCaps caps,
                                 std::shared_ptr<const EnvSequence> seq)
    : model_(std::move(model)),
      step_(std::move(step)),
      measure_(measure),
      caps_(caps),
      seq_(std::move(seq)) {
  switch (measure_) {
    case Measure::forward_quenched:
      if (!seq_) throw Error(ErrorKind::ConfigError, "forward_quenched needs a sequence");
      if (!lambda) throw Error(ErrorKind::ConfigError, "forward_quenched needs lambda");
      lambda_ = *lambda;
      break;
    case Measure::annealed_base:
      lambda_ = lambda ? *lambda : lambda_rho(*model_, step_, 1.0);
      break;
    case Measure::tilted_rho1: {
      if (alpha(*model_) <= 1.0) {
        throw Error(ErrorKind::AlphaTooSmall, "tilted_rho1 needs alpha > 1");
      }
      lambda_ = lambda_rho(*model_, step_, 1.0);
      nonpositive_weights_ = model_->tilted(1.0).weights();
      break;
    }
    case Measure::tilted_rho: {
      if (!rho) throw Error(ErrorKind::ConfigError, "tilted_rho needs rho");
      rho_ = *rho;
      lambda_ = lambda_rho(*model_, step_, rho_);
      nonpositive_weights_ = model_->tilted(rho_).weights();
      break;
    }
  }
  if (!(lambda_ > 0.0)) throw Error(ErrorKind::DomainError, "lambda must be positive");
  log_laplace_ = step_.log_laplace(lambda_);
  tilted_.emplace(step_.tilt(lambda_));
}

EnvSequence CouplingSampler::environment(std::uint64_t seed) const {
  return EnvSequence(model_, derive_seed(seed, stream::environment), nonpositive_weights_);
}

CouplingRun CouplingSampler::run(int x, std::uint64_t seed) const {
  if (x < 1) throw Error(ErrorKind::DomainError, "x must be >= 1");
  return measure_ == Measure::forward_quenched ? run_forward(x, seed) : run_backward(x, seed);
}

CouplingRun CouplingSampler::run_backward(int x, std::uint64_t seed) const {
  CouplingRun run;
  run.x = x;
  run.measure = measure_;
  run.lambda_used = lambda_;
  run.rho = rho_;
  run.seed = seed;

  std::vector<Excursion> exc;
  exc.reserve(static_cast<std::size_t>(x));
  for (int m = 1; m <= x; ++m) {
    Rng rng(excursion_seed(seed, m));
    exc.push_back(sample_excursion(*tilted_, rng));
  }
  const Trajectory traj = build_trajectory(exc, x);
  run.T_x = traj.T_x;

  EnvSequence env = environment(seed);
  env.ensure(-traj.T_x, 0);

  run.phi_values.reserve(static_cast<std::size_t>(traj.T_x));
  run.J.reserve(static_cast<std::size_t>(traj.T_x));
  std::vector<double> terms;
  for (int k = -traj.T_x; k <= -1; ++k) {
    const int y = traj.at(k);
    const double j = -env.walk(k) - k * log_laplace_ + lambda_ * y;
    Rng rng(subtree_seed(seed, k));
    const PhiSample ps = sample_phi_subtree(env, step_, lambda_, k, y, caps_, rng);
    if (ps.truncated) ++run.truncated_subtrees;
    if (ps.completed) ++run.completed_subtrees;
    run.phi_values.push_back(ps.phi);
    run.J.push_back(j);
    if (ps.phi > 0.0) terms.push_back(j + std::log(ps.phi));
  }
  run.R_x = -env.walk(-traj.T_x) + traj.T_x * log_laplace_ - lambda_ * x;
  run.log_B = -log1p_sum_exp(terms);
  run.B_x = std::exp(run.log_B);
  return run;
}

CouplingRun CouplingSampler::run_forward(int x, std::uint64_t seed) const {
  CouplingRun run;
  run.x = x;
  run.measure = measure_;
  run.lambda_used = lambda_;
  run.seed = seed;

  // Spine path V_0 = 0, ..., V_τ = x under the tilted step law.
  std::vector<int> v{0};
  {
    Rng rng(excursion_seed(seed, 0));
    while (v.back() < x) {
      if (static_cast<std::int64_t>(v.size()) > kExcursionCap) runaway(kExcursionCap);
      v.push_back(v.back() + tilted_->sample(rng));
    }
  }
  const int tau = static_cast<int>(v.size()) - 1;
  run.T_x = tau;

  const EnvSequence& env = *seq_;
  std::vector<double> s(static_cast<std::size_t>(tau) + 1, 0.0);
  for (int t = 1; t <= tau; ++t) {
    s[static_cast<std::size_t>(t)] = s[static_cast<std::size_t>(t - 1)] + env.log_mean(t);
  }
  const double s_tau = s.back();

  std::vector<double> terms;
  for (int k = 0; k < tau; ++k) {
    const int y = v[static_cast<std::size_t>(k)] - x;
    const double j = lambda_ * y - (k - tau) * log_laplace_ - (s[static_cast<std::size_t>(k)] - s_tau);
    Rng rng(subtree_seed(seed, k));
    const PhiSample ps = sample_phi_subtree(env, step_, lambda_, k, y, caps_, rng);
    if (ps.truncated) ++run.truncated_subtrees;
    if (ps.completed) ++run.completed_subtrees;
    run.phi_values.push_back(ps.phi);
    run.J.push_back(j);
    if (ps.phi > 0.0) terms.push_back(j + std::log(ps.phi));
  }
  run.R_x = s_tau + tau * log_laplace_ - lambda_ * x;
  run.log_B = -log1p_sum_exp(terms);
  run.B_x = std::exp(run.log_B);
  return run;
}

std::vector<double> CouplingSampler::r_walk(int x, std::uint64_t seed) const {
  if (measure_ == Measure::forward_quenched) {
    throw Error(ErrorKind::ConfigError, "the R-walk is defined for backward measures only");
  }
  const EnvSequence env = environment(seed);
  std::vector<double> r;
  r.reserve(static_cast<std::size_t>(x));
  double acc = 0.0;
  int k = 0;  // -T_{m-1}
  for (int m = 1; m <= x; ++m) {
    Rng rng(excursion_seed(seed, m));
    const std::int64_t theta = sample_excursion_length(*tilted_, rng);
    // R_m - R_{m-1} = sum of X_i over the segment + θ Λ_s - λ.
    for (std::int64_t i = 0; i < theta; ++i) acc += env.log_mean(k - static_cast<int>(i));
    k -= static_cast<int>(theta);
    acc += static_cast<double>(theta) * log_laplace_ - lambda_;
    r.push_back(acc);
  }
  return r;
}

CouplingRun sample_coupling_run(std::shared_ptr<const EnvModel> model, const StepLaw& step,
                                int x, Measure measure, std::optional<double> rho,
                                const SubtreeCaps& caps, std::uint64_t seed,
                                std::optional<double> lambda) {
  CouplingSampler sampler(std::move(model), step, measure, lambda, rho, caps);
  return sampler.run(x, seed);
}

}  // namespace brwre
