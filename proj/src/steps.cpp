#include "brwre/steps.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "brwre/errors.hpp"
#include "brwre/offspring.hpp"
#include "brwre/roots.hpp"

namespace brwre {

namespace {

constexpr double kSumTolerance = 1e-9;
constexpr double kMeanTolerance = 1e-12;

std::vector<double> cumulative(const std::vector<double>& probs) {
  std::vector<double> cdf(probs.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    cdf[i] = acc;
  }
  cdf.back() = 1.0;
  return cdf;
}

}  // namespace

StepLaw StepLaw::make(std::vector<Entry> entries) {
  double total = 0.0;
  for (const auto& [y, p] : entries) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw Error(ErrorKind::BadPmf, "negative or non-finite step probability");
    }
    if (y > 1 && p > 0.0) {
      throw Error(ErrorKind::SupportAbovePlusOne,
                  "step law puts mass on " + std::to_string(y) + " > +1");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > kSumTolerance) {
    throw Error(ErrorKind::BadPmf, "step probabilities sum to " + std::to_string(total));
  }
  std::sort(entries.begin(), entries.end());
  StepLaw law;
  for (const auto& [y, p] : entries) {
    if (p == 0.0) continue;
    if (!law.steps_.empty() && law.steps_.back() == y) {
      throw Error(ErrorKind::BadPmf, "repeated displacement");
    }
    law.steps_.push_back(y);
    law.probs_.push_back(p / total);
  }
  if (law.steps_.size() < 2) {
    throw Error(ErrorKind::TrivialLaw, "step law needs at least two support points");
  }
  if (law.steps_.back() != 1) {
    throw Error(ErrorKind::MissingUpStep, "step law has no mass at +1");
  }
  double mean = 0.0;
  for (std::size_t i = 0; i < law.steps_.size(); ++i) mean += law.steps_[i] * law.probs_[i];
  if (std::abs(mean) > kMeanTolerance) {
    throw Error(ErrorKind::MeanNotZero, "step law mean is " + std::to_string(mean));
  }
  law.cdf_ = cumulative(law.probs_);
  return law;
}

double StepLaw::log_laplace(double lam) const noexcept {
  // Factor out e^{λ}: the largest displacement is +1.
  double sum = 0.0;
  for (std::size_t i = 0; i < steps_.size(); ++i) {
    sum += probs_[i] * std::exp(lam * (steps_[i] - 1));
  }
  return lam + std::log(sum);
}

std::pair<double, double> StepLaw::log_laplace_derivs(double lam) const noexcept {
  double z = 0.0, m1 = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < steps_.size(); ++i) {
    const double w = probs_[i] * std::exp(lam * (steps_[i] - 1));
    z += w;
    m1 += w * steps_[i];
    m2 += w * steps_[i] * steps_[i];
  }
  const double mean = m1 / z;
  return {mean, m2 / z - mean * mean};
}

double StepLaw::inverse_log_laplace(double delta) const {
  if (!(delta > 0.0)) {
    throw Error(ErrorKind::DomainError, "kappa needs delta > 0");
  }
  // Λ_s(λ) >= λ + log p_{+1}, so this bracket is guaranteed.
  const double hi = delta - std::log(up_prob()) + 1.0;
  return roots::solve_increasing([&](double l) { return log_laplace(l) - delta; },
                                 [&](double l) { return log_laplace_derivs(l).first; },
                                 0.0, hi);
}

TiltedStepLaw StepLaw::tilt(double lam) const {
  const double norm = log_laplace(lam);
  std::vector<double> tilted(steps_.size());
  double total = 0.0;
  for (std::size_t i = 0; i < steps_.size(); ++i) {
    tilted[i] = probs_[i] * std::exp(lam * steps_[i] - norm);
    total += tilted[i];
  }
  for (double& p : tilted) p /= total;
  return TiltedStepLaw(*this, lam, std::move(tilted));
}

int StepLaw::sample(Rng& rng) const noexcept {
  return steps_[inverse_cdf(cdf_, rng.uniform())];
}

TiltedStepLaw::TiltedStepLaw(StepLaw base, double lam, std::vector<double> probs)
    : base_(std::move(base)), lambda_(lam), probs_(std::move(probs)),
      cdf_(cumulative(probs_)) {}

double TiltedStepLaw::mean() const noexcept {
  double m = 0.0;
  const auto& ys = displacements();
  for (std::size_t i = 0; i < ys.size(); ++i) m += ys[i] * probs_[i];
  return m;
}

int TiltedStepLaw::sample(Rng& rng) const noexcept {
  return displacements()[inverse_cdf(cdf_, rng.uniform())];
}

std::vector<double> first_passage_pmf(const StepLaw& law, int x, int n_max,
                                      std::size_t cell_budget) {
  if (x < 1 || n_max < 1) {
    throw Error(ErrorKind::DomainError, "first passage needs x >= 1 and n_max >= 1");
  }
  const int down = -law.min_step();
  std::vector<double> out(static_cast<std::size_t>(n_max) + 1, 0.0);

  // prob[p - lo] = Q(H_n = p, τ_x > n) on the live range [lo, x - 1].
  int lo = 0;
  std::vector<double> prob{1.0};
  std::size_t cells = 0;
  const auto& ys = law.displacements();
  const auto& ps = law.probs();
  for (int n = 1; n <= n_max; ++n) {
    // After step n only positions >= x - (n_max - n) can still hit x in time.
    const int new_lo = std::max(lo - down, x - (n_max - n));
    const int width = std::max(0, x - new_lo);
    cells += static_cast<std::size_t>(width);
    if (cells > cell_budget) {
      throw Error(ErrorKind::CapacityError, "first-passage DP exceeds cell budget");
    }
    std::vector<double> next(static_cast<std::size_t>(width), 0.0);
    double hit = 0.0;
    for (std::size_t i = 0; i < prob.size(); ++i) {
      const double mass = prob[i];
      if (mass == 0.0) continue;
      const int pos = lo + static_cast<int>(i);
      for (std::size_t j = 0; j < ys.size(); ++j) {
        const int to = pos + ys[j];
        if (to >= x) {
          hit += mass * ps[j];
        } else if (to >= new_lo) {
          next[static_cast<std::size_t>(to - new_lo)] += mass * ps[j];
        }
      }
    }
    out[static_cast<std::size_t>(n)] = hit;
    if (width == 0) break;
    prob.swap(next);
    lo = new_lo;
  }
  return out;
}

std::vector<double> tilted_first_passage(const StepLaw& law, double lam, int x,
                                         int n_max, std::size_t cell_budget) {
  auto pmf = first_passage_pmf(law, x, n_max, cell_budget);
  const double ls = law.log_laplace(lam);
  for (std::size_t n = 1; n < pmf.size(); ++n) {
    if (pmf[n] > 0.0) {
      pmf[n] = std::exp(std::log(pmf[n]) + lam * x - static_cast<double>(n) * ls);
    }
  }
  return pmf;
}

}  // namespace brwre
