#include "brwre/environment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "brwre/errors.hpp"
#include "brwre/rng.hpp"

namespace brwre {

namespace {

constexpr double kWeightTolerance = 1e-9;

std::vector<double> cumulative(const std::vector<double>& w) {
  std::vector<double> cdf(w.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    acc += w[i];
    cdf[i] = acc;
  }
  cdf.back() = 1.0;
  return cdf;
}

}  // namespace

EnvModel EnvModel::make(std::vector<State> states) {
  return build(std::move(states), true);
}

EnvModel EnvModel::make_unchecked(std::vector<State> states) {
  return build(std::move(states), false);
}

EnvModel EnvModel::build(std::vector<State> states, bool check_subcritical) {
  if (states.empty()) throw Error(ErrorKind::BadWeights, "environment has no states");
  double total = 0.0;
  for (const auto& s : states) {
    if (!(s.weight > 0.0) || !std::isfinite(s.weight)) {
      throw Error(ErrorKind::BadWeights, "state weights must be positive");
    }
    total += s.weight;
  }
  if (std::abs(total - 1.0) > kWeightTolerance) {
    throw Error(ErrorKind::BadWeights, "state weights sum to " + std::to_string(total));
  }
  EnvModel model;
  for (auto& s : states) {
    if (!(s.law.mean() > 0.0) || !std::isfinite(s.law.mean())) {
      throw Error(ErrorKind::NonPositiveMean, "offspring mean must be positive");
    }
    model.weights_.push_back(s.weight / total);
    model.log_means_.push_back(std::log(s.law.mean()));
    model.biased_.push_back(s.law.size_biased());
    model.laws_.push_back(std::move(s.law));
  }
  model.cdf_ = cumulative(model.weights_);
  if (check_subcritical && !(model.drift() < 0.0)) {
    throw Error(ErrorKind::NotSubcritical,
                "E[log mean] = " + std::to_string(model.drift()) + " is not negative");
  }
  return model;
}

double EnvModel::max_mean() const noexcept {
  double m = 0.0;
  for (const auto& law : laws_) m = std::max(m, law.mean());
  return m;
}

double EnvModel::lambda_e(double rho) const noexcept {
  double spread = 0.0;
  for (double x : log_means_) spread = std::max(spread, std::abs(rho * x));
  if (spread < 0.5) {
    // Small-ρ branch keeps Λ_e(ρ)/ρ accurate as ρ -> 0.
    double sum = 0.0;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      sum += weights_[i] * std::expm1(rho * log_means_[i]);
    }
    return std::log1p(sum);
  }
  double top = -std::numeric_limits<double>::infinity();
  for (double x : log_means_) top = std::max(top, rho * x);
  double sum = 0.0;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    sum += weights_[i] * std::exp(rho * log_means_[i] - top);
  }
  return top + std::log(sum);
}

double EnvModel::lambda_e_prime(double rho) const noexcept {
  const double norm = lambda_e(rho);
  double m = 0.0;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    m += weights_[i] * std::exp(rho * log_means_[i] - norm) * log_means_[i];
  }
  return m;
}

double EnvModel::lambda_e_second(double rho) const noexcept {
  const double norm = lambda_e(rho);
  const double mean = lambda_e_prime(rho);
  double v = 0.0;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    const double d = log_means_[i] - mean;
    v += weights_[i] * std::exp(rho * log_means_[i] - norm) * d * d;
  }
  return v;
}

EnvModel EnvModel::tilted(double rho) const {
  const double norm = lambda_e(rho);
  std::vector<State> out;
  double total = 0.0;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    total += weights_[i] * std::exp(rho * log_means_[i] - norm);
  }
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    out.push_back({weights_[i] * std::exp(rho * log_means_[i] - norm) / total, laws_[i]});
  }
  return build(std::move(out), false);
}

std::size_t EnvModel::state_for(double u) const noexcept {
  return inverse_cdf(cdf_, u);
}

std::vector<EnvModel::State> EnvModel::states() const {
  std::vector<State> out;
  for (std::size_t i = 0; i < laws_.size(); ++i) out.push_back({weights_[i], laws_[i]});
  return out;
}

EnvSequence::EnvSequence(std::shared_ptr<const EnvModel> model, std::uint64_t seed,
                         std::vector<double> nonpositive_weights)
    : model_(std::move(model)), seed_(seed) {
  pos_cdf_ = cumulative(model_->weights());
  if (nonpositive_weights.empty()) {
    neg_cdf_ = pos_cdf_;
  } else {
    if (nonpositive_weights.size() != model_->size()) {
      throw Error(ErrorKind::BadWeights, "tilted weights do not match the model states");
    }
    neg_cdf_ = cumulative(nonpositive_weights);
  }
  pos_.push_back(0);
  s_pos_.push_back(0.0);
  s_neg_.push_back(0.0);
}

std::size_t EnvSequence::draw_state(int k) const noexcept {
  const auto bits = derive_seed(seed_, static_cast<std::uint64_t>(static_cast<std::int64_t>(k)));
  const double u = Rng::to_unit(bits);
  return inverse_cdf(k <= 0 ? neg_cdf_ : pos_cdf_, u);
}

void EnvSequence::ensure(int lo, int hi) {
  while (this->hi() < hi) {
    const int k = this->hi() + 1;
    pos_.push_back(draw_state(k));
    s_pos_.push_back(s_pos_.back() + model_->log_mean(pos_.back()));
  }
  while (this->lo() > lo) neg_.push_back(draw_state(this->lo() - 1));
  // S_{-j} = S_{-j+1} - X_{-j+1}, available for j <= neg_.size().
  while (s_neg_.size() < neg_.size() + 1) {
    const std::size_t j = s_neg_.size();
    s_neg_.push_back(s_neg_.back() - model_->log_mean(neg_[j - 1]));
  }
}

std::size_t EnvSequence::state(int k) const noexcept {
  if (k >= 1 && k <= hi()) return pos_[static_cast<std::size_t>(k)];
  if (k <= 0 && k >= lo()) return neg_[static_cast<std::size_t>(-k)];
  return draw_state(k);
}

double EnvSequence::walk(int k) const {
  if (k >= 0 && k <= hi()) return s_pos_[static_cast<std::size_t>(k)];
  if (k < 0 && static_cast<std::size_t>(-k) < s_neg_.size()) {
    return s_neg_[static_cast<std::size_t>(-k)];
  }
  throw Error(ErrorKind::OutOfWindow, "S_" + std::to_string(k) + " outside cached window");
}

std::vector<double> EnvSequence::assoc_walk(int lo, int hi) const {
  if (lo > hi) throw Error(ErrorKind::DomainError, "assoc_walk needs lo <= hi");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(hi - lo + 1));
  for (int k = lo; k <= hi; ++k) out.push_back(walk(k));
  return out;
}

EnvSequence sample_env_seq(std::shared_ptr<const EnvModel> model, int lo, int hi,
                           std::uint64_t seed) {
  if (lo > hi) throw Error(ErrorKind::DomainError, "sample_env_seq needs lo <= hi");
  EnvSequence seq(std::move(model), seed);
  seq.ensure(std::min(lo, 0), std::max(hi, 0));
  return seq;
}

}  // namespace brwre
