#include "brwre/offspring.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "brwre/errors.hpp"

namespace brwre {

namespace {

constexpr double kSumTolerance = 1e-9;

// Below this many trials a per-trial inverse-CDF draw beats binomials.
constexpr std::int64_t kDirectTrials = 12;

}  // namespace

std::size_t inverse_cdf(const std::vector<double>& cdf, double u) noexcept {
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  const auto idx = static_cast<std::size_t>(it - cdf.begin());
  return std::min(idx, cdf.size() - 1);
}

void sample_multinomial(std::int64_t n, const std::vector<double>& probs,
                        const std::vector<double>& cdf, Rng& rng,
                        std::vector<std::int64_t>& out) {
  out.assign(probs.size(), 0);
  if (n <= 0) return;
  if (n <= kDirectTrials || probs.size() == 1) {
    if (probs.size() == 1) {
      out[0] = n;
      return;
    }
    for (std::int64_t i = 0; i < n; ++i) ++out[inverse_cdf(cdf, rng.uniform())];
    return;
  }
  std::int64_t remaining = n;
  double mass_left = 1.0;
  for (std::size_t j = 0; j + 1 < probs.size() && remaining > 0; ++j) {
    const double p = mass_left > 0.0 ? std::clamp(probs[j] / mass_left, 0.0, 1.0)
                                     : 1.0;
    std::binomial_distribution<std::int64_t> bin(remaining, p);
    const std::int64_t draw = bin(rng);
    out[j] = draw;
    remaining -= draw;
    mass_left -= probs[j];
  }
  out.back() += remaining;
}

OffspringLaw OffspringLaw::make(std::vector<Entry> entries) {
  if (entries.empty()) throw Error(ErrorKind::BadPmf, "empty offspring pmf");
  double total = 0.0;
  for (const auto& [k, p] : entries) {
    if (k < 0) throw Error(ErrorKind::BadPmf, "negative offspring count");
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw Error(ErrorKind::BadPmf, "negative or non-finite probability");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > kSumTolerance) {
    throw Error(ErrorKind::BadPmf,
                "offspring probabilities sum to " + std::to_string(total));
  }
  std::sort(entries.begin(), entries.end());
  for (std::size_t i = 1; i < entries.size(); ++i) {
    if (entries[i].first == entries[i - 1].first) {
      throw Error(ErrorKind::BadPmf, "repeated offspring count");
    }
  }

  OffspringLaw law;
  for (const auto& [k, p] : entries) {
    if (p == 0.0) continue;
    law.counts_.push_back(k);
    law.probs_.push_back(p / total);
  }
  double acc = 0.0;
  double mean = 0.0;
  double factorial2 = 0.0;
  for (std::size_t i = 0; i < law.counts_.size(); ++i) {
    const double k = law.counts_[i];
    acc += law.probs_[i];
    law.cdf_.push_back(acc);
    mean += k * law.probs_[i];
    factorial2 += k * (k - 1.0) * law.probs_[i];
  }
  law.cdf_.back() = 1.0;
  if (!(mean > 0.0)) {
    throw Error(ErrorKind::NonPositiveMean, "offspring law has mean 0");
  }
  law.mean_ = mean;
  law.eta_ = factorial2 / (mean * mean);
  return law;
}

std::vector<OffspringLaw::Entry> OffspringLaw::entries() const {
  std::vector<Entry> out;
  out.reserve(counts_.size());
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    out.emplace_back(counts_[i], probs_[i]);
  }
  return out;
}

double OffspringLaw::prob_of(int k) const noexcept {
  const auto it = std::lower_bound(counts_.begin(), counts_.end(), k);
  if (it == counts_.end() || *it != k) return 0.0;
  return probs_[static_cast<std::size_t>(it - counts_.begin())];
}

double OffspringLaw::gf(double s) const {
  if (!(s >= 0.0 && s <= 1.0)) {
    throw Error(ErrorKind::DomainError,
                "generating function argument outside [0, 1]");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    sum += probs_[i] * std::pow(s, counts_[i]);
  }
  return sum;
}

double OffspringLaw::gf_complement(double v) const noexcept {
  if (v <= 0.0) return 0.0;
  if (v >= 1.0) return 1.0 - prob_of(0);
  const double log_keep = std::log1p(-v);
  double sum = 0.0;
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    if (counts_[i] == 0) continue;
    sum += probs_[i] * -std::expm1(counts_[i] * log_keep);
  }
  return sum;
}

OffspringLaw OffspringLaw::size_biased() const {
  std::vector<Entry> biased;
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    if (counts_[i] == 0) continue;
    biased.emplace_back(counts_[i], counts_[i] * probs_[i] / mean_);
  }
  // Renormalize exactly: the weights already sum to 1 up to rounding.
  double total = 0.0;
  for (const auto& e : biased) total += e.second;
  for (auto& e : biased) e.second /= total;
  return make(std::move(biased));
}

double OffspringLaw::truncated_second_moment(int a) const noexcept {
  double sum = 0.0;
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    if (counts_[i] >= a) {
      sum += static_cast<double>(counts_[i]) * counts_[i] * probs_[i];
    }
  }
  return sum / (mean_ * mean_);
}

int OffspringLaw::sample(Rng& rng) const noexcept {
  return counts_[inverse_cdf(cdf_, rng.uniform())];
}

std::int64_t OffspringLaw::sample_total(std::int64_t parents, Rng& rng) const {
  if (parents <= 0) return 0;
  if (parents <= kDirectTrials) {
    std::int64_t total = 0;
    for (std::int64_t i = 0; i < parents; ++i) total += sample(rng);
    return total;
  }
  thread_local std::vector<std::int64_t> tally;
  sample_multinomial(parents, probs_, cdf_, rng, tally);
  std::int64_t total = 0;
  for (std::size_t i = 0; i < counts_.size(); ++i) total += tally[i] * counts_[i];
  return total;
}

}  // namespace brwre
