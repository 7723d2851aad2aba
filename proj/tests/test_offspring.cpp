#include <doctest.h>

#include <cmath>

#include "brwre/offspring.hpp"
#include "support.hpp"

using namespace brwre;

TEST_CASE("construction caches mean and eta") {
  const auto a = OffspringLaw::make({{0, 0.7}, {2, 0.3}});
  CHECK(a.mean() == doctest::Approx(0.6).epsilon(1e-14));
  CHECK(a.eta() == doctest::Approx(0.6 / 0.36).epsilon(1e-14));
  CHECK(a.support_max() == 2);

  const auto one = OffspringLaw::make({{1, 1.0}});
  CHECK(one.mean() == 1.0);
  CHECK(one.eta() == 0.0);

  const auto half = OffspringLaw::make({{0, 0.5}, {1, 0.5}});
  CHECK(half.mean() == doctest::Approx(0.5));
  CHECK(half.eta() == 0.0);
}

TEST_CASE("construction validates the pmf") {
  CHECK_ERROR_KIND(OffspringLaw::make({{0, 1.0}}), ErrorKind::NonPositiveMean);
  CHECK_ERROR_KIND(OffspringLaw::make({{0, 0.5}, {2, 0.4}}), ErrorKind::BadPmf);
  CHECK_ERROR_KIND(OffspringLaw::make({{0, 1.2}, {2, -0.2}}), ErrorKind::BadPmf);
  CHECK_ERROR_KIND(OffspringLaw::make({}), ErrorKind::BadPmf);
  CHECK_ERROR_KIND(OffspringLaw::make({{1, 0.5}, {1, 0.5}}), ErrorKind::BadPmf);
  CHECK_ERROR_KIND(OffspringLaw::make({{-1, 0.5}, {2, 0.5}}), ErrorKind::BadPmf);
}

TEST_CASE("probabilities are renormalized") {
  const auto law = OffspringLaw::make({{0, 0.7 + 1e-10}, {2, 0.3}});
  double sum = 0.0;
  for (double p : law.probs()) sum += p;
  CHECK(std::abs(sum - 1.0) < 1e-15);
}

TEST_CASE("generating function") {
  const auto law = OffspringLaw::make({{0, 0.4}, {2, 0.6}});
  CHECK(law.gf(0.5) == doctest::Approx(0.55).epsilon(1e-15));
  CHECK(law.gf(1.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(law.gf(0.0) == doctest::Approx(0.4).epsilon(1e-15));
  CHECK_ERROR_KIND(law.gf(1.5), ErrorKind::DomainError);
  CHECK_ERROR_KIND(law.gf(-0.1), ErrorKind::DomainError);
  for (double v : {0.0, 0.1, 0.5, 0.9, 1.0}) {
    CHECK(law.gf_complement(v) == doctest::Approx(1.0 - law.gf(1.0 - v)).epsilon(1e-13));
  }
  double prev = -1.0;
  for (int i = 0; i <= 20; ++i) {
    const double g = law.gf(i / 20.0);
    CHECK(g >= prev);
    prev = g;
  }
}

TEST_CASE("generating function slope at 1 is the mean") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<OffspringLaw::Entry> e;
    double total = 0.0;
    for (int k = 0; k <= 4; ++k) {
      const double w = rng.uniform() + 0.05;
      e.emplace_back(k, w);
      total += w;
    }
    for (auto& [k, p] : e) p /= total;
    const auto law = OffspringLaw::make(e);
    const double h = 1e-6;
    const double slope = (law.gf(1.0) - law.gf(1.0 - h)) / h;
    CHECK(std::abs(slope - law.mean()) < 1e-4);
  }
}

TEST_CASE("size biasing") {
  const auto sb = OffspringLaw::make({{0, 0.7}, {2, 0.3}}).size_biased();
  REQUIRE(sb.counts().size() == 1);
  CHECK(sb.counts()[0] == 2);
  CHECK(sb.probs()[0] == doctest::Approx(1.0));

  const auto fixed = OffspringLaw::make({{1, 1.0}}).size_biased();
  CHECK(fixed.counts() == std::vector<int>{1});

  const auto two = OffspringLaw::make({{1, 0.5}, {2, 0.5}}).size_biased();
  CHECK(two.prob_of(1) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(two.prob_of(2) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(two.prob_of(0) == 0.0);
}

TEST_CASE("size biasing twice is proportional to k^2 p_k") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<OffspringLaw::Entry> e;
    double total = 0.0;
    for (int k = 0; k <= 5; ++k) {
      const double w = rng.uniform();
      e.emplace_back(k, w);
      total += w;
    }
    for (auto& [k, p] : e) p /= total;
    const auto twice = OffspringLaw::make(e).size_biased().size_biased();
    double z = 0.0;
    for (const auto& [k, p] : e) z += k * k * p;
    for (const auto& [k, p] : e) {
      CHECK(twice.prob_of(k) == doctest::Approx(k * k * p / z).epsilon(1e-12));
    }
  }
}

TEST_CASE("truncated second moment") {
  const auto law = OffspringLaw::make({{0, 0.7}, {2, 0.3}});
  CHECK(law.truncated_second_moment(0) == doctest::Approx(1.2 / 0.36).epsilon(1e-14));
  CHECK(law.truncated_second_moment(3) == 0.0);
  CHECK(OffspringLaw::make({{1, 1.0}}).truncated_second_moment(1) == doctest::Approx(1.0));
}

TEST_CASE("sampling frequencies") {
  Rng rng(2024);
  const auto law = OffspringLaw::make({{0, 0.7}, {2, 0.3}});
  const int n = 1'000'000;
  int twos = 0;
  for (int i = 0; i < n; ++i) twos += law.sample(rng) == 2 ? 1 : 0;
  CHECK(std::abs(twos / double(n) - 0.3) <= 3.0 * std::sqrt(0.21 / n));

  const auto one = OffspringLaw::make({{1, 1.0}});
  const auto sb = law.size_biased();
  for (int i = 0; i < 1000; ++i) {
    CHECK(one.sample(rng) == 1);
    CHECK(sb.sample(rng) == 2);
  }
}

TEST_CASE("sample mean within four standard errors") {
  Rng rng(99);
  const auto law = OffspringLaw::make({{0, 0.2}, {1, 0.3}, {3, 0.4}, {6, 0.1}});
  testing::Sample s;
  for (int i = 0; i < 100'000; ++i) s.add(law.sample(rng));
  CHECK(std::abs(s.mean() - law.mean()) <= 4.0 * s.stderr_());
}

TEST_CASE("sampling replays from the stream state") {
  const auto law = OffspringLaw::make({{0, 0.2}, {1, 0.3}, {3, 0.5}});
  Rng a(77), b(77);
  for (int i = 0; i < 100; ++i) CHECK(law.sample(a) == law.sample(b));
}

TEST_CASE("total offspring of many parents") {
  const auto law = OffspringLaw::make({{0, 0.4}, {2, 0.6}});
  Rng rng(3);
  testing::Sample s;
  for (int i = 0; i < 20'000; ++i) s.add(static_cast<double>(law.sample_total(50, rng)));
  CHECK(std::abs(s.mean() - 60.0) <= 4.0 * s.stderr_());
  CHECK(law.sample_total(0, rng) == 0);
}

TEST_CASE("multinomial counts") {
  const std::vector<double> probs{0.1, 0.2, 0.3, 0.4};
  const std::vector<double> cdf{0.1, 0.3, 0.6, 1.0};
  Rng rng(8);
  std::vector<double> totals(4, 0.0);
  std::vector<std::int64_t> out;
  const int reps = 2000;
  for (int r = 0; r < reps; ++r) {
    sample_multinomial(1000, probs, cdf, rng, out);
    std::int64_t sum = 0;
    for (std::size_t i = 0; i < out.size(); ++i) {
      sum += out[i];
      totals[i] += static_cast<double>(out[i]);
    }
    CHECK(sum == 1000);
  }
  std::vector<double> expected;
  for (double p : probs) expected.push_back(p * 1000.0 * reps);
  CHECK(testing::chi_square_p(totals, expected) > 0.001);
}
