#include <doctest.h>

#include <cmath>
#include <memory>

#include "brwre/environment.hpp"
#include "brwre/presets.hpp"
#include "support.hpp"

using namespace brwre;

namespace {
EnvModel env_a() {
  return EnvModel::make({{0.5, OffspringLaw::make({{0, 0.7}, {2, 0.3}})},
                         {0.5, OffspringLaw::make({{0, 0.4}, {2, 0.6}})}});
}
EnvModel constant(double m) { return EnvModel::make({{1.0, presets::binary_law(m)}}); }
}  // namespace

TEST_CASE("model construction") {
  const auto a = env_a();
  CHECK(a.drift() == doctest::Approx(0.5 * (std::log(0.6) + std::log(1.2))).epsilon(1e-14));
  CHECK(a.drift() == doctest::Approx(-0.16425).epsilon(1e-4));
  CHECK_ERROR_KIND(constant(1.0), ErrorKind::NotSubcritical);
  CHECK_ERROR_KIND(EnvModel::make({{0.5, presets::binary_law(1.5)}, {0.5, presets::binary_law(1.0)}}),
                   ErrorKind::NotSubcritical);
  CHECK_NOTHROW(constant(0.9));
  CHECK_ERROR_KIND(EnvModel::make({{0.5, presets::binary_law(0.5)}, {0.4, presets::binary_law(0.6)}}),
                   ErrorKind::BadWeights);
  CHECK_ERROR_KIND(EnvModel::make({{1.2, presets::binary_law(0.5)}, {-0.2, presets::binary_law(0.6)}}),
                   ErrorKind::BadWeights);
  CHECK_ERROR_KIND(EnvModel::make({}), ErrorKind::BadWeights);
}

TEST_CASE("environment log-Laplace") {
  const auto a = env_a();
  CHECK(a.lambda_e(1.0) == doctest::Approx(std::log(0.9)).epsilon(1e-14));
  CHECK(a.lambda_e(0.0) == 0.0);
  CHECK(a.lambda_e(2.5) == doctest::Approx(std::log(0.5 * std::pow(0.6, 2.5) + 0.5 * std::pow(1.2, 2.5))).epsilon(1e-13));
  CHECK(a.lambda_e(1e-9) == doctest::Approx(1e-9 * a.drift()).epsilon(1e-6));
  const auto c = constant(0.9);
  for (double r : {0.5, 1.0, 3.0}) CHECK(c.lambda_e(r) == doctest::Approx(r * std::log(0.9)).epsilon(1e-13));
}

TEST_CASE("environment log-Laplace derivative") {
  const auto a = env_a();
  CHECK(a.lambda_e_prime(1.0) ==
        doctest::Approx((0.6 * std::log(0.6) + 1.2 * std::log(1.2)) / 1.8).epsilon(1e-13));
  CHECK(a.lambda_e_prime(1.0) == doctest::Approx(-0.048726).epsilon(1e-4));
  CHECK(a.lambda_e_prime(0.0) == doctest::Approx(a.drift()).epsilon(1e-15));
  const auto c = constant(0.9);
  for (double r : {0.0, 0.7, 4.0}) CHECK(c.lambda_e_prime(r) == doctest::Approx(std::log(0.9)).epsilon(1e-13));
  for (const auto& m : {env_a(), presets::env_c(), presets::env_b(0.4)}) {
    for (double r = 0.05; r < 5.0; r += 0.25) {
      const double h = 1e-5;
      const double fd = (m.lambda_e(r + h) - m.lambda_e(r - h)) / (2 * h);
      CHECK(std::abs(m.lambda_e_prime(r) - fd) < 1e-6);
      const double fd2 = (m.lambda_e_prime(r + h) - m.lambda_e_prime(r - h)) / (2 * h);
      CHECK(std::abs(m.lambda_e_second(r) - fd2) < 1e-6);
    }
  }
}

TEST_CASE("environment log-Laplace convexity") {
  Rng rng(9);
  for (const auto& m : {env_a(), presets::env_c()}) {
    for (int i = 0; i < 300; ++i) {
      double r[3] = {5 * rng.uniform(), 5 * rng.uniform(), 5 * rng.uniform()};
      std::sort(r, r + 3);
      if (r[2] - r[0] < 1e-6) continue;
      const double w = (r[2] - r[1]) / (r[2] - r[0]);
      CHECK(m.lambda_e(r[1]) <= w * m.lambda_e(r[0]) + (1 - w) * m.lambda_e(r[2]) + 1e-12);
    }
  }
}

TEST_CASE("tilted environment") {
  const auto t = env_a().tilted(1.0);
  CHECK(t.weight(0) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(t.weight(1) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  const auto small = env_a().tilted(1e-6);
  CHECK(std::abs(small.weight(0) - 0.5) < 1e-6);
  const auto c = constant(0.9).tilted(2.0);
  CHECK(c.size() == 1);
  CHECK(c.weight(0) == 1.0);
  // ENV-C tilted at 2 is supercritical on average; the tilt must not reject it.
  CHECK_NOTHROW(presets::env_c().tilted(2.0));
}

TEST_CASE("tilted environment mean of X") {
  const auto a = std::make_shared<const EnvModel>(env_a());
  const auto t = a->tilted(1.0);
  const EnvSequence seq(a, 17, t.weights());
  testing::Sample s;
  for (int k = 0; k > -100'000; --k) s.add(seq.log_mean(k));
  CHECK(std::abs(s.mean() - a->lambda_e_prime(1.0)) <= 4.0 * s.stderr_());
}

TEST_CASE("sequences") {
  const auto c = std::make_shared<const EnvModel>(constant(0.9));
  auto cs = sample_env_seq(c, -10, 50, 3);
  for (int k = -10; k <= 50; ++k) CHECK(cs.state(k) == 0);
  const auto w = cs.assoc_walk(0, 50);
  for (int k = 0; k <= 50; ++k) CHECK(w[k] == doctest::Approx(k * std::log(0.9)).epsilon(1e-12));

  const auto a = std::make_shared<const EnvModel>(env_a());
  const EnvSequence big(a, 99);
  int ones = 0;
  const int n = 100'000;
  for (int k = 1; k <= n; ++k) ones += big.state(k) == 1 ? 1 : 0;
  CHECK(std::abs(ones / double(n) - 0.5) <= 4.0 * std::sqrt(0.25 / n));
}

TEST_CASE("windows extend consistently") {
  const auto a = std::make_shared<const EnvModel>(env_a());
  auto s1 = sample_env_seq(a, 0, 50, 42);
  auto s2 = sample_env_seq(a, 0, 100, 42);
  auto s3 = sample_env_seq(a, -30, 10, 42);
  for (int k = 0; k <= 50; ++k) {
    CHECK(s1.state(k) == s2.state(k));
    CHECK(s1.walk(k) == s2.walk(k));
  }
  for (int k = 0; k <= 10; ++k) CHECK(s3.walk(k) == s1.walk(k));
  auto other = sample_env_seq(a, 0, 100, 43);
  int same = 0;
  for (int k = 1; k <= 100; ++k) same += other.state(k) == s2.state(k) ? 1 : 0;
  CHECK(same < 90);
}

TEST_CASE("associated walk") {
  const auto a = std::make_shared<const EnvModel>(env_a());
  auto seq = sample_env_seq(a, -200, 10'000, 5);
  CHECK(seq.walk(0) == 0.0);
  for (int k = -199; k <= 10'000; ++k) {
    CHECK(seq.walk(k) - seq.walk(k - 1) == doctest::Approx(seq.log_mean(k)).epsilon(1e-9));
  }
  const auto w = seq.assoc_walk(-5, 5);
  CHECK(w.size() == 11);
  CHECK(w[5] == 0.0);
  CHECK_ERROR_KIND(seq.walk(20'000), ErrorKind::OutOfWindow);
  CHECK_ERROR_KIND(seq.assoc_walk(0, 20'000), ErrorKind::OutOfWindow);

  const int n = 10'000;
  const double x0 = std::log(0.6), x1 = std::log(1.2);
  const double var = 0.25 * (x1 - x0) * (x1 - x0);
  CHECK(std::abs(seq.walk(n) / n - a->drift()) <= 4.0 * std::sqrt(var / n));
}
