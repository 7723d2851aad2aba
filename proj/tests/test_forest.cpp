#include <doctest.h>

#include <cmath>
#include <memory>

#include "brwre/forest.hpp"
#include "brwre/oracle.hpp"
#include "brwre/presets.hpp"
#include "support.hpp"

using namespace brwre;

namespace {
std::shared_ptr<const EnvModel> env_a() { return std::make_shared<const EnvModel>(presets::env_a()); }
std::shared_ptr<const EnvModel> single_line() {
  return std::make_shared<const EnvModel>(EnvModel::make_unchecked({{1.0, OffspringLaw::make({{1, 1.0}})}}));
}
}  // namespace

TEST_CASE("single line of descent") {
  const EnvSequence seq(single_line(), 1);
  Rng rng(2);
  const TreeCaps caps{60, 1000};
  const auto s = simulate_tree(seq, presets::pm1_walk(), caps, rng);
  CHECK(s.truncated);
  CHECK(!s.extinct_at);
  REQUIRE(s.pop_by_gen.size() >= 61);
  for (int n = 0; n <= 60; ++n) CHECK(s.pop_by_gen[n] == 1);
  int running = 0;
  CHECK(s.max_disp_by_gen[0] == 0);
  for (std::size_t n = 1; n < s.max_disp_by_gen.size(); ++n) {
    CHECK(std::abs(s.max_disp_by_gen[n] - s.max_disp_by_gen[n - 1]) == 1);
    running = std::max(running, s.max_disp_by_gen[n]);
  }
  CHECK(s.max_disp == running);
}

TEST_CASE("tree statistics invariants") {
  const auto a = env_a();
  Rng rng(3);
  for (int i = 0; i < 2000; ++i) {
    const EnvSequence seq(a, derive_seed(5, i));
    const auto s = simulate_tree(seq, presets::pm1_walk(), {}, rng);
    CHECK(s.pop_by_gen[0] == 1);
    CHECK(s.max_disp >= 0);
    int m = 0;
    for (int v : s.max_disp_by_gen) m = std::max(m, v);
    CHECK(s.max_disp == m);
    REQUIRE(s.extinct_at.has_value());
    CHECK(s.pop_by_gen.back() == 0);
    CHECK(static_cast<int>(s.pop_by_gen.size()) == *s.extinct_at + 1);
    CHECK(!s.truncated);
  }
}

TEST_CASE("quenched survival matches the oracle survival probability") {
  const auto a = env_a();
  const auto step = presets::pm1_walk();
  for (std::uint64_t es : {11u, 12u}) {
    auto seq = sample_env_seq(a, 0, 40, es);
    const int T = 30, n = 50'000;
    int alive = 0;
    Rng rng(es * 7);
    for (int i = 0; i < n; ++i) {
      const auto s = simulate_tree(seq, step, {}, rng);
      alive += (!s.extinct_at || *s.extinct_at > T) ? 1 : 0;
    }
    const double p = alive / double(n);
    const auto o = quenched_hit_prob(seq, step, 1, T);
    double min_s = 0.0;
    for (int k = 0; k <= T; ++k) min_s = std::min(min_s, seq.walk(k));
    CHECK(std::abs(o.error_bound - std::exp(min_s)) < 1e-12);
    CHECK(o.survival_bound <= o.error_bound + 1e-15);
    CHECK(std::abs(p - o.survival_bound) <= 4.0 * std::sqrt(o.survival_bound * (1 - o.survival_bound) / n) + 1e-4);
  }
}

TEST_CASE("subcritical trees die out") {
  // Averaged over environments; a single sequence can sit below 0.99.
  const auto a = env_a();
  Rng rng(18);
  const int n = 100'000;
  int dead = 0;
  for (int i = 0; i < n; ++i) {
    const EnvSequence seq(a, derive_seed(18, i));
    const auto s = simulate_tree(seq, presets::pm1_walk(), {}, rng);
    dead += (s.extinct_at && *s.extinct_at <= 30) ? 1 : 0;
  }
  CHECK(dead / double(n) >= 0.99);
}

TEST_CASE("first generation follows F_1") {
  const auto a = env_a();
  auto seq = sample_env_seq(a, 0, 5, 21);
  const auto& law = seq.law(1);
  Rng rng(4);
  const int n = 100'000;
  std::vector<double> obs(law.support_max() + 1, 0.0), exp(law.support_max() + 1, 0.0);
  for (int i = 0; i < n; ++i) {
    const auto s = simulate_tree(seq, presets::pm1_walk(), {}, rng);
    obs[static_cast<std::size_t>(s.pop_by_gen[1])] += 1.0;
  }
  for (int k = 0; k <= law.support_max(); ++k) exp[k] = law.prob_of(k) * n;
  CHECK(testing::chi_square_p(obs, exp) > 0.001);
}

TEST_CASE("additive martingale") {
  const auto a = env_a();
  const auto step = presets::pm1_walk();
  auto seq = sample_env_seq(a, 0, 30, 8);
  Rng rng(10);
  const auto t0 = simulate_tree_traced(seq, step, {}, rng);
  CHECK(additive_martingale(t0.trace, step, 0.4, 0) == 1.0);

  for (double lam : {0.3, 0.6}) {
    testing::Sample w5, w8;
    for (int i = 0; i < 20'000; ++i) {
      const auto t = simulate_tree_traced(seq, step, {}, rng);
      w5.add(additive_martingale(t.trace, step, lam, 5));
      w8.add(additive_martingale(t.trace, step, lam, 8));
      if (t.stats.extinct_at && *t.stats.extinct_at <= 5) {
        CHECK(additive_martingale(t.trace, step, lam, 5) == 0.0);
      }
    }
    CHECK(std::abs(w5.mean() - 1.0) <= 4.0 * w5.stderr_());
    CHECK(std::abs(w8.mean() - 1.0) <= 4.0 * w8.stderr_());
  }
}

TEST_CASE("additive martingale against a direct particle simulation") {
  // Independent route: explicit particle list, no histogram merging.
  const auto a = env_a();
  const auto step = presets::pm1_walk();
  auto seq = sample_env_seq(a, 0, 10, 3);
  const double lam = 0.5;
  const int n = 4;
  Rng rng(77);
  testing::Sample direct;
  for (int r = 0; r < 40'000; ++r) {
    std::vector<int> pos{0};
    for (int g = 1; g <= n && !pos.empty(); ++g) {
      std::vector<int> next;
      for (int p : pos) {
        const int kids = seq.law(g).sample(rng);
        for (int c = 0; c < kids; ++c) next.push_back(p + step.sample(rng));
      }
      pos.swap(next);
    }
    double w = 0.0;
    for (int p : pos) w += std::exp(lam * p - n * step.log_laplace(lam) - seq.walk(n));
    direct.add(w);
  }
  testing::Sample lib;
  for (int r = 0; r < 40'000; ++r) {
    lib.add(additive_martingale(simulate_tree_traced(seq, step, {}, rng).trace, step, lam, n));
  }
  CHECK(std::abs(direct.mean() - lib.mean()) <= 4.0 * std::hypot(direct.stderr_(), lib.stderr_()));
  CHECK(std::abs(direct.mean() - 1.0) <= 4.0 * direct.stderr_());
}

TEST_CASE("optional line") {
  const auto a = env_a();
  const auto step = presets::pm1_walk();
  auto seq = sample_env_seq(a, 0, 30, 9);
  Rng rng(12);
  for (double lam : {0.3, 0.6}) {
    for (int x : {1, 3}) {
      testing::Sample s;
      for (int i = 0; i < 30'000; ++i) {
        const auto t = simulate_tree_traced(seq, step, {}, rng);
        const auto lw = optional_line_weight(t.trace, step, lam, x);
        CHECK(!lw.truncated);
        if (t.stats.max_disp < x) CHECK(lw.value == 0.0);
        else CHECK(lw.value > 0.0);
        s.add(lw.value);
      }
      CHECK(std::abs(s.mean() - 1.0) <= 4.0 * s.stderr_());
    }
  }
}

TEST_CASE("first crossings sit exactly on the level") {
  const auto a = env_a();
  const auto skew = StepLaw::make({{1, 2.0 / 3.0}, {-2, 1.0 / 3.0}});
  auto seq = sample_env_seq(a, 0, 30, 9);
  Rng rng(13);
  for (int i = 0; i < 3000; ++i) {
    const auto t = simulate_tree_traced(seq, skew, {}, rng);
    for (const auto& gen : t.trace.gens) {
      for (const auto& c : gen) {
        if (c.pos >= 2 && c.anc_max < 2) CHECK(c.pos == 2);
      }
    }
  }
}

TEST_CASE("naive indicator") {
  const auto a = env_a();
  const auto step = presets::pm1_walk();
  auto seq = sample_env_seq(a, 0, 30, 1);
  Rng rng(14);
  for (int i = 0; i < 2000; ++i) {
    const auto s = simulate_tree(seq, step, {}, rng);
    CHECK(naive_indicator(s, 0) == 1);
    int prev = 1;
    for (int x = 0; x <= 10; ++x) {
      const int v = naive_indicator(s, x);
      CHECK(v <= prev);
      CHECK(v == (s.max_disp >= x ? 1 : 0));
      prev = v;
    }
  }
  TreeStats none;
  none.extinct_at = 1;
  none.pop_by_gen = {1, 0};
  CHECK(naive_indicator(none, 1) == 0);

  const EnvSequence line(single_line(), 1);
  const auto s = simulate_tree(line, step, {20, 100}, rng);
  REQUIRE(s.truncated);
  CHECK_ERROR_KIND(naive_indicator(s, 100), ErrorKind::Inconclusive);
  CHECK(naive_indicator(s, 0) == 1);
}

TEST_CASE("stop at level decides the event") {
  const auto a = env_a();
  const auto step = presets::pm1_walk();
  auto seq = sample_env_seq(a, 0, 30, 4);
  Rng r1(15), r2(15);
  for (int i = 0; i < 500; ++i) {
    const auto full = simulate_tree(seq, step, {}, r1);
    const auto stop = simulate_tree(seq, step, {}, r2, 2);
    (void)full;
    if (stop.stopped_at_level) CHECK(naive_indicator(stop, 2) == 1);
    else CHECK(naive_indicator(stop, 2) == (stop.max_disp >= 2 ? 1 : 0));
  }
}

TEST_CASE("traced runs respect caps") {
  const EnvSequence line(single_line(), 1);
  Rng rng(16);
  const auto t = simulate_tree_traced(line, presets::pm1_walk(), {10, 100}, rng);
  CHECK(t.trace.truncated);
  CHECK(t.stats.truncated);
  CHECK_ERROR_KIND(additive_martingale(t.trace, presets::pm1_walk(), 0.5, 50), ErrorKind::TraceUnavailable);
  const auto lw = optional_line_weight(t.trace, presets::pm1_walk(), 0.5, 40);
  CHECK(lw.truncated);
}
