#pragma once

#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>
#include <cstdint>
#include <vector>

#include "brwre/errors.hpp"

namespace testing {

// Pearson chi-square p-value of observed counts against expected counts,
// pooling bins with fewer than `min_expected` expected hits into one.
inline double chi_square_p(const std::vector<double>& observed,
                           const std::vector<double>& expected, double min_expected = 5.0) {
  double stat = 0.0;
  int bins = 0;
  double pool_o = 0.0, pool_e = 0.0;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (expected[i] >= min_expected) {
      const double d = observed[i] - expected[i];
      stat += d * d / expected[i];
      ++bins;
    } else {
      pool_o += observed[i];
      pool_e += expected[i];
    }
  }
  if (pool_e > 0.0) {
    const double d = pool_o - pool_e;
    stat += d * d / pool_e;
    ++bins;
  }
  if (bins < 2) return 1.0;
  const boost::math::chi_squared dist(bins - 1);
  return boost::math::cdf(boost::math::complement(dist, stat));
}

struct Sample {
  double n = 0.0, sum = 0.0, sum2 = 0.0;
  void add(double v) {
    n += 1.0;
    sum += v;
    sum2 += v * v;
  }
  double mean() const { return sum / n; }
  double stderr_() const {
    const double m = mean();
    return std::sqrt(std::max(0.0, sum2 / n - m * m) / (n - 1.0));
  }
};

inline bool overlap(double lo1, double hi1, double lo2, double hi2) {
  return lo1 <= hi2 && lo2 <= hi1;
}

}  // namespace testing

#define CHECK_ERROR_KIND(expr, k)                                   \
  do {                                                              \
    bool thrown_ = false;                                           \
    try {                                                           \
      (void)(expr);                                                 \
    } catch (const brwre::Error& e_) {                              \
      thrown_ = true;                                               \
      CHECK_MESSAGE(e_.kind() == (k), brwre::to_string(e_.kind())); \
    }                                                               \
    CHECK_MESSAGE(thrown_, #expr " did not throw");                 \
  } while (0)
