#pragma once

#include <cmath>
#include <string>

#include "brwre/errors.hpp"

namespace brwre::roots {

struct Tolerance {
  double f_abs = 1e-12;
  int max_iter = 200;
};

/// Safeguarded Newton for an increasing function with f(lo) <= 0 <= f(hi).
/// Newton steps that leave the bracket fall back to bisection. Stops when
/// |f| <= tol.f_abs or the bracket collapses to adjacent doubles.
template <class F, class DF>
double solve_increasing(F&& f, DF&& df, double lo, double hi,
                        Tolerance tol = {}) {
  double flo = f(lo);
  double fhi = f(hi);
  if (flo > 0.0 || fhi < 0.0) {
    throw Error(ErrorKind::NoSignChange,
                "root bracket [" + std::to_string(lo) + ", " +
                    std::to_string(hi) + "] does not straddle zero");
  }
  if (std::abs(flo) <= tol.f_abs) return lo;
  if (std::abs(fhi) <= tol.f_abs) return hi;

  double x = 0.5 * (lo + hi);
  for (int it = 0; it < tol.max_iter; ++it) {
    const double fx = f(x);
    if (std::abs(fx) <= tol.f_abs) return x;
    if (fx < 0.0) {
      lo = x;
    } else {
      hi = x;
    }
    const double d = df(x);
    double next = (d > 0.0 && std::isfinite(d)) ? x - fx / d : lo - 1.0;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == x || lo == hi || std::nextafter(lo, hi) == hi) return x;
    x = next;
  }
  return x;
}

/// Plain bisection on the predicate f(x) < 0 for an increasing f; used
/// where no cheap derivative exists. Returns the midpoint of the final
/// bracket.
template <class F>
double bisect_increasing(F&& f, double lo, double hi, double x_tol = 1e-15,
                         int max_iter = 200) {
  for (int it = 0; it < max_iter && hi - lo > x_tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (f(mid) < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace brwre::roots
