#include "brwre/asymptotics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "brwre/errors.hpp"
#include "brwre/roots.hpp"

namespace brwre {

namespace {

// Left end of every ρ bracket: Θ(ρ) is evaluated here in place of Θ(0+).
constexpr double kRhoFloor = 1e-9;

double grow_until_positive(const std::function<double(double)>& f, double start) {
  double hi = start;
  for (int i = 0; i < 200 && !(f(hi) > 0.0); ++i) hi *= 2.0;
  return hi;
}

}  // namespace

std::string_view to_string(RegimeClass c) noexcept {
  switch (c) {
    case RegimeClass::I: return "I";
    case RegimeClass::II: return "II";
    case RegimeClass::III: return "III";
  }
  return "?";
}

double alpha(const EnvModel& model) {
  if (model.max_mean() <= 1.0) return std::numeric_limits<double>::infinity();
  // Λ_e is convex with Λ_e(0) = 0 and Λ_e'(0) = a < 0: past its minimiser it
  // increases through zero exactly once.
  const auto de = [&](double r) { return model.lambda_e_prime(r); };
  const auto d2e = [&](double r) { return model.lambda_e_second(r); };
  const double de_hi = grow_until_positive(de, 1.0);
  const double argmin = roots::solve_increasing(de, d2e, 0.0, de_hi, {1e-14, 200});
  const auto e = [&](double r) { return model.lambda_e(r); };
  const double hi = grow_until_positive(e, std::max(1.0, 2.0 * argmin));
  return roots::solve_increasing(e, de, argmin, hi);
}

double lambda_rho(const EnvModel& model, const StepLaw& step, double rho) {
  const double a = alpha(model);
  if (!(rho > 0.0) || rho > a * (1.0 + 1e-12)) {
    throw Error(ErrorKind::DomainError, "rho = " + std::to_string(rho) + " outside (0, alpha]");
  }
  const double delta = -model.lambda_e(rho) / rho;
  if (delta <= 0.0) return 0.0;
  return step.inverse_log_laplace(delta);
}

double theta(const EnvModel& model, const StepLaw& step, double rho) {
  const double lam = lambda_rho(model, step, rho);
  const auto [d1, d2] = step.log_laplace_derivs(lam);
  (void)d2;
  return model.lambda_e_prime(rho) + step.log_laplace(lam) - lam * d1;
}

double theta_root(const EnvModel& model, const StepLaw& step, std::optional<double> upper) {
  const double a = alpha(model);
  const double hi = upper ? std::min(*upper, a) : std::min(a, 1.0);
  const double th_lo = theta(model, step, kRhoFloor);
  const double th_hi = theta(model, step, hi);
  if (!(th_lo < 0.0 && th_hi > 0.0)) {
    throw Error(ErrorKind::NoSignChange,
                "Theta does not change sign on (0, " + std::to_string(hi) + "]");
  }
  return roots::bisect_increasing([&](double r) { return theta(model, step, r); },
                                  kRhoFloor, hi);
}

ClassificationReport classify(const EnvModel& model, const StepLaw& step, double theta_tol) {
  ClassificationReport rep;
  rep.a = model.drift();
  rep.alpha = alpha(model);
  rep.lambda0 = step.inverse_log_laplace(-rep.a);

  bool weak = rep.alpha <= 1.0;
  if (!weak) {
    rep.lambda1 = lambda_rho(model, step, 1.0);
    rep.theta1 = theta(model, step, 1.0);
    if (std::abs(*rep.theta1) <= theta_tol) {
      rep.class_label = RegimeClass::II;
      rep.predicted = {*rep.lambda1, 0.5, false};
    } else if (*rep.theta1 < 0.0) {
      rep.class_label = RegimeClass::I;
      rep.predicted = {*rep.lambda1, 0.0, false};
    } else {
      weak = true;
    }
  }
  if (weak) {
    rep.class_label = RegimeClass::III;
    rep.rho_star = theta_root(model, step, std::min(rep.alpha, 1.0));
    rep.lambda_rho_star = lambda_rho(model, step, *rep.rho_star);
    rep.predicted = {*rep.rho_star * *rep.lambda_rho_star, 1.5, true};
  }
  return rep;
}

double solve_class_boundary(const std::function<EnvModel(double)>& family,
                            const StepLaw& step, double lo, double hi) {
  const auto th = [&](double t) { return theta(family(t), step, 1.0); };
  double f_lo = th(lo);
  const double f_hi = th(hi);
  if (!((f_lo < 0.0) != (f_hi < 0.0))) {
    throw Error(ErrorKind::NoSignChange, "Theta(1) keeps its sign over the family");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double f_mid = th(mid);
    if ((f_mid < 0.0) == (f_lo < 0.0)) {
      lo = mid;
      f_lo = f_mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace brwre
