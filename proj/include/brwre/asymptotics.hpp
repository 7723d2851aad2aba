#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <string_view>

#include "brwre/environment.hpp"
#include "brwre/steps.hpp"

namespace brwre {

enum class RegimeClass { I, II, III };

std::string_view to_string(RegimeClass c) noexcept;

/// Predicted tail form e^{-exp_rate x} x^{-poly_power}. For Class III the
/// polynomial power is only known to lie in [0, poly_power].
struct PredictedTail {
  double exp_rate = 0.0;
  double poly_power = 0.0;
  bool poly_is_bound = false;
};

struct ClassificationReport {
  double a = 0.0;
  double alpha = 0.0;  // +infinity when max_i m_i <= 1
  double lambda0 = 0.0;
  std::optional<double> lambda1;
  std::optional<double> theta1;
  std::optional<double> rho_star;
  std::optional<double> lambda_rho_star;
  RegimeClass class_label = RegimeClass::I;
  PredictedTail predicted;

  bool alpha_infinite() const noexcept { return alpha == std::numeric_limits<double>::infinity(); }
};

/// Tolerance on |Θ(1)| that decides the Class II boundary.
inline constexpr double kThetaTolerance = 1e-9;

/// α = sup{ρ : Λ_e(ρ) <= 0}; +infinity iff every mean is <= 1.
double alpha(const EnvModel& model);

/// λ_ρ: the λ >= 0 with Λ_e(ρ) + ρ Λ_s(λ) = 0, for ρ in (0, α].
double lambda_rho(const EnvModel& model, const StepLaw& step, double rho);

/// Θ(ρ) = Λ_e'(ρ) + Λ_s(λ_ρ) - λ_ρ Λ_s'(λ_ρ).
double theta(const EnvModel& model, const StepLaw& step, double rho);

/// The zero of Θ on (0, upper]; `upper` defaults to min(α, 1). Throws
/// NoSignChange when Θ does not change sign there.
double theta_root(const EnvModel& model, const StepLaw& step,
                  std::optional<double> upper = std::nullopt);

ClassificationReport classify(const EnvModel& model, const StepLaw& step,
                              double theta_tol = kThetaTolerance);

/// Finds t in [lo, hi] with Θ(1) = 0 for the environment family(t), by
/// bisection on the sign of Θ(1). Every family member must have α > 1.
double solve_class_boundary(const std::function<EnvModel(double)>& family,
                            const StepLaw& step, double lo, double hi);

}  // namespace brwre
