#pragma once

#include <optional>
#include <string_view>

#include "brwre/environment.hpp"
#include "brwre/steps.hpp"

namespace brwre::presets {

/// Fair ±1 walk.
StepLaw pm1_walk();

/// Two-point law on {0, 2} with mean m (m <= 2).
OffspringLaw binary_law(double m);

/// ½ m = 0.6, ½ m = 1.2 (Class I with the ±1 walk).
EnvModel env_a();

/// ½ m = 0.2, ½ m = 1.6 (Class III with the ±1 walk).
EnvModel env_c();

/// ½ m = 0.6 - 0.4t, ½ m = 1.2 + 0.4t: ENV-A at t = 0, ENV-C at t = 1.
EnvModel env_b(double t);

/// t in (0, 1) where env_b(t) sits on the Class II boundary with the ±1 walk.
double env_b_boundary();

/// Looks up "env_a", "env_c", "env_b_star".
std::optional<EnvModel> env_by_name(std::string_view name);

}  // namespace brwre::presets
