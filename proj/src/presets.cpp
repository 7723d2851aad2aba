#include "brwre/presets.hpp"

#include "brwre/asymptotics.hpp"

namespace brwre::presets {

StepLaw pm1_walk() { return StepLaw::make({{-1, 0.5}, {1, 0.5}}); }

OffspringLaw binary_law(double m) { return OffspringLaw::make({{0, 1.0 - m / 2.0}, {2, m / 2.0}}); }

EnvModel env_a() { return EnvModel::make({{0.5, binary_law(0.6)}, {0.5, binary_law(1.2)}}); }

EnvModel env_c() { return EnvModel::make({{0.5, binary_law(0.2)}, {0.5, binary_law(1.6)}}); }

EnvModel env_b(double t) {
  return EnvModel::make(
      {{0.5, binary_law(0.6 - 0.4 * t)}, {0.5, binary_law(1.2 + 0.4 * t)}});
}

double env_b_boundary() {
  static const double t_star = solve_class_boundary(env_b, pm1_walk(), 0.0, 1.0);
  return t_star;
}

std::optional<EnvModel> env_by_name(std::string_view name) {
  if (name == "env_a") return env_a();
  if (name == "env_c") return env_c();
  if (name == "env_b_star") return env_b(env_b_boundary());
  return std::nullopt;
}

}  // namespace brwre::presets
