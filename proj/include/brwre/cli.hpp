#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace brwre::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfigError = 2,
  kCapacityError = 3,
  kInconclusive = 4,
};

/// Runs one subcommand. `args` excludes the program name, e.g.
/// {"classify", "--config", "a.json", "--set", "seed=3", "--out", "dir"}.
/// Human-readable output goes to `out`; failures print one JSON line to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace brwre::cli
