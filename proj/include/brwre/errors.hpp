#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace brwre {

enum class ErrorKind {
  BadPmf,
  NonPositiveMean,
  DomainError,
  MeanNotZero,
  SupportAbovePlusOne,
  TrivialLaw,
  MissingUpStep,
  NotSubcritical,
  BadWeights,
  OutOfWindow,
  CapacityError,
  NoSignChange,
  TraceUnavailable,
  Inconclusive,
  AllTruncated,
  AlphaTooSmall,
  NotClassIII,
  DegenerateFit,
  MixedTargets,
  RunawayError,
  ConfigError,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Every failure raised by the library carries a machine-readable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace brwre
