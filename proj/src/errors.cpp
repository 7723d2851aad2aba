#include "brwre/errors.hpp"

namespace brwre {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::BadPmf: return "BadPmf";
    case ErrorKind::NonPositiveMean: return "NonPositiveMean";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::MeanNotZero: return "MeanNotZero";
    case ErrorKind::SupportAbovePlusOne: return "SupportAbovePlusOne";
    case ErrorKind::TrivialLaw: return "TrivialLaw";
    case ErrorKind::MissingUpStep: return "MissingUpStep";
    case ErrorKind::NotSubcritical: return "NotSubcritical";
    case ErrorKind::BadWeights: return "BadWeights";
    case ErrorKind::OutOfWindow: return "OutOfWindow";
    case ErrorKind::CapacityError: return "CapacityError";
    case ErrorKind::NoSignChange: return "NoSignChange";
    case ErrorKind::TraceUnavailable: return "TraceUnavailable";
    case ErrorKind::Inconclusive: return "Inconclusive";
    case ErrorKind::AllTruncated: return "AllTruncated";
    case ErrorKind::AlphaTooSmall: return "AlphaTooSmall";
    case ErrorKind::NotClassIII: return "NotClassIII";
    case ErrorKind::DegenerateFit: return "DegenerateFit";
    case ErrorKind::MixedTargets: return "MixedTargets";
    case ErrorKind::RunawayError: return "RunawayError";
    case ErrorKind::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace brwre
