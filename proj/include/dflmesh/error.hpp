#pragma once

#include <stdexcept>
#include <string>

namespace dflmesh {

enum class ErrorKind {
  InvalidArgument,
  Disconnected,
  NotConverged,
  NotRegular,
  SpectralViolation,
  DimensionMismatch,
  NonFinite,
  AllNodesFailed,
  LabelOutOfRange,
  NotAClassifier,
  BadMagic,
  Truncated,
  CountMismatch,
  DuplicateId,
  UnknownId,
  StepsizeGuard,
  GammaNonpositive,
  Config,
  Io,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind), detail_(what) {}

  ErrorKind kind() const noexcept { return kind_; }
  /// The message without the kind prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid argument";
    case ErrorKind::Disconnected: return "disconnected";
    case ErrorKind::NotConverged: return "not converged";
    case ErrorKind::NotRegular: return "not d-regular";
    case ErrorKind::SpectralViolation: return "spectral property violated";
    case ErrorKind::DimensionMismatch: return "dimension mismatch";
    case ErrorKind::NonFinite: return "non-finite parameters";
    case ErrorKind::AllNodesFailed: return "all nodes failed";
    case ErrorKind::LabelOutOfRange: return "label out of range";
    case ErrorKind::NotAClassifier: return "not a classifier";
    case ErrorKind::BadMagic: return "bad magic";
    case ErrorKind::Truncated: return "truncated";
    case ErrorKind::CountMismatch: return "count mismatch";
    case ErrorKind::DuplicateId: return "duplicate id";
    case ErrorKind::UnknownId: return "unknown id";
    case ErrorKind::StepsizeGuard: return "stepsize guard violated";
    case ErrorKind::GammaNonpositive: return "gamma nonpositive";
    case ErrorKind::Config: return "config error";
    case ErrorKind::Io: return "io error";
  }
  return "error";
}

}  // namespace dflmesh
