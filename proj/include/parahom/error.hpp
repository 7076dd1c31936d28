#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace parahom {

enum class ErrorCode {
  NonZeroMean,
  NoConvergence,
  MeanNotZero,
  IdentityCheckFailed,
  UnknownFamily,
  EllipticityViolated,
  NonPositiveLambda,
  UnsupportedCoefficient,
  EllipticityCertFailed,
  RoughCoefficientRejected,
  UnderResolvedMollifier,
  DeltaTooLarge,
  ResolutionPolicyViolated,
  LinearSolveFailed,
  MeshMismatch,
  NonPositiveK,
  TooFewSamples,
  AllBelowFloor,
  CylinderOutOfDomain,
  SingularLeastSquares,
  InvalidArgument,
  ParseError,
  ValidationError,
  IoError,
};

std::string_view to_string(ErrorCode code);

// Numerical failures map to CLI exit code 3, configuration problems to 2.
bool is_numerical(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace parahom
