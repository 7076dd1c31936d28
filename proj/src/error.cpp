#include "parahom/error.hpp"

namespace parahom {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonZeroMean: return "NonZeroMean";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::MeanNotZero: return "MeanNotZero";
    case ErrorCode::IdentityCheckFailed: return "IdentityCheckFailed";
    case ErrorCode::UnknownFamily: return "UnknownFamily";
    case ErrorCode::EllipticityViolated: return "EllipticityViolated";
    case ErrorCode::NonPositiveLambda: return "NonPositiveLambda";
    case ErrorCode::UnsupportedCoefficient: return "UnsupportedCoefficient";
    case ErrorCode::EllipticityCertFailed: return "EllipticityCertFailed";
    case ErrorCode::RoughCoefficientRejected: return "RoughCoefficientRejected";
    case ErrorCode::UnderResolvedMollifier: return "UnderResolvedMollifier";
    case ErrorCode::DeltaTooLarge: return "DeltaTooLarge";
    case ErrorCode::ResolutionPolicyViolated: return "ResolutionPolicyViolated";
    case ErrorCode::LinearSolveFailed: return "LinearSolveFailed";
    case ErrorCode::MeshMismatch: return "MeshMismatch";
    case ErrorCode::NonPositiveK: return "NonPositiveK";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::AllBelowFloor: return "AllBelowFloor";
    case ErrorCode::CylinderOutOfDomain: return "CylinderOutOfDomain";
    case ErrorCode::SingularLeastSquares: return "SingularLeastSquares";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

bool is_numerical(ErrorCode code) {
  switch (code) {
    case ErrorCode::NoConvergence:
    case ErrorCode::LinearSolveFailed:
    case ErrorCode::IdentityCheckFailed:
    case ErrorCode::MeanNotZero:
    case ErrorCode::NonZeroMean:
    case ErrorCode::EllipticityCertFailed:
    case ErrorCode::SingularLeastSquares:
      return true;
    default:
      return false;
  }
}

}  // namespace parahom
