#include "binscatter/error.hpp"

namespace binscatter {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DegeneratePartition: return "DegeneratePartition";
    case ErrorCode::OutOfSupport: return "OutOfSupport";
    case ErrorCode::InvalidDerivative: return "InvalidDerivative";
    case ErrorCode::UnsupportedSmoothness: return "UnsupportedSmoothness";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::SingularCurvature: return "SingularCurvature";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::UnsupportedOrder: return "UnsupportedOrder";
    case ErrorCode::DegenerateBias: return "DegenerateBias";
    case ErrorCode::NullFitFailure: return "NullFitFailure";
    case ErrorCode::EmptyGroup: return "EmptyGroup";
    case ErrorCode::NoCommonSupport: return "NoCommonSupport";
    case ErrorCode::FileError: return "FileError";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::EmptyData: return "EmptyData";
  }
  return "Unknown";
}

bool is_validation_error(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::DegeneratePartition:
    case ErrorCode::OutOfSupport:
    case ErrorCode::InvalidDerivative:
    case ErrorCode::UnsupportedSmoothness:
    case ErrorCode::DomainError:
    case ErrorCode::UnsupportedOrder:
    case ErrorCode::EmptyGroup:
    case ErrorCode::NoCommonSupport:
    case ErrorCode::FileError:
    case ErrorCode::SchemaError:
    case ErrorCode::EmptyData:
      return true;
    default:
      return false;
  }
}

}  // namespace binscatter
