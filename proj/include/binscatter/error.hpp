#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace binscatter {

enum class ErrorCode {
  InvalidArgument,
  DegeneratePartition,
  OutOfSupport,
  InvalidDerivative,
  UnsupportedSmoothness,
  DomainError,
  SingularCurvature,
  SingularSystem,
  NoConvergence,
  UnsupportedOrder,
  DegenerateBias,
  NullFitFailure,
  EmptyGroup,
  NoCommonSupport,
  FileError,
  SchemaError,
  EmptyData,
};

std::string_view to_string(ErrorCode code) noexcept;

/// True for codes that describe bad input or configuration rather than a
/// numerical breakdown. The CLI maps these to exit code 2, the rest to 3.
bool is_validation_error(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace binscatter
