#pragma once

#include <stdexcept>
#include <string>

namespace aad {

enum class ErrorCode {
  SingularSystem,
  DimensionMismatch,
  NonConvergence,
  NotSpd,
  NotSymmetric,
  InvalidBand,
  IrrationalRatio,
  BadChannelIndex,
  BadLag,
  DegenerateClass,
  SingularScatter,
  BadProtocolConfig,
  EmptyGrid,
  LengthMismatch,
  ManifestError,
  ShapeMismatch,
  UnknownTask,
  BadConfig,
  IoError,
};

// Coarse grouping used by the CLI to map failures onto exit codes.
enum class ErrorCategory { Config, Data, Io, Numerical };

const char* to_string(ErrorCode code);
ErrorCategory category_of(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace aad
