#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tiltwise {

enum class ErrorCode
{
  InvalidArgument,
  InvalidGrid,
  InvalidSlice,
  NonFiniteTilt,
  IdenticallyZeroDensity,
  OutOfSupportQuery,
  DegenerateFold,
  NonpositiveBandwidth,
  EmptyCandidateSet,
  OverflowRisk,
  TooFewRows,
  EmptyFold,
  UnsortedDeltaGrid,
  TooFewValues,
  InteriorPointRequired,
  EmptyHalfSample,
  PositiveDeltaRequired,
  MissingBoundDeclaration,
  UnknownDgp,
  MissingColumn,
  NonNumericCell,
  EmptyAfterFiltering,
  InvalidConfig,
  IoFailure,
};

//! Stable identifier used in machine-readable error lines.
std::string_view to_string(ErrorCode code) noexcept;

//! Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error
{
public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

} // namespace tiltwise
