#include "tiltwise/error.hpp"

namespace tiltwise {

std::string_view to_string(ErrorCode code) noexcept
{
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidGrid: return "InvalidGrid";
    case ErrorCode::InvalidSlice: return "InvalidSlice";
    case ErrorCode::NonFiniteTilt: return "NonFiniteTilt";
    case ErrorCode::IdenticallyZeroDensity: return "IdenticallyZeroDensity";
    case ErrorCode::OutOfSupportQuery: return "OutOfSupportQuery";
    case ErrorCode::DegenerateFold: return "DegenerateFold";
    case ErrorCode::NonpositiveBandwidth: return "NonpositiveBandwidth";
    case ErrorCode::EmptyCandidateSet: return "EmptyCandidateSet";
    case ErrorCode::OverflowRisk: return "OverflowRisk";
    case ErrorCode::TooFewRows: return "TooFewRows";
    case ErrorCode::EmptyFold: return "EmptyFold";
    case ErrorCode::UnsortedDeltaGrid: return "UnsortedDeltaGrid";
    case ErrorCode::TooFewValues: return "TooFewValues";
    case ErrorCode::InteriorPointRequired: return "InteriorPointRequired";
    case ErrorCode::EmptyHalfSample: return "EmptyHalfSample";
    case ErrorCode::PositiveDeltaRequired: return "PositiveDeltaRequired";
    case ErrorCode::MissingBoundDeclaration: return "MissingBoundDeclaration";
    case ErrorCode::UnknownDgp: return "UnknownDgp";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::NonNumericCell: return "NonNumericCell";
    case ErrorCode::EmptyAfterFiltering: return "EmptyAfterFiltering";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::IoFailure: return "IoFailure";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
  : std::runtime_error(message)
  , code_(code)
{}

} // namespace tiltwise
