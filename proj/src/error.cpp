#include "bsmimo/error.hpp"

namespace bsmimo {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Validation: return "Validation";
    case ErrorCode::Parse: return "Parse";
    case ErrorCode::SingularConversion: return "SingularConversion";
    case ErrorCode::SingularReduction: return "SingularReduction";
    case ErrorCode::PoleAtFreeParameter: return "PoleAtFreeParameter";
    case ErrorCode::NonPskRatio: return "NonPSKRatio";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::DegenerateBasis: return "DegenerateBasis";
    case ErrorCode::EmptyPathSet: return "EmptyPathSet";
    case ErrorCode::ZeroEnsemble: return "ZeroEnsemble";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::SingularTraining: return "SingularTraining";
    case ErrorCode::SingularChannel: return "SingularChannel";
  }
  return "Unknown";
}

bool is_input_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::Validation:
    case ErrorCode::Parse:
    case ErrorCode::LengthMismatch:
    case ErrorCode::NonPskRatio:
    case ErrorCode::GridMismatch:
    case ErrorCode::EmptyPathSet:
      return true;
    default:
      return false;
  }
}

}  // namespace bsmimo
