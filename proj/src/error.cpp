#include "hpmf/error.hpp"

namespace hpmf {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::DuplicateLeaf: return "DuplicateLeaf";
    case ErrorCode::InconsistentLineage: return "InconsistentLineage";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::DuplicateEntry: return "DuplicateEntry";
    case ErrorCode::NonPositiveValue: return "NonPositiveValue";
    case ErrorCode::DegenerateColumn: return "DegenerateColumn";
    case ErrorCode::MissingStats: return "MissingStats";
    case ErrorCode::RowMismatch: return "RowMismatch";
    case ErrorCode::BadFractions: return "BadFractions";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonFiniteUpdate: return "NonFiniteUpdate";
    case ErrorCode::EmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorCode::BadRate: return "BadRate";
    case ErrorCode::EmptyList: return "EmptyList";
    case ErrorCode::InsufficientPairs: return "InsufficientPairs";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace hpmf
