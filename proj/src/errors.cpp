#include "grafair/errors.hpp"

namespace grafair {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::NonBinaryColumn: return "NonBinaryColumn";
    case ErrorCode::EmptyGraph: return "EmptyGraph";
    case ErrorCode::NegativeStd: return "NegativeStd";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonScalarRoot: return "NonScalarRoot";
    case ErrorCode::UnknownVariant: return "UnknownVariant";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::EmptyTrainMask: return "EmptyTrainMask";
    case ErrorCode::InvalidBeta: return "InvalidBeta";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::DegenerateGroup: return "DegenerateGroup";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::InvalidParameter: return "InvalidParameter";
  }
  return "Unknown";
}

}  // namespace grafair
