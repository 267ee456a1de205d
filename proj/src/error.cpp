#include "l1c/error.hpp"

namespace l1c {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::FileNotFound: return "FileNotFound";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::CorruptImage: return "CorruptImage";
    case ErrorCode::IOFailure: return "IOFailure";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DegenerateNeighborhood: return "DegenerateNeighborhood";
    case ErrorCode::DegenerateImage: return "DegenerateImage";
    case ErrorCode::DegenerateSamples: return "DegenerateSamples";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::NumericalBreakdown: return "NumericalBreakdown";
    case ErrorCode::EmptyScribbles: return "EmptyScribbles";
    case ErrorCode::InvalidScribbles: return "InvalidScribbles";
    case ErrorCode::CountTooLarge: return "CountTooLarge";
    case ErrorCode::SolverFailed: return "SolverFailed";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace l1c
