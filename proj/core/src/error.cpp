#include "mhscreen/error.hpp"

namespace mhscreen {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kSchema: return "schema";
    case ErrorCode::kEmptyDataset: return "empty-dataset";
    case ErrorCode::kStratification: return "stratification";
    case ErrorCode::kConfiguration: return "configuration";
    case ErrorCode::kDegenerateData: return "degenerate-data";
    case ErrorCode::kDivergence: return "divergence";
    case ErrorCode::kDimensionMismatch: return "dimension-mismatch";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kAlignment: return "alignment";
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kVersion: return "version";
  }
  return "unknown";
}

}  // namespace mhscreen
