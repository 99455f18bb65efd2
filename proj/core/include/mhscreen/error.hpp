#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mhscreen {

enum class ErrorCode {
  kSchema,             // input file violates the documented schema
  kEmptyDataset,       // nothing left to work with
  kStratification,     // a class is too small for the requested split
  kConfiguration,      // invalid or inconsistent settings
  kDegenerateData,     // e.g. a single-class training set
  kDivergence,         // non-finite loss during training
  kDimensionMismatch,  // vector length disagrees with a model or set
  kParse,              // malformed line in a JSONL/TSV/CSV contract file
  kAlignment,          // no overlap between a dataset and an external set
  kInvalidArgument,
  kIo,
  kVersion,            // serialized artifact written by an incompatible version
};

std::string_view to_string(ErrorCode code);

// Single exception type for the library; the code tells callers what failed.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mhscreen
