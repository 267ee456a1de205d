#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace l1c {

enum class ErrorCode {
  FileNotFound,
  UnsupportedFormat,
  CorruptImage,
  IOFailure,
  IndexOutOfRange,
  DimensionMismatch,
  DegenerateNeighborhood,
  DegenerateImage,
  DegenerateSamples,
  NonFinite,
  NumericalBreakdown,
  EmptyScribbles,
  InvalidScribbles,
  CountTooLarge,
  SolverFailed,
  InvalidArgument,
};

std::string_view to_string(ErrorCode code);

/// Exception carrying a machine-readable error kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace l1c
