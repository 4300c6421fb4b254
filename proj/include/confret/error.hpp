#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace confret {

enum class ErrorCode {
  // core
  EmptyCandidateList,
  InvalidScore,
  InvalidDocId,
  // retrieval
  DimError,
  InvalidQuery,
  // shared
  InvalidArg,
  // refine
  NonPositiveMax,
  DegenerateScores,
  // conformal
  NoCalibrationData,
  TransformMismatch,
  // eval
  MissingGroundTruth,
  // data
  ParseError,
  DuplicateEntry,
  NoRelevantDoc,
  IoError,
  // internal invariant violations
  Internal,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries one of the codes above; the CLI
// maps them onto exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace confret
