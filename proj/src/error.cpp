#include "confret/error.hpp"

namespace confret {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyCandidateList: return "EmptyCandidateList";
    case ErrorCode::InvalidScore: return "InvalidScore";
    case ErrorCode::InvalidDocId: return "InvalidDocId";
    case ErrorCode::DimError: return "DimError";
    case ErrorCode::InvalidQuery: return "InvalidQuery";
    case ErrorCode::InvalidArg: return "InvalidArg";
    case ErrorCode::NonPositiveMax: return "NonPositiveMax";
    case ErrorCode::DegenerateScores: return "DegenerateScores";
    case ErrorCode::NoCalibrationData: return "NoCalibrationData";
    case ErrorCode::TransformMismatch: return "TransformMismatch";
    case ErrorCode::MissingGroundTruth: return "MissingGroundTruth";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DuplicateEntry: return "DuplicateEntry";
    case ErrorCode::NoRelevantDoc: return "NoRelevantDoc";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::Internal: return "Internal";
  }
  return "Unknown";
}

}  // namespace confret
