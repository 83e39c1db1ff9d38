#include "cradmap/error.hpp"

namespace cradmap {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kInvalidDepth: return "invalid-depth";
    case ErrorCode::kBehindCamera: return "behind-camera";
    case ErrorCode::kNearSingularity: return "near-singularity";
    case ErrorCode::kUnderconstrained: return "underconstrained";
    case ErrorCode::kDegenerateInit: return "degenerate-init";
    case ErrorCode::kDuplicateKey: return "duplicate-key";
    case ErrorCode::kDisconnectedGraph: return "disconnected-graph";
    case ErrorCode::kNonSpdCovariance: return "non-spd-covariance";
    case ErrorCode::kMissingPose: return "missing-pose";
    case ErrorCode::kUndefinedMetric: return "undefined-metric";
    case ErrorCode::kDegenerateAlignment: return "degenerate-alignment";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code) {}

StageError::StageError(std::string stage, const std::string& message)
    : std::runtime_error("[" + stage + "] " + message),
      stage_(std::move(stage)) {}

}  // namespace cradmap
