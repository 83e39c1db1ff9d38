#ifndef CRADMAP_ERROR_HPP
#define CRADMAP_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace cradmap {

enum class ErrorCode {
  kInvalidArgument,
  kInvalidDepth,
  kBehindCamera,
  kNearSingularity,
  kUnderconstrained,
  kDegenerateInit,
  kDuplicateKey,
  kDisconnectedGraph,
  kNonSpdCovariance,
  kMissingPose,
  kUndefinedMetric,
  kDegenerateAlignment,
  kParse,
  kIo,
};

std::string_view to_string(ErrorCode code);

// Every recoverable failure in the library is reported through this type.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Wraps an Error raised inside one pipeline stage so the CLI can report
// which stage failed.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& message);

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace cradmap

#endif  // CRADMAP_ERROR_HPP
