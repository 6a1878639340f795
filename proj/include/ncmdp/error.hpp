#pragma once

#include <stdexcept>
#include <string>

namespace ncmdp {

enum class ErrorCode {
  InvalidArgument,
  NonFinite,
  HarmonicZeroReward,
  EmptySequence,
  MalformedSpec,
  InvalidModel,
  EpisodeState,
  InconsistentRecord,
  StateCapExceeded,
  HorizonExceeded,
  IterationCap,
  Io,
  MalformedFile,
  DimensionMismatch,
  TooFewSamples,
};

const char* to_string(ErrorCode code) noexcept;

/// Single exception type for the library; `code()` tells callers what went wrong.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ncmdp
