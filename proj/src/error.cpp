#include "ncmdp/error.hpp"

namespace ncmdp {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid argument";
    case ErrorCode::NonFinite: return "non-finite reward";
    case ErrorCode::HarmonicZeroReward: return "zero reward under harmonic objective";
    case ErrorCode::EmptySequence: return "empty reward sequence";
    case ErrorCode::MalformedSpec: return "malformed generic spec";
    case ErrorCode::InvalidModel: return "invalid model";
    case ErrorCode::EpisodeState: return "illegal episode state";
    case ErrorCode::InconsistentRecord: return "inconsistent trajectory record";
    case ErrorCode::StateCapExceeded: return "state cap exceeded";
    case ErrorCode::HorizonExceeded: return "horizon cap exceeded";
    case ErrorCode::IterationCap: return "iteration cap reached";
    case ErrorCode::Io: return "i/o failure";
    case ErrorCode::MalformedFile: return "malformed file";
    case ErrorCode::DimensionMismatch: return "dimension mismatch";
    case ErrorCode::TooFewSamples: return "too few samples";
  }
  return "unknown error";
}

}  // namespace ncmdp
