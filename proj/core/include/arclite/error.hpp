#pragma once

#include <stdexcept>
#include <string>

namespace arclite {

enum class ErrorCode {
  InvalidShape,
  InvalidView,
  InvalidConfig,
  ShapeMismatch,
  OutOfMemory,
  NumaUnavailable,
  PoolPoisoned,
  PoolBusy,
  GraphConstruction,
  CacheOrder,
  CacheCapacity,
  PlanError,
  SchedulerError,
  LoaderMagic,
  LoaderVersion,
  LoaderFormat,
  LoaderTruncated,
  LoaderDuplicate,
  LoaderMissingTensor,
  LoaderShape,
  UsageError,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidShape: return "invalid shape";
    case ErrorCode::InvalidView: return "invalid view";
    case ErrorCode::InvalidConfig: return "invalid config";
    case ErrorCode::ShapeMismatch: return "shape mismatch";
    case ErrorCode::OutOfMemory: return "out of memory";
    case ErrorCode::NumaUnavailable: return "numa unavailable";
    case ErrorCode::PoolPoisoned: return "pool poisoned";
    case ErrorCode::PoolBusy: return "pool busy";
    case ErrorCode::GraphConstruction: return "graph construction";
    case ErrorCode::CacheOrder: return "cache order";
    case ErrorCode::CacheCapacity: return "cache capacity";
    case ErrorCode::PlanError: return "partition plan";
    case ErrorCode::SchedulerError: return "scheduler";
    case ErrorCode::LoaderMagic: return "bad magic";
    case ErrorCode::LoaderVersion: return "unsupported version";
    case ErrorCode::LoaderFormat: return "malformed file";
    case ErrorCode::LoaderTruncated: return "truncated file";
    case ErrorCode::LoaderDuplicate: return "duplicate tensor";
    case ErrorCode::LoaderMissingTensor: return "missing tensor";
    case ErrorCode::LoaderShape: return "tensor shape mismatch";
    case ErrorCode::UsageError: return "usage";
  }
  return "unknown";
}

}  // namespace arclite
