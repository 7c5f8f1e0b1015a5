#pragma once

#include <stdexcept>
#include <string>

namespace cgf {

enum class ErrorCode {
  Ok = 0,
  InvalidArgument,
  Io,
  Parse,
  EmptyCloud,
  InvalidRadius,
  DegenerateNeighborhood,
  Shape,
  ModelFormat,
  NoTriplets,
  NoCorrespondences,
  DegenerateCloud,
  EmptyTarget,
  InsufficientSamples,
  NoRetainedMatches,
  DegenerateFit,
  NoConsensus,
  NoGroundTruth,
  PairNotFound,
  Unknown,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void throw_error(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) throw_error(code, message);
}

}  // namespace cgf
