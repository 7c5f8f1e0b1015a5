#include "cgf/error.hpp"

namespace cgf {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::Ok: return "OK";
    case ErrorCode::InvalidArgument: return "INVALID_ARGUMENT";
    case ErrorCode::Io: return "IO";
    case ErrorCode::Parse: return "PARSE";
    case ErrorCode::EmptyCloud: return "EMPTY_CLOUD";
    case ErrorCode::InvalidRadius: return "INVALID_RADIUS";
    case ErrorCode::DegenerateNeighborhood: return "DEGENERATE_NEIGHBORHOOD";
    case ErrorCode::Shape: return "SHAPE";
    case ErrorCode::ModelFormat: return "MODEL_FORMAT";
    case ErrorCode::NoTriplets: return "NO_TRIPLETS";
    case ErrorCode::NoCorrespondences: return "NO_CORRESPONDENCES";
    case ErrorCode::DegenerateCloud: return "DEGENERATE_CLOUD";
    case ErrorCode::EmptyTarget: return "EMPTY_TARGET";
    case ErrorCode::InsufficientSamples: return "INSUFFICIENT_SAMPLES";
    case ErrorCode::NoRetainedMatches: return "NO_RETAINED_MATCHES";
    case ErrorCode::DegenerateFit: return "DEGENERATE_FIT";
    case ErrorCode::NoConsensus: return "NO_CONSENSUS";
    case ErrorCode::NoGroundTruth: return "NO_GROUND_TRUTH";
    case ErrorCode::PairNotFound: return "PAIR_NOT_FOUND";
    case ErrorCode::Unknown: return "UNKNOWN";
  }
  return "UNKNOWN";
}

}  // namespace cgf
