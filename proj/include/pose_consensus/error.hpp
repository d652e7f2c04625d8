#pragma once

#include <stdexcept>
#include <string>

namespace pose_consensus {

// Base of every error raised by the library. Catch this at tool boundaries.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define POSE_CONSENSUS_ERROR(Name)        \
  class Name : public Error {             \
   public:                                \
    using Error::Error;                   \
  }

POSE_CONSENSUS_ERROR(InvalidRotation);
POSE_CONSENSUS_ERROR(DegenerateMatrix);
POSE_CONSENSUS_ERROR(VideoTooShort);
POSE_CONSENSUS_ERROR(InvalidPlan);
POSE_CONSENSUS_ERROR(InsufficientSamples);
POSE_CONSENSUS_ERROR(MissingPairBaseline);
POSE_CONSENSUS_ERROR(NoVideos);
POSE_CONSENSUS_ERROR(NoSamples);
POSE_CONSENSUS_ERROR(BackendUnavailable);
POSE_CONSENSUS_ERROR(BackendTimeout);
POSE_CONSENSUS_ERROR(MalformedResponse);
POSE_CONSENSUS_ERROR(EmptySelection);
POSE_CONSENSUS_ERROR(EmptyReport);
POSE_CONSENSUS_ERROR(InvalidManifest);
POSE_CONSENSUS_ERROR(IoError);

#undef POSE_CONSENSUS_ERROR

}  // namespace pose_consensus
