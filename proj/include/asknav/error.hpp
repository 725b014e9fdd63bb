#ifndef ASKNAV_ERROR_HPP_
#define ASKNAV_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace asknav {

enum class ErrorCode {
  kMalformedMap,
  kUnreachableMap,
  kBlockedEndpoint,
  kEpisodeTerminated,
  kNoFeasiblePair,
  kShapeMismatch,
  kLabelOutOfRange,
  kDivergedTraining,
  kVariantShapeMismatch,
  kUnreachable,
  kSessionTimeout,
  kZeroSteps,
  kMalformedTrace,
  kEmptyDataset,
  kNoPositiveLabels,
  kFrozenViolation,
  kLengthMismatch,
  kNonPositiveShortestPath,
  kEmptyResults,
  kIndexGap,
  kReplayDivergence,
  kBindFailure,
  kProtocolViolation,
  kInvalidArgument,
  kIo,
};

std::string_view error_code_name(ErrorCode code);

// Every failure raised by the library carries one of the codes above so
// callers (and tests) can branch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace asknav

#endif  // ASKNAV_ERROR_HPP_
