#include "asknav/error.hpp"

namespace asknav {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMalformedMap: return "MalformedMap";
    case ErrorCode::kUnreachableMap: return "UnreachableMap";
    case ErrorCode::kBlockedEndpoint: return "BlockedEndpoint";
    case ErrorCode::kEpisodeTerminated: return "EpisodeTerminated";
    case ErrorCode::kNoFeasiblePair: return "NoFeasiblePair";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kLabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::kDivergedTraining: return "DivergedTraining";
    case ErrorCode::kVariantShapeMismatch: return "VariantShapeMismatch";
    case ErrorCode::kUnreachable: return "Unreachable";
    case ErrorCode::kSessionTimeout: return "SessionTimeout";
    case ErrorCode::kZeroSteps: return "ZeroSteps";
    case ErrorCode::kMalformedTrace: return "MalformedTrace";
    case ErrorCode::kEmptyDataset: return "EmptyDataset";
    case ErrorCode::kNoPositiveLabels: return "NoPositiveLabels";
    case ErrorCode::kFrozenViolation: return "FrozenViolation";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kNonPositiveShortestPath: return "NonPositiveShortestPath";
    case ErrorCode::kEmptyResults: return "EmptyResults";
    case ErrorCode::kIndexGap: return "IndexGap";
    case ErrorCode::kReplayDivergence: return "ReplayDivergence";
    case ErrorCode::kBindFailure: return "BindFailure";
    case ErrorCode::kProtocolViolation: return "ProtocolViolation";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kIo: return "Io";
  }
  return "Unknown";
}

}  // namespace asknav
