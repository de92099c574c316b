#include "bwest/error.hpp"

namespace bwest {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NoUsableSizes: return "NoUsableSizes";
    case ErrorCode::EqualSizes: return "EqualSizes";
    case ErrorCode::NonPositiveDelayDifference: return "NonPositiveDelayDifference";
    case ErrorCode::DelayNotAboveIntercept: return "DelayNotAboveIntercept";
    case ErrorCode::InsufficientPoints: return "InsufficientPoints";
    case ErrorCode::NonPositiveSlope: return "NonPositiveSlope";
    case ErrorCode::InsufficientObservations: return "InsufficientObservations";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::ResolveFailure: return "ResolveFailure";
    case ErrorCode::PermissionDenied: return "PermissionDenied";
    case ErrorCode::AllProbesLost: return "AllProbesLost";
    case ErrorCode::NoReply: return "NoReply";
    case ErrorCode::SocketFailure: return "SocketFailure";
    case ErrorCode::NoSamples: return "NoSamples";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::CorruptLine: return "CorruptLine";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::EmptyFile: return "EmptyFile";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace bwest
