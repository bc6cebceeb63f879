#include "ovseg/error.hpp"

namespace ovseg {

std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::MalformedManifest: return "MalformedManifest";
    case ErrorCode::InvalidPose: return "InvalidPose";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::CorruptCache: return "CorruptCache";
    case ErrorCode::EmptyCloud: return "EmptyCloud";
    case ErrorCode::NoValidNormals: return "NoValidNormals";
    case ErrorCode::NoViews: return "NoViews";
    case ErrorCode::NoVisiblePoints: return "NoVisiblePoints";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::ProviderUnavailable: return "ProviderUnavailable";
    case ErrorCode::ProviderProtocol: return "ProviderProtocol";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::EmptyPrompt: return "EmptyPrompt";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::MissingStage: return "MissingStage";
    }
    return "Unknown";
}

int exit_code_for(ErrorCode code) {
    switch (code) {
    case ErrorCode::MissingStage: return 3;
    case ErrorCode::ProviderUnavailable:
    case ErrorCode::ProviderProtocol: return 4;
    default: return 2;
    }
}

} // namespace ovseg
