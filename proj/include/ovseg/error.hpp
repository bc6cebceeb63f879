#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ovseg {

enum class ErrorCode {
    MissingFile,
    MalformedManifest,
    InvalidPose,
    DimensionMismatch,
    VersionMismatch,
    CorruptCache,
    EmptyCloud,
    NoValidNormals,
    NoViews,
    NoVisiblePoints,
    EmptyMask,
    ProviderUnavailable,
    ProviderProtocol,
    DimMismatch,
    EmptyPrompt,
    IoFailure,
    InvalidConfig,
    InvalidArgument,
    MissingStage,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so the
/// CLI can map it onto an exit status.
class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

  private:
    ErrorCode code_;
};

/// Process exit status for a failure: 2 validation, 3 missing stage, 4 provider.
int exit_code_for(ErrorCode code);

} // namespace ovseg
