#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cascade {

enum class ErrorCode {
    InvalidArgument,
    ConfigError,
    FormatError,
    IoError,
    EmptyDocument,
    DuplicateId,
    DuplicateEntry,
    UnknownItem,
    EmptyQuery,
    DimMismatch,
    NormError,
    Timeout,
    ProtocolError,
    StageFailure,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so the
/// CLI can map it onto an exit status without string matching.
class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code)
    {}

    ErrorCode code() const noexcept { return code_; }

  private:
    ErrorCode code_;
};

/// Exit status used by the command-line tool: 1 usage/config, 2 data/format,
/// 3 stage failure.
int exit_status(ErrorCode code);

}  // namespace cascade
