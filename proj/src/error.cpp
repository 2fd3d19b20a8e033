#include "cascade/error.hpp"

namespace cascade {

std::string_view to_string(ErrorCode code)
{
    switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::FormatError: return "FormatError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::EmptyDocument: return "EmptyDocument";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::DuplicateEntry: return "DuplicateEntry";
    case ErrorCode::UnknownItem: return "UnknownItem";
    case ErrorCode::EmptyQuery: return "EmptyQuery";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::NormError: return "NormError";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::ProtocolError: return "ProtocolError";
    case ErrorCode::StageFailure: return "StageFailure";
    }
    return "Unknown";
}

int exit_status(ErrorCode code)
{
    switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::ConfigError:
        return 1;
    case ErrorCode::Timeout:
    case ErrorCode::ProtocolError:
    case ErrorCode::StageFailure:
        return 3;
    default:
        return 2;
    }
}

}  // namespace cascade
