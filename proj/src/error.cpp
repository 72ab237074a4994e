#include "pobs/error.hpp"

namespace pobs {

std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::EmptyReference: return "EmptyReference";
    case ErrorCode::VariableReference: return "VariableReference";
    case ErrorCode::NoFromInstruction: return "NoFromInstruction";
    case ErrorCode::AlreadyAugmented: return "AlreadyAugmented";
    case ErrorCode::InvalidRuleBook: return "InvalidRuleBook";
    case ErrorCode::InvalidRate: return "InvalidRate";
    case ErrorCode::InvalidCountdown: return "InvalidCountdown";
    case ErrorCode::InvalidInjectPosition: return "InvalidInjectPosition";
    case ErrorCode::InvalidDefaultMode: return "InvalidDefaultMode";
    case ErrorCode::InvalidFilter: return "InvalidFilter";
    case ErrorCode::RowError: return "RowError";
    case ErrorCode::StartupError: return "StartupError";
    case ErrorCode::EmptyPre: return "EmptyPre";
    case ErrorCode::EmptyPost: return "EmptyPost";
    case ErrorCode::FitError: return "FitError";
    case ErrorCode::ZeroBaseline: return "ZeroBaseline";
    case ErrorCode::InvalidSeries: return "InvalidSeries";
    case ErrorCode::UnknownMetric: return "UnknownMetric";
    case ErrorCode::TransportError: return "TransportError";
    case ErrorCode::MalformedResponse: return "MalformedResponse";
    case ErrorCode::RuntimeError: return "RuntimeError";
    case ErrorCode::InvalidWorkload: return "InvalidWorkload";
    case ErrorCode::ConsistencyError: return "ConsistencyError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

RowError::RowError(std::size_t line, const std::string& message)
    : Error(ErrorCode::RowError, "line " + std::to_string(line) + ": " + message), line_(line) {}

} // namespace pobs
