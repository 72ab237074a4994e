#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pobs {

enum class ErrorCode {
    // dockerfile-core
    EmptyReference,
    // augmentor
    VariableReference,
    NoFromInstruction,
    AlreadyAugmented,
    InvalidRuleBook,
    // agent-protocol
    InvalidRate,
    InvalidCountdown,
    InvalidInjectPosition,
    InvalidDefaultMode,
    InvalidFilter,
    RowError,
    StartupError,
    // impact-analyzer
    EmptyPre,
    EmptyPost,
    FitError,
    ZeroBaseline,
    InvalidSeries,
    // orchestrator
    UnknownMetric,
    TransportError,
    MalformedResponse,
    RuntimeError,
    InvalidWorkload,
    // cli-reporting
    ConsistencyError,
    // generic
    IoError,
    InvalidArgument,
};

std::string_view to_string(ErrorCode code);

/// Every recoverable failure in the library is reported as a pobs::Error
/// carrying one of the codes above.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message);

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// RowError carries the 1-based line number of the offending CSV row.
class RowError : public Error {
public:
    RowError(std::size_t line, const std::string& message);

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

} // namespace pobs
