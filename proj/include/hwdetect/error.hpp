#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hwdetect {

enum class ErrorCode {
    kConfig,           // bad configuration value (order, smoothing, stride, ...)
    kUsage,            // bad user input at the command/request level
    kValidation,       // corpus / table file failed schema checks
    kInputTooShort,    // fewer tokens than the engine accepts
    kWindowSize,       // window longer than the scorer's context limit
    kContract,         // caller broke a documented precondition
    kNumeric,          // NaN / inf where a finite value is required
    kTransport,        // remote scorer unreachable or misbehaving
    kNotFound,         // unknown threshold key / table cell
    kUnavailable,      // service not ready (no table loaded)
    kStaleCache,       // perplexity missing for the active scorer/config
    kUndefinedMetric,  // AUC / F1 undefined for the given counts
    kCoverage,         // threshold table does not cover a requested cell
    kStratification,   // not enough samples per class to split
    kTooLarge,         // request body over the service size cap
    kInternal,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Schema violation in a line-oriented input file. `line` is 1-based, 0 when
/// the problem is not tied to a single line.
class ValidationError : public Error {
public:
    ValidationError(std::size_t line, std::string field, std::string reason);

    std::size_t line() const noexcept { return line_; }
    const std::string& field() const noexcept { return field_; }
    const std::string& reason() const noexcept { return reason_; }

private:
    std::size_t line_;
    std::string field_;
    std::string reason_;
};

class InputTooShortError : public Error {
public:
    InputTooShortError(std::size_t token_count, std::size_t min_tokens);

    std::size_t token_count() const noexcept { return token_count_; }

private:
    std::size_t token_count_;
};

class TransportError : public Error {
public:
    /// `status` is the HTTP status, or 0 when no response was received.
    TransportError(int status, const std::string& detail);

    int status() const noexcept { return status_; }

private:
    int status_;
};

/// Wraps a failure inside one offline pipeline stage.
class StageError : public Error {
public:
    StageError(std::string stage, const Error& cause);

    const std::string& stage() const noexcept { return stage_; }
    ErrorCode cause_code() const noexcept { return cause_code_; }

private:
    std::string stage_;
    ErrorCode cause_code_;
};

}  // namespace hwdetect
