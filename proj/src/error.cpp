#include "hwdetect/error.hpp"

namespace hwdetect {

const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::kConfig: return "config";
        case ErrorCode::kUsage: return "usage";
        case ErrorCode::kValidation: return "validation";
        case ErrorCode::kInputTooShort: return "input_too_short";
        case ErrorCode::kWindowSize: return "window_size";
        case ErrorCode::kContract: return "contract";
        case ErrorCode::kNumeric: return "numeric";
        case ErrorCode::kTransport: return "transport";
        case ErrorCode::kNotFound: return "not_found";
        case ErrorCode::kUnavailable: return "unavailable";
        case ErrorCode::kStaleCache: return "stale_cache";
        case ErrorCode::kUndefinedMetric: return "undefined_metric";
        case ErrorCode::kCoverage: return "coverage";
        case ErrorCode::kStratification: return "stratification";
        case ErrorCode::kTooLarge: return "too_large";
        case ErrorCode::kInternal: return "internal";
    }
    return "unknown";
}

ValidationError::ValidationError(std::size_t line, std::string field, std::string reason)
    : Error(ErrorCode::kValidation,
            (line > 0 ? "line " + std::to_string(line) + ": " : std::string()) + field + ": " +
                reason),
      line_(line),
      field_(std::move(field)),
      reason_(std::move(reason)) {}

InputTooShortError::InputTooShortError(std::size_t token_count, std::size_t min_tokens)
    : Error(ErrorCode::kInputTooShort,
            "text has " + std::to_string(token_count) + " tokens, at least " +
                std::to_string(min_tokens) + " required"),
      token_count_(token_count) {}

TransportError::TransportError(int status, const std::string& detail)
    : Error(ErrorCode::kTransport,
            status > 0 ? "scorer returned HTTP " + std::to_string(status) + ": " + detail
                       : "scorer unreachable: " + detail),
      status_(status) {}

StageError::StageError(std::string stage, const Error& cause)
    : Error(cause.code(), "[" + stage + "] " + cause.what()),
      stage_(std::move(stage)),
      cause_code_(cause.code()) {}

}  // namespace hwdetect
