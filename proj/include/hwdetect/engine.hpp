#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "hwdetect/scorer.hpp"

namespace hwdetect {

/// How begin_loc moves between windows. kStride overlaps consecutive windows
/// by m_len - stride tokens of context; kMaxLength jumps a full window.
enum class WindowAdvance { kStride, kMaxLength };

/// kWindowMean: exp of the plain mean of window NLLs.
/// kTokenWeighted: exp(sum(nll * trg_len) / sum(trg_len)).
enum class Aggregation { kWindowMean, kTokenWeighted };

const char* to_string(WindowAdvance advance);
const char* to_string(Aggregation aggregation);
WindowAdvance parse_window_advance(std::string_view name);
Aggregation parse_aggregation(std::string_view name);

struct EngineConfig {
    std::size_t m_len = 0;
    std::size_t stride = 0;
    WindowAdvance advance = WindowAdvance::kStride;
    Aggregation aggregation = Aggregation::kWindowMean;

    bool operator==(const EngineConfig&) const = default;
};

/// Texts with fewer tokens are rejected.
inline constexpr std::size_t kMinTokens = 2;

/// m_len = max_window, stride = m_len / 2.
EngineConfig default_engine_config(const ScorerDescriptor& descriptor);

/// Throws Error(kConfig) unless 1 <= stride <= m_len (and m_len <= max_window
/// when max_window is nonzero).
void validate_engine_config(const EngineConfig& config, std::size_t max_window = 0);

struct WindowSpan {
    std::size_t begin_loc = 0;
    std::size_t end_loc = 0;
    std::size_t trg_len = 0;

    bool operator==(const WindowSpan&) const = default;
};

struct WindowScore {
    std::size_t begin_loc = 0;
    std::size_t end_loc = 0;
    std::size_t trg_len = 0;
    double nll = 0.0;

    bool operator==(const WindowScore&) const = default;
};

/// Window schedule over a sequence of `seq_len` tokens. Each window's target
/// is [end_loc - trg_len, end_loc) and the targets tile [0, seq_len).
/// Throws Error(kInputTooShort) when seq_len == 0.
std::vector<WindowSpan> schedule_windows(std::size_t seq_len, const EngineConfig& config);

struct PerplexityReport {
    std::vector<WindowScore> windows;
    double perplexity = 0.0;
    std::size_t token_count = 0;
    EngineConfig config;
    std::string scorer_name;

    bool operator==(const PerplexityReport&) const = default;
};

double aggregate_perplexity(const std::vector<WindowScore>& windows, Aggregation aggregation);

/// Tokenizes `text` with the scorer, scores every scheduled window and
/// aggregates. With `threads` > 1 windows are scored concurrently; the
/// result is identical to the sequential one.
///
/// Errors: InputTooShortError below kMinTokens; Error(kNumeric) naming the
/// window when the scorer returns a non-finite NLL; scorer errors propagate.
PerplexityReport compute_perplexity(std::string_view text, const Scorer& scorer,
                                    const EngineConfig& config, unsigned threads = 1);

/// Same as compute_perplexity for an already tokenized sequence.
PerplexityReport compute_perplexity(const TokenSequence& tokens, const Scorer& scorer,
                                    const EngineConfig& config, unsigned threads = 1);

struct CandidateScore {
    std::string candidate;
    double perplexity = 0.0;
};

/// Perplexity of `context + " " + candidate` for each candidate, ascending
/// (stable for ties).
std::vector<CandidateScore> compare_candidates(std::string_view context,
                                               const std::vector<std::string>& candidates,
                                               const Scorer& scorer, const EngineConfig& config);

nlohmann::json to_json(const EngineConfig& config);
EngineConfig engine_config_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const WindowScore& window);
WindowScore window_score_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const PerplexityReport& report);
PerplexityReport report_from_json(const nlohmann::json& doc);

}  // namespace hwdetect
