#include "hwdetect/engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "hwdetect/error.hpp"

namespace hwdetect {

const char* to_string(WindowAdvance advance) {
    return advance == WindowAdvance::kStride ? "stride" : "m_len";
}

const char* to_string(Aggregation aggregation) {
    return aggregation == Aggregation::kWindowMean ? "window_mean" : "token_weighted";
}

WindowAdvance parse_window_advance(std::string_view name) {
    if (name == "stride") return WindowAdvance::kStride;
    if (name == "m_len") return WindowAdvance::kMaxLength;
    throw Error(ErrorCode::kConfig, "unknown window advance '" + std::string(name) + "'");
}

Aggregation parse_aggregation(std::string_view name) {
    if (name == "window_mean") return Aggregation::kWindowMean;
    if (name == "token_weighted") return Aggregation::kTokenWeighted;
    throw Error(ErrorCode::kConfig, "unknown aggregation '" + std::string(name) + "'");
}

EngineConfig default_engine_config(const ScorerDescriptor& descriptor) {
    EngineConfig config;
    config.m_len = descriptor.max_window;
    config.stride = std::max<std::size_t>(1, config.m_len / 2);
    return config;
}

void validate_engine_config(const EngineConfig& config, std::size_t max_window) {
    if (config.stride < 1 || config.stride > config.m_len) {
        throw Error(ErrorCode::kConfig, "stride must satisfy 1 <= stride <= m_len (stride=" +
                                            std::to_string(config.stride) +
                                            ", m_len=" + std::to_string(config.m_len) + ")");
    }
    if (max_window > 0 && config.m_len > max_window) {
        throw Error(ErrorCode::kConfig, "m_len " + std::to_string(config.m_len) +
                                            " exceeds scorer max_window " +
                                            std::to_string(max_window));
    }
}

std::vector<WindowSpan> schedule_windows(std::size_t seq_len, const EngineConfig& config) {
    validate_engine_config(config);
    if (seq_len < 1) throw InputTooShortError(seq_len, 1);

    const std::size_t advance =
        config.advance == WindowAdvance::kStride ? config.stride : config.m_len;
    std::vector<WindowSpan> windows;
    std::size_t prev_end = 0;
    std::size_t begin = 0;
    for (;;) {
        const std::size_t end = std::min(begin + config.m_len, seq_len);
        windows.push_back({begin, end, end - prev_end});
        if (end == seq_len) break;
        prev_end = end;
        begin += advance;
    }
    return windows;
}

double aggregate_perplexity(const std::vector<WindowScore>& windows, Aggregation aggregation) {
    if (windows.empty()) throw Error(ErrorCode::kContract, "no windows to aggregate");
    double sum = 0.0;
    double weight = 0.0;
    for (const auto& w : windows) {
        if (aggregation == Aggregation::kWindowMean) {
            sum += w.nll;
            weight += 1.0;
        } else {
            sum += w.nll * static_cast<double>(w.trg_len);
            weight += static_cast<double>(w.trg_len);
        }
    }
    return std::exp(sum / weight);
}

PerplexityReport compute_perplexity(std::string_view text, const Scorer& scorer,
                                    const EngineConfig& config, unsigned threads) {
    return compute_perplexity(scorer.tokenize(text), scorer, config, threads);
}

PerplexityReport compute_perplexity(const TokenSequence& tokens, const Scorer& scorer,
                                    const EngineConfig& config, unsigned threads) {
    validate_engine_config(config, scorer.descriptor().max_window);
    if (tokens.size() < kMinTokens) throw InputTooShortError(tokens.size(), kMinTokens);

    const auto spans = schedule_windows(tokens.size(), config);
    const std::span<const TokenId> ids(tokens.ids);

    PerplexityReport report;
    report.windows.resize(spans.size());
    auto score_one = [&](std::size_t i) {
        const auto& s = spans[i];
        const double nll =
            scorer.score_window(ids.subspan(s.begin_loc, s.end_loc - s.begin_loc), s.trg_len);
        if (!std::isfinite(nll)) {
            throw Error(ErrorCode::kNumeric,
                        "window " + std::to_string(i) + " [" + std::to_string(s.begin_loc) +
                            ", " + std::to_string(s.end_loc) + ") returned non-finite nll");
        }
        report.windows[i] = {s.begin_loc, s.end_loc, s.trg_len, nll};
    };

    const std::size_t workers = std::min<std::size_t>(std::max(1u, threads), spans.size());
    if (workers <= 1) {
        for (std::size_t i = 0; i < spans.size(); ++i) score_one(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::mutex error_mutex;
        std::exception_ptr first_error;
        std::size_t first_error_index = spans.size();
        {
            std::vector<std::jthread> pool;
            for (std::size_t t = 0; t < workers; ++t) {
                pool.emplace_back([&] {
                    for (std::size_t i = next++; i < spans.size(); i = next++) {
                        try {
                            score_one(i);
                        } catch (...) {
                            // Report the earliest failing window, as the
                            // sequential loop would.
                            std::lock_guard lock(error_mutex);
                            if (i < first_error_index) {
                                first_error_index = i;
                                first_error = std::current_exception();
                            }
                        }
                    }
                });
            }
        }
        if (first_error) std::rethrow_exception(first_error);
    }

    report.perplexity = aggregate_perplexity(report.windows, config.aggregation);
    report.token_count = tokens.size();
    report.config = config;
    report.scorer_name = scorer.descriptor().name;
    return report;
}

std::vector<CandidateScore> compare_candidates(std::string_view context,
                                               const std::vector<std::string>& candidates,
                                               const Scorer& scorer, const EngineConfig& config) {
    if (candidates.empty()) throw Error(ErrorCode::kUsage, "at least one candidate is required");
    if (context.empty()) throw Error(ErrorCode::kUsage, "context must not be empty");
    std::vector<CandidateScore> out;
    out.reserve(candidates.size());
    for (const auto& candidate : candidates) {
        std::string text(context);
        text.push_back(' ');
        text += candidate;
        out.push_back({candidate, compute_perplexity(text, scorer, config).perplexity});
    }
    std::stable_sort(out.begin(), out.end(), [](const CandidateScore& a, const CandidateScore& b) {
        return a.perplexity < b.perplexity;
    });
    return out;
}

nlohmann::json to_json(const EngineConfig& config) {
    return {{"m_len", config.m_len},
            {"stride", config.stride},
            {"advance", to_string(config.advance)},
            {"aggregation", to_string(config.aggregation)}};
}

EngineConfig engine_config_from_json(const nlohmann::json& doc) {
    EngineConfig config;
    config.m_len = doc.at("m_len").get<std::size_t>();
    config.stride = doc.at("stride").get<std::size_t>();
    config.advance = parse_window_advance(doc.value("advance", std::string("stride")));
    config.aggregation = parse_aggregation(doc.value("aggregation", std::string("window_mean")));
    return config;
}

nlohmann::json to_json(const WindowScore& w) {
    return {{"begin_loc", w.begin_loc}, {"end_loc", w.end_loc}, {"trg_len", w.trg_len},
            {"nll", w.nll}};
}

WindowScore window_score_from_json(const nlohmann::json& doc) {
    return {doc.at("begin_loc").get<std::size_t>(), doc.at("end_loc").get<std::size_t>(),
            doc.at("trg_len").get<std::size_t>(), doc.at("nll").get<double>()};
}

nlohmann::json to_json(const PerplexityReport& report) {
    nlohmann::json windows = nlohmann::json::array();
    for (const auto& w : report.windows) windows.push_back(to_json(w));
    return {{"perplexity", report.perplexity},
            {"token_count", report.token_count},
            {"config", to_json(report.config)},
            {"scorer", report.scorer_name},
            {"windows", std::move(windows)}};
}

PerplexityReport report_from_json(const nlohmann::json& doc) {
    PerplexityReport report;
    report.perplexity = doc.at("perplexity").get<double>();
    report.token_count = doc.at("token_count").get<std::size_t>();
    report.config = engine_config_from_json(doc.at("config"));
    report.scorer_name = doc.at("scorer").get<std::string>();
    for (const auto& w : doc.at("windows")) report.windows.push_back(window_score_from_json(w));
    return report;
}

}  // namespace hwdetect
