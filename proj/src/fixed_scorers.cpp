#include "hwdetect/fixed_scorers.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "hwdetect/engine.hpp"
#include "hwdetect/error.hpp"
#include "hwdetect/text.hpp"

namespace hwdetect {
namespace {

constexpr std::size_t kPositionalVocab = 1u << 20;

TokenSequence positional_tokens(std::string_view text) {
    TokenSequence seq;
    seq.surface = split_words(text);
    seq.ids.resize(seq.surface.size());
    for (std::size_t i = 0; i < seq.ids.size(); ++i) seq.ids[i] = static_cast<TokenId>(i);
    return seq;
}

}  // namespace

ConstantScorer::ConstantScorer(double nll, std::size_t max_window) : nll_(nll) {
    descriptor_.name = "constant";
    descriptor_.vocab_size = kPositionalVocab;
    descriptor_.max_window = max_window;
    validate_descriptor(descriptor_);
}

TokenSequence ConstantScorer::tokenize(std::string_view text) const {
    return positional_tokens(text);
}

TraceScorer::TraceScorer(const std::vector<WindowScore>& trace, std::size_t max_window) {
    for (const auto& w : trace) {
        if (w.begin_loc >= w.end_loc || w.trg_len < 1 || w.trg_len > w.end_loc - w.begin_loc) {
            throw Error(ErrorCode::kConfig, "malformed trace window [" +
                                                std::to_string(w.begin_loc) + ", " +
                                                std::to_string(w.end_loc) + ")");
        }
        trace_[{w.begin_loc, w.end_loc}] = {w.trg_len, w.nll};
    }
    descriptor_.name = "trace";
    descriptor_.vocab_size = kPositionalVocab;
    descriptor_.max_window = max_window;
    validate_descriptor(descriptor_);
}

TraceScorer TraceScorer::load(const std::filesystem::path& path, std::size_t max_window) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::kUsage, "cannot open trace file " + path.string());
    std::vector<WindowScore> trace;
    try {
        nlohmann::json doc;
        in >> doc;
        const auto& windows = doc.is_array() ? doc : doc.at("windows");
        for (const auto& w : windows) trace.push_back(window_score_from_json(w));
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(0, "trace", path.string() + ": " + e.what());
    }
    return TraceScorer(trace, max_window);
}

TokenSequence TraceScorer::tokenize(std::string_view text) const {
    return positional_tokens(text);
}

double TraceScorer::mean_nll(std::span<const TokenId> window, std::size_t target_len) const {
    const std::size_t begin = window.front();
    const std::size_t end = static_cast<std::size_t>(window.back()) + 1;
    const auto it = trace_.find({begin, end});
    if (it == trace_.end() || end - begin != window.size()) {
        throw Error(ErrorCode::kContract, "no trace entry for window [" + std::to_string(begin) +
                                              ", " + std::to_string(end) + ")");
    }
    if (it->second.trg_len != target_len) {
        throw Error(ErrorCode::kContract,
                    "trace window [" + std::to_string(begin) + ", " + std::to_string(end) +
                        ") has trg_len " + std::to_string(it->second.trg_len) + ", asked for " +
                        std::to_string(target_len));
    }
    return it->second.nll;
}

}  // namespace hwdetect
