#pragma once

#include <filesystem>
#include <map>
#include <utility>
#include <vector>

#include "hwdetect/scorer.hpp"

namespace hwdetect {

struct WindowScore;

/// Returns the same mean NLL for every window. Tokens come from the built-in
/// tokenizer and are numbered by position.
class ConstantScorer final : public Scorer {
public:
    explicit ConstantScorer(double nll, std::size_t max_window = 1024);

    const ScorerDescriptor& descriptor() const override { return descriptor_; }
    TokenSequence tokenize(std::string_view text) const override;

protected:
    double mean_nll(std::span<const TokenId>, std::size_t) const override { return nll_; }

private:
    double nll_;
    ScorerDescriptor descriptor_;
};

/// Replays a recorded window trace: the NLL for window [begin_loc, end_loc)
/// is looked up from the trace. Tokens come from the built-in tokenizer and
/// carry their position as id, which is how a window's location is
/// recovered. A window missing from the trace is a contract error.
class TraceScorer final : public Scorer {
public:
    explicit TraceScorer(const std::vector<WindowScore>& trace, std::size_t max_window = 1024);

    /// Accepts either a report document ({"windows": [...]}) or a bare array
    /// of {"begin_loc", "end_loc", "trg_len", "nll"} objects.
    static TraceScorer load(const std::filesystem::path& path, std::size_t max_window = 1024);

    const ScorerDescriptor& descriptor() const override { return descriptor_; }
    TokenSequence tokenize(std::string_view text) const override;

protected:
    double mean_nll(std::span<const TokenId> window, std::size_t target_len) const override;

private:
    struct Entry {
        std::size_t trg_len;
        double nll;
    };
    std::map<std::pair<std::size_t, std::size_t>, Entry> trace_;
    ScorerDescriptor descriptor_;
};

}  // namespace hwdetect
