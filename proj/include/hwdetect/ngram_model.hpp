#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "hwdetect/scorer.hpp"

namespace hwdetect {

struct NGramOptions {
    int order = 3;
    double smoothing_k = 1.0;
    /// Denominator vocabulary used when the training corpus yields no tokens.
    std::size_t synthetic_vocab_size = 256;
    std::size_t max_window = 1024;
};

/// Word-level add-k n-gram model over the built-in tokenizer.
///
/// Id 0 is the unknown token; observed tokens get ids 1..n in byte-wise
/// lexicographic order. Contexts shorter than order-1 (start of a window) are
/// left-padded with a begin marker that never appears as a prediction.
///
///   p(w | ctx) = (count(ctx, w) + k) / (count(ctx) + k * V)
///
/// where V = vocab().size(), or synthetic_vocab_size for an empty corpus.
class NGramModel {
public:
    static constexpr TokenId kUnk = 0;
    static constexpr TokenId kBos = UINT32_MAX;
    static constexpr std::string_view kUnkSymbol = "<unk>";
    static constexpr std::string_view kBosSymbol = "<s>";
    static constexpr int kFormatVersion = 1;

    struct ContextCounts {
        std::uint64_t total = 0;
        std::map<TokenId, std::uint64_t> next;
    };

    /// Throws Error(kConfig) when order < 1 or smoothing_k <= 0.
    static NGramModel train(std::span<const std::string> corpus, const NGramOptions& options = {});

    static NGramModel from_json(const nlohmann::json& doc);
    static NGramModel load(const std::filesystem::path& path);

    nlohmann::json to_json() const;
    void save(const std::filesystem::path& path) const;

    int order() const noexcept { return options_.order; }
    double smoothing_k() const noexcept { return options_.smoothing_k; }
    std::size_t max_window() const noexcept { return options_.max_window; }
    const NGramOptions& options() const noexcept { return options_; }

    /// Size of the prediction space (denominator V).
    std::size_t vocab_size() const noexcept;

    /// id -> surface string; index 0 is the unknown symbol.
    const std::vector<std::string>& vocab() const noexcept { return vocab_; }

    TokenId id_of(std::string_view word) const;

    /// `history` holds the preceding token ids, most recent last. Only the
    /// last order-1 entries are used; shorter histories are padded with kBos.
    double probability(std::span<const TokenId> history, TokenId token) const;
    double neg_log_prob(std::span<const TokenId> history, TokenId token) const;

    /// Stored counts for the context formed from `history`, or nullptr.
    const ContextCounts* counts_for(std::span<const TokenId> history) const;

    const std::map<std::vector<TokenId>, ContextCounts>& counts() const noexcept { return counts_; }

    bool operator==(const NGramModel&) const;

private:
    explicit NGramModel(NGramOptions options) : options_(options) {}

    std::vector<TokenId> context_key(std::span<const TokenId> history) const;
    void rebuild_index();

    NGramOptions options_;
    std::vector<std::string> vocab_;
    std::map<std::string, TokenId, std::less<>> index_;
    std::map<std::vector<TokenId>, ContextCounts> counts_;
};

bool operator==(const NGramModel::ContextCounts& a, const NGramModel::ContextCounts& b);

/// Scorer backed by an NGramModel and the built-in tokenizer. The descriptor
/// name embeds a digest of the serialized model so cached perplexities from a
/// different model are never mistaken for current ones.
class NGramScorer final : public Scorer {
public:
    explicit NGramScorer(std::shared_ptr<const NGramModel> model);

    const ScorerDescriptor& descriptor() const override { return descriptor_; }
    TokenSequence tokenize(std::string_view text) const override;

    const NGramModel& model() const noexcept { return *model_; }

protected:
    double mean_nll(std::span<const TokenId> window, std::size_t target_len) const override;

private:
    std::shared_ptr<const NGramModel> model_;
    ScorerDescriptor descriptor_;
};

}  // namespace hwdetect
