#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hwdetect {

using TokenId = std::uint32_t;

/// Token ids for a text in a scorer's model space. `surface` is either empty
/// or holds one string per id.
struct TokenSequence {
    std::vector<TokenId> ids;
    std::vector<std::string> surface;

    std::size_t size() const noexcept { return ids.size(); }
    bool operator==(const TokenSequence&) const = default;
};

struct ScorerDescriptor {
    std::string name;
    std::size_t vocab_size = 0;
    std::size_t max_window = 0;

    bool operator==(const ScorerDescriptor&) const = default;
};

/// Throws Error(kConfig) unless vocab_size >= 2 and max_window >= 2.
void validate_descriptor(const ScorerDescriptor& descriptor);

/// A language-model backend. Implementations are immutable after
/// construction and safe to share between threads.
class Scorer {
public:
    virtual ~Scorer() = default;

    virtual const ScorerDescriptor& descriptor() const = 0;

    virtual TokenSequence tokenize(std::string_view text) const = 0;

    /// Mean negative log-likelihood (nats) of the last `target_len` tokens of
    /// `window`; the leading tokens only condition the prediction.
    ///
    /// Throws Error(kContract) when target_len is outside [1, window.size()]
    /// and Error(kWindowSize) when the window exceeds max_window.
    double score_window(std::span<const TokenId> window, std::size_t target_len) const;

protected:
    /// Called with arguments already validated by score_window.
    virtual double mean_nll(std::span<const TokenId> window, std::size_t target_len) const = 0;
};

}  // namespace hwdetect
