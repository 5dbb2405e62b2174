#include "hwdetect/scorer.hpp"

#include "hwdetect/error.hpp"

namespace hwdetect {

void validate_descriptor(const ScorerDescriptor& descriptor) {
    if (descriptor.vocab_size < 2) {
        throw Error(ErrorCode::kConfig, "scorer vocab_size must be at least 2, got " +
                                            std::to_string(descriptor.vocab_size));
    }
    if (descriptor.max_window < 2) {
        throw Error(ErrorCode::kConfig, "scorer max_window must be at least 2, got " +
                                            std::to_string(descriptor.max_window));
    }
}

double Scorer::score_window(std::span<const TokenId> window, std::size_t target_len) const {
    if (target_len < 1 || target_len > window.size()) {
        throw Error(ErrorCode::kContract, "target_len " + std::to_string(target_len) +
                                              " outside [1, " + std::to_string(window.size()) +
                                              "]");
    }
    const auto max_window = descriptor().max_window;
    if (window.size() > max_window) {
        throw Error(ErrorCode::kWindowSize, "window of " + std::to_string(window.size()) +
                                                " tokens exceeds scorer limit " +
                                                std::to_string(max_window));
    }
    return mean_nll(window, target_len);
}

}  // namespace hwdetect
