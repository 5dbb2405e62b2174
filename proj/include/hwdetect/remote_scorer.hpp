#pragma once

#include <chrono>
#include <memory>
#include <string>

#include "hwdetect/scorer.hpp"

namespace httplib {
class Server;
}

namespace hwdetect {

/// Client for a scorer reachable over the JSON/HTTP wire protocol:
///
///   POST /v1/tokenize      {"text": s}                 -> {"ids": [..], "tokens": [..]}
///   POST /v1/score_window  {"ids": [..], "target_len": n} -> {"mean_nll": x, "target_tokens": n}
///   GET  /v1/descriptor                                 -> {"name", "vocab_size", "max_window"}
///
/// The descriptor is fetched once at construction. Each call opens its own
/// connection, so one instance can be shared by concurrent callers.
class RemoteScorer final : public Scorer {
public:
    /// `base_url` is "http://host:port". Throws TransportError when the
    /// descriptor cannot be fetched.
    explicit RemoteScorer(std::string base_url,
                          std::chrono::milliseconds timeout = std::chrono::seconds(30));

    const ScorerDescriptor& descriptor() const override { return descriptor_; }
    TokenSequence tokenize(std::string_view text) const override;

    const std::string& base_url() const noexcept { return base_url_; }

protected:
    double mean_nll(std::span<const TokenId> window, std::size_t target_len) const override;

private:
    std::string post(const std::string& path, const std::string& body) const;

    std::string base_url_;
    std::chrono::milliseconds timeout_;
    ScorerDescriptor descriptor_;
};

/// Registers the /v1/* scorer endpoints for `scorer` on `server`.
void mount_scorer_endpoints(httplib::Server& server, std::shared_ptr<const Scorer> scorer);

}  // namespace hwdetect
