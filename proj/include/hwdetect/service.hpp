#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hwdetect/corpus.hpp"
#include "hwdetect/engine.hpp"
#include "hwdetect/error.hpp"
#include "hwdetect/scorer.hpp"
#include "hwdetect/threshold_table.hpp"

namespace httplib {
class Server;
}

namespace hwdetect {

inline constexpr std::size_t kMaxTextBytes = 64 * 1024;

struct AnalyzeRequest {
    std::string text;
    Flavor flavor = Flavor::kOrig;
    ThresholdMethod method = ThresholdMethod::kAuc;
    Dimension dimension = Dimension::kGlobal;
    /// Empty for the global dimension. Several entries are allowed only for
    /// the cognitive dimension; their thresholds are averaged.
    std::vector<std::string> categories;
};

/// Accepts {"text", "flavor"?, "method"?, "dimension"?, "category"?} where
/// category is a string or, for cognitive, a list. Throws Error(kUsage).
AnalyzeRequest analyze_request_from_json(const nlohmann::json& doc);

struct Verdict {
    Source origin = Source::kHuman;
    double perplexity = 0.0;
    double threshold = 0.0;
    ThresholdKey threshold_key;
    /// Categories that contributed to `threshold`; one entry unless averaged.
    std::vector<std::string> categories;
    double margin = 0.0;
    std::size_t token_count = 0;
    std::vector<WindowScore> windows;
    std::string scorer;
};

nlohmann::json to_json(const Verdict& verdict);

class DetectorService {
public:
    DetectorService(std::shared_ptr<const Scorer> scorer, EngineConfig engine,
                    std::shared_ptr<const ThresholdTable> table = nullptr);

    /// Errors: kUsage (oversized or invalid text, bad category), kUnavailable
    /// (no table), kNotFound (key not in table), kInputTooShort, kTransport.
    Verdict analyze(const AnalyzeRequest& request) const;

    /// Throws Error(kUnavailable) until a table has been loaded.
    std::shared_ptr<const ThresholdTable> thresholds() const;

    /// Loads and validates `path`, then swaps it in. On failure the current
    /// table stays in place and the error propagates.
    void reload_thresholds(const std::filesystem::path& path);
    void set_thresholds(std::shared_ptr<const ThresholdTable> table);

    const Scorer& scorer() const noexcept { return *scorer_; }
    std::shared_ptr<const Scorer> scorer_handle() const noexcept { return scorer_; }
    const EngineConfig& engine() const noexcept { return engine_; }

private:
    std::shared_ptr<const Scorer> scorer_;
    EngineConfig engine_;
    mutable std::mutex table_mutex_;
    std::shared_ptr<const ThresholdTable> table_;
};

/// HTTP status for an error code: 422 too short, 404 unknown key, 503
/// backend or table unavailable, 413 oversized, 400 other input errors,
/// 500 otherwise.
int http_status_for(ErrorCode code);

struct ServiceOptions {
    /// Directory served under / (the web UI bundle), if any.
    std::optional<std::filesystem::path> static_dir;
    /// Also expose the scorer wire protocol under /v1.
    bool expose_scorer = false;
};

/// Registers /api/v1/analyze, /api/v1/thresholds, /api/v1/reload and /healthz.
void mount_service_endpoints(httplib::Server& server, std::shared_ptr<DetectorService> service,
                             const ServiceOptions& options = {});

}  // namespace hwdetect
