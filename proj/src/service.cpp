#include "hwdetect/service.hpp"

#include <algorithm>

#include <httplib.h>

#include "hwdetect/calibration.hpp"
#include "hwdetect/error.hpp"
#include "hwdetect/remote_scorer.hpp"

namespace hwdetect {
namespace {

using nlohmann::json;

template <typename T, typename Parse>
T parse_field(const json& doc, const char* field, T fallback, Parse parse) {
    if (!doc.contains(field) || doc.at(field).is_null()) return fallback;
    const auto name = doc.at(field).get<std::string>();
    const auto value = parse(name);
    if (!value) throw Error(ErrorCode::kUsage, std::string(field) + ": unknown value '" + name + "'");
    return *value;
}

void reply_error(httplib::Response& res, const Error& e) {
    json body{{"code", to_string(e.code())}, {"message", e.what()}};
    if (const auto* short_input = dynamic_cast<const InputTooShortError*>(&e)) {
        body["token_count"] = short_input->token_count();
        body["min_tokens"] = kMinTokens;
    }
    res.status = http_status_for(e.code());
    res.set_content(json{{"error", body}}.dump(), "application/json");
}

void reply_json(httplib::Response& res, const json& body) {
    res.status = 200;
    res.set_content(body.dump(), "application/json");
}

}  // namespace

AnalyzeRequest analyze_request_from_json(const json& doc) {
    if (!doc.is_object()) throw Error(ErrorCode::kUsage, "request body must be a JSON object");
    AnalyzeRequest request;
    try {
        if (!doc.contains("text") || !doc.at("text").is_string()) {
            throw Error(ErrorCode::kUsage, "text: required string");
        }
        request.text = doc.at("text").get<std::string>();
        request.flavor = parse_field(doc, "flavor", request.flavor, parse_flavor);
        request.method = parse_field(doc, "method", request.method, parse_method);
        request.dimension = parse_field(doc, "dimension", request.dimension, parse_dimension);
        if (doc.contains("category") && !doc.at("category").is_null()) {
            const auto& category = doc.at("category");
            if (!doc.contains("dimension") || doc.at("dimension").is_null()) {
                throw Error(ErrorCode::kUsage, "category given without dimension");
            }
            if (category.is_array()) {
                request.categories = category.get<std::vector<std::string>>();
            } else {
                request.categories.push_back(category.get<std::string>());
            }
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::kUsage, std::string("malformed analyze request: ") + e.what());
    }
    return request;
}

json to_json(const Verdict& v) {
    json key = to_json(v.threshold_key);
    if (v.categories.size() > 1) key["category"] = v.categories;
    json windows = json::array();
    for (const auto& w : v.windows) windows.push_back(to_json(w));
    return {{"origin", to_string(v.origin)},
            {"perplexity", v.perplexity},
            {"threshold", v.threshold},
            {"threshold_key", std::move(key)},
            {"margin", v.margin},
            {"token_count", v.token_count},
            {"scorer", v.scorer},
            {"windows", std::move(windows)}};
}

DetectorService::DetectorService(std::shared_ptr<const Scorer> scorer, EngineConfig engine,
                                 std::shared_ptr<const ThresholdTable> table)
    : scorer_(std::move(scorer)), engine_(engine), table_(std::move(table)) {
    if (!scorer_) throw Error(ErrorCode::kConfig, "detector service needs a scorer");
    validate_engine_config(engine_, scorer_->descriptor().max_window);
}

std::shared_ptr<const ThresholdTable> DetectorService::thresholds() const {
    std::lock_guard lock(table_mutex_);
    if (!table_) throw Error(ErrorCode::kUnavailable, "no threshold table loaded");
    return table_;
}

void DetectorService::set_thresholds(std::shared_ptr<const ThresholdTable> table) {
    std::lock_guard lock(table_mutex_);
    table_ = std::move(table);
}

void DetectorService::reload_thresholds(const std::filesystem::path& path) {
    auto table = std::make_shared<const ThresholdTable>(ThresholdTable::load(path));
    set_thresholds(std::move(table));
}

Verdict DetectorService::analyze(const AnalyzeRequest& request) const {
    if (request.text.size() > kMaxTextBytes) {
        throw Error(ErrorCode::kTooLarge, "text exceeds " + std::to_string(kMaxTextBytes) + " bytes");
    }
    // One snapshot per request keeps the threshold consistent with its key
    // even if a reload lands mid-request.
    const auto table = thresholds();

    std::vector<std::string> categories = request.categories;
    std::sort(categories.begin(), categories.end());
    categories.erase(std::unique(categories.begin(), categories.end()), categories.end());
    if (request.dimension == Dimension::kGlobal && !categories.empty()) {
        throw Error(ErrorCode::kUsage, "global dimension takes no category");
    }
    if (request.dimension != Dimension::kGlobal && categories.empty()) {
        throw Error(ErrorCode::kUsage, std::string(to_string(request.dimension)) +
                                           " dimension needs a category");
    }
    if (request.dimension == Dimension::kKnowledge && categories.size() > 1) {
        throw Error(ErrorCode::kUsage, "knowledge dimension takes a single category");
    }
    if (categories.empty()) categories.emplace_back();

    Verdict verdict;
    double sum = 0.0;
    for (const auto& category : categories) {
        const auto key = make_key(to_string(request.flavor), to_string(request.method),
                                  to_string(request.dimension), category);
        const auto entry = table->find(key);
        if (!entry) throw Error(ErrorCode::kNotFound, "no threshold for " + to_string(key));
        sum += entry->threshold;
        if (verdict.categories.empty()) verdict.threshold_key = key;
        verdict.categories.push_back(category);
    }
    verdict.threshold = categories.size() == 1 ? sum : sum / static_cast<double>(categories.size());
    if (categories.size() > 1) verdict.threshold_key.category.clear();
    if (request.dimension == Dimension::kGlobal) verdict.categories.clear();

    const auto report = compute_perplexity(request.text, *scorer_, engine_);
    verdict.perplexity = report.perplexity;
    verdict.origin = classify(report.perplexity, verdict.threshold);
    verdict.margin = report.perplexity - verdict.threshold;
    verdict.token_count = report.token_count;
    verdict.windows = report.windows;
    verdict.scorer = report.scorer_name;
    return verdict;
}

int http_status_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::kInputTooShort: return 422;
        case ErrorCode::kNotFound: return 404;
        case ErrorCode::kTransport:
        case ErrorCode::kUnavailable: return 503;
        case ErrorCode::kTooLarge: return 413;
        case ErrorCode::kUsage:
        case ErrorCode::kValidation:
        case ErrorCode::kConfig:
        case ErrorCode::kWindowSize: return 400;
        default: return 500;
    }
}

void mount_service_endpoints(httplib::Server& server, std::shared_ptr<DetectorService> service,
                             const ServiceOptions& options) {
    server.Post("/api/v1/analyze", [service](const httplib::Request& req, httplib::Response& res) {
        try {
            if (req.body.size() > 2 * kMaxTextBytes) {
                throw Error(ErrorCode::kTooLarge, "request body too large");
            }
            const auto body = json::parse(req.body, nullptr, false);
            if (body.is_discarded()) throw Error(ErrorCode::kUsage, "request body is not JSON");
            reply_json(res, to_json(service->analyze(analyze_request_from_json(body))));
        } catch (const Error& e) {
            reply_error(res, e);
        } catch (const std::exception& e) {
            reply_error(res, Error(ErrorCode::kInternal, e.what()));
        }
    });

    server.Get("/api/v1/thresholds", [service](const httplib::Request&, httplib::Response& res) {
        try {
            reply_json(res, service->thresholds()->to_json());
        } catch (const Error& e) {
            reply_error(res, e);
        }
    });

    server.Post("/api/v1/reload", [service](const httplib::Request& req, httplib::Response& res) {
        try {
            const auto body = json::parse(req.body, nullptr, false);
            if (!body.is_object() || !body.contains("path") || !body.at("path").is_string()) {
                throw Error(ErrorCode::kUsage, "reload needs {\"path\": string}");
            }
            service->reload_thresholds(body.at("path").get<std::string>());
            reply_json(res, {{"ok", true}});
        } catch (const Error& e) {
            reply_error(res, e);
        } catch (const std::exception& e) {
            reply_error(res, Error(ErrorCode::kValidation, e.what()));
        }
    });

    server.Get("/healthz", [service](const httplib::Request&, httplib::Response& res) {
        reply_json(res, {{"status", "ok"}, {"scorer", service->scorer().descriptor().name}});
    });

    if (options.expose_scorer) mount_scorer_endpoints(server, service->scorer_handle());
    if (options.static_dir && !server.set_mount_point("/", options.static_dir->string())) {
        throw Error(ErrorCode::kConfig, "static directory not found: " + options.static_dir->string());
    }
}

}  // namespace hwdetect
