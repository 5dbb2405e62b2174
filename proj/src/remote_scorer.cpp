#include "hwdetect/remote_scorer.hpp"

#include <httplib.h>

#include <cmath>
#include <nlohmann/json.hpp>

#include "hwdetect/error.hpp"

namespace hwdetect {
namespace {

using nlohmann::json;

json parse_body(const std::string& body, const std::string& what) {
    try {
        return json::parse(body);
    } catch (const json::exception& e) {
        throw TransportError(200, "malformed " + what + " response: " + e.what());
    }
}

// Error bodies produced by mount_scorer_endpoints carry a code so that
// contract violations survive the round trip.
[[noreturn]] void throw_for_status(int status, const std::string& body) {
    try {
        const auto doc = json::parse(body);
        const auto code = doc.at("error").at("code").get<std::string>();
        const auto message = doc.at("error").at("message").get<std::string>();
        if (code == to_string(ErrorCode::kContract)) throw Error(ErrorCode::kContract, message);
        if (code == to_string(ErrorCode::kWindowSize)) throw Error(ErrorCode::kWindowSize, message);
        throw TransportError(status, message);
    } catch (const json::exception&) {
        throw TransportError(status, body.substr(0, 200));
    }
}

httplib::Client make_client(const std::string& base_url, std::chrono::milliseconds timeout) {
    httplib::Client client(base_url);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    return client;
}

void reply_error(httplib::Response& res, int status, ErrorCode code, const std::string& message) {
    res.status = status;
    res.set_content(json{{"error", {{"code", to_string(code)}, {"message", message}}}}.dump(),
                    "application/json");
}

}  // namespace

RemoteScorer::RemoteScorer(std::string base_url, std::chrono::milliseconds timeout)
    : base_url_(std::move(base_url)), timeout_(timeout) {
    auto client = make_client(base_url_, timeout_);
    auto res = client.Get("/v1/descriptor");
    if (!res) throw TransportError(0, base_url_ + ": " + httplib::to_string(res.error()));
    if (res->status != 200) throw_for_status(res->status, res->body);
    const auto doc = parse_body(res->body, "descriptor");
    try {
        descriptor_.name = doc.at("name").get<std::string>();
        descriptor_.vocab_size = doc.at("vocab_size").get<std::size_t>();
        descriptor_.max_window = doc.at("max_window").get<std::size_t>();
    } catch (const json::exception& e) {
        throw TransportError(200, std::string("bad descriptor: ") + e.what());
    }
    validate_descriptor(descriptor_);
}

std::string RemoteScorer::post(const std::string& path, const std::string& body) const {
    auto client = make_client(base_url_, timeout_);
    auto res = client.Post(path, body, "application/json");
    if (!res) throw TransportError(0, base_url_ + path + ": " + httplib::to_string(res.error()));
    if (res->status != 200) throw_for_status(res->status, res->body);
    return res->body;
}

TokenSequence RemoteScorer::tokenize(std::string_view text) const {
    const auto doc = parse_body(post("/v1/tokenize", json{{"text", text}}.dump()), "tokenize");
    TokenSequence seq;
    try {
        seq.ids = doc.at("ids").get<std::vector<TokenId>>();
        if (doc.contains("tokens")) seq.surface = doc.at("tokens").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw TransportError(200, std::string("bad tokenize response: ") + e.what());
    }
    if (!seq.surface.empty() && seq.surface.size() != seq.ids.size()) {
        throw TransportError(200, "tokenize response has mismatched ids/tokens lengths");
    }
    return seq;
}

double RemoteScorer::mean_nll(std::span<const TokenId> window, std::size_t target_len) const {
    const json request{{"ids", std::vector<TokenId>(window.begin(), window.end())},
                       {"target_len", target_len}};
    const auto doc = parse_body(post("/v1/score_window", request.dump()), "score_window");
    try {
        if (doc.at("target_tokens").get<std::size_t>() != target_len) {
            throw TransportError(200, "score_window scored a different number of tokens");
        }
        // null is how JSON carries a non-finite value; the engine rejects it.
        const auto& value = doc.at("mean_nll");
        return value.is_null() ? std::nan("") : value.get<double>();
    } catch (const json::exception& e) {
        throw TransportError(200, std::string("bad score_window response: ") + e.what());
    }
}

void mount_scorer_endpoints(httplib::Server& server, std::shared_ptr<const Scorer> scorer) {
    server.Get("/v1/descriptor", [scorer](const httplib::Request&, httplib::Response& res) {
        const auto& d = scorer->descriptor();
        res.set_content(
            json{{"name", d.name}, {"vocab_size", d.vocab_size}, {"max_window", d.max_window}}
                .dump(),
            "application/json");
    });

    server.Post("/v1/tokenize", [scorer](const httplib::Request& req, httplib::Response& res) {
        try {
            const auto body = json::parse(req.body);
            const auto seq = scorer->tokenize(body.at("text").get<std::string>());
            res.set_content(json{{"ids", seq.ids}, {"tokens", seq.surface}}.dump(),
                            "application/json");
        } catch (const json::exception& e) {
            reply_error(res, 400, ErrorCode::kUsage, e.what());
        } catch (const Error& e) {
            reply_error(res, 400, e.code(), e.what());
        }
    });

    server.Post("/v1/score_window", [scorer](const httplib::Request& req, httplib::Response& res) {
        try {
            const auto body = json::parse(req.body);
            const auto ids = body.at("ids").get<std::vector<TokenId>>();
            const auto target_len = body.at("target_len").get<std::size_t>();
            const double nll = scorer->score_window(ids, target_len);
            json out{{"target_tokens", target_len}};
            out["mean_nll"] = std::isfinite(nll) ? json(nll) : json(nullptr);
            res.set_content(out.dump(), "application/json");
        } catch (const json::exception& e) {
            reply_error(res, 400, ErrorCode::kUsage, e.what());
        } catch (const Error& e) {
            reply_error(res, 400, e.code(), e.what());
        }
    });
}

}  // namespace hwdetect
