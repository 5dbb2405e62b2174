#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#include "hwdetect/calibration.hpp"
#include "hwdetect/error.hpp"
#include "hwdetect/fixed_scorers.hpp"
#include "hwdetect/ngram_model.hpp"
#include "hwdetect/remote_scorer.hpp"
#include "hwdetect/service.hpp"
#include "test_support.hpp"

using namespace hwdetect;
using hwdetect::testing::fixture;
using hwdetect::testing::kCannedLowPplText;
using hwdetect::testing::LocalServer;
using hwdetect::testing::TempDir;
using nlohmann::json;

namespace {

std::shared_ptr<DetectorService> make_service() {
    auto scorer = std::make_shared<NGramScorer>(hwdetect::testing::fixture_model());
    auto table = std::make_shared<const ThresholdTable>(ThresholdTable::load(fixture("thresholds19.json")));
    return std::make_shared<DetectorService>(scorer, default_engine_config(scorer->descriptor()), table);
}

AnalyzeRequest request(std::string text) {
    AnalyzeRequest r;
    r.text = std::move(text);
    return r;
}

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error";
    return ErrorCode::kInternal;
}

}  // namespace

TEST(DetectorService, DefaultKeyVerdict) {
    const auto service = make_service();
    const auto v = service->analyze(request(kCannedLowPplText));
    EXPECT_EQ(v.origin, Source::kAi);
    EXPECT_EQ(v.threshold, 19.0);
    EXPECT_EQ(v.threshold_key, make_key("orig", "auc", "global", ""));
    EXPECT_EQ(v.margin, v.perplexity - 19.0);
    const auto direct = compute_perplexity(kCannedLowPplText, service->scorer(), service->engine());
    EXPECT_EQ(v.perplexity, direct.perplexity);
    EXPECT_EQ(v.windows, direct.windows);
    EXPECT_EQ(v.origin, classify(v.perplexity, v.threshold));
}

TEST(DetectorService, MarginSignMatchesOrigin) {
    auto table = std::make_shared<const ThresholdTable>(ThresholdTable::load(fixture("thresholds19.json")));
    for (const double nll : {1.0, 2.5, std::log(19.0), 3.5}) {
        auto scorer = std::make_shared<ConstantScorer>(nll);
        DetectorService service(scorer, default_engine_config(scorer->descriptor()), table);
        const auto v = service.analyze(request("some words to score here"));
        EXPECT_EQ(v.margin < 0, v.origin == Source::kAi) << nll;
    }
}

TEST(DetectorService, ExplicitCategories) {
    const auto service = make_service();
    auto r = request(kCannedLowPplText);
    r.method = ThresholdMethod::kF1;
    r.dimension = Dimension::kKnowledge;
    r.categories = {"metacognitive"};
    EXPECT_EQ(service->analyze(r).threshold, 19.0);

    r.method = ThresholdMethod::kAuc;
    r.dimension = Dimension::kCognitive;
    r.categories = {"create", "apply"};
    const auto v = service->analyze(r);
    EXPECT_EQ(v.threshold, (20.0 + 22.5) / 2.0);
    EXPECT_EQ(v.categories, (std::vector<std::string>{"apply", "create"}));
    EXPECT_EQ(to_json(v).at("threshold_key").at("category"), json({"apply", "create"}));
}

TEST(DetectorService, ErrorCodes) {
    const auto service = make_service();
    EXPECT_EQ(code_of([&] { service->analyze(request("")); }), ErrorCode::kInputTooShort);
    auto r = request(kCannedLowPplText);
    r.flavor = Flavor::kMin250;
    EXPECT_EQ(code_of([&] { service->analyze(r); }), ErrorCode::kNotFound);
    r = request(kCannedLowPplText);
    r.dimension = Dimension::kKnowledge;
    r.categories = {"factual", "conceptual"};
    EXPECT_EQ(code_of([&] { service->analyze(r); }), ErrorCode::kUsage);
    EXPECT_EQ(code_of([&] { service->analyze(request(std::string(kMaxTextBytes + 1, 'a'))); }),
              ErrorCode::kTooLarge);

    auto scorer = std::make_shared<ConstantScorer>(1.0);
    DetectorService empty(scorer, default_engine_config(scorer->descriptor()));
    EXPECT_EQ(code_of([&] { empty.thresholds(); }), ErrorCode::kUnavailable);
    EXPECT_EQ(code_of([&] { empty.analyze(request("two words")); }), ErrorCode::kUnavailable);
}

TEST(DetectorService, ReloadKeepsOldTableOnFailure) {
    const auto service = make_service();
    TempDir dir;
    hwdetect::testing::write_file(dir / "bad.json", "{ not json");
    EXPECT_THROW(service->reload_thresholds(dir / "bad.json"), Error);
    EXPECT_EQ(service->thresholds()->size(), 5u);

    auto doc = service->thresholds()->to_json();
    doc["entries"][0]["threshold"] = 30.0;
    hwdetect::testing::write_file(dir / "new.json", doc.dump());
    service->reload_thresholds(dir / "new.json");
    EXPECT_EQ(service->analyze(request(kCannedLowPplText)).threshold, 30.0);
}

TEST(DetectorService, ConcurrentReloadGivesConsistentVerdicts) {
    const auto service = make_service();
    TempDir dir;
    auto doc = service->thresholds()->to_json();
    const auto original = dir / "a.json";
    hwdetect::testing::write_file(original, doc.dump());
    doc["entries"][0]["threshold"] = 30.0;
    const auto changed = dir / "b.json";
    hwdetect::testing::write_file(changed, doc.dump());

    std::atomic<bool> stop{false};
    std::thread reloader([&] {
        for (int i = 0; !stop; ++i) service->reload_thresholds(i % 2 ? original : changed);
    });
    for (int i = 0; i < 200; ++i) {
        const auto v = service->analyze(request(kCannedLowPplText));
        ASSERT_TRUE(v.threshold == 19.0 || v.threshold == 30.0);
        ASSERT_EQ(v.margin, v.perplexity - v.threshold);
    }
    stop = true;
    reloader.join();
}

TEST(ServiceHttp, Endpoints) {
    const auto service = make_service();
    LocalServer server;
    mount_service_endpoints(server.server, service);
    server.start();
    auto client = server.client();

    auto res = client.Get("/healthz");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 200);
    EXPECT_EQ(json::parse(res->body), json({{"status", "ok"}, {"scorer", service->scorer().descriptor().name}}));

    res = client.Post("/api/v1/analyze", json{{"text", kCannedLowPplText}}.dump(), "application/json");
    ASSERT_TRUE(res);
    ASSERT_EQ(res->status, 200) << res->body;
    const auto verdict = json::parse(res->body);
    EXPECT_EQ(verdict.at("origin"), "ai");
    EXPECT_EQ(verdict.at("threshold_key"),
              json({{"flavor", "orig"}, {"method", "auc"}, {"dimension", "global"}, {"category", nullptr}}));
    const auto direct = compute_perplexity(kCannedLowPplText, service->scorer(), service->engine());
    EXPECT_EQ(verdict.at("perplexity").get<double>(), direct.perplexity);

    const auto status = [&](const json& body) {
        auto r = client.Post("/api/v1/analyze", body.dump(), "application/json");
        return r ? r->status : -1;
    };
    EXPECT_EQ(status({{"text", "one"}}), 422);
    EXPECT_EQ(status({{"text", kCannedLowPplText}, {"flavor", "no_code"}}), 404);
    EXPECT_EQ(status({{"text", kCannedLowPplText}, {"flavor", "raw"}}), 400);
    EXPECT_EQ(status({{"text", kCannedLowPplText}, {"category", "apply"}}), 400);
    EXPECT_EQ(status({{"text", std::string(kMaxTextBytes + 10, 'x')}}), 413);
    res = client.Post("/api/v1/analyze", "nope", "application/json");
    EXPECT_EQ(res->status, 400);
    res = client.Post("/api/v1/analyze", json{{"text", "x"}}.dump(), "application/json");
    EXPECT_EQ(json::parse(res->body).at("error").at("token_count"), 1);

    res = client.Get("/api/v1/thresholds");
    EXPECT_EQ(json::parse(res->body), service->thresholds()->to_json());

    res = client.Post("/api/v1/reload", json{{"path", fixture("thresholds19.json").string()}}.dump(),
                      "application/json");
    EXPECT_EQ(json::parse(res->body), json({{"ok", true}}));
    res = client.Post("/api/v1/reload", json{{"path", "/no/such/file.json"}}.dump(), "application/json");
    EXPECT_EQ(res->status, 400);
}

TEST(ServiceHttp, ScorerDownIs503) {
    auto remote_backend = std::make_shared<NGramScorer>(hwdetect::testing::fixture_model());
    auto backend = std::make_unique<LocalServer>();
    mount_scorer_endpoints(backend->server, remote_backend);
    backend->start();
    auto remote = std::make_shared<RemoteScorer>(backend->url(), std::chrono::milliseconds(500));
    auto table = std::make_shared<const ThresholdTable>(ThresholdTable::load(fixture("thresholds19.json")));
    auto service = std::make_shared<DetectorService>(remote, default_engine_config(remote->descriptor()), table);
    backend.reset();

    LocalServer server;
    mount_service_endpoints(server.server, service);
    server.start();
    auto res = server.client().Post("/api/v1/analyze", json{{"text", kCannedLowPplText}}.dump(),
                                    "application/json");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 503);
}

TEST(ServiceHttp, NoTableIs503) {
    auto scorer = std::make_shared<ConstantScorer>(1.0);
    auto service = std::make_shared<DetectorService>(scorer, default_engine_config(scorer->descriptor()));
    LocalServer server;
    mount_service_endpoints(server.server, service);
    server.start();
    auto res = server.client().Get("/api/v1/thresholds");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 503);
}
