#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

#include "cli.hpp"
#include "hwdetect/engine.hpp"
#include "hwdetect/fixed_scorers.hpp"
#include "hwdetect/ngram_model.hpp"
#include "hwdetect/threshold_table.hpp"
#include "test_support.hpp"

using namespace hwdetect;
using hwdetect::testing::fixture;
using hwdetect::testing::read_file;
using hwdetect::testing::TempDir;
using nlohmann::json;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(const std::vector<std::string>& args, const std::string& input = "") {
    std::istringstream in(input);
    std::ostringstream out, err;
    const int code = cli::run_cli(args, in, out, err);
    return {code, out.str(), err.str()};
}

std::string trace_selector() { return "trace:" + fixture("trace228.json").string(); }

/// Sets an environment variable for the lifetime of the guard.
struct EnvGuard {
    std::string name;
    EnvGuard(std::string n, const std::string& value) : name(std::move(n)) {
        ::setenv(name.c_str(), value.c_str(), 1);
    }
    ~EnvGuard() { ::unsetenv(name.c_str()); }
};

}  // namespace

TEST(CliScore, WindowTableForTraceText) {
    const auto r = run({"score", "--file", fixture("text228.txt").string(), "--scorer", trace_selector(),
                        "--m-len", "64", "--stride", "32"});
    ASSERT_EQ(r.code, 0) << r.err;
    for (const char* row : {"0 64 64", "32 96 32", "192 228 4"}) {
        std::istringstream rows(r.out);
        std::string line;
        bool found = false;
        while (std::getline(rows, line)) {
            std::istringstream fields(line);
            std::string a, b, c;
            fields >> a >> b >> c;
            found |= a + " " + b + " " + c == row;
        }
        EXPECT_TRUE(found) << row << "\n" << r.out;
    }
    EXPECT_NE(r.out.find("perplexity: 11.10"), std::string::npos) << r.out;
}

TEST(CliScore, JsonEqualsDirectCall) {
    const auto r = run({"score", "--json", "--stdin", "--scorer", trace_selector(), "--m-len", "64",
                        "--stride", "32"},
                       read_file(fixture("text228.txt")));
    ASSERT_EQ(r.code, 0) << r.err;
    const auto scorer = TraceScorer::load(fixture("trace228.json"));
    EngineConfig config = default_engine_config(scorer.descriptor());
    config.m_len = 64;
    config.stride = 32;
    EXPECT_EQ(report_from_json(json::parse(r.out)),
              compute_perplexity(read_file(fixture("text228.txt")), scorer, config));
}

TEST(CliScore, ExitCodes) {
    auto r = run({"score", "--file", "/no/such/file.txt", "--scorer", "builtin:empty"});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("/no/such/file.txt"), std::string::npos);

    r = run({"score", "--stdin", "--scorer", "builtin:empty"}, "hello");
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("1 tokens"), std::string::npos);

    r = run({"score", "--stdin", "--scorer", "remote:http://127.0.0.1:1"}, "hello there");
    EXPECT_EQ(r.code, 3) << r.err;

    r = run({"score", "--stdin", "--scorer", "builtin:empty", "--m-len", "4", "--stride", "9"}, "a b c");
    EXPECT_EQ(r.code, 2);

    EXPECT_EQ(run({}).code, 2);
    EXPECT_EQ(run({"score", "--bogus"}).code, 2);
    EXPECT_EQ(run({"--help"}).code, 0);
}

TEST(CliScore, FlagBeatsEnvironment) {
    const auto text = read_file(fixture("lm_train.txt"));
    const EnvGuard env("HWDETECT_M_LEN", "16");
    auto r = run({"score", "--json", "--stdin", "--scorer", "builtin:empty"}, text);
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(json::parse(r.out).at("config").at("m_len"), 16);
    r = run({"score", "--json", "--stdin", "--scorer", "builtin:empty", "--m-len", "8"}, text);
    EXPECT_EQ(json::parse(r.out).at("config").at("m_len"), 8);
    EXPECT_EQ(json::parse(r.out).at("config").at("stride"), 4);
}

TEST(CliTrain, WritesSameModelAsLibrary) {
    TempDir dir;
    const auto r = run({"train-lm", "--text", fixture("lm_train.txt").string(), "--k", "0.01", "--out",
                        (dir / "m.json").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(NGramModel::load(dir / "m.json") == *hwdetect::testing::fixture_model());
}

TEST(CliCalibrate, SummaryCacheHitsAndPrecedence) {
    TempDir dir;
    std::filesystem::copy_file(fixture("corpus24.jsonl"), dir / "corpus.jsonl");
    hwdetect::testing::write_file(dir / "model.txt", read_file(fixture("lm_train.txt")));
    ASSERT_EQ(run({"train-lm", "--text", (dir / "model.txt").string(), "--out", (dir / "m.json").string()}).code, 0);

    // File asks for m_len 64 and a different output dir; the flag overrides the latter.
    const json config{{"corpus", (dir / "corpus.jsonl").string()},
                      {"scorer", "builtin:" + (dir / "m.json").string()},
                      {"m_len", 64},
                      {"output_dir", (dir / "ignored").string()}};
    hwdetect::testing::write_file(dir / "run.json", config.dump());
    const std::vector<std::string> args{"calibrate", "--config", (dir / "run.json").string(), "--out",
                                        (dir / "out").string()};
    auto r = run(args);
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("global thresholds (orig): auc="), std::string::npos) << r.out;
    EXPECT_NE(r.out.find(" f1="), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("cache hits: 0"), std::string::npos);
    EXPECT_TRUE(std::filesystem::exists(dir / "out" / "thresholds.json"));
    EXPECT_FALSE(std::filesystem::exists(dir / "ignored"));
    const auto table = ThresholdTable::load(dir / "out" / "thresholds.json");
    EXPECT_EQ(table.provenance().engine_config.at("m_len"), 64);

    r = run(args);
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("cache hits: 24"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("scored: 0"), std::string::npos) << r.out;
}

TEST(CliCalibrate, BadCorpusLineExitsTwoWithLine) {
    TempDir dir;
    hwdetect::testing::write_file(dir / "c.jsonl", read_file(fixture("corpus24.jsonl")) + "{oops\n");
    const auto r = run({"calibrate", "--corpus", (dir / "c.jsonl").string(), "--scorer", "builtin:empty",
                        "--out", (dir / "out").string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("[load]"), std::string::npos) << r.err;
    EXPECT_NE(r.err.find("line 37"), std::string::npos) << r.err;
}

TEST(CliThresholds, ListsAndFilters) {
    auto r = run({"thresholds", fixture("thresholds19.json").string(), "--method", "f1"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("orig/f1/knowledge/metacognitive"), std::string::npos);
    EXPECT_EQ(r.out.find("orig/auc/global"), std::string::npos);
    r = run({"thresholds", "--json", fixture("thresholds19.json").string()});
    EXPECT_EQ(ThresholdTable::from_json(json::parse(r.out)), ThresholdTable::load(fixture("thresholds19.json")));
}

TEST(CliEvaluate, ReportsForFixtureTable) {
    TempDir dir;
    auto r = run({"evaluate", "--corpus", fixture("corpus24.jsonl").string(), "--thresholds",
                  fixture("thresholds19.json").string(), "--scorer", "constant:3.0", "--format", "csv"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out.rfind("flavor,method,dimension,category,n,correct", 0), 0u);
    // exp(3) is about 20.1: above 19 (human) for the global auc cell.
    EXPECT_NE(r.out.find("orig,auc,global,,24,12,0.5000"), std::string::npos) << r.out;
}

TEST(CliCompare, RanksCandidates) {
    TempDir dir;
    ASSERT_EQ(run({"train-lm", "--text", fixture("lm_train.txt").string(), "--out", (dir / "m.json").string()}).code, 0);
    const auto r = run({"compare", "--json", "--scorer", "builtin:" + (dir / "m.json").string(), "--context",
                        "A hash table stores keys in an array of", "--candidate", "purple", "--candidate",
                        "buckets"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(json::parse(r.out)[0].at("candidate"), "buckets");
}
