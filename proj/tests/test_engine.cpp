#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "hwdetect/engine.hpp"
#include "hwdetect/error.hpp"
#include "hwdetect/fixed_scorers.hpp"
#include "hwdetect/ngram_model.hpp"
#include "test_support.hpp"

using namespace hwdetect;
using hwdetect::testing::fixture;
using hwdetect::testing::read_file;

namespace {

EngineConfig config(std::size_t m_len, std::size_t stride,
                    WindowAdvance advance = WindowAdvance::kStride) {
    EngineConfig c;
    c.m_len = m_len;
    c.stride = stride;
    c.advance = advance;
    return c;
}

std::vector<std::tuple<std::size_t, std::size_t, std::size_t>> triples(
    const std::vector<WindowSpan>& windows) {
    std::vector<std::tuple<std::size_t, std::size_t, std::size_t>> out;
    for (const auto& w : windows) out.emplace_back(w.begin_loc, w.end_loc, w.trg_len);
    return out;
}

/// Returns NaN for every window.
class NanScorer final : public Scorer {
public:
    const ScorerDescriptor& descriptor() const override { return descriptor_; }
    TokenSequence tokenize(std::string_view text) const override {
        return ConstantScorer(1.0).tokenize(text);
    }

protected:
    double mean_nll(std::span<const TokenId>, std::size_t) const override {
        return std::numeric_limits<double>::quiet_NaN();
    }

private:
    ScorerDescriptor descriptor_{"nan", 1 << 20, 1024};
};

}  // namespace

TEST(Schedule, ShortTextWindowTrace) {
    using T = std::tuple<std::size_t, std::size_t, std::size_t>;
    EXPECT_EQ(triples(schedule_windows(228, config(64, 32))),
              (std::vector<T>{{0, 64, 64}, {32, 96, 32}, {64, 128, 32}, {96, 160, 32},
                              {128, 192, 32}, {160, 224, 32}, {192, 228, 4}}));
}

TEST(Schedule, LongTextTail) {
    const auto w = triples(schedule_windows(825, config(64, 32)));
    ASSERT_GE(w.size(), 3u);
    using T = std::tuple<std::size_t, std::size_t, std::size_t>;
    EXPECT_EQ(std::vector<T>(w.end() - 3, w.end()),
              (std::vector<T>{{704, 768, 32}, {736, 800, 32}, {768, 825, 25}}));
}

TEST(Schedule, SingleWindowWhenTextFits) {
    const auto w = schedule_windows(10, config(64, 32));
    ASSERT_EQ(w.size(), 1u);
    EXPECT_EQ(w[0], (WindowSpan{0, 10, 10}));
}

TEST(Schedule, MaxLengthAdvanceGivesDisjointWindows) {
    using T = std::tuple<std::size_t, std::size_t, std::size_t>;
    EXPECT_EQ(triples(schedule_windows(150, config(64, 32, WindowAdvance::kMaxLength))),
              (std::vector<T>{{0, 64, 64}, {64, 128, 64}, {128, 150, 22}}));
}

TEST(Schedule, TargetsTileTheSequence) {
    for (const auto& c : {config(64, 32), config(8, 3), config(5, 5), config(7, 1),
                          config(16, 4, WindowAdvance::kMaxLength)}) {
        for (std::size_t n = 1; n <= 300; ++n) {
            std::size_t covered = 0;
            for (const auto& w : schedule_windows(n, c)) {
                ASSERT_GE(w.trg_len, 1u);
                ASSERT_LE(w.end_loc - w.begin_loc, c.m_len);
                ASSERT_LE(w.trg_len, w.end_loc - w.begin_loc);
                ASSERT_EQ(w.end_loc - w.trg_len, covered) << "gap or overlap at n=" << n;
                covered = w.end_loc;
            }
            ASSERT_EQ(covered, n);
        }
    }
}

TEST(Schedule, RejectsBadConfig) {
    EXPECT_THROW(schedule_windows(10, config(4, 0)), Error);
    EXPECT_THROW(schedule_windows(10, config(4, 5)), Error);
    EXPECT_THROW(schedule_windows(0, config(4, 2)), InputTooShortError);
    EXPECT_THROW(validate_engine_config(config(2048, 1024), 1024), Error);
}

TEST(Aggregate, WindowMeanAndTokenWeighted) {
    const std::vector<WindowScore> w{{0, 4, 4, 1.0}, {2, 6, 2, 3.0}};
    EXPECT_DOUBLE_EQ(aggregate_perplexity(w, Aggregation::kWindowMean), std::exp(2.0));
    EXPECT_DOUBLE_EQ(aggregate_perplexity(w, Aggregation::kTokenWeighted),
                     std::exp((4 * 1.0 + 2 * 3.0) / 6.0));
}

TEST(ComputePerplexity, TableTraceReplay) {
    const auto scorer = TraceScorer::load(fixture("trace228.json"));
    const auto report =
        compute_perplexity(read_file(fixture("text228.txt")), scorer, config(64, 32));
    ASSERT_EQ(report.token_count, 228u);
    ASSERT_EQ(report.windows.size(), 7u);
    // Independent hand sum of the seven NLLs: 16.851 / 7.
    EXPECT_NEAR(report.perplexity, std::exp(16.851 / 7.0), 1e-9);
    EXPECT_NEAR(report.perplexity, 11.10, 0.01);
}

TEST(ComputePerplexity, ConstantScorerGivesExpOfConstant) {
    const ConstantScorer scorer(std::log(42.0));
    const auto report = compute_perplexity("one two three four five six seven", scorer, config(3, 2));
    EXPECT_NEAR(report.perplexity, 42.0, 1e-9);
}

TEST(ComputePerplexity, ThreadedMatchesSerialBitForBit) {
    const NGramScorer scorer(hwdetect::testing::fixture_model());
    const auto text = read_file(fixture("lm_train.txt"));
    const auto serial = compute_perplexity(text, scorer, config(16, 5));
    const auto threaded = compute_perplexity(text, scorer, config(16, 5), 4);
    EXPECT_EQ(serial, threaded);
}

TEST(ComputePerplexity, TooShortInputs) {
    const ConstantScorer scorer(1.0);
    for (const char* text : {"", "   ", "word"}) {
        try {
            compute_perplexity(text, scorer, config(4, 2));
            FAIL() << text;
        } catch (const InputTooShortError& e) {
            EXPECT_LT(e.token_count(), kMinTokens);
            EXPECT_EQ(e.code(), ErrorCode::kInputTooShort);
        }
    }
}

TEST(ComputePerplexity, NonFiniteNllIsNumericError) {
    const NanScorer scorer;
    try {
        compute_perplexity("a b c d e f", scorer, config(4, 2));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::kNumeric);
        EXPECT_NE(std::string(e.what()).find("window"), std::string::npos);
    }
}

TEST(ComputePerplexity, ReportJsonRoundTrip) {
    const auto scorer = TraceScorer::load(fixture("trace228.json"));
    const auto report =
        compute_perplexity(read_file(fixture("text228.txt")), scorer, config(64, 32));
    const auto doc = to_json(report);
    EXPECT_EQ(report_from_json(nlohmann::json::parse(doc.dump())), report);
    EXPECT_EQ(doc.at("windows").size(), 7u);
    EXPECT_EQ(doc.at("config").at("advance"), "stride");
}

TEST(ComputePerplexity, UniformModelLaw) {
    NGramOptions options;
    options.synthetic_vocab_size = 256;
    const NGramScorer scorer(
        std::make_shared<const NGramModel>(NGramModel::train(std::vector<std::string>{}, options)));
    std::mt19937 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        std::string text;
        const auto n = 2 + rng() % 400;
        for (std::size_t i = 0; i < n; ++i) text += "w" + std::to_string(rng() % 50) + " ";
        const auto report = compute_perplexity(text, scorer, default_engine_config(scorer.descriptor()));
        EXPECT_NEAR(report.perplexity / 256.0, 1.0, 1e-9);
    }
}

TEST(CompareCandidates, RanksByPerplexity) {
    const NGramScorer scorer(hwdetect::testing::fixture_model());
    const auto ranked = compare_candidates("A hash table stores keys in an array of",
                                           {"elephants", "buckets", "purple"}, scorer,
                                           default_engine_config(scorer.descriptor()));
    ASSERT_EQ(ranked.size(), 3u);
    EXPECT_EQ(ranked.front().candidate, "buckets");
    for (std::size_t i = 1; i < ranked.size(); ++i) {
        EXPECT_LE(ranked[i - 1].perplexity, ranked[i].perplexity);
    }
    EXPECT_THROW(compare_candidates("context", {}, scorer, default_engine_config(scorer.descriptor())),
                 Error);
}

TEST(EngineConfig, DefaultsAndParsing) {
    const auto c = default_engine_config({"x", 100, 1024});
    EXPECT_EQ(c.m_len, 1024u);
    EXPECT_EQ(c.stride, 512u);
    EXPECT_EQ(parse_window_advance("m_len"), WindowAdvance::kMaxLength);
    EXPECT_EQ(parse_aggregation("token_weighted"), Aggregation::kTokenWeighted);
    EXPECT_THROW(parse_aggregation("median"), Error);
    EXPECT_EQ(engine_config_from_json(to_json(c)), c);
}
