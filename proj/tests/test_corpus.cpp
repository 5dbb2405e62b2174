#include <gtest/gtest.h>

#include <set>

#include "hwdetect/corpus.hpp"
#include "hwdetect/error.hpp"
#include "hwdetect/text.hpp"
#include "test_support.hpp"

using namespace hwdetect;
using hwdetect::testing::fixture;
using hwdetect::testing::TempDir;

namespace {

std::vector<std::string> ids(const Corpus& c) {
    std::vector<std::string> out;
    for (const auto& r : c.responses()) out.push_back(r.id);
    return out;
}

std::vector<std::string> all_but(std::set<std::string> drop) {
    std::vector<std::string> out;
    for (int i = 1; i <= 24; ++i) {
        char id[8];
        std::snprintf(id, sizeof id, "r%02d", i);
        if (!drop.contains(id)) out.push_back(id);
    }
    return out;
}

const std::string kQuestion =
    R"({"kind":"question","question_id":"q1","knowledge":"factual","cognitive":["apply"]})";

ValidationError parse_error(const std::string& jsonl) {
    try {
        parse_corpus(jsonl);
    } catch (const ValidationError& e) {
        return e;
    }
    ADD_FAILURE() << "no error for: " << jsonl;
    return ValidationError(0, "", "");
}

}  // namespace

TEST(Corpus, LoadsFixture) {
    const auto c = load_corpus(fixture("corpus24.jsonl"));
    EXPECT_EQ(c.size(), 24u);
    EXPECT_EQ(c.questions().size(), 12u);
    const auto* r07 = c.find_response("r07");
    ASSERT_NE(r07, nullptr);
    EXPECT_EQ(c.question_for(*r07).knowledge, Knowledge::kMetacognitive);
    EXPECT_EQ(cached_perplexity(*r07, "fixture"), 36.0);
    EXPECT_EQ(cached_perplexity(*r07, "other"), std::nullopt);
}

TEST(Flavor, HandListedSubsets) {
    const auto c = load_corpus(fixture("corpus24.jsonl"));
    EXPECT_EQ(ids(apply_flavor(c, Flavor::kOrig)), all_but({}));
    // r05 and r07 are 249 characters (r07 is 251 bytes); r06 is exactly 250.
    EXPECT_EQ(ids(apply_flavor(c, Flavor::kMin250)),
              all_but({"r04", "r05", "r07", "r11", "r12", "r16", "r21"}));
    EXPECT_EQ(ids(apply_flavor(c, Flavor::kNoMath)),
              all_but({"r03", "r04", "r09", "r10", "r17", "r18"}));
    EXPECT_EQ(ids(apply_flavor(c, Flavor::kNoCode)),
              all_but({"r05", "r06", "r09", "r10", "r19", "r20"}));
    EXPECT_EQ(ids(apply_flavor(c, Flavor::kNoMathNoCode)),
              all_but({"r03", "r04", "r05", "r06", "r09", "r10", "r17", "r18", "r19", "r20"}));
}

TEST(Flavor, BoundaryCountsScalarValues) {
    const auto c = load_corpus(fixture("corpus24.jsonl"));
    EXPECT_EQ(count_scalar_values(c.find_response("r06")->text), 250u);
    EXPECT_GT(c.find_response("r07")->text.size(), 250u);
    EXPECT_TRUE(passes_flavor(c, *c.find_response("r06"), Flavor::kMin250));
    EXPECT_FALSE(passes_flavor(c, *c.find_response("r07"), Flavor::kMin250));
}

TEST(Flavor, NoMathNoCodeIsIntersection) {
    const auto c = load_corpus(fixture("corpus24.jsonl"));
    for (const auto& r : c.responses()) {
        EXPECT_EQ(passes_flavor(c, r, Flavor::kNoMathNoCode),
                  passes_flavor(c, r, Flavor::kNoMath) && passes_flavor(c, r, Flavor::kNoCode));
    }
}

TEST(Corpus, SerializeRoundTripsAndHashIsStable) {
    const auto c = load_corpus(fixture("corpus24.jsonl"));
    const auto text = serialize_corpus(c);
    EXPECT_EQ(parse_corpus(text), c);
    EXPECT_EQ(serialize_corpus(parse_corpus(text)), text);
    EXPECT_EQ(corpus_hash(c).size(), 64u);

    TempDir dir;
    save_corpus(c, dir / "c.jsonl");
    EXPECT_EQ(load_corpus(dir / "c.jsonl"), c);
}

TEST(Corpus, ErrorsNameLineAndField) {
    auto e = parse_error(kQuestion + "\n" +
                         R"({"kind":"response","id":"a","question_id":"q1","text":"hi","source":"robot"})");
    EXPECT_EQ(e.line(), 2u);
    EXPECT_EQ(e.field(), "source");

    e = parse_error(R"({"kind":"question","question_id":"q1","knowledge":"factual,conceptual"})");
    EXPECT_EQ(e.field(), "knowledge");
    EXPECT_NE(std::string(e.what()).find("single"), std::string::npos);

    e = parse_error(kQuestion + "\n\n" +
                    R"({"kind":"response","id":"a","question_id":"q9","text":"hi","source":"ai"})");
    EXPECT_EQ(e.line(), 3u);
    EXPECT_EQ(e.field(), "question_id");

    e = parse_error(kQuestion + "\nnot json");
    EXPECT_EQ(e.line(), 2u);

    e = parse_error(kQuestion + "\n" +
                    R"({"kind":"response","id":"a","question_id":"q1","text":"","source":"ai"})");
    EXPECT_EQ(e.field(), "text");

    e = parse_error(kQuestion + "\n" +
                    R"({"kind":"response","id":"a","question_id":"q1","text":"x","source":"ai","ppl_cache":{"k":-1}})");
    EXPECT_EQ(e.field(), "ppl_cache.k");

    const std::string response =
        R"({"kind":"response","id":"a","question_id":"q1","text":"x","source":"ai"})";
    e = parse_error(kQuestion + "\n" + response + "\n" + response);
    EXPECT_EQ(e.field(), "id");
}

TEST(Split, StratifiedDeterministicAndOrdered) {
    const auto c = load_corpus(fixture("corpus24.jsonl"));
    const auto [train, test] = split(c, 0.75, 42);
    EXPECT_EQ(train.size(), 18u);
    EXPECT_EQ(test.size(), 6u);

    auto count = [](const Corpus& part, Source s) {
        std::size_t n = 0;
        for (const auto& r : part.responses()) n += r.source == s;
        return n;
    };
    EXPECT_EQ(count(train, Source::kHuman), 9u);
    EXPECT_EQ(count(test, Source::kAi), 3u);

    std::set<std::string> seen;
    for (const auto& id : ids(train)) seen.insert(id);
    for (const auto& id : ids(test)) EXPECT_TRUE(seen.insert(id).second) << id;
    EXPECT_EQ(seen.size(), 24u);

    for (const auto* part : {&train, &test}) {
        const auto v = ids(*part);
        EXPECT_TRUE(std::is_sorted(v.begin(), v.end()));
    }

    const auto again = split(c, 0.75, 42);
    EXPECT_EQ(again.first, train);
    EXPECT_NE(ids(split(c, 0.75, 7).second), ids(test));
}

TEST(Split, Preconditions) {
    const auto c = load_corpus(fixture("corpus24.jsonl"));
    EXPECT_THROW(split(c, 0.0, 1), Error);
    EXPECT_THROW(split(c, 1.0, 1), Error);
    const auto one_ai = c.with_responses({c.responses()[0], c.responses()[1], c.responses()[2]});
    try {
        split(one_ai, 0.5, 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::kStratification);
    }
}

TEST(Split, ClampsSoBothSidesKeepEachClass) {
    const auto c = load_corpus(fixture("corpus24.jsonl"));
    const auto [train, test] = split(c, 0.99, 3);
    EXPECT_EQ(test.size(), 2u);
}
