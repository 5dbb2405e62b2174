#include <gtest/gtest.h>

#include <sstream>

#include "hwdetect/calibration.hpp"
#include "hwdetect/error.hpp"
#include "hwdetect/evaluation.hpp"
#include "test_support.hpp"

using namespace hwdetect;
using hwdetect::testing::fixture;

namespace {

struct Fixture {
    Corpus corpus = load_corpus(fixture("corpus24.jsonl"));
    ThresholdTable table = calibrate_table(corpus, "fixture", CalibrationRequest{}, {});
};

std::vector<ThresholdKey> covered_cells(const ThresholdTable& table) {
    std::vector<ThresholdKey> out;
    for (const auto& k : table_cells(table)) {
        if (table.find({k.flavor, k.method, Dimension::kGlobal, ""})) out.push_back(k);
    }
    return out;
}

}  // namespace

TEST(Evaluate, MatchesIndependentRecount) {
    const Fixture f;
    const auto report = evaluate(f.corpus, "fixture", f.table, covered_cells(f.table));
    ASSERT_FALSE(report.cells.empty());

    for (const auto& cell : report.cells) {
        std::size_t n = 0, correct = 0;
        for (const auto& r : f.corpus.responses()) {
            if (!passes_flavor(f.corpus, r, cell.key.flavor)) continue;
            const auto& q = f.corpus.question_for(r);
            bool member = true;
            if (cell.key.dimension == Dimension::kKnowledge) {
                member = to_string(q.knowledge) == cell.key.category;
            } else if (cell.key.dimension == Dimension::kCognitive) {
                member = q.cognitive.contains(*parse_cognitive(cell.key.category));
            }
            if (!member) continue;
            ++n;
            const double ppl = r.ppl_cache.at("fixture");
            const Source predicted = ppl < cell.threshold ? Source::kAi : Source::kHuman;
            correct += predicted == r.source;
        }
        EXPECT_EQ(cell.n, n) << to_string(cell.key);
        EXPECT_EQ(cell.correct, correct) << to_string(cell.key);
        EXPECT_DOUBLE_EQ(cell.accuracy, static_cast<double>(correct) / static_cast<double>(n));
        EXPECT_EQ(cell.low_n, n < kLowConfidenceN);
        const double base = report.baselines.at({cell.key.flavor, cell.key.method});
        EXPECT_DOUBLE_EQ(cell.delta, cell.accuracy - base);
        if (cell.key.dimension == Dimension::kGlobal) {
            EXPECT_EQ(cell.delta, 0.0);
        }
    }
}

TEST(Evaluate, MissingCellIsCoverageError) {
    const Fixture f;
    ThresholdTable sparse;
    sparse.insert(make_key("orig", "auc", "knowledge", "factual"), {20.0, 1.0});
    try {
        evaluate(f.corpus, "fixture", sparse, table_cells(sparse));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::kCoverage);
        EXPECT_NE(std::string(e.what()).find("orig/auc/global"), std::string::npos);
    }
}

TEST(Evaluate, EmptyCellsAreSkipped) {
    const Fixture f;
    const auto only_q01 = f.corpus.with_responses({f.corpus.responses()[0], f.corpus.responses()[1]});
    const auto report = evaluate(only_q01, "fixture", f.table, covered_cells(f.table));
    EXPECT_FALSE(report.skipped.empty());
    for (const auto& cell : report.cells) EXPECT_TRUE(cell.low_n);
}

TEST(EmitReport, CsvHasOneRowPerCell) {
    const Fixture f;
    const auto report = evaluate(f.corpus, "fixture", f.table, covered_cells(f.table));
    const auto csv = emit_report(report, ReportFormat::kCsv);
    std::istringstream in(csv);
    std::string line;
    std::size_t rows = 0;
    std::getline(in, line);
    EXPECT_EQ(line, "flavor,method,dimension,category,n,correct,accuracy,balanced_accuracy,delta,low_n");
    while (std::getline(in, line)) {
        ++rows;
        EXPECT_EQ(std::count(line.begin(), line.end(), ','), 9) << line;
    }
    EXPECT_EQ(rows, report.cells.size());
}

TEST(EmitReport, MarkdownColumnsAndJsonRoundTrip) {
    const Fixture f;
    const auto report = evaluate(f.corpus, "fixture", f.table, covered_cells(f.table));
    const auto md = emit_report(report, ReportFormat::kMarkdown);
    EXPECT_NE(md.find("| flavor | method | dimension | category | n | accuracy | delta |"),
              std::string::npos);
    const auto doc = nlohmann::json::parse(emit_report(report, ReportFormat::kJson));
    EXPECT_EQ(accuracy_report_from_json(doc), report);
    EXPECT_EQ(parse_report_format("md"), ReportFormat::kMarkdown);
    EXPECT_THROW(parse_report_format("xlsx"), Error);
}
