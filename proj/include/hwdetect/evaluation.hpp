#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "hwdetect/corpus.hpp"
#include "hwdetect/threshold_table.hpp"

namespace hwdetect {

/// Cells with fewer test responses than this are flagged low-confidence.
inline constexpr std::size_t kLowConfidenceN = 3;

struct AccuracyCell {
    ThresholdKey key;
    double threshold = 0.0;
    std::size_t n = 0;
    std::size_t correct = 0;
    double accuracy = 0.0;
    /// Mean of per-class recall; absent when the cell holds a single class.
    std::optional<double> balanced_accuracy;
    /// accuracy minus the global baseline for the same (flavor, method).
    double delta = 0.0;
    bool low_n = false;

    bool operator==(const AccuracyCell&) const = default;
};

struct AccuracyReport {
    std::vector<AccuracyCell> cells;
    std::map<std::pair<Flavor, ThresholdMethod>, double> baselines;
    /// Requested cells with no test responses in their flavor/category.
    std::vector<ThresholdKey> skipped;
    nlohmann::json provenance = nlohmann::json::object();

    bool operator==(const AccuracyReport&) const = default;
};

/// Every key present in the table, in table order.
std::vector<ThresholdKey> table_cells(const ThresholdTable& table);

/// Classifies each member of every requested cell with that cell's threshold
/// and compares against the source label. The baseline for (flavor, method)
/// is the global threshold applied to the whole flavored test set.
///
/// Errors: Error(kCoverage) listing the first requested cell (or its global
/// baseline) missing from the table; Error(kStaleCache) for an unscored
/// response.
AccuracyReport evaluate(const Corpus& test, const std::string& cache_key,
                        const ThresholdTable& table, const std::vector<ThresholdKey>& cells);

enum class ReportFormat { kJson, kCsv, kMarkdown };

/// Throws Error(kUsage) for anything other than json, csv or markdown.
ReportFormat parse_report_format(std::string_view name);
const char* extension_of(ReportFormat format);

/// JSON keeps full precision; CSV and markdown print accuracy with four
/// decimals. CSV has exactly one header row and one row per cell. Markdown
/// columns are flavor, method, dimension, category, n, accuracy, delta.
std::string emit_report(const AccuracyReport& report, ReportFormat format);

nlohmann::json to_json(const AccuracyReport& report);
AccuracyReport accuracy_report_from_json(const nlohmann::json& doc);

}  // namespace hwdetect
