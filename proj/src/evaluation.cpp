#include "hwdetect/evaluation.hpp"

#include <cstdio>

#include "hwdetect/calibration.hpp"
#include "hwdetect/error.hpp"

namespace hwdetect {
namespace {

using nlohmann::json;

std::string fixed4(double value) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", value);
    return buf;
}

ThresholdKey global_key(Flavor flavor, ThresholdMethod method) {
    return {flavor, method, Dimension::kGlobal, ""};
}

const ThresholdEntry& covered(const ThresholdTable& table, const ThresholdKey& key) {
    const auto it = table.entries().find(key);
    if (it == table.entries().end()) {
        throw Error(ErrorCode::kCoverage, "threshold table has no entry for " + to_string(key));
    }
    return it->second;
}

ThresholdKey key_from(const json& doc) {
    const auto& category = doc.at("category");
    return make_key(doc.at("flavor").get<std::string>(), doc.at("method").get<std::string>(),
                    doc.at("dimension").get<std::string>(),
                    category.is_null() ? std::string() : category.get<std::string>());
}

}  // namespace

std::vector<ThresholdKey> table_cells(const ThresholdTable& table) {
    std::vector<ThresholdKey> keys;
    keys.reserve(table.size());
    for (const auto& [key, entry] : table.entries()) keys.push_back(key);
    return keys;
}

AccuracyReport evaluate(const Corpus& test, const std::string& cache_key,
                        const ThresholdTable& table, const std::vector<ThresholdKey>& cells) {
    for (const auto& key : cells) {
        covered(table, key);
        covered(table, global_key(key.flavor, key.method));
    }

    AccuracyReport report;
    report.provenance = table.to_json().at("provenance");

    std::map<Flavor, std::vector<ScoredSample>> flavored;
    auto samples_for = [&](Flavor flavor) -> const std::vector<ScoredSample>& {
        auto it = flavored.find(flavor);
        if (it == flavored.end()) {
            it = flavored.emplace(flavor, scored_samples(apply_flavor(test, flavor), cache_key)).first;
        }
        return it->second;
    };

    struct Tally {
        std::size_t n = 0, correct = 0, humans = 0, humans_correct = 0;
    };
    auto tally = [](const std::vector<ScoredSample>& samples, const ThresholdKey& key,
                    double threshold) {
        Tally t;
        for (const auto& s : samples) {
            if (!in_category(s, key.dimension, key.category)) continue;
            const bool ok = classify(s.perplexity, threshold) == s.source;
            ++t.n;
            t.correct += ok;
            if (s.source == Source::kHuman) {
                ++t.humans;
                t.humans_correct += ok;
            }
        }
        return t;
    };

    for (const auto& key : cells) {
        const auto& samples = samples_for(key.flavor);
        const auto base_key = std::make_pair(key.flavor, key.method);
        if (!report.baselines.contains(base_key)) {
            const auto gk = global_key(key.flavor, key.method);
            const auto g = tally(samples, gk, covered(table, gk).threshold);
            if (g.n > 0) {
                report.baselines[base_key] =
                    static_cast<double>(g.correct) / static_cast<double>(g.n);
            }
        }

        const double threshold = covered(table, key).threshold;
        const auto t = tally(samples, key, threshold);
        if (t.n == 0) {
            report.skipped.push_back(key);
            continue;
        }
        AccuracyCell cell;
        cell.key = key;
        cell.threshold = threshold;
        cell.n = t.n;
        cell.correct = t.correct;
        cell.accuracy = static_cast<double>(t.correct) / static_cast<double>(t.n);
        const std::size_t ais = t.n - t.humans;
        if (t.humans > 0 && ais > 0) {
            const double human_recall =
                static_cast<double>(t.humans_correct) / static_cast<double>(t.humans);
            const double ai_recall = static_cast<double>(t.correct - t.humans_correct) /
                                     static_cast<double>(ais);
            cell.balanced_accuracy = (human_recall + ai_recall) / 2.0;
        }
        cell.delta = cell.accuracy - report.baselines.at(base_key);
        cell.low_n = t.n < kLowConfidenceN;
        report.cells.push_back(std::move(cell));
    }
    return report;
}

ReportFormat parse_report_format(std::string_view name) {
    if (name == "json") return ReportFormat::kJson;
    if (name == "csv") return ReportFormat::kCsv;
    if (name == "markdown" || name == "md") return ReportFormat::kMarkdown;
    throw Error(ErrorCode::kUsage, "unknown report format '" + std::string(name) + "'");
}

const char* extension_of(ReportFormat format) {
    switch (format) {
        case ReportFormat::kJson: return "json";
        case ReportFormat::kCsv: return "csv";
        case ReportFormat::kMarkdown: return "md";
    }
    return "txt";
}

json to_json(const AccuracyReport& report) {
    json cells = json::array();
    for (const auto& c : report.cells) {
        auto item = to_json(c.key);
        item["threshold"] = c.threshold;
        item["n"] = c.n;
        item["correct"] = c.correct;
        item["accuracy"] = c.accuracy;
        item["balanced_accuracy"] =
            c.balanced_accuracy ? json(*c.balanced_accuracy) : json(nullptr);
        item["delta"] = c.delta;
        item["low_n"] = c.low_n;
        cells.push_back(std::move(item));
    }
    json baselines = json::array();
    for (const auto& [key, accuracy] : report.baselines) {
        baselines.push_back({{"flavor", to_string(key.first)},
                             {"method", to_string(key.second)},
                             {"accuracy", accuracy}});
    }
    json skipped = json::array();
    for (const auto& key : report.skipped) skipped.push_back(to_json(key));
    return {{"provenance", report.provenance},
            {"baselines", std::move(baselines)},
            {"cells", std::move(cells)},
            {"skipped", std::move(skipped)}};
}

AccuracyReport accuracy_report_from_json(const json& doc) {
    AccuracyReport report;
    try {
        report.provenance = doc.value("provenance", json::object());
        for (const auto& b : doc.at("baselines")) {
            const auto key = make_key(b.at("flavor").get<std::string>(),
                                      b.at("method").get<std::string>(), "global", "");
            report.baselines[{key.flavor, key.method}] = b.at("accuracy").get<double>();
        }
        for (const auto& item : doc.at("cells")) {
            AccuracyCell c;
            c.key = key_from(item);
            c.threshold = item.at("threshold").get<double>();
            c.n = item.at("n").get<std::size_t>();
            c.correct = item.at("correct").get<std::size_t>();
            c.accuracy = item.at("accuracy").get<double>();
            if (!item.at("balanced_accuracy").is_null()) {
                c.balanced_accuracy = item.at("balanced_accuracy").get<double>();
            }
            c.delta = item.at("delta").get<double>();
            c.low_n = item.at("low_n").get<bool>();
            report.cells.push_back(std::move(c));
        }
        for (const auto& item : doc.value("skipped", json::array())) {
            report.skipped.push_back(key_from(item));
        }
    } catch (const json::exception& e) {
        throw ValidationError(0, "report", e.what());
    }
    return report;
}

std::string emit_report(const AccuracyReport& report, ReportFormat format) {
    switch (format) {
        case ReportFormat::kJson: return to_json(report).dump(2) + "\n";
        case ReportFormat::kCsv: {
            std::string out =
                "flavor,method,dimension,category,n,correct,accuracy,balanced_accuracy,delta,low_n\n";
            for (const auto& c : report.cells) {
                out += std::string(to_string(c.key.flavor)) + "," + to_string(c.key.method) + "," +
                       to_string(c.key.dimension) + "," + c.key.category + "," +
                       std::to_string(c.n) + "," + std::to_string(c.correct) + "," +
                       fixed4(c.accuracy) + "," +
                       (c.balanced_accuracy ? fixed4(*c.balanced_accuracy) : std::string()) + "," +
                       fixed4(c.delta) + "," + (c.low_n ? "true" : "false") + "\n";
            }
            return out;
        }
        case ReportFormat::kMarkdown: {
            std::string out;
            const auto& p = report.provenance;
            if (p.is_object() && p.contains("scorer")) {
                out += "Scorer: `" + p.value("scorer", std::string()) + "`, corpus `" +
                       p.value("corpus_hash", std::string()).substr(0, 12) + "`\n\n";
            }
            out += "| flavor | method | dimension | category | n | accuracy | delta |\n";
            out += "|---|---|---|---|---:|---:|---:|\n";
            for (const auto& c : report.cells) {
                out += "| " + std::string(to_string(c.key.flavor)) + " | " +
                       to_string(c.key.method) + " | " + to_string(c.key.dimension) + " | " +
                       (c.key.category.empty() ? "-" : c.key.category) + " | " +
                       std::to_string(c.n) + (c.low_n ? "*" : "") + " | " + fixed4(c.accuracy) +
                       " | " + fixed4(c.delta) + " |\n";
            }
            return out;
        }
    }
    throw Error(ErrorCode::kUsage, "unknown report format");
}

}  // namespace hwdetect
