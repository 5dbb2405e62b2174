#include "hwdetect/threshold_table.hpp"

#include <cmath>
#include <fstream>

#include "hwdetect/error.hpp"

namespace hwdetect {
namespace {

using nlohmann::json;

bool category_belongs(Dimension dimension, std::string_view category) {
    switch (dimension) {
        case Dimension::kGlobal: return category.empty();
        case Dimension::kKnowledge: return parse_knowledge(category).has_value();
        case Dimension::kCognitive: return parse_cognitive(category).has_value();
    }
    return false;
}

json key_fields(const ThresholdKey& key) {
    return {{"flavor", to_string(key.flavor)},
            {"method", to_string(key.method)},
            {"dimension", to_string(key.dimension)},
            {"category", key.category.empty() ? json(nullptr) : json(key.category)}};
}

ThresholdKey key_from_json(const json& doc, std::size_t index) {
    const auto field = "entries[" + std::to_string(index) + "]";
    try {
        const auto& category = doc.at("category");
        return make_key(doc.at("flavor").get<std::string>(), doc.at("method").get<std::string>(),
                        doc.at("dimension").get<std::string>(),
                        category.is_null() ? std::string() : category.get<std::string>());
    } catch (const json::exception& e) {
        throw ValidationError(0, field, e.what());
    } catch (const Error& e) {
        throw ValidationError(0, field, e.what());
    }
}

}  // namespace

const char* to_string(ThresholdMethod method) {
    return method == ThresholdMethod::kAuc ? "auc" : "f1";
}

const char* to_string(Dimension dimension) {
    switch (dimension) {
        case Dimension::kGlobal: return "global";
        case Dimension::kKnowledge: return "knowledge";
        case Dimension::kCognitive: return "cognitive";
    }
    return "?";
}

std::optional<ThresholdMethod> parse_method(std::string_view name) {
    if (name == "auc") return ThresholdMethod::kAuc;
    if (name == "f1") return ThresholdMethod::kF1;
    return std::nullopt;
}

std::optional<Dimension> parse_dimension(std::string_view name) {
    if (name == "global") return Dimension::kGlobal;
    if (name == "knowledge") return Dimension::kKnowledge;
    if (name == "cognitive") return Dimension::kCognitive;
    return std::nullopt;
}

std::string to_string(const ThresholdKey& key) {
    std::string out = std::string(to_string(key.flavor)) + "/" + to_string(key.method) + "/" +
                      to_string(key.dimension);
    if (!key.category.empty()) out += "/" + key.category;
    return out;
}

json to_json(const ThresholdKey& key) { return key_fields(key); }

ThresholdKey make_key(std::string_view flavor, std::string_view method,
                      std::string_view dimension, std::string_view category) {
    ThresholdKey key;
    const auto f = parse_flavor(flavor);
    if (!f) throw Error(ErrorCode::kUsage, "unknown flavor '" + std::string(flavor) + "'");
    const auto m = parse_method(method);
    if (!m) throw Error(ErrorCode::kUsage, "unknown method '" + std::string(method) + "'");
    const auto d = parse_dimension(dimension);
    if (!d) throw Error(ErrorCode::kUsage, "unknown dimension '" + std::string(dimension) + "'");
    if (!category_belongs(*d, category)) {
        throw Error(ErrorCode::kUsage, "category '" + std::string(category) +
                                           "' is not valid for dimension " + to_string(*d));
    }
    key.flavor = *f;
    key.method = *m;
    key.dimension = *d;
    key.category = std::string(category);
    return key;
}

bool on_grid(double value, const GridSpec& grid) {
    if (!std::isfinite(value) || grid.step <= 0.0) return false;
    const double tol = 1e-9 * std::max(1.0, std::abs(grid.step));
    if (value < grid.lo - tol || value > grid.hi + tol) return false;
    const double steps = (value - grid.lo) / grid.step;
    return std::abs(steps - std::round(steps)) < 1e-9;
}

void ThresholdTable::insert(const ThresholdKey& key, const ThresholdEntry& entry) {
    if (!category_belongs(key.dimension, key.category)) {
        throw Error(ErrorCode::kValidation, "category does not match dimension in " + to_string(key));
    }
    if (!std::isfinite(entry.threshold) || entry.threshold <= 0.0) {
        throw Error(ErrorCode::kValidation, "threshold for " + to_string(key) + " must be positive");
    }
    if (!on_grid(entry.threshold, provenance_.grid)) {
        throw Error(ErrorCode::kValidation,
                    "threshold for " + to_string(key) + " is not on the search grid");
    }
    entries_[key] = entry;
}

std::optional<ThresholdEntry> ThresholdTable::find(const ThresholdKey& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

const ThresholdEntry& ThresholdTable::at(const ThresholdKey& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) {
        throw Error(ErrorCode::kNotFound, "no threshold for " + to_string(key));
    }
    return it->second;
}

json ThresholdTable::to_json() const {
    json omitted = json::array();
    for (const auto& cell : provenance_.omitted) {
        auto item = key_fields(cell.key);
        item["reason"] = cell.reason;
        omitted.push_back(std::move(item));
    }
    json provenance{{"scorer", provenance_.scorer},
                    {"engine_config", provenance_.engine_config},
                    {"corpus_hash", provenance_.corpus_hash},
                    {"grid",
                     {{"lo", provenance_.grid.lo},
                      {"hi", provenance_.grid.hi},
                      {"step", provenance_.grid.step}}},
                    {"created_at", provenance_.created_at ? json(*provenance_.created_at)
                                                          : json(nullptr)},
                    {"omitted", std::move(omitted)}};
    json entries = json::array();
    for (const auto& [key, entry] : entries_) {
        auto item = key_fields(key);
        item["threshold"] = entry.threshold;
        item["objective"] = entry.objective;
        entries.push_back(std::move(item));
    }
    return {{"provenance", std::move(provenance)}, {"entries", std::move(entries)}};
}

ThresholdTable ThresholdTable::from_json(const json& doc) {
    if (!doc.is_object()) throw ValidationError(0, "table", "expected a JSON object");
    Provenance provenance;
    try {
        const auto& p = doc.at("provenance");
        provenance.scorer = p.value("scorer", std::string());
        provenance.engine_config = p.value("engine_config", json::object());
        provenance.corpus_hash = p.value("corpus_hash", std::string());
        if (p.contains("grid")) {
            const auto& g = p.at("grid");
            provenance.grid = {g.at("lo").get<double>(), g.at("hi").get<double>(),
                               g.at("step").get<double>()};
        }
        if (p.contains("created_at") && !p.at("created_at").is_null()) {
            provenance.created_at = p.at("created_at").get<std::string>();
        }
        if (p.contains("omitted")) {
            std::size_t i = 0;
            for (const auto& item : p.at("omitted")) {
                provenance.omitted.push_back(
                    {key_from_json(item, i++), item.value("reason", std::string())});
            }
        }
    } catch (const json::exception& e) {
        throw ValidationError(0, "provenance", e.what());
    }
    if (!(provenance.grid.step > 0.0) || provenance.grid.hi < provenance.grid.lo) {
        throw ValidationError(0, "provenance.grid", "invalid grid");
    }

    ThresholdTable table(std::move(provenance));
    const auto it = doc.find("entries");
    if (it == doc.end() || !it->is_array()) throw ValidationError(0, "entries", "expected an array");
    std::size_t index = 0;
    for (const auto& item : *it) {
        const auto key = key_from_json(item, index);
        const auto field = "entries[" + std::to_string(index) + "]";
        ThresholdEntry entry;
        try {
            entry.threshold = item.at("threshold").get<double>();
            entry.objective = item.value("objective", 0.0);
        } catch (const json::exception& e) {
            throw ValidationError(0, field, e.what());
        }
        if (table.entries_.contains(key)) {
            throw ValidationError(0, field, "duplicate entry " + to_string(key));
        }
        try {
            table.insert(key, entry);
        } catch (const Error& e) {
            throw ValidationError(0, field, e.what());
        }
        ++index;
    }
    return table;
}

ThresholdTable ThresholdTable::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::kUsage, "cannot open threshold table " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ValidationError(0, "table", path.string() + ": " + e.what());
    }
    return from_json(doc);
}

void ThresholdTable::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kUsage, "cannot write threshold table " + path.string());
    out << to_json().dump(2) << '\n';
}

}  // namespace hwdetect
