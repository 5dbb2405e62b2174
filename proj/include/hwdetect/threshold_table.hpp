#pragma once

#include <compare>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "hwdetect/corpus.hpp"

namespace hwdetect {

enum class ThresholdMethod { kAuc, kF1 };
enum class Dimension { kGlobal, kKnowledge, kCognitive };

const char* to_string(ThresholdMethod method);
const char* to_string(Dimension dimension);
std::optional<ThresholdMethod> parse_method(std::string_view name);
std::optional<Dimension> parse_dimension(std::string_view name);

struct GridSpec {
    double lo = 0.0;
    double hi = 100.0;
    double step = 0.5;

    bool operator==(const GridSpec&) const = default;
};

/// `category` is empty for the global dimension, otherwise a knowledge or
/// cognitive subcategory name.
struct ThresholdKey {
    Flavor flavor = Flavor::kOrig;
    ThresholdMethod method = ThresholdMethod::kAuc;
    Dimension dimension = Dimension::kGlobal;
    std::string category;

    auto operator<=>(const ThresholdKey&) const = default;
    bool operator==(const ThresholdKey&) const = default;
};

std::string to_string(const ThresholdKey& key);
nlohmann::json to_json(const ThresholdKey& key);

/// Throws Error(kUsage) for unknown enum names or a category that does not
/// belong to the dimension.
ThresholdKey make_key(std::string_view flavor, std::string_view method,
                      std::string_view dimension, std::string_view category);

struct ThresholdEntry {
    double threshold = 0.0;
    double objective = 0.0;

    bool operator==(const ThresholdEntry&) const = default;
};

struct OmittedCell {
    ThresholdKey key;
    std::string reason;

    bool operator==(const OmittedCell&) const = default;
};

struct Provenance {
    std::string scorer;
    nlohmann::json engine_config = nlohmann::json::object();
    std::string corpus_hash;
    GridSpec grid;
    /// Left empty by the offline pipeline so table files stay reproducible;
    /// run timestamps live in the manifest.
    std::optional<std::string> created_at;
    std::vector<OmittedCell> omitted;

    bool operator==(const Provenance&) const = default;
};

class ThresholdTable {
public:
    ThresholdTable() = default;
    explicit ThresholdTable(Provenance provenance) : provenance_(std::move(provenance)) {}

    const Provenance& provenance() const noexcept { return provenance_; }
    Provenance& provenance() noexcept { return provenance_; }
    const std::map<ThresholdKey, ThresholdEntry>& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }

    /// Throws Error(kValidation) for a non-positive or off-grid threshold.
    void insert(const ThresholdKey& key, const ThresholdEntry& entry);

    std::optional<ThresholdEntry> find(const ThresholdKey& key) const;

    /// Throws Error(kNotFound) naming the key.
    const ThresholdEntry& at(const ThresholdKey& key) const;

    nlohmann::json to_json() const;
    /// Validates enums, category/dimension pairing, uniqueness and grid
    /// membership. Throws ValidationError.
    static ThresholdTable from_json(const nlohmann::json& doc);

    static ThresholdTable load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    bool operator==(const ThresholdTable&) const = default;

private:
    Provenance provenance_;
    std::map<ThresholdKey, ThresholdEntry> entries_;
};

bool on_grid(double value, const GridSpec& grid);

}  // namespace hwdetect
