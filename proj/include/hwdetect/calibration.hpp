#pragma once

#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hwdetect/corpus.hpp"
#include "hwdetect/threshold_table.hpp"

namespace hwdetect {

/// A response reduced to what threshold search needs.
struct ScoredSample {
    std::string id;
    Source source = Source::kHuman;
    double perplexity = 0.0;
    Knowledge knowledge = Knowledge::kConceptual;
    std::set<Cognitive> cognitive;
};

/// Pulls each response's perplexity for `cache_key`. Throws
/// Error(kStaleCache) naming the first response without one.
std::vector<ScoredSample> scored_samples(const Corpus& corpus, const std::string& cache_key);

/// Below the threshold is AI-generated; at or above it is human-written.
/// Throws Error(kNumeric) for non-finite or non-positive inputs.
Source classify(double perplexity, double threshold);

/// Positive class is human-written.
struct ConfusionCounts {
    std::uint64_t tp = 0;  // human called human
    std::uint64_t fp = 0;  // ai called human
    std::uint64_t tn = 0;  // ai called ai
    std::uint64_t fn = 0;  // human called ai

    std::uint64_t positives() const noexcept { return tp + fn; }
    std::uint64_t negatives() const noexcept { return tn + fp; }
    std::uint64_t total() const noexcept { return tp + fp + tn + fn; }
    bool operator==(const ConfusionCounts&) const = default;
};

ConfusionCounts confusion(std::span<const ScoredSample> samples, double threshold);

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
    double threshold = 0.0;
};

/// Throws Error(kUndefinedMetric) when a class is absent.
RocPoint roc_point(const ConfusionCounts& counts, double threshold);

/// Area under the polyline (0,0) - (fpr,tpr) - (1,1), i.e. (1 + tpr - fpr) / 2.
/// Throws Error(kUndefinedMetric) when a class is absent.
double auc_single_point(const ConfusionCounts& counts);

/// 2tp / (2tp + fp + fn); 0 when tp == 0. Throws Error(kUndefinedMetric)
/// when tp + fp + fn == 0.
double f1_score(const ConfusionCounts& counts);

/// Objective as an exact fraction so grid points with equal scores tie
/// exactly instead of up to rounding.
struct Fraction {
    std::int64_t num = 0;
    std::int64_t den = 1;

    double value() const noexcept { return static_cast<double>(num) / static_cast<double>(den); }
};

/// <0, 0, >0 like a three-way compare of a and b.
int compare(const Fraction& a, const Fraction& b);

Fraction objective_fraction(const ConfusionCounts& counts, ThresholdMethod method);
double objective(const ConfusionCounts& counts, ThresholdMethod method);

/// lo, lo + step, ... while <= hi (points are lo + i * step, so they stay on
/// the grid). Throws Error(kConfig) for step <= 0 or hi < lo.
std::vector<double> grid_points(const GridSpec& grid);

struct ThresholdSearch {
    double threshold = 0.0;
    double objective = 0.0;
    /// (threshold, objective) for every grid point, ascending.
    std::vector<std::pair<double, double>> trace;
};

/// Smallest grid point attaining the maximum objective. Requires both classes
/// present (Error(kUndefinedMetric) otherwise).
ThresholdSearch optimal_threshold(std::span<const ScoredSample> samples, ThresholdMethod method,
                                  const GridSpec& grid);
ThresholdSearch optimal_threshold(std::span<const ScoredSample> samples, ThresholdMethod method,
                                  std::span<const double> grid);

/// Members of one calibration cell within already-flavored samples.
bool in_category(const ScoredSample& sample, Dimension dimension, const std::string& category);

/// Categories a dimension expands into ("" for global).
std::vector<std::string> categories_of(Dimension dimension);

struct CalibrationRequest {
    std::vector<Flavor> flavors{std::begin(kAllFlavors), std::end(kAllFlavors)};
    std::vector<ThresholdMethod> methods{ThresholdMethod::kAuc, ThresholdMethod::kF1};
    std::vector<Dimension> dimensions{Dimension::kGlobal, Dimension::kKnowledge,
                                      Dimension::kCognitive};
    GridSpec grid;
    unsigned threads = 1;
};

/// Calibrates every (flavor, method, dimension, category) cell over the
/// corpus responses scored under `cache_key`. A cognitive category includes
/// every response whose question lists it, so a response can land in several
/// cells. Cells with only one class present are omitted and recorded in the
/// provenance. `provenance` supplies scorer/engine details; corpus hash,
/// grid and omissions are filled in here.
ThresholdTable calibrate_table(const Corpus& corpus, const std::string& cache_key,
                               const CalibrationRequest& request, Provenance provenance);

}  // namespace hwdetect
