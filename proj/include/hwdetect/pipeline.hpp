#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hwdetect/calibration.hpp"
#include "hwdetect/corpus.hpp"
#include "hwdetect/engine.hpp"
#include "hwdetect/scorer.hpp"
#include "hwdetect/threshold_table.hpp"

namespace hwdetect {

struct PipelineConfig {
    std::filesystem::path corpus_path;
    /// Scorer selector, see make_scorer().
    std::string scorer;
    /// Unset fields fall back to default_engine_config() for the scorer.
    std::optional<std::size_t> m_len;
    std::optional<std::size_t> stride;
    WindowAdvance advance = WindowAdvance::kStride;
    Aggregation aggregation = Aggregation::kWindowMean;
    std::vector<Flavor> flavors{std::begin(kAllFlavors), std::end(kAllFlavors)};
    std::vector<ThresholdMethod> methods{ThresholdMethod::kAuc, ThresholdMethod::kF1};
    std::vector<Dimension> dimensions{Dimension::kGlobal, Dimension::kKnowledge,
                                      Dimension::kCognitive};
    double train_fraction = 0.9;
    std::uint64_t seed = 42;
    GridSpec grid;
    std::filesystem::path output_dir = "out";
    /// Ignore cached perplexities and score everything again.
    bool rescore = false;
    /// Rewrite the input corpus with the refreshed caches after a successful run.
    bool write_back = true;
    unsigned threads = 1;
};

nlohmann::json to_json(const PipelineConfig& config);
/// Missing keys keep their defaults. Throws Error(kConfig).
PipelineConfig pipeline_config_from_json(const nlohmann::json& doc);

/// Engine settings for `descriptor` with the optional overrides applied. An
/// m_len override without a stride halves it, as the defaults do.
EngineConfig resolve_engine_config(const ScorerDescriptor& descriptor,
                                   std::optional<std::size_t> m_len,
                                   std::optional<std::size_t> stride,
                                   WindowAdvance advance = WindowAdvance::kStride,
                                   Aggregation aggregation = Aggregation::kWindowMean);

/// Cache key for perplexities produced by `descriptor` under `config`:
/// "<scorer name>@<16 hex digits>" over the descriptor and engine settings.
std::string cache_key(const ScorerDescriptor& descriptor, const EngineConfig& config);

struct ScoreStats {
    std::size_t cache_hits = 0;
    std::size_t scored = 0;
};

/// Adds a perplexity under `key` to every response that lacks one (all of
/// them when `rescore`). Scoring failures are collected; if any occur the
/// call throws one Error listing every failed response id.
Corpus score_corpus(const Corpus& corpus, const Scorer& scorer, const EngineConfig& engine,
                    bool rescore = false, unsigned threads = 1, ScoreStats* stats = nullptr);

struct StorageLayout {
    std::filesystem::path scored_corpus;
    std::filesystem::path thresholds;
    std::vector<std::filesystem::path> eval_reports;
    std::filesystem::path manifest;

    std::string cache_key;
    ScoreStats stats;
    ThresholdTable table;
};

/// Offline run: load -> score -> flavor -> split -> calibrate -> evaluate.
/// Artifacts are staged in a temporary directory under output_dir and only
/// moved into place once every stage has succeeded:
///
///   <out>/scored.jsonl, <out>/thresholds.json,
///   <out>/eval/report.{json,csv,md}, <out>/manifest.json
///
/// A lock file keeps concurrent runs out of the same output directory.
/// Failures are rethrown as StageError. `scorer` overrides config.scorer.
StorageLayout run_offline(const PipelineConfig& config,
                          std::shared_ptr<const Scorer> scorer = nullptr);

}  // namespace hwdetect
