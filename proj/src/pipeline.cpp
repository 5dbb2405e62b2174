#include "hwdetect/pipeline.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "hwdetect/error.hpp"
#include "hwdetect/evaluation.hpp"
#include "hwdetect/hashing.hpp"
#include "hwdetect/scorer_factory.hpp"

namespace hwdetect {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kUsage, "cannot write " + path.string());
    out << content;
    if (!out) throw Error(ErrorCode::kUsage, "write failed for " + path.string());
}

/// Exclusive lock file, removed on destruction.
class RunLock {
public:
    explicit RunLock(fs::path path) : path_(std::move(path)) {
        std::FILE* f = std::fopen(path_.c_str(), "wx");
        if (!f) {
            throw Error(ErrorCode::kUsage,
                        "output directory is locked by another run (" + path_.string() + ")");
        }
        std::fclose(f);
    }
    ~RunLock() {
        std::error_code ec;
        fs::remove(path_, ec);
    }
    RunLock(const RunLock&) = delete;
    RunLock& operator=(const RunLock&) = delete;

private:
    fs::path path_;
};

/// Staging directory that is deleted unless released.
class Staging {
public:
    explicit Staging(const fs::path& parent) {
        std::random_device rd;
        char name[32];
        std::snprintf(name, sizeof name, ".staging-%08x", rd());
        path_ = parent / name;
        fs::create_directories(path_ / "eval");
    }
    ~Staging() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    Staging(const Staging&) = delete;
    Staging& operator=(const Staging&) = delete;

    const fs::path& path() const noexcept { return path_; }

private:
    fs::path path_;
};

template <typename Enum, typename Parse>
std::vector<Enum> parse_list(const json& doc, const char* field, Parse parse) {
    std::vector<Enum> out;
    for (const auto& item : doc.at(field)) {
        const auto name = item.get<std::string>();
        const auto value = parse(name);
        if (!value) throw Error(ErrorCode::kConfig, std::string(field) + ": unknown value '" + name + "'");
        out.push_back(*value);
    }
    return out;
}

template <typename Enum>
json names(const std::vector<Enum>& values) {
    json out = json::array();
    for (const auto v : values) out.push_back(to_string(v));
    return out;
}

}  // namespace

json to_json(const PipelineConfig& c) {
    return {{"corpus", c.corpus_path.string()},
            {"scorer", c.scorer},
            {"m_len", c.m_len ? json(*c.m_len) : json(nullptr)},
            {"stride", c.stride ? json(*c.stride) : json(nullptr)},
            {"advance", to_string(c.advance)},
            {"aggregation", to_string(c.aggregation)},
            {"flavors", names(c.flavors)},
            {"methods", names(c.methods)},
            {"dimensions", names(c.dimensions)},
            {"train_fraction", c.train_fraction},
            {"seed", c.seed},
            {"grid", {{"lo", c.grid.lo}, {"hi", c.grid.hi}, {"step", c.grid.step}}},
            {"output_dir", c.output_dir.string()},
            {"rescore", c.rescore},
            {"write_back", c.write_back},
            {"threads", c.threads}};
}

PipelineConfig pipeline_config_from_json(const json& doc) {
    PipelineConfig c;
    try {
        if (!doc.is_object()) throw Error(ErrorCode::kConfig, "pipeline config must be an object");
        if (doc.contains("corpus")) c.corpus_path = doc.at("corpus").get<std::string>();
        c.scorer = doc.value("scorer", c.scorer);
        if (doc.contains("m_len") && !doc.at("m_len").is_null()) c.m_len = doc.at("m_len").get<std::size_t>();
        if (doc.contains("stride") && !doc.at("stride").is_null()) c.stride = doc.at("stride").get<std::size_t>();
        if (doc.contains("advance")) c.advance = parse_window_advance(doc.at("advance").get<std::string>());
        if (doc.contains("aggregation")) {
            c.aggregation = parse_aggregation(doc.at("aggregation").get<std::string>());
        }
        if (doc.contains("flavors")) c.flavors = parse_list<Flavor>(doc, "flavors", parse_flavor);
        if (doc.contains("methods")) c.methods = parse_list<ThresholdMethod>(doc, "methods", parse_method);
        if (doc.contains("dimensions")) {
            c.dimensions = parse_list<Dimension>(doc, "dimensions", parse_dimension);
        }
        c.train_fraction = doc.value("train_fraction", c.train_fraction);
        c.seed = doc.value("seed", c.seed);
        if (doc.contains("grid")) {
            const auto& g = doc.at("grid");
            c.grid = {g.value("lo", c.grid.lo), g.value("hi", c.grid.hi), g.value("step", c.grid.step)};
        }
        if (doc.contains("output_dir")) c.output_dir = doc.at("output_dir").get<std::string>();
        c.rescore = doc.value("rescore", c.rescore);
        c.write_back = doc.value("write_back", c.write_back);
        c.threads = doc.value("threads", c.threads);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::kConfig, std::string("pipeline config: ") + e.what());
    }
    return c;
}

EngineConfig resolve_engine_config(const ScorerDescriptor& descriptor,
                                   std::optional<std::size_t> m_len,
                                   std::optional<std::size_t> stride, WindowAdvance advance,
                                   Aggregation aggregation) {
    EngineConfig engine = default_engine_config(descriptor);
    if (m_len) {
        engine.m_len = *m_len;
        engine.stride = std::max<std::size_t>(1, engine.m_len / 2);
    }
    if (stride) engine.stride = *stride;
    engine.advance = advance;
    engine.aggregation = aggregation;
    validate_engine_config(engine, descriptor.max_window);
    return engine;
}

std::string cache_key(const ScorerDescriptor& d, const EngineConfig& config) {
    const json material{{"name", d.name},
                        {"vocab_size", d.vocab_size},
                        {"max_window", d.max_window},
                        {"engine", to_json(config)}};
    return d.name + "@" + sha256_hex(material.dump()).substr(0, 16);
}

Corpus score_corpus(const Corpus& corpus, const Scorer& scorer, const EngineConfig& engine,
                    bool rescore, unsigned threads, ScoreStats* stats) {
    const auto key = cache_key(scorer.descriptor(), engine);
    std::vector<LabeledResponse> responses = corpus.responses();

    std::vector<std::size_t> pending;
    ScoreStats local;
    for (std::size_t i = 0; i < responses.size(); ++i) {
        if (!rescore && responses[i].ppl_cache.contains(key)) {
            ++local.cache_hits;
        } else {
            pending.push_back(i);
        }
    }

    std::vector<std::string> failures(responses.size());
    std::vector<ErrorCode> failure_codes(responses.size(), ErrorCode::kInternal);
    auto score_one = [&](std::size_t i) {
        try {
            responses[i].ppl_cache[key] = compute_perplexity(responses[i].text, scorer, engine).perplexity;
        } catch (const Error& e) {
            failures[i] = e.what();
            failure_codes[i] = e.code();
        } catch (const std::exception& e) {
            failures[i] = e.what();
        }
    };

    const std::size_t workers = std::min<std::size_t>(std::max(1u, threads), pending.size());
    if (workers <= 1) {
        for (const auto i : pending) score_one(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < workers; ++t) {
            pool.emplace_back([&] {
                for (std::size_t j = next++; j < pending.size(); j = next++) score_one(pending[j]);
            });
        }
    }

    std::string message;
    std::size_t failed = 0;
    std::optional<ErrorCode> code;
    for (const auto i : pending) {
        if (failures[i].empty()) continue;
        ++failed;
        message += "\n  " + responses[i].id + ": " + failures[i];
        // A backend outage outranks per-text problems when picking the code.
        if (!code || failure_codes[i] == ErrorCode::kTransport) code = failure_codes[i];
    }
    if (failed > 0) {
        throw Error(*code, std::to_string(failed) + " response(s) failed to score:" + message);
    }
    local.scored = pending.size();
    if (stats) *stats = local;
    return corpus.with_responses(std::move(responses));
}

StorageLayout run_offline(const PipelineConfig& config, std::shared_ptr<const Scorer> scorer) {
    std::string stage = "config";
    try {
        if (!fs::exists(config.corpus_path)) {
            throw Error(ErrorCode::kUsage, "corpus file not found: " + config.corpus_path.string());
        }
        if (!(config.train_fraction > 0.0 && config.train_fraction < 1.0)) {
            throw Error(ErrorCode::kConfig, "train_fraction must lie in (0, 1)");
        }
        grid_points(config.grid);
        fs::create_directories(config.output_dir);
        RunLock lock(config.output_dir / ".lock");
        Staging staging(config.output_dir);
        const std::string started_at = utc_now();

        stage = "load";
        const Corpus corpus = load_corpus(config.corpus_path);

        stage = "score";
        if (!scorer) scorer = make_scorer(config.scorer);
        const EngineConfig engine = resolve_engine_config(
            scorer->descriptor(), config.m_len, config.stride, config.advance, config.aggregation);
        const auto key = cache_key(scorer->descriptor(), engine);

        StorageLayout layout;
        layout.cache_key = key;
        const Corpus scored =
            score_corpus(corpus, *scorer, engine, config.rescore, config.threads, &layout.stats);
        write_file(staging.path() / "scored.jsonl", serialize_corpus(scored));

        stage = "flavor";
        json flavor_counts = json::object();
        for (const auto flavor : config.flavors) {
            flavor_counts[to_string(flavor)] = apply_flavor(scored, flavor).size();
        }

        stage = "split";
        const auto [train, test] = split(scored, config.train_fraction, config.seed);

        stage = "calibrate";
        CalibrationRequest request;
        request.flavors = config.flavors;
        request.methods = config.methods;
        request.dimensions = config.dimensions;
        request.grid = config.grid;
        request.threads = config.threads;
        Provenance provenance;
        provenance.scorer = scorer->descriptor().name;
        provenance.engine_config = to_json(engine);
        layout.table = calibrate_table(train, key, request, std::move(provenance));
        write_file(staging.path() / "thresholds.json", layout.table.to_json().dump(2) + "\n");

        stage = "evaluate";
        // Cells whose global baseline was omitted as degenerate cannot report a delta.
        std::vector<ThresholdKey> cells;
        for (const auto& cell : table_cells(layout.table)) {
            if (layout.table.find({cell.flavor, cell.method, Dimension::kGlobal, ""})) {
                cells.push_back(cell);
            }
        }
        const auto report = evaluate(test, key, layout.table, cells);
        std::vector<std::string> artifacts = {"scored.jsonl", "thresholds.json"};
        for (const auto format : {ReportFormat::kJson, ReportFormat::kCsv, ReportFormat::kMarkdown}) {
            const std::string name = std::string("eval/report.") + extension_of(format);
            write_file(staging.path() / name, emit_report(report, format));
            artifacts.push_back(name);
        }

        stage = "promote";
        json artifact_list = json::array();
        for (const auto& name : artifacts) {
            artifact_list.push_back(
                {{"path", name}, {"sha256", sha256_hex(read_file(staging.path() / name))}});
        }
        const auto& d = scorer->descriptor();
        const json config_json = to_json(config);
        const json manifest{
            {"config", config_json},
            {"config_hash", sha256_hex(config_json.dump())},
            {"scorer",
             {{"name", d.name}, {"vocab_size", d.vocab_size}, {"max_window", d.max_window}}},
            {"engine", to_json(engine)},
            {"cache_key", key},
            {"cache_hits", layout.stats.cache_hits},
            {"scored", layout.stats.scored},
            {"flavor_counts", flavor_counts},
            {"split", {{"train", train.size()}, {"test", test.size()}}},
            {"table_entries", layout.table.size()},
            {"table_omitted", layout.table.provenance().omitted.size()},
            {"started_at", started_at},
            {"finished_at", utc_now()},
            {"artifacts", artifact_list}};
        write_file(staging.path() / "manifest.json", manifest.dump(2) + "\n");
        artifacts.push_back("manifest.json");

        fs::create_directories(config.output_dir / "eval");
        for (const auto& name : artifacts) {
            fs::rename(staging.path() / name, config.output_dir / name);
        }
        layout.scored_corpus = config.output_dir / "scored.jsonl";
        layout.thresholds = config.output_dir / "thresholds.json";
        for (const auto format : {ReportFormat::kJson, ReportFormat::kCsv, ReportFormat::kMarkdown}) {
            layout.eval_reports.push_back(config.output_dir / "eval" /
                                          (std::string("report.") + extension_of(format)));
        }
        layout.manifest = config.output_dir / "manifest.json";

        if (config.write_back && layout.stats.scored > 0) {
            stage = "write-back";
            save_corpus(scored, config.corpus_path);
        }
        return layout;
    } catch (const StageError&) {
        throw;
    } catch (const Error& e) {
        throw StageError(stage, e);
    } catch (const std::exception& e) {
        throw StageError(stage, Error(ErrorCode::kInternal, e.what()));
    }
}

}  // namespace hwdetect
