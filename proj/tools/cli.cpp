#include "cli.hpp"

#include <CLI11.hpp>
#include <httplib.h>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "hwdetect/corpus.hpp"
#include "hwdetect/engine.hpp"
#include "hwdetect/evaluation.hpp"
#include "hwdetect/ngram_model.hpp"
#include "hwdetect/pipeline.hpp"
#include "hwdetect/scorer_factory.hpp"
#include "hwdetect/service.hpp"
#include "hwdetect/threshold_table.hpp"

namespace hwdetect::cli {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr const char* kEnvPrefix = "HWDETECT_";

std::string env(const char* name) { return std::string(kEnvPrefix) + name; }

std::string format(const char* fmt, double value) {
    char buf[64];
    std::snprintf(buf, sizeof buf, fmt, value);
    return buf;
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::kUsage, "cannot read file: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

/// Engine flags shared by every command that scores text.
struct EngineFlags {
    std::string scorer;
    std::size_t m_len = 0;
    std::size_t stride = 0;
    std::string advance = "stride";
    std::string aggregation = "window_mean";
    CLI::Option* m_len_opt = nullptr;
    CLI::Option* stride_opt = nullptr;
    CLI::Option* advance_opt = nullptr;
    CLI::Option* aggregation_opt = nullptr;
    CLI::Option* scorer_opt = nullptr;

    void add(CLI::App& app, bool scorer_required) {
        scorer_opt = app.add_option("--scorer", scorer,
                                    "builtin:<model.json>, builtin:empty[:V], remote:<url>, "
                                    "constant:<nll> or trace:<file>")
                         ->envname(env("SCORER"));
        if (scorer_required) scorer_opt->required();
        m_len_opt = app.add_option("--m-len", m_len, "window length in tokens")
                        ->envname(env("M_LEN"))
                        ->check(CLI::PositiveNumber);
        stride_opt = app.add_option("--stride", stride, "window advance in tokens")
                         ->envname(env("STRIDE"))
                         ->check(CLI::PositiveNumber);
        advance_opt = app.add_option("--advance", advance, "stride or m_len")
                          ->envname(env("ADVANCE"))
                          ->check(CLI::IsMember({"stride", "m_len"}));
        aggregation_opt = app.add_option("--aggregation", aggregation, "window_mean or token_weighted")
                              ->envname(env("AGGREGATION"))
                              ->check(CLI::IsMember({"window_mean", "token_weighted"}));
    }

    std::optional<std::size_t> m_len_override() const {
        return m_len_opt->count() ? std::optional(m_len) : std::nullopt;
    }
    std::optional<std::size_t> stride_override() const {
        return stride_opt->count() ? std::optional(stride) : std::nullopt;
    }

    EngineConfig resolve(const Scorer& s) const {
        return resolve_engine_config(s.descriptor(), m_len_override(), stride_override(),
                                     parse_window_advance(advance), parse_aggregation(aggregation));
    }
};

void print_report(std::ostream& out, const PerplexityReport& report) {
    const auto& c = report.config;
    out << "scorer: " << report.scorer_name << "\n"
        << "tokens: " << report.token_count << "\n"
        << "windows: " << report.windows.size() << " (m_len " << c.m_len << ", stride " << c.stride
        << ", advance " << to_string(c.advance) << ", aggregation " << to_string(c.aggregation)
        << ")\n";
    char line[128];
    std::snprintf(line, sizeof line, "%10s %10s %8s %10s\n", "begin_loc", "end_loc", "trg_len", "nll");
    out << line;
    for (const auto& w : report.windows) {
        std::snprintf(line, sizeof line, "%10zu %10zu %8zu %10.6f\n", w.begin_loc, w.end_loc,
                      w.trg_len, w.nll);
        out << line;
    }
    out << "perplexity: " << format("%.6f", report.perplexity) << "\n";
}

struct ScoreCmd {
    EngineFlags engine;
    std::string file;
    bool from_stdin = false;
    unsigned threads = 1;

    int run(std::istream& in, std::ostream& out, bool as_json) const {
        std::string text;
        if (from_stdin) {
            std::ostringstream buffer;
            buffer << in.rdbuf();
            text = buffer.str();
        } else {
            if (!fs::exists(file)) throw Error(ErrorCode::kUsage, "file not found: " + file);
            text = read_text(file);
        }
        const auto scorer = make_scorer(engine.scorer);
        const auto report = compute_perplexity(text, *scorer, engine.resolve(*scorer), threads);
        if (as_json) {
            out << to_json(report).dump(2) << "\n";
        } else {
            print_report(out, report);
        }
        return 0;
    }
};

struct TrainCmd {
    std::vector<std::string> texts;
    std::string corpus;
    std::string source;
    NGramOptions options;
    std::string output;

    int run(std::ostream& out, bool as_json) const {
        std::vector<std::string> documents;
        for (const auto& path : texts) documents.push_back(read_text(path));
        if (!corpus.empty()) {
            const auto filter = source.empty() ? std::nullopt : parse_source(source);
            if (!source.empty() && !filter) {
                throw Error(ErrorCode::kUsage, "--source must be human or ai");
            }
            for (const auto& r : load_corpus(corpus).responses()) {
                if (!filter || r.source == *filter) documents.push_back(r.text);
            }
        }
        const auto model = std::make_shared<const NGramModel>(NGramModel::train(documents, options));
        model->save(output);
        const NGramScorer scorer(model);
        if (as_json) {
            out << json{{"model", output},
                        {"documents", documents.size()},
                        {"order", options.order},
                        {"vocab_size", model->vocab_size()},
                        {"scorer", scorer.descriptor().name},
                        {"selector", "builtin:" + output}}
                       .dump(2)
                << "\n";
        } else {
            out << "trained " << options.order << "-gram model on " << documents.size()
                << " document(s)\n"
                << "vocab size: " << model->vocab_size() << "\n"
                << "scorer: " << scorer.descriptor().name << "\n"
                << "written: " << output << " (use --scorer builtin:" << output << ")\n";
        }
        return 0;
    }
};

GridSpec parse_grid(const std::string& text) {
    GridSpec grid;
    char tail = 0;
    if (std::sscanf(text.c_str(), "%lf:%lf:%lf%c", &grid.lo, &grid.hi, &grid.step, &tail) != 3) {
        throw Error(ErrorCode::kUsage, "--grid expects lo:hi:step, got '" + text + "'");
    }
    return grid;
}

template <typename Enum, typename Parse>
std::vector<Enum> parse_names(const std::vector<std::string>& names, const char* flag, Parse parse) {
    std::vector<Enum> out;
    for (const auto& name : names) {
        const auto value = parse(name);
        if (!value) throw Error(ErrorCode::kUsage, std::string(flag) + ": unknown value '" + name + "'");
        out.push_back(*value);
    }
    return out;
}

/// Options of the offline run. Flags and environment override the config file.
struct PipelineFlags {
    EngineFlags engine;
    std::string config_file;
    std::string corpus;
    std::string output_dir;
    std::vector<std::string> flavors, methods, dimensions;
    double train_fraction = 0.9;
    std::uint64_t seed = 42;
    std::string grid;
    unsigned threads = 1;
    bool rescore = false;
    bool no_write_back = false;
    std::map<std::string, CLI::Option*> opts;

    void add(CLI::App& app) {
        opts["config"] = app.add_option("--config", config_file, "JSON pipeline config")
                             ->envname(env("CONFIG"));
        engine.add(app, false);
        opts["corpus"] = app.add_option("--corpus", corpus, "labeled corpus (JSONL)")
                             ->envname(env("CORPUS"));
        opts["out"] = app.add_option("--out", output_dir, "output directory")->envname(env("OUT"));
        opts["flavors"] = app.add_option("--flavors", flavors)->delimiter(',');
        opts["methods"] = app.add_option("--methods", methods)->delimiter(',');
        opts["dimensions"] = app.add_option("--dimensions", dimensions)->delimiter(',');
        opts["train_fraction"] = app.add_option("--train-fraction", train_fraction);
        opts["seed"] = app.add_option("--seed", seed)->envname(env("SEED"));
        opts["grid"] = app.add_option("--grid", grid, "threshold grid lo:hi:step");
        opts["threads"] = app.add_option("--threads", threads)->envname(env("THREADS"));
        opts["rescore"] = app.add_flag("--rescore", rescore, "ignore cached perplexities");
        opts["no_write_back"] =
            app.add_flag("--no-write-back", no_write_back, "leave the input corpus untouched");
    }

    bool given(const char* name) const { return opts.at(name)->count() > 0; }

    PipelineConfig resolve() const {
        PipelineConfig c;
        if (given("config")) {
            json doc;
            try {
                doc = json::parse(read_text(config_file));
            } catch (const json::exception& e) {
                throw Error(ErrorCode::kConfig, config_file + ": " + e.what());
            }
            c = pipeline_config_from_json(doc);
        }
        if (given("corpus")) c.corpus_path = corpus;
        if (engine.scorer_opt->count()) c.scorer = engine.scorer;
        if (engine.m_len_opt->count()) c.m_len = engine.m_len;
        if (engine.stride_opt->count()) c.stride = engine.stride;
        if (engine.advance_opt->count()) c.advance = parse_window_advance(engine.advance);
        if (engine.aggregation_opt->count()) c.aggregation = parse_aggregation(engine.aggregation);
        if (given("out")) c.output_dir = output_dir;
        if (given("flavors")) c.flavors = parse_names<Flavor>(flavors, "--flavors", parse_flavor);
        if (given("methods")) {
            c.methods = parse_names<ThresholdMethod>(methods, "--methods", parse_method);
        }
        if (given("dimensions")) {
            c.dimensions = parse_names<Dimension>(dimensions, "--dimensions", parse_dimension);
        }
        if (given("train_fraction")) c.train_fraction = train_fraction;
        if (given("seed")) c.seed = seed;
        if (given("grid")) c.grid = parse_grid(grid);
        if (given("threads")) c.threads = threads;
        if (given("rescore")) c.rescore = rescore;
        if (given("no_write_back")) c.write_back = !no_write_back;
        if (c.corpus_path.empty()) throw Error(ErrorCode::kUsage, "no corpus given (--corpus)");
        if (c.scorer.empty()) throw Error(ErrorCode::kUsage, "no scorer given (--scorer)");
        return c;
    }
};

int run_calibrate(const PipelineFlags& flags, std::ostream& out, bool as_json) {
    const auto config = flags.resolve();
    const auto layout = run_offline(config);
    const Flavor shown = config.flavors.empty() ? Flavor::kOrig : config.flavors.front();

    json globals = json::object();
    for (const auto method : config.methods) {
        const auto entry = layout.table.find({shown, method, Dimension::kGlobal, ""});
        globals[to_string(method)] = entry ? json(entry->threshold) : json(nullptr);
    }
    if (as_json) {
        out << json{{"output_dir", config.output_dir.string()},
                    {"cache_key", layout.cache_key},
                    {"cache_hits", layout.stats.cache_hits},
                    {"scored", layout.stats.scored},
                    {"entries", layout.table.size()},
                    {"omitted", layout.table.provenance().omitted.size()},
                    {"flavor", to_string(shown)},
                    {"global_thresholds", globals}}
                   .dump(2)
            << "\n";
        return 0;
    }
    out << "cache key: " << layout.cache_key << "\n"
        << "cache hits: " << layout.stats.cache_hits << "\n"
        << "scored: " << layout.stats.scored << "\n"
        << "entries: " << layout.table.size() << " (omitted "
        << layout.table.provenance().omitted.size() << ")\n";
    out << "global thresholds (" << to_string(shown) << "):";
    for (const auto& [method, value] : globals.items()) {
        out << " " << method << "=" << (value.is_null() ? "n/a" : format("%g", value.get<double>()));
    }
    out << "\n"
        << "thresholds: " << layout.thresholds.string() << "\n"
        << "manifest: " << layout.manifest.string() << "\n";
    return 0;
}

struct EvaluateCmd {
    EngineFlags engine;
    std::string corpus;
    std::string thresholds;
    std::string format = "markdown";
    std::string output;
    unsigned threads = 1;

    int run(std::ostream& out) const {
        const auto report_format = parse_report_format(format);
        const auto table = ThresholdTable::load(thresholds);
        const auto scorer = make_scorer(engine.scorer);
        const auto config = engine.resolve(*scorer);
        const auto key = cache_key(scorer->descriptor(), config);
        const auto scored = score_corpus(load_corpus(corpus), *scorer, config, false, threads);

        std::vector<ThresholdKey> cells;
        for (const auto& cell : table_cells(table)) {
            if (table.find({cell.flavor, cell.method, Dimension::kGlobal, ""})) cells.push_back(cell);
        }
        const auto text = emit_report(evaluate(scored, key, table, cells), report_format);
        if (output.empty()) {
            out << text;
        } else {
            std::ofstream file(output, std::ios::binary);
            if (!(file << text)) throw Error(ErrorCode::kUsage, "cannot write " + output);
            out << "report: " << output << "\n";
        }
        return 0;
    }
};

struct ThresholdsCmd {
    std::string file;
    std::string flavor, method, dimension;

    int run(std::ostream& out, bool as_json) const {
        const auto table = ThresholdTable::load(file);
        auto keep = [&](const ThresholdKey& k) {
            return (flavor.empty() || flavor == to_string(k.flavor)) &&
                   (method.empty() || method == to_string(k.method)) &&
                   (dimension.empty() || dimension == to_string(k.dimension));
        };
        if (as_json) {
            auto doc = table.to_json();
            json entries = json::array();
            for (const auto& e : doc.at("entries")) {
                const auto k = make_key(e.at("flavor").get<std::string>(),
                                        e.at("method").get<std::string>(),
                                        e.at("dimension").get<std::string>(),
                                        e.at("category").is_null() ? std::string()
                                                                   : e.at("category").get<std::string>());
                if (keep(k)) entries.push_back(e);
            }
            doc["entries"] = std::move(entries);
            out << doc.dump(2) << "\n";
            return 0;
        }
        const auto& p = table.provenance();
        out << "scorer: " << p.scorer << "\n"
            << "corpus: " << p.corpus_hash << "\n"
            << "entries: " << table.size() << " (omitted " << p.omitted.size() << ")\n";
        char line[160];
        for (const auto& [k, entry] : table.entries()) {
            if (!keep(k)) continue;
            std::snprintf(line, sizeof line, "%-44s %8g %10.6f\n", to_string(k).c_str(),
                          entry.threshold, entry.objective);
            out << line;
        }
        for (const auto& omitted : p.omitted) {
            if (keep(omitted.key)) out << to_string(omitted.key) << "  omitted: " << omitted.reason << "\n";
        }
        return 0;
    }
};

struct ServeCmd {
    EngineFlags engine;
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string thresholds;
    std::string static_dir;
    bool expose_scorer = false;

    int run(std::ostream& out) const {
        const auto scorer = make_scorer(engine.scorer);
        std::shared_ptr<const ThresholdTable> table;
        if (!thresholds.empty()) {
            table = std::make_shared<const ThresholdTable>(ThresholdTable::load(thresholds));
        }
        auto service = std::make_shared<DetectorService>(scorer, engine.resolve(*scorer), table);
        ServiceOptions options;
        if (!static_dir.empty()) options.static_dir = static_dir;
        options.expose_scorer = expose_scorer;

        httplib::Server server;
        mount_service_endpoints(server, service, options);
        if (!server.bind_to_port(host, port)) {
            throw Error(ErrorCode::kUsage, "cannot bind " + host + ":" + std::to_string(port));
        }
        out << "listening on http://" << host << ":" << port << " (scorer "
            << scorer->descriptor().name << ")" << std::endl;
        if (!server.listen_after_bind()) throw Error(ErrorCode::kInternal, "server stopped unexpectedly");
        return 0;
    }
};

struct CompareCmd {
    EngineFlags engine;
    std::string context;
    std::vector<std::string> candidates;

    int run(std::ostream& out, bool as_json) const {
        const auto scorer = make_scorer(engine.scorer);
        const auto ranked = compare_candidates(context, candidates, *scorer, engine.resolve(*scorer));
        if (as_json) {
            json doc = json::array();
            for (const auto& c : ranked) {
                doc.push_back({{"candidate", c.candidate}, {"perplexity", c.perplexity}});
            }
            out << doc.dump(2) << "\n";
            return 0;
        }
        char line[64];
        for (std::size_t i = 0; i < ranked.size(); ++i) {
            std::snprintf(line, sizeof line, "%2zu  %12.4f  ", i + 1, ranked[i].perplexity);
            out << line << ranked[i].candidate << "\n";
        }
        return 0;
    }
};

}  // namespace

int exit_code_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::kTransport:
        case ErrorCode::kUnavailable: return 3;
        case ErrorCode::kContract:
        case ErrorCode::kNumeric:
        case ErrorCode::kInternal: return 4;
        default: return 2;
    }
}

int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
            std::ostream& err) {
    CLI::App app{"Perplexity-based detector for AI-generated homework text", "hwdetect"};
    app.require_subcommand(1);
    bool as_json = false;
    app.add_flag("--json", as_json, "machine-readable output");

    ScoreCmd score;
    auto* score_app = app.add_subcommand("score", "perplexity of one text with its window trace");
    score.engine.add(*score_app, true);
    auto* file_opt = score_app->add_option("--file", score.file, "text file");
    auto* stdin_opt = score_app->add_flag("--stdin", score.from_stdin, "read text from stdin");
    file_opt->excludes(stdin_opt);
    score_app->add_option("--threads", score.threads)->envname(env("THREADS"));
    score_app->add_flag("--json", as_json);

    TrainCmd train;
    auto* train_app = app.add_subcommand("train-lm", "train the built-in n-gram model");
    train_app->add_option("--text", train.texts, "training text file (one document each)")
        ->check(CLI::ExistingFile);
    train_app->add_option("--corpus", train.corpus, "use response texts from a labeled corpus")
        ->check(CLI::ExistingFile);
    train_app->add_option("--source", train.source, "only responses of this source (human|ai)");
    train_app->add_option("--order", train.options.order)->check(CLI::PositiveNumber);
    train_app->add_option("--k", train.options.smoothing_k, "add-k smoothing constant");
    train_app->add_option("--max-window", train.options.max_window)->check(CLI::PositiveNumber);
    train_app->add_option("--synthetic-vocab", train.options.synthetic_vocab_size);
    train_app->add_option("--out", train.output, "model file to write")->required();
    train_app->add_flag("--json", as_json);

    PipelineFlags calibrate;
    auto* calibrate_app = app.add_subcommand("calibrate", "run the offline pipeline");
    calibrate.add(*calibrate_app);
    calibrate_app->add_flag("--json", as_json);

    EvaluateCmd evaluate_cmd;
    auto* evaluate_app =
        app.add_subcommand("evaluate", "accuracy of a threshold table on a labeled corpus");
    evaluate_cmd.engine.add(*evaluate_app, true);
    evaluate_app->add_option("--corpus", evaluate_cmd.corpus)->required()->envname(env("CORPUS"));
    evaluate_app->add_option("--thresholds", evaluate_cmd.thresholds)
        ->required()
        ->envname(env("THRESHOLDS"));
    evaluate_app->add_option("--format", evaluate_cmd.format, "json, csv or markdown");
    evaluate_app->add_option("--report", evaluate_cmd.output, "write the report here");
    evaluate_app->add_option("--threads", evaluate_cmd.threads)->envname(env("THREADS"));

    ThresholdsCmd thresholds;
    auto* thresholds_app = app.add_subcommand("thresholds", "inspect a threshold table");
    thresholds_app->add_option("file", thresholds.file)->required()->envname(env("THRESHOLDS"));
    thresholds_app->add_option("--flavor", thresholds.flavor);
    thresholds_app->add_option("--method", thresholds.method);
    thresholds_app->add_option("--dimension", thresholds.dimension);
    thresholds_app->add_flag("--json", as_json);

    ServeCmd serve;
    auto* serve_app = app.add_subcommand("serve", "start the detector HTTP service");
    serve.engine.add(*serve_app, true);
    serve_app->add_option("--host", serve.host)->envname(env("HOST"));
    serve_app->add_option("--port", serve.port)->envname(env("PORT"))->check(CLI::Range(0, 65535));
    serve_app->add_option("--thresholds", serve.thresholds)->envname(env("THRESHOLDS"));
    serve_app->add_option("--static", serve.static_dir, "serve this directory under /")
        ->envname(env("STATIC"));
    serve_app->add_flag("--expose-scorer", serve.expose_scorer, "also serve the /v1 scorer protocol");

    CompareCmd compare;
    auto* compare_app = app.add_subcommand("compare", "rank candidate continuations by perplexity");
    compare.engine.add(*compare_app, true);
    compare_app->add_option("--context", compare.context)->required();
    compare_app->add_option("--candidate", compare.candidates)->required();
    compare_app->add_flag("--json", as_json);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return 2;
    }

    try {
        if (*score_app) {
            if (score.file.empty() && !score.from_stdin) {
                throw Error(ErrorCode::kUsage, "score needs --file or --stdin");
            }
            return score.run(in, out, as_json);
        }
        if (*train_app) {
            if (train.texts.empty() && train.corpus.empty()) {
                throw Error(ErrorCode::kUsage, "train-lm needs --text or --corpus");
            }
            return train.run(out, as_json);
        }
        if (*calibrate_app) return run_calibrate(calibrate, out, as_json);
        if (*evaluate_app) return evaluate_cmd.run(out);
        if (*thresholds_app) return thresholds.run(out, as_json);
        if (*serve_app) return serve.run(out);
        if (*compare_app) return compare.run(out, as_json);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        err << "error: internal: " << e.what() << "\n";
        return 4;
    }
    return 2;
}

}  // namespace hwdetect::cli
