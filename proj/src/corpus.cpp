#include "hwdetect/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hwdetect/error.hpp"
#include "hwdetect/hashing.hpp"
#include "hwdetect/text.hpp"

namespace hwdetect {
namespace {

using nlohmann::json;

template <typename Enum, std::size_t N>
std::optional<Enum> parse_enum(std::string_view name, const Enum (&values)[N]) {
    for (const auto v : values) {
        if (name == to_string(v)) return v;
    }
    return std::nullopt;
}

constexpr Source kAllSources[] = {Source::kHuman, Source::kAi};

std::string required_string(const json& record, const char* field, std::size_t line) {
    const auto it = record.find(field);
    if (it == record.end()) throw ValidationError(line, field, "missing");
    if (!it->is_string()) throw ValidationError(line, field, "must be a string");
    return it->get<std::string>();
}

QuestionMeta parse_question(const json& record, std::size_t line) {
    QuestionMeta q;
    q.question_id = required_string(record, "question_id", line);
    if (q.question_id.empty()) throw ValidationError(line, "question_id", "must not be empty");

    const auto knowledge = required_string(record, "knowledge", line);
    if (knowledge.find(',') != std::string::npos) {
        throw ValidationError(line, "knowledge",
                              "must be a single subcategory, got '" + knowledge + "'");
    }
    const auto k = parse_knowledge(knowledge);
    if (!k) throw ValidationError(line, "knowledge", "unknown value '" + knowledge + "'");
    q.knowledge = *k;

    if (const auto it = record.find("cognitive"); it != record.end()) {
        if (!it->is_array()) throw ValidationError(line, "cognitive", "must be an array");
        for (const auto& item : *it) {
            if (!item.is_string()) throw ValidationError(line, "cognitive", "entries must be strings");
            const auto name = item.get<std::string>();
            const auto c = parse_cognitive(name);
            if (!c) throw ValidationError(line, "cognitive", "unknown value '" + name + "'");
            if (!q.cognitive.insert(*c).second) {
                throw ValidationError(line, "cognitive", "duplicate value '" + name + "'");
            }
        }
    }

    if (const auto it = record.find("flags"); it != record.end()) {
        if (!it->is_object()) throw ValidationError(line, "flags", "must be an object");
        const std::pair<const char*, bool*> fields[] = {{"math", &q.flags.math},
                                                        {"code", &q.flags.code},
                                                        {"author_book", &q.flags.author_book},
                                                        {"trick", &q.flags.trick}};
        for (const auto& [name, target] : fields) {
            if (const auto f = it->find(name); f != it->end()) {
                if (!f->is_boolean()) {
                    throw ValidationError(line, std::string("flags.") + name, "must be a boolean");
                }
                *target = f->get<bool>();
            }
        }
        for (const auto& [name, value] : it->items()) {
            if (name != "math" && name != "code" && name != "author_book" && name != "trick") {
                throw ValidationError(line, "flags." + name, "unknown flag");
            }
        }
    }
    return q;
}

LabeledResponse parse_response(const json& record, std::size_t line) {
    LabeledResponse r;
    r.id = required_string(record, "id", line);
    r.question_id = required_string(record, "question_id", line);
    r.course = record.contains("course") ? required_string(record, "course", line) : "";
    r.text = required_string(record, "text", line);
    const auto source = required_string(record, "source", line);
    const auto s = parse_source(source);
    if (!s) throw ValidationError(line, "source", "must be 'human' or 'ai', got '" + source + "'");
    r.source = *s;
    if (const auto it = record.find("ppl_cache"); it != record.end() && !it->is_null()) {
        if (!it->is_object()) throw ValidationError(line, "ppl_cache", "must be an object");
        for (const auto& [key, value] : it->items()) {
            if (!value.is_number()) {
                throw ValidationError(line, "ppl_cache." + key, "must be a number");
            }
            r.ppl_cache[key] = value.get<double>();
        }
    }
    return r;
}

void check_response(const LabeledResponse& r, std::size_t line) {
    if (r.id.empty()) throw ValidationError(line, "id", "must not be empty");
    if (r.text.empty()) throw ValidationError(line, "text", "must not be empty (id " + r.id + ")");
    if (!is_valid_utf8(r.text)) throw ValidationError(line, "text", "invalid UTF-8 (id " + r.id + ")");
    for (const auto& [key, value] : r.ppl_cache) {
        if (!std::isfinite(value) || value <= 0.0) {
            throw ValidationError(line, "ppl_cache." + key, "must be a finite positive number");
        }
    }
}

json to_json(const QuestionMeta& q) {
    json cognitive = json::array();
    for (const auto c : q.cognitive) cognitive.push_back(to_string(c));
    return {{"kind", "question"},
            {"question_id", q.question_id},
            {"knowledge", to_string(q.knowledge)},
            {"cognitive", std::move(cognitive)},
            {"flags",
             {{"math", q.flags.math},
              {"code", q.flags.code},
              {"author_book", q.flags.author_book},
              {"trick", q.flags.trick}}}};
}

json to_json(const LabeledResponse& r) {
    json out{{"kind", "response"},    {"id", r.id},
             {"question_id", r.question_id}, {"course", r.course},
             {"text", r.text},        {"source", to_string(r.source)}};
    if (!r.ppl_cache.empty()) out["ppl_cache"] = r.ppl_cache;
    return out;
}

// Lines of the input that produced each response/question, for diagnostics
// raised after the whole file is read.
struct ParsedCorpus {
    std::vector<QuestionMeta> questions;
    std::vector<std::size_t> question_lines;
    std::vector<LabeledResponse> responses;
    std::vector<std::size_t> response_lines;
};

}  // namespace

const char* to_string(Source source) { return source == Source::kHuman ? "human" : "ai"; }

const char* to_string(Knowledge knowledge) {
    switch (knowledge) {
        case Knowledge::kConceptual: return "conceptual";
        case Knowledge::kFactual: return "factual";
        case Knowledge::kProcedural: return "procedural";
        case Knowledge::kMetacognitive: return "metacognitive";
    }
    return "?";
}

const char* to_string(Cognitive cognitive) {
    switch (cognitive) {
        case Cognitive::kRemember: return "remember";
        case Cognitive::kUnderstand: return "understand";
        case Cognitive::kApply: return "apply";
        case Cognitive::kAnalyze: return "analyze";
        case Cognitive::kEvaluate: return "evaluate";
        case Cognitive::kCreate: return "create";
    }
    return "?";
}

const char* to_string(Flavor flavor) {
    switch (flavor) {
        case Flavor::kOrig: return "orig";
        case Flavor::kMin250: return "min250";
        case Flavor::kNoMath: return "no_math";
        case Flavor::kNoCode: return "no_code";
        case Flavor::kNoMathNoCode: return "no_math_no_code";
    }
    return "?";
}

std::optional<Source> parse_source(std::string_view name) { return parse_enum(name, kAllSources); }
std::optional<Knowledge> parse_knowledge(std::string_view name) {
    return parse_enum(name, kAllKnowledge);
}
std::optional<Cognitive> parse_cognitive(std::string_view name) {
    return parse_enum(name, kAllCognitive);
}
std::optional<Flavor> parse_flavor(std::string_view name) { return parse_enum(name, kAllFlavors); }

Corpus::Corpus(std::vector<QuestionMeta> questions, std::vector<LabeledResponse> responses)
    : questions_(std::move(questions)), responses_(std::move(responses)) {
    for (const auto& r : responses_) check_response(r, 0);
    build_index();
}

void Corpus::build_index() {
    question_index_.clear();
    response_index_.clear();
    for (std::size_t i = 0; i < questions_.size(); ++i) {
        if (!question_index_.emplace(questions_[i].question_id, i).second) {
            throw ValidationError(0, "question_id",
                                  "duplicate question '" + questions_[i].question_id + "'");
        }
    }
    for (std::size_t i = 0; i < responses_.size(); ++i) {
        const auto& r = responses_[i];
        if (!response_index_.emplace(r.id, i).second) {
            throw ValidationError(0, "id", "duplicate response id '" + r.id + "'");
        }
        if (!question_index_.contains(r.question_id)) {
            throw ValidationError(0, "question_id",
                                  "response '" + r.id + "' references unknown question '" +
                                      r.question_id + "'");
        }
    }
}

const QuestionMeta& Corpus::question_for(const LabeledResponse& response) const {
    const auto it = question_index_.find(response.question_id);
    if (it == question_index_.end()) {
        throw Error(ErrorCode::kInternal, "unknown question '" + response.question_id + "'");
    }
    return questions_[it->second];
}

const LabeledResponse* Corpus::find_response(std::string_view id) const {
    const auto it = response_index_.find(std::string(id));
    return it == response_index_.end() ? nullptr : &responses_[it->second];
}

Corpus Corpus::with_responses(std::vector<LabeledResponse> responses) const {
    return Corpus(questions_, std::move(responses));
}

Corpus parse_corpus(std::string_view jsonl) {
    ParsedCorpus parsed;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < jsonl.size()) {
        auto eol = jsonl.find('\n', pos);
        if (eol == std::string_view::npos) eol = jsonl.size();
        const std::string_view line = jsonl.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;

        json record;
        try {
            record = json::parse(line);
        } catch (const json::exception& e) {
            throw ValidationError(line_no, "record", std::string("malformed JSON: ") + e.what());
        }
        if (!record.is_object()) throw ValidationError(line_no, "record", "must be an object");
        const auto kind = required_string(record, "kind", line_no);
        if (kind == "question") {
            parsed.questions.push_back(parse_question(record, line_no));
            parsed.question_lines.push_back(line_no);
        } else if (kind == "response") {
            auto r = parse_response(record, line_no);
            check_response(r, line_no);
            parsed.responses.push_back(std::move(r));
            parsed.response_lines.push_back(line_no);
        } else {
            throw ValidationError(line_no, "kind", "unknown record kind '" + kind + "'");
        }
    }

    // Cross-record checks, reported against the offending line.
    std::unordered_map<std::string, std::size_t> seen_questions;
    for (std::size_t i = 0; i < parsed.questions.size(); ++i) {
        const auto& id = parsed.questions[i].question_id;
        if (const auto [it, fresh] = seen_questions.emplace(id, parsed.question_lines[i]); !fresh) {
            throw ValidationError(parsed.question_lines[i], "question_id",
                                  "duplicate question '" + id + "' (first on line " +
                                      std::to_string(it->second) + ")");
        }
    }
    std::unordered_map<std::string, std::size_t> seen_responses;
    for (std::size_t i = 0; i < parsed.responses.size(); ++i) {
        const auto& r = parsed.responses[i];
        const auto line = parsed.response_lines[i];
        if (const auto [it, fresh] = seen_responses.emplace(r.id, line); !fresh) {
            throw ValidationError(line, "id", "duplicate response id '" + r.id +
                                                  "' (first on line " +
                                                  std::to_string(it->second) + ")");
        }
        if (!seen_questions.contains(r.question_id)) {
            throw ValidationError(line, "question_id",
                                  "no question metadata for '" + r.question_id + "'");
        }
    }
    return Corpus(std::move(parsed.questions), std::move(parsed.responses));
}

Corpus load_corpus(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::kUsage, "cannot open corpus file " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    try {
        return parse_corpus(buffer.str());
    } catch (const ValidationError& e) {
        throw ValidationError(e.line(), e.field(), e.reason() + " [" + path.string() + "]");
    }
}

std::string serialize_corpus(const Corpus& corpus) {
    std::string out;
    for (const auto& q : corpus.questions()) {
        out += to_json(q).dump();
        out.push_back('\n');
    }
    for (const auto& r : corpus.responses()) {
        out += to_json(r).dump();
        out.push_back('\n');
    }
    return out;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::kUsage, "cannot write " + tmp.string());
        out << serialize_corpus(corpus);
        if (!out) throw Error(ErrorCode::kUsage, "write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::string corpus_hash(const Corpus& corpus) { return sha256_hex(serialize_corpus(corpus)); }

std::optional<double> cached_perplexity(const LabeledResponse& response, const std::string& key) {
    const auto it = response.ppl_cache.find(key);
    if (it == response.ppl_cache.end()) return std::nullopt;
    return it->second;
}

bool passes_flavor(const Corpus& corpus, const LabeledResponse& response, Flavor flavor) {
    const auto& flags = corpus.question_for(response).flags;
    switch (flavor) {
        case Flavor::kOrig: return true;
        case Flavor::kMin250: return count_scalar_values(response.text) >= kMinFlavorLength;
        case Flavor::kNoMath: return !flags.math;
        case Flavor::kNoCode: return !flags.code;
        case Flavor::kNoMathNoCode: return !flags.math && !flags.code;
    }
    return false;
}

Corpus apply_flavor(const Corpus& corpus, Flavor flavor) {
    std::vector<LabeledResponse> kept;
    for (const auto& r : corpus.responses()) {
        if (passes_flavor(corpus, r, flavor)) kept.push_back(r);
    }
    return corpus.with_responses(std::move(kept));
}

std::pair<Corpus, Corpus> split(const Corpus& corpus, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw Error(ErrorCode::kConfig, "train_fraction must lie in (0, 1)");
    }
    std::vector<std::size_t> by_class[2];
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        by_class[corpus.responses()[i].source == Source::kHuman ? 0 : 1].push_back(i);
    }
    std::mt19937_64 rng(seed);
    std::vector<bool> in_train(corpus.size(), false);
    for (int c = 0; c < 2; ++c) {
        auto& members = by_class[c];
        if (members.size() < 2) {
            throw Error(ErrorCode::kStratification,
                        std::string("need at least 2 ") + (c == 0 ? "human" : "ai") +
                            " responses to split, have " + std::to_string(members.size()));
        }
        // Fisher-Yates with raw engine output keeps the permutation identical
        // across standard library implementations.
        for (std::size_t i = members.size() - 1; i > 0; --i) {
            const std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
            std::swap(members[i], members[j]);
        }
        const auto n = members.size();
        auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * train_fraction));
        n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
        for (std::size_t i = 0; i < n_train; ++i) in_train[members[i]] = true;
    }
    std::vector<LabeledResponse> train, test;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        (in_train[i] ? train : test).push_back(corpus.responses()[i]);
    }
    return {corpus.with_responses(std::move(train)), corpus.with_responses(std::move(test))};
}

}  // namespace hwdetect
