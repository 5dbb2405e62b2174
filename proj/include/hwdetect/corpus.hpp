#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace hwdetect {

enum class Source { kHuman, kAi };

enum class Knowledge { kConceptual, kFactual, kProcedural, kMetacognitive };

enum class Cognitive { kRemember, kUnderstand, kApply, kAnalyze, kEvaluate, kCreate };

enum class Flavor { kOrig, kMin250, kNoMath, kNoCode, kNoMathNoCode };

inline constexpr Knowledge kAllKnowledge[] = {Knowledge::kConceptual, Knowledge::kFactual,
                                              Knowledge::kProcedural, Knowledge::kMetacognitive};
inline constexpr Cognitive kAllCognitive[] = {Cognitive::kRemember, Cognitive::kUnderstand,
                                              Cognitive::kApply,    Cognitive::kAnalyze,
                                              Cognitive::kEvaluate, Cognitive::kCreate};
inline constexpr Flavor kAllFlavors[] = {Flavor::kOrig, Flavor::kMin250, Flavor::kNoMath,
                                         Flavor::kNoCode, Flavor::kNoMathNoCode};

const char* to_string(Source source);
const char* to_string(Knowledge knowledge);
const char* to_string(Cognitive cognitive);
const char* to_string(Flavor flavor);

// Parsers return nullopt for unknown names.
std::optional<Source> parse_source(std::string_view name);
std::optional<Knowledge> parse_knowledge(std::string_view name);
std::optional<Cognitive> parse_cognitive(std::string_view name);
std::optional<Flavor> parse_flavor(std::string_view name);

struct IncludeFlags {
    bool math = false;
    bool code = false;
    bool author_book = false;
    bool trick = false;

    bool operator==(const IncludeFlags&) const = default;
};

struct QuestionMeta {
    std::string question_id;
    Knowledge knowledge = Knowledge::kConceptual;
    std::set<Cognitive> cognitive;
    IncludeFlags flags;

    bool operator==(const QuestionMeta&) const = default;
};

struct LabeledResponse {
    std::string id;
    std::string question_id;
    std::string course;
    std::string text;
    Source source = Source::kHuman;
    /// Perplexity per scorer/engine cache key.
    std::map<std::string, double> ppl_cache;

    bool operator==(const LabeledResponse&) const = default;
};

/// Responses plus the question metadata they reference. Construction
/// validates every invariant; instances are immutable afterwards.
class Corpus {
public:
    Corpus() = default;

    /// Throws ValidationError on duplicate ids, empty text, dangling
    /// question ids or non-positive cached perplexities.
    Corpus(std::vector<QuestionMeta> questions, std::vector<LabeledResponse> responses);

    const std::vector<QuestionMeta>& questions() const noexcept { return questions_; }
    const std::vector<LabeledResponse>& responses() const noexcept { return responses_; }
    std::size_t size() const noexcept { return responses_.size(); }

    const QuestionMeta& question_for(const LabeledResponse& response) const;
    const LabeledResponse* find_response(std::string_view id) const;

    /// Same questions, a subset (or re-annotated copy) of the responses.
    Corpus with_responses(std::vector<LabeledResponse> responses) const;

    bool operator==(const Corpus& other) const {
        return questions_ == other.questions_ && responses_ == other.responses_;
    }

private:
    void build_index();

    std::vector<QuestionMeta> questions_;
    std::vector<LabeledResponse> responses_;
    std::unordered_map<std::string, std::size_t> question_index_;
    std::unordered_map<std::string, std::size_t> response_index_;
};

/// Reads the JSON-Lines corpus format. Blank lines are ignored.
/// Errors carry the 1-based line number and the offending field.
Corpus load_corpus(const std::filesystem::path& path);
Corpus parse_corpus(std::string_view jsonl);

/// One question record per line (in corpus order), then one response record
/// per line. Deterministic for a given corpus.
std::string serialize_corpus(const Corpus& corpus);

/// Writes via a sibling temporary file and rename.
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

/// SHA-256 of serialize_corpus(corpus).
std::string corpus_hash(const Corpus& corpus);

std::optional<double> cached_perplexity(const LabeledResponse& response, const std::string& key);

inline constexpr std::size_t kMinFlavorLength = 250;

/// Whether `response` survives the given flavor's filter.
bool passes_flavor(const Corpus& corpus, const LabeledResponse& response, Flavor flavor);

Corpus apply_flavor(const Corpus& corpus, Flavor flavor);

/// Stratified by source: each class is shuffled with a seeded generator and
/// round(n * train_fraction) of it (clamped to [1, n-1]) goes to train.
/// Both halves keep corpus order. Throws Error(kStratification) when either
/// class has fewer than two responses, Error(kConfig) for a fraction outside
/// (0, 1).
std::pair<Corpus, Corpus> split(const Corpus& corpus, double train_fraction, std::uint64_t seed);

}  // namespace hwdetect
