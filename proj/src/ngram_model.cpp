#include "hwdetect/ngram_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "hwdetect/error.hpp"
#include "hwdetect/hashing.hpp"
#include "hwdetect/text.hpp"

namespace hwdetect {
namespace {

void check_options(const NGramOptions& options) {
    if (options.order < 1) {
        throw Error(ErrorCode::kConfig,
                    "n-gram order must be >= 1, got " + std::to_string(options.order));
    }
    if (!(options.smoothing_k > 0.0) || !std::isfinite(options.smoothing_k)) {
        throw Error(ErrorCode::kConfig, "smoothing_k must be a finite value > 0");
    }
    if (options.synthetic_vocab_size < 2) {
        throw Error(ErrorCode::kConfig, "synthetic_vocab_size must be >= 2");
    }
    if (options.max_window < 2) {
        throw Error(ErrorCode::kConfig, "max_window must be >= 2");
    }
}

ValidationError model_error(const std::string& field, const std::string& reason) {
    return ValidationError(0, field, reason);
}

}  // namespace

bool operator==(const NGramModel::ContextCounts& a, const NGramModel::ContextCounts& b) {
    return a.total == b.total && a.next == b.next;
}

NGramModel NGramModel::train(std::span<const std::string> corpus, const NGramOptions& options) {
    check_options(options);
    NGramModel model(options);

    std::vector<std::vector<std::string>> documents;
    documents.reserve(corpus.size());
    std::set<std::string> observed;
    for (const auto& text : corpus) {
        auto words = split_words(text);
        observed.insert(words.begin(), words.end());
        documents.push_back(std::move(words));
    }
    model.vocab_.emplace_back(kUnkSymbol);
    model.vocab_.insert(model.vocab_.end(), observed.begin(), observed.end());
    model.rebuild_index();

    const auto context_len = static_cast<std::size_t>(options.order - 1);
    for (const auto& words : documents) {
        std::vector<TokenId> history(context_len, kBos);
        for (const auto& word : words) {
            const TokenId id = model.id_of(word);
            std::vector<TokenId> key(history.end() - static_cast<std::ptrdiff_t>(context_len),
                                     history.end());
            auto& slot = model.counts_[std::move(key)];
            ++slot.total;
            ++slot.next[id];
            history.push_back(id);
        }
    }
    return model;
}

void NGramModel::rebuild_index() {
    index_.clear();
    for (std::size_t i = 0; i < vocab_.size(); ++i) {
        index_.emplace(vocab_[i], static_cast<TokenId>(i));
    }
}

std::size_t NGramModel::vocab_size() const noexcept {
    return vocab_.size() <= 1 ? options_.synthetic_vocab_size : vocab_.size();
}

TokenId NGramModel::id_of(std::string_view word) const {
    const auto it = index_.find(word);
    if (it == index_.end() || it->second == kUnk) {
        return kUnk;
    }
    return it->second;
}

std::vector<TokenId> NGramModel::context_key(std::span<const TokenId> history) const {
    const auto context_len = static_cast<std::size_t>(options_.order - 1);
    std::vector<TokenId> key(context_len, kBos);
    const std::size_t take = std::min(context_len, history.size());
    std::copy(history.end() - static_cast<std::ptrdiff_t>(take), history.end(),
              key.end() - static_cast<std::ptrdiff_t>(take));
    return key;
}

const NGramModel::ContextCounts* NGramModel::counts_for(std::span<const TokenId> history) const {
    const auto it = counts_.find(context_key(history));
    return it == counts_.end() ? nullptr : &it->second;
}

double NGramModel::probability(std::span<const TokenId> history, TokenId token) const {
    const double k = options_.smoothing_k;
    const double v = static_cast<double>(vocab_size());
    double count = 0.0;
    double total = 0.0;
    if (const auto* ctx = counts_for(history)) {
        total = static_cast<double>(ctx->total);
        if (const auto it = ctx->next.find(token); it != ctx->next.end()) {
            count = static_cast<double>(it->second);
        }
    }
    return (count + k) / (total + k * v);
}

double NGramModel::neg_log_prob(std::span<const TokenId> history, TokenId token) const {
    return -std::log(probability(history, token));
}

bool NGramModel::operator==(const NGramModel& other) const {
    return options_.order == other.options_.order &&
           options_.smoothing_k == other.options_.smoothing_k &&
           options_.synthetic_vocab_size == other.options_.synthetic_vocab_size &&
           options_.max_window == other.options_.max_window && vocab_ == other.vocab_ &&
           counts_ == other.counts_;
}

nlohmann::json NGramModel::to_json() const {
    auto symbol = [this](TokenId id) -> std::string {
        return id == kBos ? std::string(kBosSymbol) : vocab_.at(id);
    };
    nlohmann::json counts = nlohmann::json::object();
    for (const auto& [key, ctx] : counts_) {
        std::string name;
        for (std::size_t i = 0; i < key.size(); ++i) {
            if (i > 0) name.push_back(' ');
            name += symbol(key[i]);
        }
        nlohmann::json next = nlohmann::json::object();
        for (const auto& [token, count] : ctx.next) {
            next[symbol(token)] = count;
        }
        counts[name] = std::move(next);
    }
    return {
        {"version", kFormatVersion},
        {"order", options_.order},
        {"smoothing_k", options_.smoothing_k},
        {"synthetic_vocab_size", options_.synthetic_vocab_size},
        {"max_window", options_.max_window},
        {"vocab", vocab_},
        {"counts", std::move(counts)},
    };
}

NGramModel NGramModel::from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw model_error("model", "expected a JSON object");
    if (doc.value("version", 0) != kFormatVersion) {
        throw model_error("version", "unsupported model version");
    }
    NGramOptions options;
    try {
        options.order = doc.at("order").get<int>();
        options.smoothing_k = doc.at("smoothing_k").get<double>();
        options.synthetic_vocab_size =
            doc.value("synthetic_vocab_size", options.synthetic_vocab_size);
        options.max_window = doc.value("max_window", options.max_window);
    } catch (const nlohmann::json::exception& e) {
        throw model_error("model", e.what());
    }
    try {
        check_options(options);
    } catch (const Error& e) {
        throw model_error("model", e.what());
    }

    NGramModel model(options);
    try {
        model.vocab_ = doc.at("vocab").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw model_error("vocab", e.what());
    }
    if (model.vocab_.empty() || model.vocab_.front() != kUnkSymbol) {
        throw model_error("vocab", "first entry must be the unknown symbol");
    }
    model.rebuild_index();
    if (model.index_.size() != model.vocab_.size()) {
        throw model_error("vocab", "duplicate entries");
    }

    auto lookup = [&](const std::string& word, bool allow_bos) -> TokenId {
        if (allow_bos && word == kBosSymbol) return kBos;
        const auto it = model.index_.find(word);
        if (it == model.index_.end()) {
            throw model_error("counts", "token '" + word + "' is not in vocab");
        }
        return it->second;
    };

    const auto context_len = static_cast<std::size_t>(options.order - 1);
    const auto counts_it = doc.find("counts");
    if (counts_it == doc.end() || !counts_it->is_object()) {
        throw model_error("counts", "expected an object");
    }
    for (const auto& [name, next] : counts_it->items()) {
        std::vector<TokenId> key;
        std::istringstream words(name);
        for (std::string w; words >> w;) key.push_back(lookup(w, true));
        if (key.size() != context_len) {
            throw model_error("counts", "context '" + name + "' has wrong length");
        }
        if (!next.is_object()) throw model_error("counts", "context '" + name + "' not an object");
        ContextCounts ctx;
        for (const auto& [word, value] : next.items()) {
            if (!value.is_number_unsigned() || value.get<std::uint64_t>() < 1) {
                throw model_error("counts", "count for '" + word + "' must be a positive integer");
            }
            const auto count = value.get<std::uint64_t>();
            ctx.next[lookup(word, false)] += count;
            ctx.total += count;
        }
        model.counts_.emplace(std::move(key), std::move(ctx));
    }
    return model;
}

NGramModel NGramModel::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::kUsage, "cannot open model file " + path.string());
    }
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw model_error("model", path.string() + ": " + e.what());
    }
    return from_json(doc);
}

void NGramModel::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorCode::kUsage, "cannot write model file " + path.string());
    }
    out << to_json().dump() << '\n';
}

NGramScorer::NGramScorer(std::shared_ptr<const NGramModel> model) : model_(std::move(model)) {
    if (!model_) throw Error(ErrorCode::kConfig, "null n-gram model");
    descriptor_.name = "ngram-" + std::to_string(model_->order()) + "-" +
                       sha256_hex(model_->to_json().dump()).substr(0, 12);
    descriptor_.vocab_size = model_->vocab_size();
    descriptor_.max_window = model_->max_window();
    validate_descriptor(descriptor_);
}

TokenSequence NGramScorer::tokenize(std::string_view text) const {
    TokenSequence seq;
    seq.surface = split_words(text);
    seq.ids.reserve(seq.surface.size());
    for (const auto& w : seq.surface) seq.ids.push_back(model_->id_of(w));
    return seq;
}

double NGramScorer::mean_nll(std::span<const TokenId> window, std::size_t target_len) const {
    const std::size_t context_len = static_cast<std::size_t>(model_->order() - 1);
    double sum = 0.0;
    for (std::size_t i = window.size() - target_len; i < window.size(); ++i) {
        const std::size_t from = i > context_len ? i - context_len : 0;
        sum += model_->neg_log_prob(window.subspan(from, i - from), window[i]);
    }
    return sum / static_cast<double>(target_len);
}

}  // namespace hwdetect
