#include "hwdetect/scorer_factory.hpp"

#include <charconv>

#include "hwdetect/error.hpp"
#include "hwdetect/fixed_scorers.hpp"
#include "hwdetect/ngram_model.hpp"
#include "hwdetect/remote_scorer.hpp"

namespace hwdetect {
namespace {

double parse_double(const std::string& s, const std::string& what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw Error(ErrorCode::kUsage, "invalid number for " + what + ": '" + s + "'");
}

std::size_t parse_size(const std::string& s, const std::string& what) {
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw Error(ErrorCode::kUsage, "invalid integer for " + what + ": '" + s + "'");
    }
    return v;
}

}  // namespace

std::shared_ptr<const Scorer> make_scorer(const std::string& selector) {
    const auto colon = selector.find(':');
    if (colon == std::string::npos) {
        throw Error(ErrorCode::kUsage, "scorer selector must look like kind:argument, got '" +
                                           selector + "'");
    }
    const std::string kind = selector.substr(0, colon);
    const std::string arg = selector.substr(colon + 1);

    if (kind == "builtin") {
        if (arg == "empty" || arg.rfind("empty:", 0) == 0) {
            NGramOptions options;
            if (arg.size() > 5) options.synthetic_vocab_size = parse_size(arg.substr(6), "vocab size");
            return std::make_shared<NGramScorer>(
                std::make_shared<const NGramModel>(NGramModel::train({}, options)));
        }
        return std::make_shared<NGramScorer>(
            std::make_shared<const NGramModel>(NGramModel::load(arg)));
    }
    if (kind == "remote") return std::make_shared<RemoteScorer>(arg);
    if (kind == "constant") return std::make_shared<ConstantScorer>(parse_double(arg, "constant nll"));
    if (kind == "trace") return std::make_shared<TraceScorer>(TraceScorer::load(arg));
    throw Error(ErrorCode::kUsage, "unknown scorer kind '" + kind + "'");
}

}  // namespace hwdetect
