#include "hwdetect/calibration.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <thread>

#include "hwdetect/error.hpp"

namespace hwdetect {
namespace {

void require_both_classes(const ConfusionCounts& c, const char* metric) {
    if (c.positives() == 0 || c.negatives() == 0) {
        throw Error(ErrorCode::kUndefinedMetric,
                    std::string(metric) + " is undefined without both human and ai samples");
    }
}

}  // namespace

std::vector<ScoredSample> scored_samples(const Corpus& corpus, const std::string& cache_key) {
    std::vector<ScoredSample> samples;
    samples.reserve(corpus.size());
    for (const auto& r : corpus.responses()) {
        const auto ppl = cached_perplexity(r, cache_key);
        if (!ppl) {
            throw Error(ErrorCode::kStaleCache,
                        "response '" + r.id + "' has no perplexity for key '" + cache_key + "'");
        }
        const auto& q = corpus.question_for(r);
        samples.push_back({r.id, r.source, *ppl, q.knowledge, q.cognitive});
    }
    return samples;
}

Source classify(double perplexity, double threshold) {
    if (!std::isfinite(perplexity) || !std::isfinite(threshold) || perplexity <= 0.0 ||
        threshold <= 0.0) {
        throw Error(ErrorCode::kNumeric, "perplexity and threshold must be finite and positive");
    }
    return perplexity < threshold ? Source::kAi : Source::kHuman;
}

ConfusionCounts confusion(std::span<const ScoredSample> samples, double threshold) {
    ConfusionCounts c;
    for (const auto& s : samples) {
        const bool called_human = classify(s.perplexity, threshold) == Source::kHuman;
        if (s.source == Source::kHuman) {
            ++(called_human ? c.tp : c.fn);
        } else {
            ++(called_human ? c.fp : c.tn);
        }
    }
    return c;
}

RocPoint roc_point(const ConfusionCounts& c, double threshold) {
    require_both_classes(c, "ROC point");
    return {static_cast<double>(c.fp) / static_cast<double>(c.negatives()),
            static_cast<double>(c.tp) / static_cast<double>(c.positives()), threshold};
}

double auc_single_point(const ConfusionCounts& c) {
    const auto p = roc_point(c, 0.0);
    return (1.0 + p.tpr - p.fpr) / 2.0;
}

double f1_score(const ConfusionCounts& c) {
    const auto denom = 2 * c.tp + c.fp + c.fn;
    if (c.tp + c.fp + c.fn == 0) {
        throw Error(ErrorCode::kUndefinedMetric, "F1 is undefined when tp + fp + fn == 0");
    }
    if (c.tp == 0) return 0.0;
    return static_cast<double>(2 * c.tp) / static_cast<double>(denom);
}

int compare(const Fraction& a, const Fraction& b) {
    const __int128 lhs = static_cast<__int128>(a.num) * b.den;
    const __int128 rhs = static_cast<__int128>(b.num) * a.den;
    return lhs < rhs ? -1 : (lhs > rhs ? 1 : 0);
}

Fraction objective_fraction(const ConfusionCounts& c, ThresholdMethod method) {
    if (method == ThresholdMethod::kAuc) {
        require_both_classes(c, "AUC");
        // (1 + tp/P - fp/N) / 2 = (PN + tp*N - fp*P) / (2PN)
        const auto p = static_cast<std::int64_t>(c.positives());
        const auto n = static_cast<std::int64_t>(c.negatives());
        return {p * n + static_cast<std::int64_t>(c.tp) * n - static_cast<std::int64_t>(c.fp) * p,
                2 * p * n};
    }
    if (c.tp + c.fp + c.fn == 0) {
        throw Error(ErrorCode::kUndefinedMetric, "F1 is undefined when tp + fp + fn == 0");
    }
    if (c.tp == 0) return {0, 1};
    return {static_cast<std::int64_t>(2 * c.tp), static_cast<std::int64_t>(2 * c.tp + c.fp + c.fn)};
}

double objective(const ConfusionCounts& c, ThresholdMethod method) {
    return method == ThresholdMethod::kAuc ? auc_single_point(c) : f1_score(c);
}

std::vector<double> grid_points(const GridSpec& grid) {
    if (!(grid.step > 0.0) || !std::isfinite(grid.step)) {
        throw Error(ErrorCode::kConfig, "grid step must be positive");
    }
    if (!(grid.hi >= grid.lo)) throw Error(ErrorCode::kConfig, "grid hi must be >= lo");
    std::vector<double> points;
    const double tol = 1e-9 * grid.step;
    for (std::size_t i = 0;; ++i) {
        const double t = grid.lo + static_cast<double>(i) * grid.step;
        if (t > grid.hi + tol) break;
        points.push_back(t);
    }
    return points;
}

ThresholdSearch optimal_threshold(std::span<const ScoredSample> samples, ThresholdMethod method,
                                  const GridSpec& grid) {
    const auto points = grid_points(grid);
    return optimal_threshold(samples, method, points);
}

ThresholdSearch optimal_threshold(std::span<const ScoredSample> samples, ThresholdMethod method,
                                  std::span<const double> grid) {
    ThresholdSearch result;
    result.trace.reserve(grid.size());
    Fraction best{-1, 1};
    for (const double t : grid) {
        // Cutoffs must be positive; a sweep starting at 0 just skips it.
        if (!(t > 0.0)) continue;
        const auto c = confusion(samples, t);
        const auto value = objective_fraction(c, method);
        result.trace.emplace_back(t, value.value());
        if (compare(value, best) > 0) {
            best = value;
            result.threshold = t;
            result.objective = value.value();
        }
    }
    if (result.trace.empty()) {
        throw Error(ErrorCode::kConfig, "threshold grid has no positive points");
    }
    return result;
}

bool in_category(const ScoredSample& sample, Dimension dimension, const std::string& category) {
    switch (dimension) {
        case Dimension::kGlobal: return true;
        case Dimension::kKnowledge: return category == to_string(sample.knowledge);
        case Dimension::kCognitive: {
            const auto c = parse_cognitive(category);
            return c && sample.cognitive.contains(*c);
        }
    }
    return false;
}

std::vector<std::string> categories_of(Dimension dimension) {
    std::vector<std::string> out;
    switch (dimension) {
        case Dimension::kGlobal: out.emplace_back(); break;
        case Dimension::kKnowledge:
            for (const auto k : kAllKnowledge) out.emplace_back(to_string(k));
            break;
        case Dimension::kCognitive:
            for (const auto c : kAllCognitive) out.emplace_back(to_string(c));
            break;
    }
    return out;
}

ThresholdTable calibrate_table(const Corpus& corpus, const std::string& cache_key,
                               const CalibrationRequest& request, Provenance provenance) {
    grid_points(request.grid);  // validates
    provenance.corpus_hash = corpus_hash(corpus);
    provenance.grid = request.grid;
    provenance.omitted.clear();

    struct Job {
        ThresholdKey key;
        const std::vector<ScoredSample>* pool;
        std::optional<ThresholdSearch> result;
        std::string omission;
        std::exception_ptr error;
    };

    std::map<Flavor, std::vector<ScoredSample>> flavored;
    for (const auto flavor : request.flavors) {
        if (!flavored.contains(flavor)) {
            flavored[flavor] = scored_samples(apply_flavor(corpus, flavor), cache_key);
        }
    }

    std::vector<Job> jobs;
    for (const auto flavor : request.flavors) {
        for (const auto method : request.methods) {
            for (const auto dimension : request.dimensions) {
                for (const auto& category : categories_of(dimension)) {
                    jobs.push_back({{flavor, method, dimension, category}, &flavored[flavor], {}, {}, {}});
                }
            }
        }
    }

    auto run = [&](Job& job) noexcept {
        try {
            std::vector<ScoredSample> members;
            std::size_t humans = 0;
            for (const auto& s : *job.pool) {
                if (in_category(s, job.key.dimension, job.key.category)) {
                    members.push_back(s);
                    if (s.source == Source::kHuman) ++humans;
                }
            }
            if (humans == 0 || humans == members.size()) {
                job.omission = members.empty()
                                   ? "no responses"
                                   : std::string("only ") + (humans == 0 ? "ai" : "human") +
                                         " responses (" + std::to_string(members.size()) + ")";
                return;
            }
            job.result = optimal_threshold(members, job.key.method, request.grid);
        } catch (...) {
            job.error = std::current_exception();
        }
    };

    const std::size_t workers = std::min<std::size_t>(std::max(1u, request.threads), jobs.size());
    if (workers <= 1) {
        for (auto& job : jobs) run(job);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < workers; ++t) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < jobs.size(); i = next++) run(jobs[i]);
            });
        }
    }

    ThresholdTable table(std::move(provenance));
    for (const auto& job : jobs) {
        if (job.error) std::rethrow_exception(job.error);
        if (job.result) {
            table.insert(job.key, {job.result->threshold, job.result->objective});
        } else {
            table.provenance().omitted.push_back({job.key, job.omission});
        }
    }
    return table;
}

}  // namespace hwdetect
