// Single-inference uncertainty scores: token negative log-likelihood, token
// entropy over the observed top-k mass, sentence-level max/avg aggregation,
// and passage-level averaging.
#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "uqgen/core.hpp"
#include "uqgen/errors.hpp"

namespace uqgen {

enum class EntropyMode { raw, renormalized };

inline std::string entropy_mode_name(EntropyMode m) {
    return m == EntropyMode::raw ? "raw" : "renormalized";
}

inline EntropyMode parse_entropy_mode(const std::string& s) {
    if (s == "raw") return EntropyMode::raw;
    if (s == "renormalized") return EntropyMode::renormalized;
    throw config_error("unknown entropy mode: " + s);
}

// A half-open [start_step, end_step) range of steps forming one sentence.
struct SentenceSpan {
    int start_step = 0;
    int end_step = 0; // exclusive
    std::string text;
};

inline double token_nll(const TokenStep& step) { return -step.logprob; }

// Entropy (nats) of the step's top-k distribution. raw uses the probabilities
// as reported (the tail mass beyond top-k is ignored); renormalized rescales
// the top-k probabilities to sum to 1 first. Zero-probability entries
// contribute nothing; `skipped`, when given, receives how many were dropped.
inline double token_entropy(const TokenStep& step, EntropyMode mode, int* skipped = nullptr) {
    if (step.topk.empty()) throw stat_error("token_entropy: empty topk");
    double mass = 0.0;
    int zeros = 0;
    for (const auto& [tok, lp] : step.topk) {
        (void)tok;
        double p = std::exp(lp);
        if (p <= 0.0) {
            ++zeros;
            continue;
        }
        mass += p;
    }
    if (skipped) *skipped = zeros;
    if (mass <= 0.0) throw stat_error("token_entropy: zero total mass");
    double h = 0.0;
    for (const auto& [tok, lp] : step.topk) {
        (void)tok;
        double p = std::exp(lp);
        if (p <= 0.0) continue;
        if (mode == EntropyMode::renormalized) p /= mass;
        h -= p * std::log(p);
    }
    return std::max(h, 0.0);
}

struct SentenceScores {
    double max_nll = 0.0;
    double avg_nll = 0.0;
    double max_ent = 0.0;
    double avg_ent = 0.0;
};

inline SentenceScores score_span(const Generation& g, const SentenceSpan& span, EntropyMode mode) {
    if (span.start_step >= span.end_step) throw stat_error("empty sentence span");
    if (span.start_step < 0 || static_cast<std::size_t>(span.end_step) > g.steps.size())
        throw stat_error("sentence span out of range");
    SentenceScores out;
    out.max_nll = out.max_ent = -1.0;
    double sum_nll = 0.0, sum_ent = 0.0;
    for (int i = span.start_step; i < span.end_step; ++i) {
        double nll = token_nll(g.steps[static_cast<std::size_t>(i)]);
        double ent = token_entropy(g.steps[static_cast<std::size_t>(i)], mode);
        out.max_nll = std::max(out.max_nll, nll);
        out.max_ent = std::max(out.max_ent, ent);
        sum_nll += nll;
        sum_ent += ent;
    }
    int n = span.end_step - span.start_step;
    out.avg_nll = sum_nll / n;
    out.avg_ent = sum_ent / n;
    return out;
}

inline std::vector<SentenceScores> sentence_scores(const Generation& g,
                                                   const std::vector<SentenceSpan>& spans,
                                                   EntropyMode mode) {
    std::vector<SentenceScores> out;
    out.reserve(spans.size());
    for (const SentenceSpan& span : spans) out.push_back(score_span(g, span, mode));
    return out;
}

// Mean over sentences of one of the four per-sentence metrics. `which` must
// be one of the single-inference variants.
inline double passage_score(const std::vector<SentenceScores>& spans, MethodVariant which) {
    if (spans.empty()) throw stat_error("passage_score: no sentence spans");
    double sum = 0.0;
    for (const SentenceScores& s : spans) {
        switch (which) {
            case MethodVariant::max_prob: sum += s.max_nll; break;
            case MethodVariant::avg_prob: sum += s.avg_nll; break;
            case MethodVariant::max_ent: sum += s.max_ent; break;
            case MethodVariant::avg_ent: sum += s.avg_ent; break;
            default: throw stat_error("passage_score: not a single-inference metric");
        }
    }
    return sum / static_cast<double>(spans.size());
}

inline const std::vector<std::string>& default_terminators() {
    static const std::vector<std::string> t{".", "!", "?", "\n"};
    return t;
}

// Splits a generation into sentence spans: a sentence ends after any step
// whose token text ends with one of the terminators; a trailing unterminated
// fragment becomes the final span. Code generations are never split.
inline std::vector<SentenceSpan> split_sentences(
        const Generation& g, Task task = Task::other,
        const std::vector<std::string>& terminators = default_terminators()) {
    if (g.steps.empty()) throw stat_error("split_sentences: generation has no steps");
    std::vector<SentenceSpan> spans;
    int n = static_cast<int>(g.steps.size());
    if (task == Task::codegen) {
        spans.push_back(SentenceSpan{0, n, g.text});
        return spans;
    }
    auto ends_sentence = [&](const std::string& tok) {
        for (const std::string& t : terminators) {
            if (tok.size() >= t.size() && tok.compare(tok.size() - t.size(), t.size(), t) == 0)
                return true;
        }
        return false;
    };
    int start = 0;
    std::string text;
    for (int i = 0; i < n; ++i) {
        text += g.steps[static_cast<std::size_t>(i)].token;
        if (ends_sentence(g.steps[static_cast<std::size_t>(i)].token)) {
            spans.push_back(SentenceSpan{start, i + 1, text});
            start = i + 1;
            text.clear();
        }
    }
    if (start < n) spans.push_back(SentenceSpan{start, n, text});
    return spans;
}

// End-to-end single-inference score (Max/Average Prob/Ent) for a generation.
inline double single_score(const Generation& g, MethodVariant which, EntropyMode mode,
                           Task task = Task::other) {
    auto spans = split_sentences(g, task);
    return passage_score(sentence_scores(g, spans, mode), which);
}

} // namespace uqgen
