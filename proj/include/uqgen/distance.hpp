// Text-pair distances used inside VR/VRO and the embedding-cosine similarity
// used as the NLP performance metric. Every similarity lies in [0,1];
// distance = 1 - similarity.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "uqgen/core.hpp"
#include "uqgen/errors.hpp"
#include "uqgen/syntax.hpp"
#include "uqgen/text.hpp"
#include "uqgen/util.hpp"

namespace uqgen {

// ---------------------------------------------------------------------------
// n-gram machinery

namespace detail {

// gram key -> (count, keyword weight). Key is the tokens joined with \x1f.
inline std::map<std::string, std::pair<double, double>> ngram_counts(
        const std::vector<std::string>& toks, int n, const std::set<std::string>* keywords) {
    std::map<std::string, std::pair<double, double>> out;
    if (n <= 0 || toks.size() < static_cast<std::size_t>(n)) return out;
    for (std::size_t i = 0; i + n <= toks.size(); ++i) {
        std::string key;
        double w = 1.0;
        for (int j = 0; j < n; ++j) {
            if (j) key += '\x1f';
            key += toks[i + j];
            if (keywords && keywords->count(toks[i + j])) w = 5.0;
        }
        auto& slot = out[key];
        slot.first += 1.0;
        slot.second = w;
    }
    return out;
}

} // namespace detail

// Sentence-BLEU similarity: uniform weights over n = 1..max_n, clipped
// precisions, add-1 smoothing of numerator and denominator for n >= 2,
// brevity penalty exp(1 - r/c) when the candidate is shorter. With
// `keywords`, n-grams containing a keyword count with weight 5 (the CodeBLEU
// weighted-n-gram component).
inline double bleu_tokens(const std::vector<std::string>& cand, const std::vector<std::string>& ref,
                          int max_n = 4, bool smoothing = true,
                          const std::set<std::string>* keywords = nullptr) {
    if (cand.empty() || ref.empty()) {
        log_warn("bleu: empty input, similarity 0");
        return 0.0;
    }
    double logsum = 0.0;
    for (int n = 1; n <= max_n; ++n) {
        auto cg = detail::ngram_counts(cand, n, keywords);
        auto rg = detail::ngram_counts(ref, n, keywords);
        double num = 0.0, den = 0.0;
        for (const auto& [gram, cw] : cg) {
            auto it = rg.find(gram);
            double clip = it == rg.end() ? 0.0 : std::min(cw.first, it->second.first);
            num += cw.second * clip;
            den += cw.second * cw.first;
        }
        if (n >= 2 && smoothing) {
            num += 1.0;
            den += 1.0;
        }
        if (den <= 0.0 || num <= 0.0) return 0.0;
        logsum += std::log(num / den);
    }
    double bp = cand.size() >= ref.size()
                        ? 1.0
                        : std::exp(1.0 - static_cast<double>(ref.size()) / cand.size());
    return bp * std::exp(logsum / max_n);
}

inline double bleu(const std::string& cand, const std::string& ref, int max_n = 4,
                   bool smoothing = true, bool lowercase = true) {
    return bleu_tokens(tokenize(cand, lowercase), tokenize(ref, lowercase), max_n, smoothing);
}

// LCS-based F-measure (ROUGE-L). beta weighs recall; beta=1 is plain F1.
inline double rouge_l(const std::string& cand, const std::string& ref, double beta = 1.0,
                      bool lowercase = true) {
    std::vector<std::string> c = tokenize(cand, lowercase), r = tokenize(ref, lowercase);
    if (c.empty() || r.empty()) {
        log_warn("rouge_l: empty input, similarity 0");
        return 0.0;
    }
    std::vector<std::size_t> prev(r.size() + 1, 0), cur(r.size() + 1, 0);
    for (std::size_t i = 1; i <= c.size(); ++i) {
        for (std::size_t j = 1; j <= r.size(); ++j)
            cur[j] = c[i - 1] == r[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        std::swap(prev, cur);
    }
    double lcs = static_cast<double>(prev[r.size()]);
    if (lcs == 0.0) return 0.0;
    double p = lcs / c.size(), rr = lcs / r.size();
    return (1.0 + beta * beta) * p * rr / (rr + beta * beta * p);
}

// Bag-of-tokens F1 with multiset overlap.
inline double token_f1(const std::string& cand, const std::string& ref, bool lowercase = true) {
    std::vector<std::string> c = tokenize(cand, lowercase), r = tokenize(ref, lowercase);
    if (c.empty() || r.empty()) {
        log_warn("token_f1: empty input, similarity 0");
        return 0.0;
    }
    std::map<std::string, int> cc, rc;
    for (const auto& t : c) ++cc[t];
    for (const auto& t : r) ++rc[t];
    double overlap = 0.0;
    for (const auto& [tok, n] : cc) {
        auto it = rc.find(tok);
        if (it != rc.end()) overlap += std::min(n, it->second);
    }
    if (overlap == 0.0) return 0.0;
    double p = overlap / c.size(), rr = overlap / r.size();
    return 2.0 * p * rr / (p + rr);
}

// ---------------------------------------------------------------------------
// CodeBLEU

namespace detail {

inline void subtree_signature(const SyntaxNode& n, int depth, std::string& out) {
    out += n.kind;
    if (!n.text.empty()) {
        out += ':';
        out += n.text;
    }
    if (depth <= 1 || n.children.empty()) return;
    out += '(';
    for (std::size_t i = 0; i < n.children.size(); ++i) {
        if (i) out += ',';
        subtree_signature(n.children[i], depth - 1, out);
    }
    out += ')';
}

// Every node contributes its subtree signature truncated at depths 1, 2, 3.
inline void collect_signatures(const SyntaxNode& n, std::vector<std::string>& out) {
    for (int d = 1; d <= 3; ++d) {
        std::string s;
        subtree_signature(n, d, s);
        out.push_back(std::move(s));
    }
    for (const SyntaxNode& c : n.children) collect_signatures(c, out);
}

} // namespace detail

// Fraction of candidate AST subtree signatures found in the reference's
// signature multiset.
inline double syntax_match(const SyntaxNode& cand, const SyntaxNode& ref) {
    std::vector<std::string> cs, rs;
    detail::collect_signatures(cand, cs);
    detail::collect_signatures(ref, rs);
    if (cs.empty()) return 0.0;
    std::map<std::string, int> rc;
    for (const auto& s : rs) ++rc[s];
    double matched = 0.0;
    std::map<std::string, int> cc;
    for (const auto& s : cs) ++cc[s];
    for (const auto& [sig, n] : cc) {
        auto it = rc.find(sig);
        if (it != rc.end()) matched += std::min(n, it->second);
    }
    return matched / static_cast<double>(cs.size());
}

struct CodeBleuWeights {
    double ngram = 0.25;
    double weighted_ngram = 0.25;
    double syntax = 0.25;
    double dataflow = 0.25;
};

// Weighted mix of n-gram, keyword-weighted n-gram, AST-subtree, and (when a
// provider is registered) dataflow matches. Without a dataflow provider the
// remaining weights are renormalized. Unparseable candidates score 0 on the
// syntax component; unparseable references are an error.
inline double codebleu(const std::string& cand, const std::string& ref, const std::string& lang,
                       CodeBleuWeights w = {}, int max_n = 4, bool smoothing = true) {
    auto provider = find_syntax_provider(lang);
    if (!provider) throw config_error("no syntax provider registered for language: " + lang);

    std::vector<std::string> ct = tokenize(cand, /*lowercase=*/false);
    std::vector<std::string> rt = tokenize(ref, /*lowercase=*/false);

    std::set<std::string> kw;
    for (const auto& k : provider->keywords()) kw.insert(k);

    double ngram = bleu_tokens(ct, rt, max_n, smoothing);
    double weighted = bleu_tokens(ct, rt, max_n, smoothing, &kw);

    ParseResult rp = provider->parse(ref);
    if (!rp.ok) throw data_error("codebleu: reference does not parse: " + rp.error);
    ParseResult cp = provider->parse(cand);
    double syn = cp.ok ? syntax_match(cp.root, rp.root) : 0.0;

    auto dataflow = find_dataflow_provider(lang);
    double total = w.ngram + w.weighted_ngram + w.syntax + (dataflow ? w.dataflow : 0.0);
    if (total <= 0.0) throw config_error("codebleu: weights sum to zero");
    double score = w.ngram * ngram + w.weighted_ngram * weighted + w.syntax * syn;
    if (dataflow) score += w.dataflow * dataflow->match(cand, ref);
    return score / total;
}

// ---------------------------------------------------------------------------
// Embeddings

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::string id() const = 0;
    virtual int dimension() const = 0;
    virtual std::vector<double> embed(const std::string& text) const = 0;
    virtual std::vector<std::vector<double>> embed_batch(const std::vector<std::string>& texts) const {
        std::vector<std::vector<double>> out;
        out.reserve(texts.size());
        for (const auto& t : texts) out.push_back(embed(t));
        return out;
    }
};

// Offline default: token counts hashed into a fixed 256-dim vector and
// L2-normalized. Deterministic, dependency-free stand-in for a sentence
// embedding model.
class HashedBagEmbedding : public EmbeddingProvider {
public:
    explicit HashedBagEmbedding(int dim = 256, bool lowercase = true)
        : dim_(dim), lowercase_(lowercase) {}

    std::string id() const override { return "hashed_bag"; }
    int dimension() const override { return dim_; }

    std::vector<double> embed(const std::string& text) const override {
        std::vector<double> v(static_cast<std::size_t>(dim_), 0.0);
        for (const std::string& tok : tokenize(text, lowercase_))
            v[fnv1a64(tok) % static_cast<std::uint64_t>(dim_)] += 1.0;
        double norm = 0.0;
        for (double x : v) norm += x * x;
        if (norm > 0.0) {
            norm = std::sqrt(norm);
            for (double& x : v) x /= norm;
        }
        return v;
    }

private:
    int dim_;
    bool lowercase_;
};

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw error("cosine: dimension mismatch");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na <= 0.0 || nb <= 0.0) return std::nan("");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

// Cosine similarity of the two embeddings mapped to [0,1] via (cos+1)/2.
// Zero-norm embeddings (empty text under the bag provider) score 0.
inline double embed_cos(const std::string& a, const std::string& b,
                        const EmbeddingProvider& provider) {
    double c = cosine(provider.embed(a), provider.embed(b));
    if (std::isnan(c)) {
        log_warn("embed_cos: zero-norm embedding, similarity 0");
        return 0.0;
    }
    c = std::clamp(c, -1.0, 1.0);
    return (c + 1.0) / 2.0;
}

// ---------------------------------------------------------------------------
// Distance function registry

struct DistanceOptions {
    int max_n = 4;
    bool bleu_smoothing = true;
    bool lowercase = true;             // NLP metrics; code metrics keep case
    std::string lang = "toy";          // CodeBLEU language
    CodeBleuWeights codebleu_weights{};
    std::shared_ptr<const EmbeddingProvider> embedding; // required for embed_cos
};

using DistanceFn = std::function<double(const std::string&, const std::string&)>;

inline const std::vector<std::string>& distance_ids() {
    static const std::vector<std::string> ids{"bleu", "rouge_l", "token_f1", "codebleu",
                                              "embed_cos"};
    return ids;
}

// Builds dist(a,b) = 1 - similarity(a,b) for one of the known ids.
inline DistanceFn make_distance(const std::string& id, const DistanceOptions& opt = {}) {
    if (id == "bleu") {
        int n = opt.max_n;
        bool sm = opt.bleu_smoothing, lc = opt.lowercase;
        return [n, sm, lc](const std::string& a, const std::string& b) {
            return 1.0 - bleu(a, b, n, sm, lc);
        };
    }
    if (id == "rouge_l") {
        bool lc = opt.lowercase;
        return [lc](const std::string& a, const std::string& b) {
            return 1.0 - rouge_l(a, b, 1.0, lc);
        };
    }
    if (id == "token_f1") {
        bool lc = opt.lowercase;
        return [lc](const std::string& a, const std::string& b) {
            return 1.0 - token_f1(a, b, lc);
        };
    }
    if (id == "codebleu") {
        if (!find_syntax_provider(opt.lang))
            throw config_error("codebleu distance needs a syntax provider for: " + opt.lang);
        std::string lang = opt.lang;
        CodeBleuWeights w = opt.codebleu_weights;
        int n = opt.max_n;
        bool sm = opt.bleu_smoothing;
        return [lang, w, n, sm](const std::string& a, const std::string& b) {
            return 1.0 - codebleu(a, b, lang, w, n, sm);
        };
    }
    if (id == "embed_cos") {
        auto provider = opt.embedding;
        if (!provider) provider = std::make_shared<HashedBagEmbedding>();
        return [provider](const std::string& a, const std::string& b) {
            return 1.0 - embed_cos(a, b, *provider);
        };
    }
    throw config_error("unknown distance: " + id);
}

// Distance conventionally paired with each task.
inline std::string task_default_distance(Task t) {
    switch (t) {
        case Task::qa: return "token_f1";
        case Task::summarization: return "rouge_l";
        case Task::translation: return "bleu";
        case Task::codegen: return "codebleu";
        case Task::other: return "embed_cos";
    }
    return "embed_cos";
}

} // namespace uqgen
