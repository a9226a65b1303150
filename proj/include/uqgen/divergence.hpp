// Multi-inference uncertainty: variation ratio (VR) and variation ratio to
// original (VRO) over a set of generations, plus the two ways of obtaining
// that set — temperature sampling and interest-point perturbation.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "uqgen/core.hpp"
#include "uqgen/distance.hpp"
#include "uqgen/errors.hpp"
#include "uqgen/generators.hpp"
#include "uqgen/token_scores.hpp"
#include "uqgen/util.hpp"

namespace uqgen {

// Backend failure partway through a multi-inference run. Carries whatever
// generations completed so callers can still cache them.
class inference_error : public error {
public:
    inference_error(const std::string& what, std::vector<Generation> partial)
        : error(what), partial_(std::move(partial)) {}
    const std::vector<Generation>& partial() const { return partial_; }

private:
    std::vector<Generation> partial_;
};

enum class InferenceSource { sample, perturb };

struct PerturbMeta {
    int position = 0;
    PerturbPoint strategy = PerturbPoint::max_ent;
    std::vector<std::string> substituted_tokens;
};

// T inferences for one prompt. For the sample family the members of the VR
// sum are the T sampled runs and `original` is only the VRO reference; for
// the perturbation family the members are the original plus the T-1
// perturbed runs (configurable via include_original).
struct InferenceSet {
    Generation original;
    std::vector<Generation> variants;
    std::vector<double> weights; // per VR member; empty = all 1
    InferenceSource source = InferenceSource::sample;
    bool include_original = true; // perturb family only
    std::optional<PerturbMeta> perturb_meta;

    std::vector<const Generation*> vr_members() const {
        std::vector<const Generation*> m;
        if (source == InferenceSource::perturb && include_original) m.push_back(&original);
        for (const Generation& v : variants) m.push_back(&v);
        return m;
    }
};

// VR = 1 - [sum_i w_i * (sum_{j != i} (1 - d(t_i, t_j)) / (n-1))] / sum_i w_i
inline double vr(const InferenceSet& set, const DistanceFn& d) {
    std::vector<const Generation*> members = set.vr_members();
    std::size_t n = members.size();
    if (n < 2) throw stat_error("vr: need at least 2 members, have " + std::to_string(n));
    if (!set.weights.empty() && set.weights.size() != n)
        throw stat_error("vr: weights length does not match member count");
    for (std::size_t i = 0; i < n; ++i)
        if (members[i]->text.empty())
            throw stat_error("vr: member " + std::to_string(i) + " has empty text");

    double wsum = 0.0, total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double w = set.weights.empty() ? 1.0 : set.weights[i];
        if (w < 0) throw stat_error("vr: negative weight");
        double inner = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            inner += 1.0 - d(members[i]->text, members[j]->text);
        }
        total += w * inner / static_cast<double>(n - 1);
        wsum += w;
    }
    if (wsum <= 0.0) throw stat_error("vr: weights sum to zero");
    return 1.0 - total / wsum;
}

// VRO = 1 - sum_i (1 - d(t_i, original)) / n over the same member list.
inline double vro(const InferenceSet& set, const DistanceFn& d) {
    std::vector<const Generation*> members = set.vr_members();
    std::size_t n = members.size();
    if (n < 1) throw stat_error("vro: empty member list");
    if (set.original.text.empty()) throw stat_error("vro: original has empty text");
    for (std::size_t i = 0; i < n; ++i)
        if (members[i]->text.empty())
            throw stat_error("vro: member " + std::to_string(i) + " has empty text");
    double total = 0.0;
    for (const Generation* m : members) total += 1.0 - d(m->text, set.original.text);
    return 1.0 - total / static_cast<double>(n);
}

// Deterministic per-sample seeds derived from one base seed.
inline std::vector<std::uint64_t> derive_seeds(std::uint64_t base, int count) {
    std::vector<std::uint64_t> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i)
        out.push_back(splitmix64(base ^ (0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(i + 1))));
    return out;
}

// One greedy original plus T runs sampled at temperature t (one seed each).
// Passing `original` reuses an already computed greedy generation.
inline InferenceSet sample_inferences(Generator& gen, const Prompt& prompt, int T, double t,
                                      const std::vector<std::uint64_t>& seeds, int max_tokens = 64,
                                      int topk = 5, const Generation* original = nullptr) {
    if (T < 2) throw config_error("sample_inferences: T must be >= 2");
    if (t <= 0) throw config_error("sample_inferences: temperature must be > 0");
    if (static_cast<int>(seeds.size()) != T)
        throw config_error("sample_inferences: need exactly T seeds");

    InferenceSet set;
    set.source = InferenceSource::sample;
    std::vector<Generation> done;
    try {
        GenRequest req;
        req.prompt = prompt;
        req.temperature = 0.0;
        req.max_tokens = max_tokens;
        req.topk = topk;
        if (original) {
            set.original = *original;
        } else {
            set.original = gen.generate(req);
            done.push_back(set.original);
        }
        for (int i = 0; i < T; ++i) {
            req.temperature = t;
            req.seed = static_cast<std::int64_t>(seeds[static_cast<std::size_t>(i)]);
            set.variants.push_back(gen.generate(req));
            done.push_back(set.variants.back());
        }
    } catch (const backend_error& e) {
        throw inference_error(std::string("sample_inferences: ") + e.what(), std::move(done));
    }
    return set;
}

// Interest-point selection over the original's per-step entropies.
// max_ent/min_ent: argmax/argmin over all positions. max_diff: the position
// j >= 1 with the largest entropy gain over its predecessor. Ties break
// toward the smallest eligible position.
inline int select_perturb_point(const Generation& g, PerturbPoint strategy,
                                EntropyMode mode = EntropyMode::raw) {
    if (g.steps.empty()) throw stat_error("select_perturb_point: no steps");
    std::vector<double> h;
    h.reserve(g.steps.size());
    for (const TokenStep& s : g.steps) h.push_back(token_entropy(s, mode));

    if (strategy == PerturbPoint::max_diff) {
        if (h.size() < 2)
            throw stat_error("select_perturb_point: max_diff needs at least 2 steps");
        int best = 1;
        for (std::size_t j = 2; j < h.size(); ++j)
            if (h[j] - h[j - 1] > h[best] - h[best - 1]) best = static_cast<int>(j);
        return best;
    }
    int best = 0;
    for (std::size_t j = 1; j < h.size(); ++j) {
        bool better = strategy == PerturbPoint::max_ent ? h[j] > h[static_cast<std::size_t>(best)]
                                                        : h[j] < h[static_cast<std::size_t>(best)];
        if (better) best = static_cast<int>(j);
    }
    return best;
}

struct PerturbOptions {
    EntropyMode entropy_mode = EntropyMode::raw;
    bool include_original = true;
    int max_tokens = 64;
    int topk = 5;
};

// Replaces the token at the selected interest point with the T-1
// highest-probability alternatives and regenerates each continuation
// greedily from the forced prefix.
inline InferenceSet perturb_inferences(Generator& gen, const Prompt& prompt,
                                       const Generation& original, PerturbPoint strategy, int T,
                                       const PerturbOptions& opt = {}) {
    if (T < 2) throw config_error("perturb_inferences: T must be >= 2");
    if (original.steps.empty()) throw stat_error("perturb_inferences: original has no steps");
    if (!gen.has_capability(Capability::forced_prefix))
        throw capability_error("perturb_inferences: backend lacks forced-prefix continuation");

    int pos = select_perturb_point(original, strategy, opt.entropy_mode);
    const TokenStep& step = original.steps[static_cast<std::size_t>(pos)];

    std::vector<std::string> alts;
    for (const auto& [tok, lp] : step.topk) {
        (void)lp;
        if (tok != step.token) alts.push_back(tok); // topk is sorted by prob desc
    }
    if (static_cast<int>(alts.size()) < T - 1)
        throw stat_error("perturb_inferences: only " + std::to_string(alts.size()) +
                         " alternatives available at position " + std::to_string(pos) +
                         ", need " + std::to_string(T - 1));
    alts.resize(static_cast<std::size_t>(T - 1));

    std::vector<std::string> prefix;
    for (int i = 0; i < pos; ++i)
        prefix.push_back(original.steps[static_cast<std::size_t>(i)].token);

    InferenceSet set;
    set.source = InferenceSource::perturb;
    set.include_original = opt.include_original;
    set.original = original;
    set.perturb_meta = PerturbMeta{pos, strategy, alts};

    std::vector<Generation> done;
    try {
        for (const std::string& alt : alts) {
            GenRequest req;
            req.prompt = prompt;
            req.temperature = 0.0;
            req.max_tokens = opt.max_tokens;
            req.topk = opt.topk;
            req.forced_prefix = prefix;
            req.forced_prefix.push_back(alt);
            set.variants.push_back(gen.generate(req));
            done.push_back(set.variants.back());
        }
    } catch (const backend_error& e) {
        throw inference_error(std::string("perturb_inferences: ") + e.what(), std::move(done));
    }
    return set;
}

} // namespace uqgen
