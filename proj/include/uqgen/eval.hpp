// Performance metrics (semantic similarity, code quality Q), association
// statistics (Pearson, Spearman, AUC), and the end-to-end evaluation fold
// that ties generation, scoring, and judging together.
#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "uqgen/core.hpp"
#include "uqgen/dataset.hpp"
#include "uqgen/distance.hpp"
#include "uqgen/divergence.hpp"
#include "uqgen/errors.hpp"
#include "uqgen/generators.hpp"
#include "uqgen/judge.hpp"
#include "uqgen/token_scores.hpp"

namespace uqgen {

// ---------------------------------------------------------------------------
// Statistics

inline double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size()) throw stat_error("pearson: length mismatch");
    std::size_t n = xs.size();
    if (n < 3) throw stat_error("pearson: need at least 3 pairs, have " + std::to_string(n));
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double num = 0.0, dx = 0.0, dy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        num += (xs[i] - mx) * (ys[i] - my);
        dx += (xs[i] - mx) * (xs[i] - mx);
        dy += (ys[i] - my) * (ys[i] - my);
    }
    if (dx <= 0.0 || dy <= 0.0) throw stat_error("pearson: constant input, correlation undefined");
    return std::clamp(num / std::sqrt(dx * dy), -1.0, 1.0);
}

// Average ranks (1-based, ties share the mean rank).
inline std::vector<double> average_ranks(const std::vector<double>& xs) {
    std::size_t n = xs.size();
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    std::vector<double> r(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && xs[idx[j + 1]] == xs[idx[i]]) ++j;
        double mean = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[idx[k]] = mean;
        i = j + 1;
    }
    return r;
}

inline double spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size()) throw stat_error("spearman: length mismatch");
    return pearson(average_ranks(xs), average_ranks(ys));
}

// Mann-Whitney AUC: probability a random positive outranks a random negative,
// ties counted one half.
inline double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw stat_error("auc: length mismatch");
    double n_pos = 0.0, n_neg = 0.0;
    for (int l : labels) {
        if (l == 1)
            ++n_pos;
        else if (l == 0)
            ++n_neg;
        else
            throw stat_error("auc: labels must be 0 or 1");
    }
    if (n_pos == 0.0 || n_neg == 0.0)
        throw stat_error("auc: both classes required, AUC undefined");
    std::vector<double> r = average_ranks(scores);
    double rank_pos = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == 1) rank_pos += r[i];
    double u = rank_pos - n_pos * (n_pos + 1.0) / 2.0;
    return u / (n_pos * n_neg);
}

// ---------------------------------------------------------------------------
// Performance metrics

// Max over references of the embedding-cosine similarity.
inline double semantic_performance(const std::string& output,
                                   const std::vector<std::string>& references,
                                   const EmbeddingProvider& provider) {
    if (references.empty()) throw stat_error("semantic_performance: no references");
    double best = 0.0;
    for (const std::string& ref : references) best = std::max(best, embed_cos(output, ref, provider));
    return best;
}

// Q = (Q_syntax + Q_semantics) / 2 with Q_semantics the passing-test
// fraction; zero-test results are flagged and score Q_semantics = 0.
inline double q_score(const JudgeResult& j) {
    double syntax = j.syntax_ok ? 1.0 : 0.0;
    double semantics =
            j.tests_total > 0 ? static_cast<double>(j.tests_passed) / j.tests_total : 0.0;
    return (syntax + semantics) / 2.0;
}

// 0 iff completely correct (Q = 1), else 1.
inline int label_code(const JudgeResult& j) {
    bool perfect = j.syntax_ok && j.tests_total > 0 && j.tests_passed == j.tests_total;
    return perfect ? 0 : 1;
}

// ---------------------------------------------------------------------------
// Evaluation records and summaries

struct EvalRecord {
    std::string prompt_id;
    double performance = 0.0;
    std::optional<int> label; // codegen only
    std::map<std::string, double> scores;       // method token -> value
    std::map<std::string, std::string> score_errors; // method token -> reason
    std::map<std::string, double> timing_ms;    // method token -> wall clock
};

struct MetricValue {
    std::optional<double> value;
    std::string na_reason; // set when value is absent
    int n = 0;             // pairs behind the statistic
};

struct MethodSummary {
    MethodId method;
    MetricValue pearson;  // NLP instances
    MetricValue spearman; // NLP instances
    MetricValue auc;      // codegen instances
    int scored = 0;       // records carrying this method's score
    int skipped = 0;      // instances without it
};

struct EvalSummary {
    int instances = 0;
    int evaluated = 0;
    int skipped = 0;
    std::vector<std::pair<std::string, std::string>> errors; // instance id -> reason
    std::vector<MethodSummary> methods;
};

struct EvalOptions {
    std::vector<MethodId> methods;
    std::string distance_id = "embed_cos";
    DistanceOptions distance_options{};
    std::shared_ptr<const EmbeddingProvider> embedding; // performance metric
    int T = 5;
    double temperature = 0.7;
    int topk = 5;
    int max_tokens = 64;
    std::uint64_t seed = 0;
    EntropyMode entropy_mode = EntropyMode::raw;
    bool perturb_include_original = true;
    int parallelism = 1;
    std::string prompt_template = "{input}";
    JudgeConfig judge{};
    std::map<std::string, JudgeResult> precomputed_judge; // prompt id -> result
};

struct EvalOutput {
    std::vector<EvalRecord> records;
    EvalSummary summary;
};

// Per-prompt method scoring with lazily built, shared inference sets: the
// sample set is generated once for both sample methods, and each perturbation
// strategy's set once for its VR/VRO pair.
class MethodScorer {
public:
    MethodScorer(Generator& gen, const Prompt& prompt, const Generation& original,
                 const EvalOptions& opt, const DistanceFn& dist, std::uint64_t instance_seed)
        : gen_(gen), prompt_(prompt), original_(original), opt_(opt), dist_(dist),
          seed_(instance_seed) {}

    double score(const MethodId& m) {
        switch (m.family) {
            case MethodFamily::single:
                return single_score(original_, m.variant, opt_.entropy_mode, prompt_.task);
            case MethodFamily::sample: {
                const InferenceSet& set = sample_set();
                return m.variant == MethodVariant::vr ? vr(set, dist_) : vro(set, dist_);
            }
            case MethodFamily::perturb: {
                const InferenceSet& set = perturb_set(*m.point);
                return m.variant == MethodVariant::vr ? vr(set, dist_) : vro(set, dist_);
            }
        }
        throw stat_error("unknown method family");
    }

    // Generations a method's score is computed over.
    int inference_count(const MethodId& m) const {
        switch (m.family) {
            case MethodFamily::single: return 1;
            case MethodFamily::sample: return opt_.T;
            case MethodFamily::perturb: return opt_.perturb_include_original ? opt_.T : opt_.T - 1;
        }
        return 1;
    }

private:
    const InferenceSet& sample_set() {
        if (!sample_) {
            std::vector<std::uint64_t> seeds = derive_seeds(seed_, opt_.T);
            sample_ = sample_inferences(gen_, prompt_, opt_.T, opt_.temperature, seeds,
                                        opt_.max_tokens, opt_.topk, &original_);
        }
        return *sample_;
    }

    const InferenceSet& perturb_set(PerturbPoint p) {
        auto it = perturb_.find(p);
        if (it == perturb_.end()) {
            PerturbOptions po;
            po.entropy_mode = opt_.entropy_mode;
            po.include_original = opt_.perturb_include_original;
            po.max_tokens = opt_.max_tokens;
            po.topk = opt_.topk;
            it = perturb_.emplace(p, perturb_inferences(gen_, prompt_, original_, p, opt_.T, po))
                         .first;
        }
        return it->second;
    }

    Generator& gen_;
    const Prompt& prompt_;
    const Generation& original_;
    const EvalOptions& opt_;
    const DistanceFn& dist_;
    std::uint64_t seed_;
    std::optional<InferenceSet> sample_;
    std::map<PerturbPoint, InferenceSet> perturb_;
};

// Evaluates every instance: greedy original, performance metric (semantic
// similarity or judged Q), one score per requested method. Per-instance
// failures are recorded and skipped; per-method failures leave a reason in
// the record without discarding the instance.
inline EvalOutput evaluate(const std::vector<DatasetInstance>& instances, Generator& gen,
                           const EvalOptions& opt) {
    if (opt.methods.empty()) throw config_error("evaluate: no methods requested");
    std::shared_ptr<const EmbeddingProvider> embedding = opt.embedding;
    if (!embedding) embedding = std::make_shared<HashedBagEmbedding>();

    struct Slot {
        std::optional<EvalRecord> record;
        std::string error;
    };
    std::vector<Slot> slots(instances.size());

    auto process = [&](std::size_t i) {
        const DatasetInstance& inst = instances[i];
        Slot& slot = slots[i];
        try {
            Prompt prompt{inst.id, inst.rendered_prompt(opt.prompt_template), inst.task, {}};

            GenRequest greedy;
            greedy.prompt = prompt;
            greedy.temperature = 0.0;
            greedy.max_tokens = opt.max_tokens;
            greedy.topk = opt.topk;
            Generation original = gen.generate(greedy);

            EvalRecord rec;
            rec.prompt_id = inst.id;

            if (inst.task == Task::codegen) {
                JudgeResult jr;
                if (!opt.precomputed_judge.empty()) {
                    auto it = opt.precomputed_judge.find(inst.id);
                    if (it == opt.precomputed_judge.end())
                        throw data_error("no precomputed judge entry for " + inst.id);
                    jr = it->second;
                } else {
                    if (inst.tests.empty())
                        throw data_error("codegen instance " + inst.id +
                                         " has no tests and no judge entry");
                    JudgeConfig jc = opt.judge;
                    if (!inst.language.empty()) jc.language = inst.language;
                    jr = run_judge(original.text, inst.tests, jc);
                }
                rec.performance = q_score(jr);
                rec.label = label_code(jr);
            } else {
                rec.performance = semantic_performance(original.text, inst.references, *embedding);
            }

            DistanceOptions dopt = opt.distance_options;
            if (!inst.language.empty()) dopt.lang = inst.language;
            if (!dopt.embedding) dopt.embedding = embedding;
            DistanceFn dist = make_distance(opt.distance_id, dopt);

            std::uint64_t instance_seed = splitmix64(opt.seed ^ fnv1a64(inst.id));
            MethodScorer scorer(gen, prompt, original, opt, dist, instance_seed);
            for (const MethodId& m : opt.methods) {
                auto t0 = std::chrono::steady_clock::now();
                try {
                    rec.scores[m.token()] = scorer.score(m);
                } catch (const error& e) {
                    rec.score_errors[m.token()] = e.what();
                }
                auto t1 = std::chrono::steady_clock::now();
                rec.timing_ms[m.token()] =
                        std::chrono::duration<double, std::milli>(t1 - t0).count();
            }
            slot.record = std::move(rec);
        } catch (const error& e) {
            slot.error = e.what();
        }
    };

    int workers = std::max(1, opt.parallelism);
    if (workers == 1 || instances.size() <= 1) {
        for (std::size_t i = 0; i < instances.size(); ++i) process(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < instances.size();
                     i = next.fetch_add(1))
                    process(i);
            });
        for (auto& th : pool) th.join();
    }

    // Deterministic fold in dataset order.
    EvalOutput out;
    out.summary.instances = static_cast<int>(instances.size());
    for (std::size_t i = 0; i < slots.size(); ++i) {
        if (slots[i].record) {
            out.records.push_back(std::move(*slots[i].record));
        } else {
            out.summary.errors.emplace_back(instances[i].id, slots[i].error);
        }
    }
    out.summary.evaluated = static_cast<int>(out.records.size());
    out.summary.skipped = out.summary.instances - out.summary.evaluated;

    for (const MethodId& m : opt.methods) {
        MethodSummary ms;
        ms.method = m;
        std::vector<double> nlp_scores, nlp_perf, code_scores;
        std::vector<int> code_labels;
        for (const EvalRecord& r : out.records) {
            auto it = r.scores.find(m.token());
            if (it == r.scores.end()) continue;
            ++ms.scored;
            if (r.label) {
                code_scores.push_back(it->second);
                code_labels.push_back(*r.label);
            } else {
                nlp_scores.push_back(it->second);
                nlp_perf.push_back(r.performance);
            }
        }
        ms.skipped = out.summary.instances - ms.scored;
        ms.pearson.n = ms.spearman.n = static_cast<int>(nlp_scores.size());
        ms.auc.n = static_cast<int>(code_scores.size());
        if (!nlp_scores.empty()) {
            try {
                ms.pearson.value = pearson(nlp_scores, nlp_perf);
            } catch (const stat_error& e) {
                ms.pearson.na_reason = e.what();
            }
            try {
                ms.spearman.value = spearman(nlp_scores, nlp_perf);
            } catch (const stat_error& e) {
                ms.spearman.na_reason = e.what();
            }
        }
        if (!code_scores.empty()) {
            try {
                ms.auc.value = auc(code_scores, code_labels);
            } catch (const stat_error& e) {
                ms.auc.na_reason = e.what();
            }
        }
        out.summary.methods.push_back(std::move(ms));
    }
    return out;
}

} // namespace uqgen
