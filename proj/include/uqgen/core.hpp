// Core domain types: prompts, token-level probability records, generations,
// method identifiers, and the generation cache record (JSONL) format.
//
// All probabilities are stored as natural logs; entropies are in nats.
// Every type here is immutable after construction and safe to share across
// threads.
#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "uqgen/errors.hpp"

namespace uqgen {

enum class Task { qa, summarization, translation, codegen, other };

inline std::string task_name(Task t) {
    switch (t) {
        case Task::qa: return "qa";
        case Task::summarization: return "summarization";
        case Task::translation: return "translation";
        case Task::codegen: return "codegen";
        case Task::other: return "other";
    }
    return "other";
}

inline Task parse_task(const std::string& s) {
    if (s == "qa") return Task::qa;
    if (s == "summarization") return Task::summarization;
    if (s == "translation") return Task::translation;
    if (s == "codegen") return Task::codegen;
    if (s == "other") return Task::other;
    throw config_error("unknown task: " + s);
}

struct Prompt {
    std::string id;   // unique within a dataset
    std::string text; // fully rendered input
    Task task = Task::other;
    std::optional<std::string> template_id;
};

// One generated token plus the top-k distribution observed at that step.
// The emitted token is always present in `topk` (backends that omit it have
// it appended with the emitted logprob).
struct TokenStep {
    std::string token;
    double logprob = 0.0; // natural log of the emitted token's probability
    std::vector<std::pair<std::string, double>> topk; // sorted by logprob desc
    int position = 0;
};

enum class FinishReason { stop, length, error };

inline std::string finish_reason_name(FinishReason r) {
    switch (r) {
        case FinishReason::stop: return "stop";
        case FinishReason::length: return "length";
        case FinishReason::error: return "error";
    }
    return "error";
}

inline FinishReason parse_finish_reason(const std::string& s) {
    if (s == "stop") return FinishReason::stop;
    if (s == "length") return FinishReason::length;
    if (s == "error") return FinishReason::error;
    throw data_error("unknown finish_reason: " + s);
}

struct Generation {
    std::string prompt_id;
    std::string text; // decoded output
    std::vector<TokenStep> steps;
    double temperature = 0.0;
    std::optional<std::int64_t> seed;
    std::string backend_id;
    FinishReason finish_reason = FinishReason::stop;
    // Free-form annotations (cache status, emulation flags, fallback notes).
    std::map<std::string, std::string> meta;
};

// ---------------------------------------------------------------------------
// Method identifiers

enum class MethodFamily { single, sample, perturb };
enum class MethodVariant { max_prob, avg_prob, max_ent, avg_ent, vr, vro };
enum class PerturbPoint { max_ent, min_ent, max_diff };

inline std::string family_name(MethodFamily f) {
    switch (f) {
        case MethodFamily::single: return "single";
        case MethodFamily::sample: return "sample";
        case MethodFamily::perturb: return "perturb";
    }
    return "single";
}

inline std::string point_name(PerturbPoint p) {
    switch (p) {
        case PerturbPoint::max_ent: return "max_ent";
        case PerturbPoint::min_ent: return "min_ent";
        case PerturbPoint::max_diff: return "max_diff";
    }
    return "max_ent";
}

// Identifies one of the twelve estimators: four single-inference scores,
// VR/VRO over sampled runs, and VR/VRO over perturbed runs at one of three
// interest points. Multi-inference methods also carry the distance id used.
struct MethodId {
    MethodFamily family = MethodFamily::single;
    MethodVariant variant = MethodVariant::max_prob;
    std::optional<PerturbPoint> point;       // present iff family == perturb
    std::optional<std::string> distance_id;  // present iff family != single

    bool operator==(const MethodId& o) const {
        return family == o.family && variant == o.variant && point == o.point &&
               distance_id == o.distance_id;
    }

    // CLI token, e.g. "max_prob", "sample_vro", "maxdiff_vr".
    std::string token() const {
        switch (family) {
            case MethodFamily::single:
                switch (variant) {
                    case MethodVariant::max_prob: return "max_prob";
                    case MethodVariant::avg_prob: return "avg_prob";
                    case MethodVariant::max_ent: return "max_ent";
                    case MethodVariant::avg_ent: return "avg_ent";
                    default: return "invalid";
                }
            case MethodFamily::sample:
                return variant == MethodVariant::vr ? "sample_vr" : "sample_vro";
            case MethodFamily::perturb: {
                std::string p;
                switch (*point) {
                    case PerturbPoint::max_ent: p = "max"; break;
                    case PerturbPoint::min_ent: p = "min"; break;
                    case PerturbPoint::max_diff: p = "maxdiff"; break;
                }
                return p + (variant == MethodVariant::vr ? "_vr" : "_vro");
            }
        }
        return "invalid";
    }

    // Human-readable name used in reports: "Max Prob", "Sample VRO", "MaxDiff VR".
    std::string name() const {
        switch (family) {
            case MethodFamily::single:
                switch (variant) {
                    case MethodVariant::max_prob: return "Max Prob";
                    case MethodVariant::avg_prob: return "Average Prob";
                    case MethodVariant::max_ent: return "Max Ent";
                    case MethodVariant::avg_ent: return "Average Ent";
                    default: return "Invalid";
                }
            case MethodFamily::sample:
                return variant == MethodVariant::vr ? "Sample VR" : "Sample VRO";
            case MethodFamily::perturb: {
                std::string p;
                switch (*point) {
                    case PerturbPoint::max_ent: p = "Max"; break;
                    case PerturbPoint::min_ent: p = "Min"; break;
                    case PerturbPoint::max_diff: p = "MaxDiff"; break;
                }
                return p + (variant == MethodVariant::vr ? " VR" : " VRO");
            }
        }
        return "Invalid";
    }
};

// Builds a MethodId and enforces the structural rules (point only for the
// perturbation family, distance only for multi-inference families).
inline MethodId make_method(MethodFamily family, MethodVariant variant,
                            std::optional<PerturbPoint> point = std::nullopt,
                            std::optional<std::string> distance_id = std::nullopt) {
    if ((family == MethodFamily::perturb) != point.has_value())
        throw config_error("perturbation point must be given exactly for the perturb family");
    bool multi = family != MethodFamily::single;
    if (multi != distance_id.has_value())
        throw config_error("distance id must be given exactly for sample/perturb families");
    bool vr_like = variant == MethodVariant::vr || variant == MethodVariant::vro;
    if (multi != vr_like)
        throw config_error("variant does not match family");
    return MethodId{family, variant, point, std::move(distance_id)};
}

// Parses a CLI method token. Multi-inference methods get `distance_id`.
inline MethodId parse_method(const std::string& token, const std::string& distance_id) {
    auto single = [&](MethodVariant v) { return make_method(MethodFamily::single, v); };
    auto sample = [&](MethodVariant v) {
        return make_method(MethodFamily::sample, v, std::nullopt, distance_id);
    };
    auto perturb = [&](PerturbPoint p, MethodVariant v) {
        return make_method(MethodFamily::perturb, v, p, distance_id);
    };
    if (token == "max_prob") return single(MethodVariant::max_prob);
    if (token == "avg_prob") return single(MethodVariant::avg_prob);
    if (token == "max_ent") return single(MethodVariant::max_ent);
    if (token == "avg_ent") return single(MethodVariant::avg_ent);
    if (token == "sample_vr") return sample(MethodVariant::vr);
    if (token == "sample_vro") return sample(MethodVariant::vro);
    if (token == "max_vr") return perturb(PerturbPoint::max_ent, MethodVariant::vr);
    if (token == "max_vro") return perturb(PerturbPoint::max_ent, MethodVariant::vro);
    if (token == "min_vr") return perturb(PerturbPoint::min_ent, MethodVariant::vr);
    if (token == "min_vro") return perturb(PerturbPoint::min_ent, MethodVariant::vro);
    if (token == "maxdiff_vr") return perturb(PerturbPoint::max_diff, MethodVariant::vr);
    if (token == "maxdiff_vro") return perturb(PerturbPoint::max_diff, MethodVariant::vro);
    throw config_error("unknown method: " + token);
}

// All twelve methods for one fixed distance id.
inline std::vector<MethodId> all_methods(const std::string& distance_id) {
    std::vector<MethodId> out;
    out.push_back(make_method(MethodFamily::single, MethodVariant::max_prob));
    out.push_back(make_method(MethodFamily::single, MethodVariant::avg_prob));
    out.push_back(make_method(MethodFamily::single, MethodVariant::max_ent));
    out.push_back(make_method(MethodFamily::single, MethodVariant::avg_ent));
    out.push_back(make_method(MethodFamily::sample, MethodVariant::vr, std::nullopt, distance_id));
    out.push_back(make_method(MethodFamily::sample, MethodVariant::vro, std::nullopt, distance_id));
    for (auto p : {PerturbPoint::max_ent, PerturbPoint::min_ent, PerturbPoint::max_diff}) {
        out.push_back(make_method(MethodFamily::perturb, MethodVariant::vr, p, distance_id));
        out.push_back(make_method(MethodFamily::perturb, MethodVariant::vro, p, distance_id));
    }
    return out;
}

// A computed uncertainty value (higher = more uncertain) together with the
// inference runs that produced it.
struct UncertaintyScore {
    MethodId method;
    double value = 0.0;
    std::vector<Generation> inferences; // empty for the single family
    std::map<std::string, std::string> meta;
};

// ---------------------------------------------------------------------------
// Validation

// Total function: returns one description per violated invariant, empty when
// the generation is well-formed. The text-reconstruction check follows the
// backend's declared meta["detok"]: "" or "concat" → plain concatenation,
// "space" → single-space join, "none" → skipped.
inline std::vector<std::string> validate_generation(const Generation& g) {
    std::vector<std::string> v;
    auto fmt = [](const std::string& where, const std::string& rule) { return where + ": " + rule; };

    if (g.temperature < 0)
        v.push_back(fmt("temperature", "must be >= 0"));

    auto detok_it = g.meta.find("detok");
    std::string detok = detok_it == g.meta.end() ? "concat" : detok_it->second;

    std::string concat;
    for (std::size_t s = 0; s < g.steps.size(); ++s) {
        const TokenStep& step = g.steps[s];
        std::string where = "steps[" + std::to_string(s) + "]";
        if (detok == "space" && s > 0) concat += ' ';
        concat += step.token;
        if (step.position < 0) v.push_back(fmt(where + ".position", "must be >= 0"));
        if (step.logprob > 0) v.push_back(fmt(where + ".logprob", "logprob > 0"));
        if (step.topk.empty()) {
            v.push_back(fmt(where + ".topk", "must be non-empty"));
            continue;
        }
        double mass = 0.0;
        bool contains_emitted = false;
        for (std::size_t k = 0; k < step.topk.size(); ++k) {
            const auto& [tok, lp] = step.topk[k];
            if (lp > 0) v.push_back(fmt(where + ".topk[" + std::to_string(k) + "].logprob", "logprob > 0"));
            if (k > 0 && step.topk[k - 1].second < lp)
                v.push_back(fmt(where + ".topk", "not sorted by logprob descending"));
            mass += std::exp(lp);
            if (tok == step.token) contains_emitted = true;
        }
        if (!contains_emitted)
            v.push_back(fmt(where + ".topk", "emitted token missing from topk"));
        if (mass > 1.0 + 1e-6)
            v.push_back(fmt(where + ".topk", "topk mass > 1"));
    }
    if (detok != "none" && concat != g.text)
        v.push_back(fmt("text", "does not reconstruct from step tokens"));
    return v;
}

// ---------------------------------------------------------------------------
// Cache record (one JSON object per line). Field names are a fixed contract.

inline nlohmann::json generation_to_json(const Generation& g) {
    nlohmann::json steps = nlohmann::json::array();
    for (const TokenStep& s : g.steps) {
        nlohmann::json topk = nlohmann::json::array();
        for (const auto& [tok, lp] : s.topk) topk.push_back(nlohmann::json::array({tok, lp}));
        steps.push_back({{"token", s.token},
                         {"logprob", s.logprob},
                         {"position", s.position},
                         {"topk", std::move(topk)}});
    }
    nlohmann::json j{{"prompt_id", g.prompt_id},
                     {"text", g.text},
                     {"temperature", g.temperature},
                     {"seed", nullptr},
                     {"backend_id", g.backend_id},
                     {"finish_reason", finish_reason_name(g.finish_reason)},
                     {"steps", std::move(steps)}};
    if (g.seed) j["seed"] = *g.seed;
    if (!g.meta.empty()) j["meta"] = g.meta;
    return j;
}

inline Generation generation_from_json(const nlohmann::json& j) {
    try {
        Generation g;
        g.prompt_id = j.at("prompt_id").get<std::string>();
        g.text = j.at("text").get<std::string>();
        g.temperature = j.at("temperature").get<double>();
        if (j.contains("seed") && !j.at("seed").is_null())
            g.seed = j.at("seed").get<std::int64_t>();
        g.backend_id = j.at("backend_id").get<std::string>();
        g.finish_reason = parse_finish_reason(j.at("finish_reason").get<std::string>());
        for (const auto& js : j.at("steps")) {
            TokenStep s;
            s.token = js.at("token").get<std::string>();
            s.logprob = js.at("logprob").get<double>();
            s.position = js.at("position").get<int>();
            for (const auto& jt : js.at("topk"))
                s.topk.emplace_back(jt.at(0).get<std::string>(), jt.at(1).get<double>());
            g.steps.push_back(std::move(s));
        }
        if (j.contains("meta"))
            g.meta = j.at("meta").get<std::map<std::string, std::string>>();
        return g;
    } catch (const nlohmann::json::exception& e) {
        throw data_error(std::string("bad generation record: ") + e.what());
    }
}

inline std::string generation_to_line(const Generation& g) { return generation_to_json(g).dump(); }

inline Generation generation_from_line(const std::string& line) {
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw data_error("bad generation record: not valid JSON");
    return generation_from_json(j);
}

} // namespace uqgen
