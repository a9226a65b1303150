// Run configuration. Defaults reproduce the reference setting (T=5 inferences
// at temperature 0.7 with top-5 token access). The JSON form round-trips
// losslessly and is embedded verbatim in every summary.
#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "uqgen/errors.hpp"

namespace uqgen {

inline const char* version() { return "0.1.0"; }

struct RunConfig {
    std::string backend = "mock";             // "mock" | "http"
    std::string model;                        // mock: definition file; http: model name
    std::string base_url;                     // http backend endpoint
    std::vector<std::string> methods;         // method tokens; empty = all twelve
    std::string distance = "embed_cos";       // distance for sample/perturb families
    std::string embed_provider = "hashed_bag"; // "hashed_bag" | "remote"
    int T = 5;
    double temperature = 0.7;
    int topk = 5;
    std::uint64_t seed = 0;
    int parallelism = 1;
    int max_tokens = 64;
    std::string cache_path;                   // empty = no cache
    std::string entropy_mode = "raw";         // "raw" | "renormalized"
    bool perturb_include_original = true;
    bool bleu_smoothing = true;
    std::string prompt_template = "{input}";
    int sample_n = 0;                         // 0 = whole dataset
    std::string judge_cmd;                    // whitespace-split argv; empty = built-in
    std::string judge_file;                   // precomputed judge JSONL
    int judge_timeout_ms = 10000;
    std::vector<std::string> report_formats{"json", "csv"};

    bool operator==(const RunConfig&) const = default;
};

inline nlohmann::json config_to_json(const RunConfig& c) {
    return nlohmann::json{{"backend", c.backend},
                          {"model", c.model},
                          {"base_url", c.base_url},
                          {"methods", c.methods},
                          {"distance", c.distance},
                          {"embed_provider", c.embed_provider},
                          {"T", c.T},
                          {"temperature", c.temperature},
                          {"topk", c.topk},
                          {"seed", c.seed},
                          {"parallelism", c.parallelism},
                          {"max_tokens", c.max_tokens},
                          {"cache_path", c.cache_path},
                          {"entropy_mode", c.entropy_mode},
                          {"perturb_include_original", c.perturb_include_original},
                          {"bleu_smoothing", c.bleu_smoothing},
                          {"prompt_template", c.prompt_template},
                          {"sample_n", c.sample_n},
                          {"judge_cmd", c.judge_cmd},
                          {"judge_file", c.judge_file},
                          {"judge_timeout_ms", c.judge_timeout_ms},
                          {"report_formats", c.report_formats}};
}

inline RunConfig config_from_json(const nlohmann::json& j) {
    RunConfig base;
    const nlohmann::json known = config_to_json(base);
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (!known.contains(key)) throw config_error("unknown config key: " + key);
    }
    try {
        RunConfig c;
        c.backend = j.value("backend", base.backend);
        c.model = j.value("model", base.model);
        c.base_url = j.value("base_url", base.base_url);
        c.methods = j.value("methods", base.methods);
        c.distance = j.value("distance", base.distance);
        c.embed_provider = j.value("embed_provider", base.embed_provider);
        c.T = j.value("T", base.T);
        c.temperature = j.value("temperature", base.temperature);
        c.topk = j.value("topk", base.topk);
        c.seed = j.value("seed", base.seed);
        c.parallelism = j.value("parallelism", base.parallelism);
        c.max_tokens = j.value("max_tokens", base.max_tokens);
        c.cache_path = j.value("cache_path", base.cache_path);
        c.entropy_mode = j.value("entropy_mode", base.entropy_mode);
        c.perturb_include_original =
                j.value("perturb_include_original", base.perturb_include_original);
        c.bleu_smoothing = j.value("bleu_smoothing", base.bleu_smoothing);
        c.prompt_template = j.value("prompt_template", base.prompt_template);
        c.sample_n = j.value("sample_n", base.sample_n);
        c.judge_cmd = j.value("judge_cmd", base.judge_cmd);
        c.judge_file = j.value("judge_file", base.judge_file);
        c.judge_timeout_ms = j.value("judge_timeout_ms", base.judge_timeout_ms);
        c.report_formats = j.value("report_formats", base.report_formats);
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw config_error(std::string("bad config: ") + e.what());
    }
}

inline RunConfig config_from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file: " + path);
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw config_error("config file is not valid JSON: " + path);
    return config_from_json(j);
}

inline void validate_config(const RunConfig& c) {
    if (c.backend != "mock" && c.backend != "http")
        throw config_error("unknown backend: " + c.backend);
    if (c.T < 2) throw config_error("T must be >= 2");
    if (c.temperature < 0) throw config_error("temperature must be >= 0");
    if (c.topk < 1) throw config_error("topk must be >= 1");
    if (c.parallelism < 1) throw config_error("parallelism must be >= 1");
    if (c.max_tokens < 1) throw config_error("max_tokens must be >= 1");
    if (c.entropy_mode != "raw" && c.entropy_mode != "renormalized")
        throw config_error("unknown entropy_mode: " + c.entropy_mode);
    bool known_dist = false;
    for (const char* d : {"bleu", "rouge_l", "token_f1", "codebleu", "embed_cos"})
        if (c.distance == d) known_dist = true;
    if (!known_dist) throw config_error("unknown distance: " + c.distance);
    if (c.embed_provider != "hashed_bag" && c.embed_provider != "remote")
        throw config_error("unknown embed_provider: " + c.embed_provider);
}

} // namespace uqgen
