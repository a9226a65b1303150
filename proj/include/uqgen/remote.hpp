// Remote services: an OpenAI-compatible completions backend (with top
// logprobs) and an HTTP embedding provider. Both carry bounded timeouts and
// retries; neither is required for offline runs.
#pragma once

#include <chrono>
#include <cstdlib>
#include <memory>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "uqgen/core.hpp"
#include "uqgen/distance.hpp"
#include "uqgen/errors.hpp"
#include "uqgen/generators.hpp"

namespace uqgen {

namespace detail {

// "http://host:port/path" -> {"http://host:port", "/path"}
inline std::pair<std::string, std::string> split_url(const std::string& url) {
    auto scheme = url.find("://");
    if (scheme == std::string::npos) throw config_error("bad URL (missing scheme): " + url);
    auto slash = url.find('/', scheme + 3);
    if (slash == std::string::npos) return {url, "/"};
    return {url.substr(0, slash), url.substr(slash)};
}

inline std::string env_or(const char* name, const std::string& fallback) {
    const char* v = std::getenv(name);
    return v ? std::string(v) : fallback;
}

// POST with bounded retries. Retries transport failures, HTTP 429 and 5xx
// with linear backoff; other statuses fail immediately.
inline std::string post_with_retries(const std::string& base, const std::string& path,
                                     const std::string& body, const httplib::Headers& headers,
                                     int timeout_ms, int max_retries, int backoff_ms,
                                     const std::string& who) {
    std::string last;
    for (int attempt = 0; attempt <= max_retries; ++attempt) {
        if (attempt > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms * attempt));
        httplib::Client cli(base);
        cli.set_connection_timeout(0, timeout_ms * 1000);
        cli.set_read_timeout(0, timeout_ms * 1000);
        cli.set_write_timeout(0, timeout_ms * 1000);
        httplib::Result res = cli.Post(path, headers, body, "application/json");
        if (!res) {
            last = who + ": transport error (" + httplib::to_string(res.error()) + ")";
            continue;
        }
        if (res->status == 429 || res->status >= 500) {
            last = who + ": HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200)
            throw backend_error(who + ": HTTP " + std::to_string(res->status) + ": " + res->body,
                                /*retriable=*/false);
        return res->body;
    }
    throw backend_error(last + " after " + std::to_string(max_retries + 1) + " attempts",
                        /*retriable=*/true);
}

} // namespace detail

struct HttpBackendConfig {
    std::string base_url;  // e.g. "http://127.0.0.1:8080"
    std::string model;
    std::string api_key;   // empty -> UQGEN_API_KEY
    std::string path = "/v1/completions";
    int timeout_ms = 30000;
    int max_retries = 3;
    int backoff_ms = 250;
    int max_topk = 5;      // service's top_logprobs ceiling
    bool emulate_forced_prefix = true;
};

// Completions-style client. Every request asks for per-token logprobs with
// top alternatives; a response without them is a hard capability error since
// every estimator needs token probabilities.
class HttpBackend : public Generator {
public:
    explicit HttpBackend(HttpBackendConfig cfg) : cfg_(std::move(cfg)) {
        if (cfg_.api_key.empty()) cfg_.api_key = detail::env_or("UQGEN_API_KEY", "");
        if (cfg_.base_url.empty()) throw config_error("http backend: base_url required");
    }

    std::string id() const override { return "http:" + cfg_.model; }

    bool has_capability(Capability c) const override {
        switch (c) {
            case Capability::logprobs:
            case Capability::topk:
            case Capability::seeded_sampling:
                return true;
            case Capability::forced_prefix:
                return cfg_.emulate_forced_prefix;
        }
        return false;
    }

    int max_topk() const override { return cfg_.max_topk; }

    Generation generate(const GenRequest& req) override {
        if (req.topk > cfg_.max_topk)
            throw capability_error("http backend: topk " + std::to_string(req.topk) +
                                   " exceeds service limit " + std::to_string(cfg_.max_topk));
        if (!req.forced_prefix.empty() && !cfg_.emulate_forced_prefix)
            throw capability_error("http backend: forced prefix emulation disabled");

        std::string prefix_text;
        for (const auto& tok : req.forced_prefix) prefix_text += tok;

        nlohmann::json body{{"model", cfg_.model},
                            {"prompt", req.prompt.text + prefix_text},
                            {"temperature", req.temperature},
                            {"max_tokens", req.max_tokens},
                            {"logprobs", req.topk}};
        if (req.seed) body["seed"] = *req.seed;

        httplib::Headers headers;
        if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);

        std::string resp = detail::post_with_retries(cfg_.base_url, cfg_.path, body.dump(),
                                                     headers, cfg_.timeout_ms, cfg_.max_retries,
                                                     cfg_.backoff_ms, "http backend");
        nlohmann::json j = nlohmann::json::parse(resp, nullptr, false);
        if (j.is_discarded()) throw backend_error("http backend: response is not JSON");
        return to_generation(j, req, prefix_text);
    }

private:
    Generation to_generation(const nlohmann::json& j, const GenRequest& req,
                             const std::string& prefix_text) const {
        try {
            const nlohmann::json& choice = j.at("choices").at(0);
            if (!choice.contains("logprobs") || choice.at("logprobs").is_null())
                throw capability_error("http backend: response carries no token logprobs");
            const nlohmann::json& lp = choice.at("logprobs");

            Generation g;
            g.prompt_id = req.prompt.id;
            g.temperature = req.temperature;
            g.seed = req.seed;
            g.backend_id = id();
            std::string fr = choice.value("finish_reason", "stop");
            g.finish_reason = fr == "length" ? FinishReason::length : FinishReason::stop;

            int pos = 0;
            // Emulated forced prefix: one synthetic certainty step per forced
            // token; their true model scores are unavailable over HTTP.
            for (const auto& tok : req.forced_prefix) {
                TokenStep s;
                s.token = tok;
                s.logprob = 0.0;
                s.topk = {{tok, 0.0}};
                s.position = pos++;
                g.steps.push_back(std::move(s));
            }
            if (!req.forced_prefix.empty()) {
                g.meta["emulated"] = "true";
                g.meta["forced_scores"] = "absent";
            }

            const auto& tokens = lp.at("tokens");
            const auto& token_lps = lp.at("token_logprobs");
            const auto& tops = lp.at("top_logprobs");
            for (std::size_t i = 0; i < tokens.size(); ++i) {
                TokenStep s;
                s.token = tokens.at(i).get<std::string>();
                s.logprob = token_lps.at(i).get<double>();
                if (i < tops.size() && tops.at(i).is_object())
                    for (const auto& [tok, v] : tops.at(i).items())
                        s.topk.emplace_back(tok, v.get<double>());
                std::sort(s.topk.begin(), s.topk.end(), [](const auto& a, const auto& b) {
                    return a.second != b.second ? a.second > b.second : a.first < b.first;
                });
                bool present = false;
                for (const auto& e : s.topk)
                    if (e.first == s.token) present = true;
                if (!present) {
                    if (static_cast<int>(s.topk.size()) >= req.topk && !s.topk.empty())
                        s.topk.pop_back();
                    s.topk.emplace_back(s.token, s.logprob);
                    std::sort(s.topk.begin(), s.topk.end(), [](const auto& a, const auto& b) {
                        return a.second != b.second ? a.second > b.second : a.first < b.first;
                    });
                }
                s.position = pos++;
                g.steps.push_back(std::move(s));
            }
            g.text = prefix_text + choice.value("text", "");
            return g;
        } catch (const nlohmann::json::exception& e) {
            throw backend_error(std::string("http backend: malformed response: ") + e.what());
        }
    }

    HttpBackendConfig cfg_;
};

// POST {"texts": [...]} -> {"vectors": [[...], ...]}. Endpoint and token come
// from config or UQGEN_EMBED_URL / UQGEN_EMBED_TOKEN.
class RemoteEmbeddingProvider : public EmbeddingProvider {
public:
    explicit RemoteEmbeddingProvider(std::string provider_id = "remote", std::string url = "",
                                     std::string token = "", int timeout_ms = 30000,
                                     int max_retries = 3)
        : id_(std::move(provider_id)),
          url_(url.empty() ? detail::env_or("UQGEN_EMBED_URL", "") : std::move(url)),
          token_(token.empty() ? detail::env_or("UQGEN_EMBED_TOKEN", "") : std::move(token)),
          timeout_ms_(timeout_ms),
          max_retries_(max_retries) {
        if (url_.empty())
            throw config_error("remote embedding provider: set UQGEN_EMBED_URL or pass a URL");
    }

    std::string id() const override { return id_; }
    int dimension() const override { return dim_; }

    std::vector<double> embed(const std::string& text) const override {
        return embed_batch({text}).at(0);
    }

    std::vector<std::vector<double>> embed_batch(
            const std::vector<std::string>& texts) const override {
        auto [base, path] = detail::split_url(url_);
        httplib::Headers headers;
        if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);
        nlohmann::json body{{"texts", texts}};
        std::string resp;
        try {
            resp = detail::post_with_retries(base, path, body.dump(), headers, timeout_ms_,
                                             max_retries_, 250, "embedding provider " + id_);
        } catch (const backend_error& e) {
            throw provider_error(e.what(), id_, e.retriable());
        }
        nlohmann::json j = nlohmann::json::parse(resp, nullptr, false);
        if (j.is_discarded() || !j.contains("vectors"))
            throw provider_error("embedding provider returned malformed JSON", id_,
                                 /*retriable=*/false);
        std::vector<std::vector<double>> out;
        for (const auto& v : j.at("vectors")) out.push_back(v.get<std::vector<double>>());
        if (out.size() != texts.size())
            throw provider_error("embedding provider returned wrong vector count", id_,
                                 /*retriable=*/false);
        if (!out.empty()) dim_ = static_cast<int>(out[0].size());
        return out;
    }

private:
    std::string id_;
    std::string url_;
    std::string token_;
    int timeout_ms_;
    int max_retries_;
    mutable int dim_ = 0;
};

} // namespace uqgen
