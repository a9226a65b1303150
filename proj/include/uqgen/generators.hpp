// Generator backends: the abstract generation capability, a deterministic
// table-driven mock model, and a persistent JSONL response cache.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "uqgen/core.hpp"
#include "uqgen/errors.hpp"
#include "uqgen/text.hpp"
#include "uqgen/util.hpp"

namespace uqgen {

enum class Capability { logprobs, topk, forced_prefix, seeded_sampling };

struct GenRequest {
    Prompt prompt;
    double temperature = 0.0;
    std::optional<std::int64_t> seed;
    int max_tokens = 64;
    int topk = 5;
    std::vector<std::string> forced_prefix; // empty = plain generation
};

class Generator {
public:
    virtual ~Generator() = default;
    virtual std::string id() const = 0;
    virtual bool has_capability(Capability c) const = 0;
    virtual int max_topk() const = 0;
    virtual Generation generate(const GenRequest& req) = 0;
};

// t=0 collapses to a one-hot on the argmax (ties to the lexicographically
// smallest token); t>0 returns p_i^(1/t) / sum p_j^(1/t).
inline std::vector<std::pair<std::string, double>> temperature_scale(
        const std::vector<std::pair<std::string, double>>& dist, double t) {
    if (dist.empty()) throw error("temperature_scale: empty distribution");
    if (t < 0) throw config_error("temperature must be >= 0");
    if (t == 0.0) {
        const std::pair<std::string, double>* best = &dist[0];
        for (const auto& e : dist)
            if (e.second > best->second || (e.second == best->second && e.first < best->first))
                best = &e;
        return {{best->first, 1.0}};
    }
    std::vector<std::pair<std::string, double>> out;
    out.reserve(dist.size());
    double z = 0.0;
    for (const auto& [tok, p] : dist) {
        double v = std::pow(p, 1.0 / t);
        out.emplace_back(tok, v);
        z += v;
    }
    for (auto& e : out) e.second /= z;
    return out;
}

// ---------------------------------------------------------------------------
// Mock model: a small Markov table over an explicit vocabulary. Context is
// the last `context_len` emitted tokens (space-joined key); prompts map to an
// initial context through prompt_classes patterns (exact id/text match or a
// trailing-'*' prefix). Contexts without a table row fall back to a uniform
// distribution over the vocabulary, annotated via meta.fallback.
class MockModel : public Generator {
public:
    struct Definition {
        std::vector<std::string> vocab;
        int context_len = 1;
        // context key -> (token, prob) sorted by (-prob, token)
        std::map<std::string, std::vector<std::pair<std::string, double>>> rows;
        std::vector<std::pair<std::string, std::string>> prompt_classes; // pattern -> context
        std::string stop_token;
        int max_len = 64;
    };

    explicit MockModel(Definition def, std::string id = "mock")
        : def_(std::move(def)), id_(std::move(id)) {
        if (def_.vocab.empty()) throw data_error("mock model: empty vocab");
        if (def_.context_len < 1) throw data_error("mock model: context_len must be >= 1");
        for (auto& [ctx, row] : def_.rows) {
            double sum = 0.0;
            for (auto& [tok, p] : row) {
                if (p < 0) throw data_error("mock model: negative probability in row " + ctx);
                sum += p;
            }
            if (std::abs(sum - 1.0) > 1e-9)
                throw data_error("mock model: row " + ctx + " probabilities sum to " +
                                 std::to_string(sum));
            std::sort(row.begin(), row.end(), [](const auto& a, const auto& b) {
                return a.second != b.second ? a.second > b.second : a.first < b.first;
            });
        }
        std::sort(def_.vocab.begin(), def_.vocab.end());
        double u = 1.0 / static_cast<double>(def_.vocab.size());
        for (const auto& tok : def_.vocab) uniform_row_.emplace_back(tok, u);
    }

    static MockModel from_json(const nlohmann::json& j, const std::string& id = "mock") {
        try {
            Definition d;
            d.vocab = j.at("vocab").get<std::vector<std::string>>();
            d.context_len = j.value("context_len", 1);
            for (const auto& row : j.at("rows")) {
                std::vector<std::pair<std::string, double>> dist;
                for (const auto& [tok, p] : row.at("dist").items())
                    dist.emplace_back(tok, p.get<double>());
                d.rows[row.at("context").get<std::string>()] = std::move(dist);
            }
            if (j.contains("prompt_classes"))
                for (const auto& [pat, ctx] : j.at("prompt_classes").items())
                    d.prompt_classes.emplace_back(pat, ctx.get<std::string>());
            d.stop_token = j.value("stop_token", std::string());
            d.max_len = j.value("max_len", 64);
            return MockModel(std::move(d), id);
        } catch (const nlohmann::json::exception& e) {
            throw data_error(std::string("bad mock model definition: ") + e.what());
        }
    }

    static MockModel from_file(const std::string& path, const std::string& id = "mock") {
        std::ifstream in(path);
        if (!in) throw config_error("cannot open mock model file: " + path);
        nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
        if (j.is_discarded()) throw data_error("mock model file is not valid JSON: " + path);
        return from_json(j, id);
    }

    std::string id() const override { return id_; }
    bool has_capability(Capability) const override { return true; }
    int max_topk() const override { return static_cast<int>(def_.vocab.size()); }

    Generation generate(const GenRequest& req) override {
        if (req.topk < 1 || req.topk > max_topk())
            throw capability_error("mock model: topk out of range");
        if (req.temperature < 0) throw config_error("temperature must be >= 0");

        Generation g;
        g.prompt_id = req.prompt.id;
        g.temperature = req.temperature;
        g.seed = req.seed;
        g.backend_id = id_;
        g.meta["detok"] = "space";

        std::uint64_t seed0;
        if (req.seed) {
            seed0 = splitmix64(static_cast<std::uint64_t>(*req.seed) ^ fnv1a64(req.prompt.text));
        } else {
            std::random_device rd;
            seed0 = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
        }
        SplitMix rng(seed0);

        std::vector<std::string> ctx = initial_context(req.prompt);
        int limit = std::min(req.max_tokens, def_.max_len);
        g.finish_reason = FinishReason::length;

        bool fallback_used = false;
        for (int pos = 0; pos < limit; ++pos) {
            bool row_found = false;
            const auto& row = context_row(ctx, &row_found);
            bool forced = pos < static_cast<int>(req.forced_prefix.size());
            std::string tok;
            if (forced) {
                tok = req.forced_prefix[static_cast<std::size_t>(pos)];
                // Forcing the stop token ends the generation at that point.
                if (tok == def_.stop_token && !def_.stop_token.empty()) {
                    g.finish_reason = FinishReason::stop;
                    break;
                }
            } else {
                auto scaled = temperature_scale(row, req.temperature);
                tok = draw(scaled, req.temperature, rng);
                if (tok == def_.stop_token && !def_.stop_token.empty()) {
                    g.finish_reason = FinishReason::stop;
                    break;
                }
            }

            double p_tok = 0.0;
            bool in_row = lookup(row, tok, &p_tok);
            TokenStep step;
            step.position = pos;
            step.token = tok;
            if (in_row && row_found) {
                step.logprob = std::log(p_tok);
                step.topk = topk_with(row, tok, p_tok, req.topk);
            } else {
                // forced token (or fallback context) scored from the uniform row
                fallback_used = true;
                double u = 1.0 / static_cast<double>(def_.vocab.size());
                step.logprob = std::log(u);
                step.topk = topk_with(uniform_row_, tok, u, req.topk);
            }
            if (!row_found) fallback_used = true;
            g.steps.push_back(std::move(step));

            if (!g.text.empty()) g.text += ' ';
            g.text += tok;
            ctx.push_back(tok);
            if (static_cast<int>(ctx.size()) > def_.context_len)
                ctx.erase(ctx.begin(), ctx.end() - def_.context_len);
        }
        if (fallback_used) g.meta["fallback"] = "true";
        return g;
    }

private:
    std::vector<std::string> initial_context(const Prompt& p) const {
        // exact pattern match on id, then text; then longest '*' prefix match.
        const std::string* best = nullptr;
        std::size_t best_len = 0;
        for (const auto& [pat, ctx] : def_.prompt_classes) {
            if (pat == p.id || pat == p.text) return tokenize(ctx, false);
            if (!pat.empty() && pat.back() == '*') {
                std::string stem = pat.substr(0, pat.size() - 1);
                bool hit = p.id.rfind(stem, 0) == 0 || p.text.rfind(stem, 0) == 0;
                if (hit && stem.size() >= best_len) {
                    best = &ctx;
                    best_len = stem.size();
                }
            }
        }
        if (best) return tokenize(*best, false);
        // Fall back to the trailing tokens of the prompt text.
        std::vector<std::string> toks = tokenize(p.text, false);
        if (static_cast<int>(toks.size()) > def_.context_len)
            toks.erase(toks.begin(), toks.end() - def_.context_len);
        return toks;
    }

    const std::vector<std::pair<std::string, double>>& context_row(
            const std::vector<std::string>& ctx, bool* found) const {
        std::string key;
        for (std::size_t i = ctx.size() > static_cast<std::size_t>(def_.context_len)
                                     ? ctx.size() - def_.context_len
                                     : 0;
             i < ctx.size(); ++i) {
            if (!key.empty()) key += ' ';
            key += ctx[i];
        }
        auto it = def_.rows.find(key);
        *found = it != def_.rows.end();
        return *found ? it->second : uniform_row_;
    }

    static bool lookup(const std::vector<std::pair<std::string, double>>& row,
                       const std::string& tok, double* p) {
        for (const auto& [t, q] : row)
            if (t == tok) {
                *p = q;
                return true;
            }
        return false;
    }

    // Top-k of `row`, guaranteeing `tok` (with probability p_tok) is included.
    static std::vector<std::pair<std::string, double>> topk_with(
            const std::vector<std::pair<std::string, double>>& row, const std::string& tok,
            double p_tok, int k) {
        std::vector<std::pair<std::string, double>> out;
        int n = std::min<int>(k, static_cast<int>(row.size()));
        out.assign(row.begin(), row.begin() + n);
        bool present = false;
        for (const auto& e : out)
            if (e.first == tok) present = true;
        if (!present) {
            out.back() = {tok, p_tok};
            std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
                return a.second != b.second ? a.second > b.second : a.first < b.first;
            });
        }
        std::vector<std::pair<std::string, double>> steps;
        steps.reserve(out.size());
        for (auto& [t, p] : out) steps.emplace_back(t, std::log(p));
        return steps;
    }

    // Inverse-CDF draw over the scaled distribution, iterated in token order
    // so results are independent of table layout.
    static std::string draw(const std::vector<std::pair<std::string, double>>& scaled, double t,
                            SplitMix& rng) {
        if (t == 0.0) return scaled.front().first;
        std::vector<std::pair<std::string, double>> sorted = scaled;
        std::sort(sorted.begin(), sorted.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        double u = rng.next_double();
        double acc = 0.0;
        for (const auto& [tok, p] : sorted) {
            acc += p;
            if (u <= acc) return tok;
        }
        return sorted.back().first;
    }

    Definition def_;
    std::string id_;
    std::vector<std::pair<std::string, double>> uniform_row_;
};

// ---------------------------------------------------------------------------
// Response cache: append-only JSONL of generation records plus a sidecar
// ".idx" (hex key \t byte offset per line). Unseeded sampled calls are not
// reproducible and bypass the cache entirely.
class CachedGenerator : public Generator {
public:
    CachedGenerator(std::shared_ptr<Generator> inner, std::string path)
        : inner_(std::move(inner)), path_(std::move(path)) {
        load_index();
    }

    std::string id() const override { return inner_->id(); }
    bool has_capability(Capability c) const override { return inner_->has_capability(c); }
    int max_topk() const override { return inner_->max_topk(); }

    Generation generate(const GenRequest& req) override {
        if (req.temperature > 0.0 && !req.seed) {
            Generation g = inner_->generate(req);
            g.meta["cache"] = "skipped";
            return g;
        }
        std::uint64_t key = cache_key(req);
        {
            std::lock_guard<std::mutex> lock(mu_);
            auto it = index_.find(key);
            if (it != index_.end()) {
                std::optional<Generation> hit = read_at(it->second);
                if (hit) {
                    ++hits_;
                    hit->prompt_id = req.prompt.id;
                    hit->meta["cache"] = "hit";
                    return *hit;
                }
                log_warn("cache: corrupt record for key " + to_hex64(key) + ", treating as miss");
                index_.erase(it);
            }
        }
        Generation g = inner_->generate(req);
        std::lock_guard<std::mutex> lock(mu_);
        ++misses_;
        store(key, g);
        return g;
    }

    std::uint64_t cache_key(const GenRequest& req) const {
        std::ostringstream key;
        key << inner_->id() << '\x1f' << req.prompt.text << '\x1f';
        std::uint64_t tbits;
        double t = req.temperature;
        static_assert(sizeof(tbits) == sizeof(t));
        std::memcpy(&tbits, &t, sizeof(tbits));
        key << to_hex64(tbits) << '\x1f';
        key << (req.seed ? std::to_string(*req.seed) : "none") << '\x1f';
        key << req.max_tokens << '\x1f' << req.topk;
        for (const auto& tok : req.forced_prefix) key << '\x1f' << tok;
        return fnv1a64(key.str());
    }

    std::size_t hits() const { return hits_; }
    std::size_t misses() const { return misses_; }

private:
    void load_index() {
        std::ifstream idx(path_ + ".idx");
        if (idx) {
            std::string line;
            while (std::getline(idx, line)) {
                auto tab = line.find('\t');
                if (tab == std::string::npos) continue;
                index_[std::stoull(line.substr(0, tab), nullptr, 16)] =
                        static_cast<std::streamoff>(std::stoll(line.substr(tab + 1)));
            }
            return;
        }
        // No sidecar: rebuild from the JSONL if it exists.
        std::ifstream in(path_, std::ios::binary);
        if (!in) return;
        std::ofstream idx_out(path_ + ".idx", std::ios::trunc);
        std::string line;
        std::streamoff off = 0;
        while (std::getline(in, line)) {
            try {
                nlohmann::json j = nlohmann::json::parse(line);
                std::uint64_t key = std::stoull(j.at("cache_key").get<std::string>(), nullptr, 16);
                index_[key] = off;
                idx_out << to_hex64(key) << '\t' << off << '\n';
            } catch (...) {
                log_warn("cache: skipping unreadable record while rebuilding index");
            }
            off += static_cast<std::streamoff>(line.size()) + 1;
        }
    }

    std::optional<Generation> read_at(std::streamoff off) const {
        std::ifstream in(path_, std::ios::binary);
        if (!in) return std::nullopt;
        in.seekg(off);
        std::string line;
        if (!std::getline(in, line)) return std::nullopt;
        try {
            return generation_from_line(line);
        } catch (const error&) {
            return std::nullopt;
        }
    }

    void store(std::uint64_t key, const Generation& g) {
        std::ofstream out(path_, std::ios::app | std::ios::binary);
        if (!out) throw config_error("cache: cannot open for append: " + path_);
        out.seekp(0, std::ios::end);
        std::streamoff off = out.tellp();
        nlohmann::json j = generation_to_json(g);
        j["cache_key"] = to_hex64(key);
        out << j.dump() << '\n';
        out.flush();
        std::ofstream idx(path_ + ".idx", std::ios::app);
        idx << to_hex64(key) << '\t' << off << '\n';
        index_[key] = off;
    }

    std::shared_ptr<Generator> inner_;
    std::string path_;
    std::mutex mu_;
    std::unordered_map<std::uint64_t, std::streamoff> index_;
    std::size_t hits_ = 0;
    std::size_t misses_ = 0;
};

} // namespace uqgen
