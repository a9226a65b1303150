// JSONL dataset ingestion: one DatasetInstance per line, with line-accurate
// errors, seeded down-sampling, and the content hash embedded in summaries.
#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "uqgen/core.hpp"
#include "uqgen/errors.hpp"
#include "uqgen/judge.hpp"
#include "uqgen/util.hpp"

namespace uqgen {

struct DatasetInstance {
    std::string id;
    std::string prompt;  // full prompt text (if given directly)
    std::string input;   // raw input for template substitution
    std::vector<std::string> references;
    Task task = Task::other;
    std::vector<TestSpec> tests; // codegen
    std::string language;        // codegen

    // Applies a "{input}" template when the instance carries raw input.
    std::string rendered_prompt(const std::string& tmpl) const {
        if (!prompt.empty()) return prompt;
        std::string out = tmpl;
        const std::string hole = "{input}";
        auto at = out.find(hole);
        if (at == std::string::npos) return out + input;
        out.replace(at, hole.size(), input);
        return out;
    }
};

inline DatasetInstance instance_from_json(const nlohmann::json& j) {
    DatasetInstance d;
    d.id = j.at("id").get<std::string>();
    if (d.id.empty()) throw data_error("instance id must be non-empty");
    if (j.contains("prompt")) d.prompt = j.at("prompt").get<std::string>();
    if (j.contains("input")) d.input = j.at("input").get<std::string>();
    if (d.prompt.empty() && d.input.empty())
        throw data_error("instance needs prompt or input");
    if (j.contains("references"))
        d.references = j.at("references").get<std::vector<std::string>>();
    d.task = parse_task(j.value("task", std::string("other")));
    if (j.contains("tests"))
        for (const auto& t : j.at("tests"))
            d.tests.push_back(TestSpec{t.value("input", std::string()),
                                       t.at("expected").get<std::string>()});
    d.language = j.value("language", std::string());
    if (d.task != Task::codegen && d.references.empty())
        throw data_error("non-codegen instance needs at least one reference");
    if (d.task == Task::codegen && d.language.empty()) d.language = "toy";
    return d;
}

inline std::vector<DatasetInstance> load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open dataset: " + path);
    std::vector<DatasetInstance> out;
    std::set<std::string> seen;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) throw data_error("dataset: invalid JSON", lineno);
        try {
            DatasetInstance d = instance_from_json(j);
            if (!seen.insert(d.id).second)
                throw data_error("dataset: duplicate instance id " + d.id, lineno);
            out.push_back(std::move(d));
        } catch (const nlohmann::json::exception& e) {
            throw data_error(std::string("dataset: ") + e.what(), lineno);
        } catch (const data_error& e) {
            throw data_error(std::string("dataset: ") + e.what(), e.line() >= 0 ? e.line() : lineno);
        }
    }
    if (out.empty()) throw data_error("dataset is empty: " + path);
    return out;
}

// Seeded uniform draw of n instances without replacement, preserving dataset
// order among the chosen.
inline std::vector<DatasetInstance> sample_instances(std::vector<DatasetInstance> all, int n,
                                                     std::uint64_t seed) {
    if (n <= 0 || static_cast<std::size_t>(n) >= all.size()) return all;
    std::vector<std::size_t> idx(all.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    SplitMix rng(splitmix64(seed ^ 0x5ca1ab1eull));
    for (int i = 0; i < n; ++i) {
        std::size_t j = static_cast<std::size_t>(i) +
                        static_cast<std::size_t>(rng.next() % (idx.size() - static_cast<std::size_t>(i)));
        std::swap(idx[static_cast<std::size_t>(i)], idx[j]);
    }
    idx.resize(static_cast<std::size_t>(n));
    std::sort(idx.begin(), idx.end());
    std::vector<DatasetInstance> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(std::move(all[i]));
    return out;
}

// FNV-1a 64 over the raw file bytes, as 16 hex digits.
inline std::string dataset_hash(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open dataset: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return to_hex64(fnv1a64(buf.str()));
}

// Precomputed judge results: JSONL {prompt_id, syntax_ok, tests_total, tests_passed}.
inline std::map<std::string, JudgeResult> load_judge_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open judge file: " + path);
    std::map<std::string, JudgeResult> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) throw data_error("judge file: invalid JSON", lineno);
        try {
            std::string id = j.at("prompt_id").get<std::string>();
            JudgeResult r = judge_response_from_json(j);
            if (r.tests_total == 0) r.no_tests = true;
            if (!out.emplace(id, r).second)
                throw data_error("judge file: duplicate prompt_id " + id, lineno);
        } catch (const nlohmann::json::exception& e) {
            throw data_error(std::string("judge file: ") + e.what(), lineno);
        }
    }
    return out;
}

} // namespace uqgen
