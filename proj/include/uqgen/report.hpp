// Report emission: per-instance records (JSONL), run summaries (JSON + CSV),
// and the ranked method-by-metric table. Summaries exclude timings so
// identical runs serialize byte-for-byte.
#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "uqgen/config.hpp"
#include "uqgen/errors.hpp"
#include "uqgen/eval.hpp"

namespace uqgen {

// ---------------------------------------------------------------------------
// Per-instance records

inline nlohmann::json record_to_json(const EvalRecord& r) {
    nlohmann::json j{{"prompt_id", r.prompt_id},
                     {"performance", r.performance},
                     {"scores", r.scores},
                     {"timing_ms", r.timing_ms}};
    if (r.label) j["label"] = *r.label;
    if (!r.score_errors.empty()) j["score_errors"] = r.score_errors;
    return j;
}

inline EvalRecord record_from_json(const nlohmann::json& j) {
    try {
        EvalRecord r;
        r.prompt_id = j.at("prompt_id").get<std::string>();
        r.performance = j.at("performance").get<double>();
        if (j.contains("label") && !j.at("label").is_null()) r.label = j.at("label").get<int>();
        if (j.contains("scores")) r.scores = j.at("scores").get<std::map<std::string, double>>();
        if (j.contains("score_errors"))
            r.score_errors = j.at("score_errors").get<std::map<std::string, std::string>>();
        if (j.contains("timing_ms"))
            r.timing_ms = j.at("timing_ms").get<std::map<std::string, double>>();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw data_error(std::string("bad eval record: ") + e.what());
    }
}

inline void write_records(const std::vector<EvalRecord>& records, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw data_error("cannot write records: " + path);
    for (const EvalRecord& r : records) out << record_to_json(r).dump() << '\n';
}

// Loads and merges one or more records files; duplicate prompt ids across
// the union are an error.
inline std::vector<EvalRecord> load_records(const std::vector<std::string>& paths) {
    std::vector<EvalRecord> out;
    std::set<std::string> seen;
    for (const std::string& path : paths) {
        std::ifstream in(path);
        if (!in) throw data_error("cannot open records: " + path);
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
            if (j.is_discarded()) throw data_error("records " + path + ": invalid JSON", lineno);
            EvalRecord r = record_from_json(j);
            if (!seen.insert(r.prompt_id).second)
                throw data_error("records: duplicate prompt_id " + r.prompt_id, lineno);
            out.push_back(std::move(r));
        }
    }
    if (out.empty()) throw data_error("no records loaded");
    return out;
}

// ---------------------------------------------------------------------------
// Rows: one method with its metrics, shared by summaries and reports

struct ReportRow {
    std::string token;
    std::string name;
    std::string family, variant, point, distance;
    MetricValue pearson, spearman, auc;
    int scored = 0;
    int skipped = 0;
};

namespace detail {

inline std::string variant_name(MethodVariant v) {
    switch (v) {
        case MethodVariant::max_prob: return "max_prob";
        case MethodVariant::avg_prob: return "avg_prob";
        case MethodVariant::max_ent: return "max_ent";
        case MethodVariant::avg_ent: return "avg_ent";
        case MethodVariant::vr: return "vr";
        case MethodVariant::vro: return "vro";
    }
    return "";
}

inline ReportRow row_shell(const MethodId& m, const std::string& distance_id) {
    ReportRow row;
    row.token = m.token();
    row.name = m.name();
    row.family = family_name(m.family);
    row.variant = variant_name(m.variant);
    row.point = m.point ? point_name(*m.point) : "";
    row.distance = m.family == MethodFamily::single ? "" : distance_id;
    return row;
}

} // namespace detail

inline std::vector<ReportRow> rows_from_summary(const EvalSummary& s) {
    std::vector<ReportRow> rows;
    for (const MethodSummary& ms : s.methods) {
        ReportRow row = detail::row_shell(ms.method, ms.method.distance_id.value_or(""));
        row.pearson = ms.pearson;
        row.spearman = ms.spearman;
        row.auc = ms.auc;
        row.scored = ms.scored;
        row.skipped = ms.skipped;
        rows.push_back(std::move(row));
    }
    return rows;
}

// Recomputes method metrics from raw records (the cmd_report path, where the
// run config is not available).
inline std::vector<ReportRow> rows_from_records(const std::vector<EvalRecord>& records) {
    std::set<std::string> tokens;
    for (const EvalRecord& r : records)
        for (const auto& [tok, v] : r.scores) {
            (void)v;
            tokens.insert(tok);
        }
    std::vector<ReportRow> rows;
    for (const std::string& tok : tokens) {
        ReportRow row = detail::row_shell(parse_method(tok, ""), "");
        std::vector<double> nlp_scores, nlp_perf, code_scores;
        std::vector<int> code_labels;
        for (const EvalRecord& r : records) {
            auto it = r.scores.find(tok);
            if (it == r.scores.end()) continue;
            ++row.scored;
            if (r.label) {
                code_scores.push_back(it->second);
                code_labels.push_back(*r.label);
            } else {
                nlp_scores.push_back(it->second);
                nlp_perf.push_back(r.performance);
            }
        }
        row.skipped = static_cast<int>(records.size()) - row.scored;
        row.pearson.n = row.spearman.n = static_cast<int>(nlp_scores.size());
        row.auc.n = static_cast<int>(code_scores.size());
        if (!nlp_scores.empty()) {
            try {
                row.pearson.value = pearson(nlp_scores, nlp_perf);
            } catch (const stat_error& e) {
                row.pearson.na_reason = e.what();
            }
            try {
                row.spearman.value = spearman(nlp_scores, nlp_perf);
            } catch (const stat_error& e) {
                row.spearman.na_reason = e.what();
            }
        }
        if (!code_scores.empty()) {
            try {
                row.auc.value = auc(code_scores, code_labels);
            } catch (const stat_error& e) {
                row.auc.na_reason = e.what();
            }
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

// Ranking key: |pearson| when present, else AUC, else |spearman|. Correlations
// are reported signed but ranked by magnitude.
inline double rank_key(const ReportRow& r) {
    if (r.pearson.value) return std::fabs(*r.pearson.value);
    if (r.auc.value) return *r.auc.value;
    if (r.spearman.value) return std::fabs(*r.spearman.value);
    return -1.0;
}

inline void rank_rows(std::vector<ReportRow>& rows) {
    std::stable_sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
        double ka = rank_key(a), kb = rank_key(b);
        return ka != kb ? ka > kb : a.token < b.token;
    });
}

// ---------------------------------------------------------------------------
// Serializers

namespace detail {

inline nlohmann::json metric_to_json(const MetricValue& m) {
    nlohmann::json j{{"value", nullptr}, {"n", m.n}};
    if (m.value) j["value"] = *m.value;
    if (!m.na_reason.empty()) j["na_reason"] = m.na_reason;
    return j;
}

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

inline std::string metric_cell(const MetricValue& m) {
    if (!m.value) return "NA";
    std::ostringstream os;
    os << std::setprecision(17) << *m.value;
    return os.str();
}

} // namespace detail

inline nlohmann::json rows_to_json(const std::vector<ReportRow>& rows) {
    nlohmann::json arr = nlohmann::json::array();
    for (const ReportRow& r : rows) {
        nlohmann::json j{{"method", r.name},
                         {"token", r.token},
                         {"family", r.family},
                         {"variant", r.variant},
                         {"point", r.point},
                         {"distance", r.distance},
                         {"metrics",
                          {{"pearson", detail::metric_to_json(r.pearson)},
                           {"spearman", detail::metric_to_json(r.spearman)},
                           {"auc", detail::metric_to_json(r.auc)}}},
                         {"scored", r.scored},
                         {"skipped", r.skipped}};
        arr.push_back(std::move(j));
    }
    return arr;
}

// One CSV line per method x metric, fixed column contract.
inline std::string rows_to_csv(const std::vector<ReportRow>& rows) {
    std::ostringstream os;
    os << "method,family,variant,point,distance,metric_name,value,n,skipped\n";
    for (const ReportRow& r : rows) {
        auto emit = [&](const char* metric, const MetricValue& m) {
            if (m.n == 0 && !m.value) return; // metric not applicable to this run
            os << detail::csv_escape(r.name) << ',' << r.family << ',' << r.variant << ','
               << r.point << ',' << r.distance << ',' << metric << ',' << detail::metric_cell(m)
               << ',' << m.n << ',' << r.skipped << '\n';
        };
        emit("pearson", r.pearson);
        emit("spearman", r.spearman);
        emit("auc", r.auc);
    }
    return os.str();
}

// Fixed-width text table, rows ranked, top-3 per metric column starred.
inline std::string rows_to_table(std::vector<ReportRow> rows) {
    rank_rows(rows);

    auto top3 = [&](auto metric_of, bool absolute) {
        std::vector<std::pair<double, std::size_t>> vals;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const MetricValue& m = metric_of(rows[i]);
            if (m.value) vals.emplace_back(absolute ? std::fabs(*m.value) : *m.value, i);
        }
        std::stable_sort(vals.begin(), vals.end(),
                         [](const auto& a, const auto& b) { return a.first > b.first; });
        std::set<std::size_t> out;
        for (std::size_t i = 0; i < vals.size() && i < 3; ++i) out.insert(vals[i].second);
        return out;
    };
    std::set<std::size_t> tp = top3([](const ReportRow& r) -> const MetricValue& { return r.pearson; }, true);
    std::set<std::size_t> ts = top3([](const ReportRow& r) -> const MetricValue& { return r.spearman; }, true);
    std::set<std::size_t> ta = top3([](const ReportRow& r) -> const MetricValue& { return r.auc; }, false);

    auto cell = [](const MetricValue& m, bool starred) {
        if (!m.value) return std::string("NA");
        std::ostringstream os;
        os << std::fixed << std::setprecision(4) << *m.value;
        return os.str() + (starred ? "*" : "");
    };

    std::ostringstream os;
    os << std::left << std::setw(16) << "method" << std::setw(11) << "pearson" << std::setw(11)
       << "spearman" << std::setw(11) << "auc" << std::setw(7) << "n" << "skipped\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const ReportRow& r = rows[i];
        int n = std::max(r.pearson.n, r.auc.n);
        os << std::left << std::setw(16) << r.name << std::setw(11) << cell(r.pearson, tp.count(i))
           << std::setw(11) << cell(r.spearman, ts.count(i)) << std::setw(11)
           << cell(r.auc, ta.count(i)) << std::setw(7) << n << r.skipped << '\n';
    }
    os << "ranked by |correlation| / AUC; * marks the top 3 per column\n";
    return os.str();
}

// ---------------------------------------------------------------------------
// Run summary

inline nlohmann::json summary_to_json(const EvalSummary& s, const RunConfig& config,
                                      const std::string& dataset_hash_hex) {
    nlohmann::json errors = nlohmann::json::array();
    for (const auto& [id, reason] : s.errors)
        errors.push_back({{"id", id}, {"reason", reason}});
    nlohmann::json methods = nlohmann::json::array();
    for (const MethodSummary& ms : s.methods) {
        methods.push_back(
                {{"method", ms.method.name()},
                 {"token", ms.method.token()},
                 {"family", family_name(ms.method.family)},
                 {"variant", detail::variant_name(ms.method.variant)},
                 {"point", ms.method.point ? nlohmann::json(point_name(*ms.method.point))
                                           : nlohmann::json(nullptr)},
                 {"distance", ms.method.distance_id ? nlohmann::json(*ms.method.distance_id)
                                                    : nlohmann::json(nullptr)},
                 {"metrics",
                  {{"pearson", detail::metric_to_json(ms.pearson)},
                   {"spearman", detail::metric_to_json(ms.spearman)},
                   {"auc", detail::metric_to_json(ms.auc)}}},
                 {"scored", ms.scored},
                 {"skipped", ms.skipped}});
    }
    return nlohmann::json{{"version", version()},
                          {"config", config_to_json(config)},
                          {"dataset_hash", dataset_hash_hex},
                          {"instances", s.instances},
                          {"evaluated", s.evaluated},
                          {"skipped", s.skipped},
                          {"errors", std::move(errors)},
                          {"methods", std::move(methods)}};
}

inline std::string summary_to_csv(const EvalSummary& s) {
    return rows_to_csv(rows_from_summary(s));
}

} // namespace uqgen
