// Acceptance gate. Runs ten numbered checks against frozen hand-computed
// values and prints exactly one PASS/FAIL line per criterion; exits nonzero
// if any fail. Unlike the unit suites this is a plain binary so the output
// stays one line per criterion no matter what throws.
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include <uqgen/uqgen.hpp>

using namespace uqgen;

namespace {

int failures = 0;

void run(int criterion, const std::string& what, const std::function<bool()>& f) {
    bool ok = false;
    std::string note;
    try {
        ok = f();
    } catch (const std::exception& e) {
        note = std::string(" (") + e.what() + ")";
    }
    std::printf("%s criterion %d: %s%s\n", ok ? "PASS" : "FAIL", criterion, what.c_str(),
                note.c_str());
    if (!ok) ++failures;
}

bool near(double a, double b, double tol) { return std::fabs(a - b) <= tol; }

double unit(SplitMix& rng) { return static_cast<double>(rng.next() >> 11) * 0x1.0p-53; }

Generation text_only(const std::string& text) {
    Generation g;
    g.text = text;
    return g;
}

TokenStep step_with(const std::string& tok, double lp,
                    std::vector<std::pair<std::string, double>> topk) {
    TokenStep s;
    s.token = tok;
    s.logprob = lp;
    s.topk = std::move(topk);
    return s;
}

std::string testdata(const std::string& name) { return std::string(UQGEN_TESTDATA) + "/" + name; }

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// random but always-parseable toy program (same grammar the parser accepts)
std::string random_program(SplitMix& rng) {
    static const char* idents[] = {"a", "b", "c", "d"};
    static const char* ops[] = {"+", "-", "*", "/"};
    std::string out;
    int stmts = 1 + static_cast<int>(rng.next() % 3);
    for (int s = 0; s < stmts; ++s) {
        int kind = static_cast<int>(rng.next() % 3);
        if (kind == 0) {
            out += "let ";
            out += idents[rng.next() % 4];
            out += " = ";
        } else {
            out += kind == 1 ? "return " : "print ";
        }
        out += std::to_string(rng.next() % 10);
        int terms = static_cast<int>(rng.next() % 3);
        for (int t = 0; t < terms; ++t) {
            out += ' ';
            out += ops[rng.next() % 4];
            out += ' ';
            out += std::to_string(rng.next() % 10);
        }
        out += " ; ";
    }
    return out;
}

// --------------------------------------------------------------------------
// 1. Worked example: three members whose pairwise similarities are
//    {0.69, 1, 1} and whose similarities to the original are {0.69, 0.69, 1}
//    give VR = 0.1033 and VRO = 0.2067 within +/-0.005.
bool criterion1() {
    InferenceSet set;
    set.source = InferenceSource::sample;
    set.original = text_only("o");
    set.variants = {text_only("t1"), text_only("t2"), text_only("t3")};
    std::map<std::pair<std::string, std::string>, double> d{
            {{"t1", "t2"}, 0.31}, {{"t1", "t3"}, 0.0}, {{"t2", "t3"}, 0.0},
            {{"o", "t1"}, 0.31},  {{"o", "t2"}, 0.31}, {{"o", "t3"}, 0.0},
    };
    DistanceFn dist = [&d](const std::string& a, const std::string& b) {
        if (a == b) return 0.0;
        auto it = d.find({a, b});
        if (it == d.end()) it = d.find({b, a});
        return it->second;
    };
    return near(vr(set, dist), 0.1033, 0.005) && near(vro(set, dist), 0.2067, 0.005);
}

// --------------------------------------------------------------------------
// 2. Token-level formulas against hand values to 1e-9.
bool criterion2() {
    const double tol = 1e-9;
    TokenStep nine = step_with("a", std::log(0.9), {{"a", std::log(0.9)}});
    TokenStep one = step_with("b", std::log(0.1), {{"b", std::log(0.1)}});
    bool ok = near(token_nll(nine), 0.10536051565782628, tol) &&
              near(token_nll(one), 2.3025850929940455, tol);

    std::vector<std::pair<std::string, double>> five;
    for (const char* t : {"a", "b", "c", "d", "e"}) five.emplace_back(t, std::log(0.2));
    ok = ok && near(token_entropy(step_with("a", std::log(0.2), five), EntropyMode::raw),
                    1.6094379124341003, tol); // ln 5
    ok = ok && near(token_entropy(step_with("a", 0.0, {{"a", 0.0}}), EntropyMode::raw), 0.0, tol);

    TokenStep half = step_with("a", std::log(0.5), {{"a", std::log(0.5)}, {"b", std::log(0.25)}});
    ok = ok && near(token_entropy(half, EntropyMode::raw), 0.6931471805599453, tol);
    ok = ok && near(token_entropy(half, EntropyMode::renormalized), 0.6365141682948128, tol);

    Generation g;
    g.text = "aa bb";
    g.steps = {step_with("aa", std::log(0.9), {{"aa", std::log(0.9)}}),
               step_with("bb", std::log(0.1), {{"bb", std::log(0.1)}})};
    g.steps[1].position = 1;
    ok = ok && near(single_score(g, MethodVariant::avg_prob, EntropyMode::raw),
                    1.203972804325936, tol);
    ok = ok && near(single_score(g, MethodVariant::max_prob, EntropyMode::raw),
                    2.3025850929940455, tol);
    return ok;
}

// --------------------------------------------------------------------------
// 3. VR/VRO properties on 10,000 fuzzed distance matrices: range, exact zero
//    on identical members, weight-scaling and permutation invariance, and
//    equality with a direct transcription of the formulas.
bool criterion3() {
    SplitMix rng(2026);
    for (int trial = 0; trial < 10000; ++trial) {
        int n = 2 + static_cast<int>(rng.next() % 4);
        std::vector<std::string> names{"o"};
        for (int i = 0; i < n; ++i) names.push_back("m" + std::to_string(i));
        std::map<std::pair<std::string, std::string>, double> d;
        for (const std::string& a : names)
            for (const std::string& b : names) d[{a, b}] = a == b ? 0.0 : unit(rng);
        DistanceFn dist = [&d](const std::string& a, const std::string& b) {
            return d.at({a, b});
        };

        InferenceSet set;
        set.source = InferenceSource::sample;
        set.original = text_only("o");
        for (int i = 0; i < n; ++i) set.variants.push_back(text_only(names[static_cast<std::size_t>(i + 1)]));
        bool weighted = rng.next() % 2 == 0;
        if (weighted)
            for (int i = 0; i < n; ++i) set.weights.push_back(0.1 + unit(rng));

        double v = vr(set, dist), o = vro(set, dist);
        if (v < -1e-12 || v > 1.0 + 1e-12 || o < -1e-12 || o > 1.0 + 1e-12) return false;

        // direct transcription of the two formulas
        auto w_of = [&](int i) { return set.weights.empty() ? 1.0 : set.weights[static_cast<std::size_t>(i)]; };
        double wsum = 0.0, total = 0.0, osum = 0.0;
        for (int i = 0; i < n; ++i) {
            double inner = 0.0;
            for (int j = 0; j < n; ++j)
                if (j != i)
                    inner += 1.0 - dist(set.variants[static_cast<std::size_t>(i)].text,
                                        set.variants[static_cast<std::size_t>(j)].text);
            total += w_of(i) * inner / (n - 1);
            wsum += w_of(i);
            osum += 1.0 - dist(set.variants[static_cast<std::size_t>(i)].text, "o");
        }
        if (!near(v, 1.0 - total / wsum, 1e-12)) return false;
        if (!near(o, 1.0 - osum / n, 1e-12)) return false;

        // scaling all weights leaves both scores unchanged
        if (weighted) {
            InferenceSet scaled = set;
            for (double& w : scaled.weights) w *= 17.0;
            if (!near(vr(scaled, dist), v, 1e-12) || !near(vro(scaled, dist), o, 1e-12))
                return false;
        }

        // rotating the member list leaves both scores unchanged
        InferenceSet rot = set;
        std::rotate(rot.variants.begin(), rot.variants.begin() + 1, rot.variants.end());
        if (!rot.weights.empty())
            std::rotate(rot.weights.begin(), rot.weights.begin() + 1, rot.weights.end());
        if (!near(vr(rot, dist), v, 1e-12) || !near(vro(rot, dist), o, 1e-12)) return false;
    }

    // identical members score exactly zero
    DistanceFn exact = [](const std::string& a, const std::string& b) {
        return a == b ? 0.0 : 1.0;
    };
    for (int n = 2; n <= 5; ++n) {
        InferenceSet same;
        same.source = InferenceSource::sample;
        same.original = text_only("same");
        for (int i = 0; i < n; ++i) same.variants.push_back(text_only("same"));
        if (vr(same, exact) != 0.0 || vro(same, exact) != 0.0) return false;
    }
    return true;
}

// --------------------------------------------------------------------------
// 4. Lexical and code distances against hand values.
bool criterion4() {
    const double tol = 1e-9;
    bool ok = near(bleu("a b c", "a b c"), 1.0, tol) && near(bleu("x y", "a b"), 0.0, tol) &&
              near(rouge_l("a b c", "a b c"), 1.0, tol) && near(rouge_l("x y", "a b"), 0.0, tol) &&
              near(token_f1("a b c", "a b c"), 1.0, tol) && near(token_f1("x y", "a b"), 0.0, tol);
    ok = ok && near(rouge_l("a c", "a b c"), 0.8, tol);
    ok = ok && near(bleu("the the the", "the cat", 1, false), 1.0 / 3.0, tol); // clipped counts

    SplitMix rng(2024);
    CodeBleuWeights ngram_only{1.0, 0.0, 0.0, 0.0};
    for (int i = 0; i < 100; ++i) {
        std::string cand = random_program(rng), ref = random_program(rng);
        if (!near(codebleu(cand, ref, "toy", ngram_only), bleu(cand, ref, 4, true, false), 1e-12))
            return false;
    }
    return ok;
}

// --------------------------------------------------------------------------
// 5. Correlation and ranking statistics, including invariance of the
//    rank-based ones under a strictly monotone transform.
bool criterion5() {
    const double tol = 1e-12;
    bool ok = near(pearson({1, 2, 3}, {2, 4, 6}), 1.0, tol) &&
              near(pearson({1, 2, 3}, {6, 4, 2}), -1.0, tol) &&
              near(pearson({1, 2, 3}, {1, 3, 2}), 0.5, tol);
    ok = ok && near(auc({1, 2, 3, 4}, {0, 0, 1, 1}), 1.0, tol) &&
         near(auc({1, 2, 3, 4}, {1, 1, 0, 0}), 0.0, tol) &&
         near(auc({1, 1, 1, 1}, {0, 1, 0, 1}), 0.5, tol);
    if (!ok) return false;

    SplitMix rng(7);
    for (int trial = 0; trial < 1000; ++trial) {
        std::size_t n = 10 + rng.next() % 11;
        std::vector<double> xs, ys, warped;
        std::vector<int> labels;
        bool pos = false, neg = false;
        for (std::size_t i = 0; i < n; ++i) {
            xs.push_back(unit(rng) * 10.0 - 5.0);
            ys.push_back(unit(rng));
            int l = static_cast<int>(rng.next() % 2);
            (l ? pos : neg) = true;
            labels.push_back(l);
            warped.push_back(3.0 * std::exp(xs.back()) + 1.0);
        }
        if (!near(spearman(xs, ys), spearman(warped, ys), 1e-12)) return false;
        if (pos && neg && !near(auc(xs, labels), auc(warped, labels), 1e-12)) return false;
    }
    return true;
}

// --------------------------------------------------------------------------
// 6. Temperature scaling hand value, the t->0 one-hot limit, and the seeded
//    sampler's long-run frequency on a 0.7/0.3 coin.
bool criterion6() {
    auto scaled = temperature_scale({{"a", 0.9}, {"b", 0.1}}, 2.0);
    bool ok = scaled.size() == 2 && near(scaled[0].second, 0.75, 1e-6) &&
              near(scaled[1].second, 0.25, 1e-6);
    auto hot = temperature_scale({{"a", 0.9}, {"b", 0.1}}, 0.0);
    ok = ok && hot.size() == 1 && hot[0].first == "a" && hot[0].second == 1.0;
    if (!ok) return false;

    MockModel::Definition def;
    def.vocab = {"lose", "win"};
    def.context_len = 1;
    def.max_len = 1;
    def.rows["s0"] = {{"win", 0.7}, {"lose", 0.3}};
    def.prompt_classes = {{"flip*", "s0"}};
    MockModel coin(std::move(def));

    int wins = 0;
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) {
        GenRequest req;
        req.prompt = Prompt{"flip", "flip", Task::other, {}};
        req.temperature = 1.0;
        req.seed = i;
        req.max_tokens = 1;
        req.topk = 2;
        if (coin.generate(req).text == "win") ++wins;
    }
    double freq = static_cast<double>(wins) / draws;
    return freq >= 0.68 && freq <= 0.72;
}

// --------------------------------------------------------------------------
// 7. Two-class separation on the bundled mock: 50 confident prompts (25 easy,
//    25 with a confusable first token) vs 50 fuzzy ones. Sample VRO with
//    token_f1 must reach AUC >= 0.9 and beat max-prob.
bool criterion7() {
    MockModel model = MockModel::from_file(testdata("mock_twoclass.json"));
    EvalOptions opt;
    opt.T = 5;
    opt.temperature = 0.7;
    opt.topk = 5;
    opt.max_tokens = 12;
    opt.seed = 17;
    DistanceFn dist = make_distance("token_f1");
    MethodId m_vro = parse_method("sample_vro", "token_f1");
    MethodId m_max = parse_method("max_prob", "token_f1");

    std::vector<std::string> ids;
    std::vector<int> labels;
    for (int i = 0; i < 25; ++i) ids.push_back("confe_" + std::to_string(i)), labels.push_back(0);
    for (int i = 0; i < 25; ++i) ids.push_back("confh_" + std::to_string(i)), labels.push_back(0);
    for (int i = 0; i < 50; ++i) ids.push_back("fuzz_" + std::to_string(i)), labels.push_back(1);

    std::vector<double> vro_scores, max_scores;
    for (const std::string& id : ids) {
        Prompt p{id, id, Task::qa, {}};
        GenRequest req;
        req.prompt = p;
        req.temperature = 0.0;
        req.max_tokens = 12;
        req.topk = 5;
        Generation original = model.generate(req);
        MethodScorer scorer(model, p, original, opt, dist, splitmix64(opt.seed ^ fnv1a64(p.text)));
        vro_scores.push_back(scorer.score(m_vro));
        max_scores.push_back(scorer.score(m_max));
    }
    double a_vro = auc(vro_scores, labels);
    double a_max = auc(max_scores, labels);
    return a_vro >= 0.9 && a_vro >= a_max;
}

// --------------------------------------------------------------------------
// 8. Perturbation picks the hand-identified max-entropy position (the
//    confusable first step), forces exactly T-1 alternative continuations,
//    and reproduces bit-identically.
bool criterion8() {
    MockModel model = MockModel::from_file(testdata("mock_twoclass.json"));
    Prompt p{"confh_x", "confh_x", Task::qa, {}};
    GenRequest req;
    req.prompt = p;
    req.temperature = 0.0;
    req.max_tokens = 12;
    req.topk = 5;
    Generation original = model.generate(req);
    if (select_perturb_point(original, PerturbPoint::max_ent) != 0) return false;

    PerturbOptions popt;
    popt.max_tokens = 12;
    popt.topk = 5;
    const int T = 5;
    InferenceSet a = perturb_inferences(model, p, original, PerturbPoint::max_ent, T, popt);
    InferenceSet b = perturb_inferences(model, p, original, PerturbPoint::max_ent, T, popt);

    if (!a.perturb_meta || a.perturb_meta->position != 0) return false;
    if (a.variants.size() != static_cast<std::size_t>(T - 1))
        return false; // exactly T-1 forced continuations
    if (a.perturb_meta->substituted_tokens != std::vector<std::string>{"v", "w", "x", "y"})
        return false;
    for (std::size_t i = 0; i < a.variants.size(); ++i) {
        std::string want = a.perturb_meta->substituted_tokens[i] + " b c d e f g h";
        if (a.variants[i].text != want) return false;
        if (generation_to_line(a.variants[i]) != generation_to_line(b.variants[i])) return false;
    }
    return generation_to_line(a.original) == generation_to_line(b.original);
}

// --------------------------------------------------------------------------
// 9. Running the evaluate command twice over the same dataset and seed
//    produces byte-identical summaries.
bool criterion9() {
    namespace fs = std::filesystem;
    fs::path tmp = fs::temp_directory_path() / ("uqgen_accept9_" + std::to_string(getpid()));
    fs::remove_all(tmp);
    fs::create_directories(tmp);
    std::string base = std::string(UQGEN_BIN) + " evaluate " + testdata("nlp_small.jsonl") +
                       " --backend mock --model " + testdata("mock_twoclass.json") +
                       " --distance token_f1 --T 4 --seed 41 --out ";
    bool ok = true;
    for (const char* d : {"r1", "r2"}) {
        SubprocessResult r = run_subprocess(
                {"sh", "-c", base + (tmp / d).string() + " >/dev/null 2>&1"}, "", 120000);
        ok = ok && r.exit_code == 0;
    }
    std::string s1 = slurp((tmp / "r1/summary.json").string());
    std::string s2 = slurp((tmp / "r2/summary.json").string());
    ok = ok && !s1.empty() && s1 == s2;
    fs::remove_all(tmp);
    return ok;
}

// --------------------------------------------------------------------------
// 10. Code quality score hand value and the exhaustive label mapping.
bool criterion10() {
    JudgeResult three_of_four{true, 4, 3};
    if (!near(q_score(three_of_four), 0.875, 1e-12)) return false;

    for (int syntax = 0; syntax <= 1; ++syntax) {
        for (int total = 0; total <= 4; ++total) {
            for (int passed = 0; passed <= total; ++passed) {
                JudgeResult j{syntax == 1, total, passed};
                bool perfect = q_score(j) == 1.0;
                if (label_code(j) != (perfect ? 0 : 1)) return false;
            }
        }
    }
    return true;
}

} // namespace

int main() {
    run(1, "worked-example variation ratios", criterion1);
    run(2, "token-level formula hand values", criterion2);
    run(3, "variation-ratio properties on fuzzed matrices", criterion3);
    run(4, "lexical and code distance hand values", criterion4);
    run(5, "correlation and AUC statistics", criterion5);
    run(6, "temperature scaling and seeded sampling frequency", criterion6);
    run(7, "two-class mock separation, sample VRO vs max-prob", criterion7);
    run(8, "reproducible perturbation at the max-entropy step", criterion8);
    run(9, "byte-identical evaluate summaries across runs", criterion9);
    run(10, "code quality score and label mapping", criterion10);
    return failures == 0 ? 0 : 1;
}
