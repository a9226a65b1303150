// uqgen: uncertainty scores for black-box text generators.
//
//   uqgen score "PROMPT"  --backend mock --model model.json --methods sample_vro
//   uqgen evaluate data.jsonl --out results/
//   uqgen report results/records.jsonl --format text
//   uqgen judge   (judge subprocess protocol on stdin/stdout)
//
// Exit codes: 0 success, 2 configuration error, 3 backend error, 4 data error.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <uqgen/uqgen.hpp>

namespace {

using namespace uqgen;

std::shared_ptr<Generator> make_generator(const RunConfig& cfg) {
    std::shared_ptr<Generator> gen;
    if (cfg.backend == "mock") {
        if (cfg.model.empty())
            throw config_error("mock backend needs --model <definition.json>");
        gen = std::make_shared<MockModel>(MockModel::from_file(cfg.model));
    } else {
        if (cfg.base_url.empty()) throw config_error("http backend needs --base-url");
        HttpBackendConfig hc;
        hc.base_url = cfg.base_url;
        hc.model = cfg.model;
        hc.max_topk = std::max(cfg.topk, 5);
        gen = std::make_shared<HttpBackend>(hc);
    }
    if (!cfg.cache_path.empty()) gen = std::make_shared<CachedGenerator>(gen, cfg.cache_path);
    return gen;
}

std::vector<MethodId> resolve_methods(const RunConfig& cfg) {
    if (cfg.methods.empty()) return all_methods(cfg.distance);
    std::vector<MethodId> out;
    for (const std::string& tok : cfg.methods) out.push_back(parse_method(tok, cfg.distance));
    return out;
}

std::vector<std::string> split_command(const std::string& cmd) {
    std::istringstream in(cmd);
    std::vector<std::string> argv;
    std::string tok;
    while (in >> tok) argv.push_back(tok);
    return argv;
}

EvalOptions make_eval_options(const RunConfig& cfg) {
    EvalOptions opt;
    opt.methods = resolve_methods(cfg);
    opt.distance_id = cfg.distance;
    opt.distance_options.bleu_smoothing = cfg.bleu_smoothing;
    if (cfg.embed_provider == "remote")
        opt.embedding = std::make_shared<RemoteEmbeddingProvider>();
    else
        opt.embedding = std::make_shared<HashedBagEmbedding>();
    opt.distance_options.embedding = opt.embedding;
    opt.T = cfg.T;
    opt.temperature = cfg.temperature;
    opt.topk = cfg.topk;
    opt.max_tokens = cfg.max_tokens;
    opt.seed = cfg.seed;
    opt.entropy_mode = parse_entropy_mode(cfg.entropy_mode);
    opt.perturb_include_original = cfg.perturb_include_original;
    opt.parallelism = cfg.parallelism;
    opt.prompt_template = cfg.prompt_template;
    opt.judge.command = split_command(cfg.judge_cmd);
    opt.judge.timeout_ms = cfg.judge_timeout_ms;
    if (!cfg.judge_file.empty()) opt.precomputed_judge = load_judge_file(cfg.judge_file);
    return opt;
}

int cmd_score(const RunConfig& cfg, const std::string& prompt_text, const std::string& task_name) {
    validate_config(cfg);
    std::shared_ptr<Generator> gen = make_generator(cfg);
    EvalOptions opt = make_eval_options(cfg);

    Prompt prompt{"cli", prompt_text, parse_task(task_name), {}};
    GenRequest greedy;
    greedy.prompt = prompt;
    greedy.temperature = 0.0;
    greedy.max_tokens = cfg.max_tokens;
    greedy.topk = cfg.topk;
    Generation original = gen->generate(greedy);

    DistanceOptions dopt = opt.distance_options;
    DistanceFn dist = make_distance(cfg.distance, dopt);
    MethodScorer scorer(*gen, prompt, original, opt, dist,
                        splitmix64(cfg.seed ^ fnv1a64(prompt.text)));

    std::cout << std::left << std::setw(14) << "method" << std::right << std::setw(12) << "score"
              << std::setw(12) << "inferences" << std::setw(12) << "ms" << std::endl;
    for (const MethodId& m : opt.methods) {
        auto t0 = std::chrono::steady_clock::now();
        std::string cell;
        try {
            std::ostringstream v;
            v << std::fixed << std::setprecision(6) << scorer.score(m);
            cell = v.str();
        } catch (const stat_error& e) {
            cell = "NA";
            log_warn(std::string(m.token()) + ": " + e.what());
        }
        auto t1 = std::chrono::steady_clock::now();
        std::ostringstream ms;
        ms << std::fixed << std::setprecision(2)
           << std::chrono::duration<double, std::milli>(t1 - t0).count();
        // one flushed row per method so partial output survives backend failure
        std::cout << std::left << std::setw(14) << m.token() << std::right << std::setw(12) << cell
                  << std::setw(12) << scorer.inference_count(m) << std::setw(12) << ms.str()
                  << std::endl;
    }
    return 0;
}

int cmd_evaluate(const RunConfig& cfg, const std::string& dataset_path,
                 const std::string& out_dir) {
    validate_config(cfg);
    std::vector<DatasetInstance> instances = load_dataset(dataset_path);
    if (cfg.sample_n > 0)
        instances = sample_instances(std::move(instances), cfg.sample_n, cfg.seed);

    std::shared_ptr<Generator> gen = make_generator(cfg);
    EvalOptions opt = make_eval_options(cfg);
    EvalOutput out = evaluate(instances, *gen, opt);

    std::filesystem::create_directories(out_dir);
    std::string records_path = out_dir + "/records.jsonl";
    write_records(out.records, records_path);

    std::string hash = dataset_hash(dataset_path);
    for (const std::string& fmt : cfg.report_formats) {
        if (fmt == "json") {
            std::ofstream f(out_dir + "/summary.json", std::ios::trunc);
            f << summary_to_json(out.summary, cfg, hash).dump(2) << '\n';
        } else if (fmt == "csv") {
            std::ofstream f(out_dir + "/summary.csv", std::ios::trunc);
            f << summary_to_csv(out.summary);
        } else {
            throw config_error("unknown report format: " + fmt);
        }
    }

    std::cout << rows_to_table(rows_from_summary(out.summary));
    std::cout << "instances " << out.summary.instances << ", evaluated " << out.summary.evaluated
              << ", skipped " << out.summary.skipped << "; wrote " << records_path << std::endl;
    for (const auto& [id, reason] : out.summary.errors)
        std::cerr << "skipped " << id << ": " << reason << std::endl;
    return 0;
}

int cmd_report(const std::vector<std::string>& paths, const std::string& format,
               const std::string& out_path) {
    std::vector<EvalRecord> records = load_records(paths);
    std::vector<ReportRow> rows = rows_from_records(records);
    rank_rows(rows);
    std::string body;
    if (format == "text")
        body = rows_to_table(rows);
    else if (format == "csv")
        body = rows_to_csv(rows);
    else if (format == "json")
        body = rows_to_json(rows).dump(2) + "\n";
    else
        throw config_error("unknown report format: " + format);
    if (out_path.empty()) {
        std::cout << body;
    } else {
        std::ofstream f(out_path, std::ios::trunc);
        if (!f) throw data_error("cannot write report: " + out_path);
        f << body;
    }
    return 0;
}

// Judge subprocess protocol: {code, language, tests} on stdin,
// {syntax_ok, tests_total, tests_passed} on stdout.
int cmd_judge() {
    std::string input((std::istreambuf_iterator<char>(std::cin)),
                      std::istreambuf_iterator<char>());
    nlohmann::json j = nlohmann::json::parse(input, nullptr, false);
    if (j.is_discarded()) throw data_error("judge: stdin is not valid JSON");
    std::string language = j.value("language", std::string("toy"));
    if (language != "toy") throw config_error("judge: unsupported language " + language);
    std::vector<TestSpec> tests;
    if (j.contains("tests"))
        for (const auto& t : j.at("tests"))
            tests.push_back(
                    TestSpec{t.value("input", std::string()), t.at("expected").get<std::string>()});
    JudgeResult r = toy_judge(j.at("code").get<std::string>(), tests);
    std::cout << nlohmann::json{{"syntax_ok", r.syntax_ok},
                                {"tests_total", r.tests_total},
                                {"tests_passed", r.tests_passed}}
                         .dump()
              << std::endl;
    return 0;
}

void add_common_options(CLI::App* sub, RunConfig& cfg) {
    // --config first: explicit flags override values loaded from the file
    sub->add_option_function<std::string>(
               "--config", [&cfg](const std::string& path) { cfg = config_from_file(path); },
               "JSON config file (flags override)")
            ->check(CLI::ExistingFile);
    sub->add_option("--backend", cfg.backend, "mock|http");
    sub->add_option("--model", cfg.model, "mock: definition JSON; http: model name");
    sub->add_option("--base-url", cfg.base_url, "http backend endpoint");
    sub->add_option("--methods", cfg.methods, "comma-separated method tokens (default: all 12)")
            ->delimiter(',');
    sub->add_option("--distance", cfg.distance, "bleu|rouge_l|token_f1|codebleu|embed_cos");
    sub->add_option("--embed-provider", cfg.embed_provider, "hashed_bag|remote");
    sub->add_option("--T", cfg.T, "inferences per multi-inference method");
    sub->add_option("--temperature", cfg.temperature, "sampling temperature");
    sub->add_option("--topk", cfg.topk, "top-k tokens recorded per step");
    sub->add_option("--seed", cfg.seed, "base seed");
    sub->add_option("--parallelism", cfg.parallelism, "worker bound");
    sub->add_option("--max-tokens", cfg.max_tokens, "generation length cap");
    sub->add_option("--cache", cfg.cache_path, "response cache path (JSONL)");
    sub->add_option("--entropy-mode", cfg.entropy_mode, "raw|renormalized");
    sub->add_flag("--perturb-include-original,!--no-perturb-include-original",
                  cfg.perturb_include_original, "count the original among perturbation members");
    sub->add_flag("--bleu-smoothing,!--no-bleu-smoothing", cfg.bleu_smoothing,
                  "add-1 smoothing for n>=2 precisions");
    sub->add_option("--prompt-template", cfg.prompt_template, "template with {input}");
    sub->add_option("--sample", cfg.sample_n, "evaluate a seeded sample of N instances");
    sub->add_option("--judge-cmd", cfg.judge_cmd, "external judge command");
    sub->add_option("--judge-file", cfg.judge_file, "precomputed judge results JSONL");
    sub->add_option("--judge-timeout-ms", cfg.judge_timeout_ms, "judge wall-clock timeout");
}

} // namespace

int main(int argc, char** argv) {
    uqgen::set_log_sink([](std::string_view msg) { std::cerr << "uqgen: " << msg << std::endl; });

    CLI::App app{"uncertainty quantification for black-box text generators"};
    app.require_subcommand(1);
    app.set_version_flag("--version", uqgen::version());

    RunConfig cfg;
    int rc = 0;

    auto* score = app.add_subcommand("score", "score a single prompt with the requested methods");
    std::string prompt_text, score_task = "other";
    score->add_option("prompt", prompt_text, "prompt text")->required();
    score->add_option("--task", score_task, "qa|summarization|translation|codegen|other");
    add_common_options(score, cfg);
    score->callback([&] { rc = cmd_score(cfg, prompt_text, score_task); });

    auto* evaluate = app.add_subcommand("evaluate", "run a dataset and write records + summary");
    std::string dataset_path, out_dir = "uqgen-out";
    evaluate->add_option("dataset", dataset_path, "dataset JSONL")
            ->required()
            ->check(CLI::ExistingFile);
    evaluate->add_option("--out", out_dir, "output directory");
    evaluate->add_option("--format", cfg.report_formats, "summary formats (json,csv)")
            ->delimiter(',');
    add_common_options(evaluate, cfg);
    evaluate->callback([&] { rc = cmd_evaluate(cfg, dataset_path, out_dir); });

    auto* report = app.add_subcommand("report", "render ranked tables from records files");
    std::vector<std::string> record_paths;
    std::string report_format = "text", report_out;
    report->add_option("records", record_paths, "records JSONL (repeatable)")
            ->required()
            ->check(CLI::ExistingFile);
    report->add_option("--format", report_format, "text|csv|json");
    report->add_option("--out", report_out, "output file (default stdout)");
    report->callback([&] { rc = cmd_report(record_paths, report_format, report_out); });

    auto* judge = app.add_subcommand("judge", "built-in toy-language judge (stdin/stdout protocol)");
    judge->callback([&] { rc = cmd_judge(); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const uqgen::config_error& e) {
        std::cerr << "config error: " << e.what() << std::endl;
        return 2;
    } catch (const uqgen::inference_error& e) {
        std::cerr << "backend error: " << e.what() << std::endl;
        return 3;
    } catch (const uqgen::provider_error& e) {
        std::cerr << "backend error: " << e.what() << std::endl;
        return 3;
    } catch (const uqgen::backend_error& e) {
        std::cerr << "backend error: " << e.what() << std::endl;
        return 3;
    } catch (const uqgen::data_error& e) {
        std::cerr << "data error";
        if (e.line() >= 0) std::cerr << " (line " << e.line() << ")";
        std::cerr << ": " << e.what() << std::endl;
        return 4;
    } catch (const uqgen::error& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
    return rc;
}
