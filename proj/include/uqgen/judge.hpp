// Code-quality judging. The judge is an external subprocess contract: JSON on
// stdin {code, language, tests}, JSON on stdout {syntax_ok, tests_total,
// tests_passed}, nonzero exit = crash. A built-in judge covers the toy test
// language; run_judge falls back to it when no command is configured.
#pragma once

#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "uqgen/errors.hpp"
#include "uqgen/syntax.hpp"

namespace uqgen {

struct TestSpec {
    std::string input;    // "name=value" integer bindings
    std::string expected; // space-joined printed/returned values
};

struct JudgeResult {
    bool syntax_ok = false;
    int tests_total = 0;
    int tests_passed = 0;
    bool timed_out = false;
    bool no_tests = false; // flagged: Q_semantics forced to 0
};

// ---------------------------------------------------------------------------
// Built-in toy judge

inline JudgeResult toy_judge(const std::string& code, const std::vector<TestSpec>& tests) {
    JudgeResult r;
    r.tests_total = static_cast<int>(tests.size());
    r.no_tests = tests.empty();
    ToySyntaxProvider provider;
    ParseResult parsed = provider.parse(code);
    r.syntax_ok = parsed.ok;
    if (!parsed.ok) return r;
    for (const TestSpec& t : tests) {
        try {
            std::vector<long long> out = run_toy_program(parsed.root, parse_toy_bindings(t.input));
            std::ostringstream got;
            for (std::size_t i = 0; i < out.size(); ++i) {
                if (i) got << ' ';
                got << out[i];
            }
            // compare against whitespace-normalized expectation
            std::istringstream want(t.expected);
            std::string tok, norm;
            while (want >> tok) {
                if (!norm.empty()) norm += ' ';
                norm += tok;
            }
            if (got.str() == norm) ++r.tests_passed;
        } catch (const error&) {
            // runtime failure counts as a failed test
        }
    }
    return r;
}

// ---------------------------------------------------------------------------
// Judge wire format

inline nlohmann::json judge_request_json(const std::string& code, const std::string& language,
                                         const std::vector<TestSpec>& tests) {
    nlohmann::json jt = nlohmann::json::array();
    for (const TestSpec& t : tests) jt.push_back({{"input", t.input}, {"expected", t.expected}});
    return nlohmann::json{{"code", code}, {"language", language}, {"tests", std::move(jt)}};
}

inline JudgeResult judge_response_from_json(const nlohmann::json& j) {
    try {
        JudgeResult r;
        r.syntax_ok = j.at("syntax_ok").get<bool>();
        r.tests_total = j.at("tests_total").get<int>();
        r.tests_passed = j.at("tests_passed").get<int>();
        if (r.tests_passed < 0 || r.tests_passed > r.tests_total)
            throw data_error("judge response: tests_passed out of range");
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw data_error(std::string("bad judge response: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Subprocess plumbing

struct SubprocessResult {
    int exit_code = -1;
    bool timed_out = false;
    std::string out;
};

// Runs argv with `input` on stdin, reading stdout until EOF or deadline.
// On timeout the child is killed. Input must fit the pipe buffer.
inline SubprocessResult run_subprocess(const std::vector<std::string>& argv,
                                       const std::string& input, int timeout_ms) {
    if (argv.empty()) throw config_error("run_subprocess: empty command");
    signal(SIGPIPE, SIG_IGN);

    int in_pipe[2], out_pipe[2];
    if (pipe(in_pipe) != 0 || pipe(out_pipe) != 0)
        throw error("run_subprocess: pipe() failed");

    pid_t pid = fork();
    if (pid < 0) throw error("run_subprocess: fork() failed");
    if (pid == 0) {
        dup2(in_pipe[0], STDIN_FILENO);
        dup2(out_pipe[1], STDOUT_FILENO);
        close(in_pipe[0]);
        close(in_pipe[1]);
        close(out_pipe[0]);
        close(out_pipe[1]);
        std::vector<char*> cargv;
        for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
        cargv.push_back(nullptr);
        execvp(cargv[0], cargv.data());
        _exit(127);
    }

    close(in_pipe[0]);
    close(out_pipe[1]);

    std::size_t written = 0;
    while (written < input.size()) {
        ssize_t n = write(in_pipe[1], input.data() + written, input.size() - written);
        if (n <= 0) break; // child closed stdin early
        written += static_cast<std::size_t>(n);
    }
    close(in_pipe[1]);

    SubprocessResult result;
    auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
    char buf[4096];
    for (;;) {
        auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
                            deadline - std::chrono::steady_clock::now())
                            .count();
        if (left <= 0) {
            result.timed_out = true;
            break;
        }
        pollfd pfd{out_pipe[0], POLLIN, 0};
        int pr = poll(&pfd, 1, static_cast<int>(left));
        if (pr == 0) {
            result.timed_out = true;
            break;
        }
        if (pr < 0) {
            if (errno == EINTR) continue;
            break;
        }
        ssize_t n = read(out_pipe[0], buf, sizeof(buf));
        if (n <= 0) break; // EOF
        result.out.append(buf, static_cast<std::size_t>(n));
    }
    close(out_pipe[0]);

    if (result.timed_out) kill(pid, SIGKILL);
    int status = 0;
    waitpid(pid, &status, 0);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

// ---------------------------------------------------------------------------
// run_judge

struct JudgeConfig {
    std::vector<std::string> command; // empty -> built-in toy judge
    std::string language = "toy";
    int timeout_ms = 10000;
};

// Judges one generated program. Timeouts degrade to tests_passed=0 with
// syntax_ok from a parse-only pass; crashes (nonzero exit, garbage output)
// throw so the caller can record a per-instance error and continue.
inline JudgeResult run_judge(const std::string& code, const std::vector<TestSpec>& tests,
                             const JudgeConfig& cfg = {}) {
    if (cfg.command.empty()) {
        if (cfg.language != "toy")
            throw config_error("no judge command configured for language: " + cfg.language);
        return toy_judge(code, tests);
    }

    std::string payload = judge_request_json(code, cfg.language, tests).dump();
    SubprocessResult sp = run_subprocess(cfg.command, payload, cfg.timeout_ms);

    if (sp.timed_out) {
        JudgeResult r;
        r.timed_out = true;
        r.tests_total = static_cast<int>(tests.size());
        r.tests_passed = 0;
        auto provider = find_syntax_provider(cfg.language);
        r.syntax_ok = provider && provider->parse(code).ok;
        return r;
    }
    if (sp.exit_code != 0)
        throw error("judge exited with code " + std::to_string(sp.exit_code));
    nlohmann::json j = nlohmann::json::parse(sp.out, nullptr, false);
    if (j.is_discarded()) throw data_error("judge emitted invalid JSON");
    JudgeResult r = judge_response_from_json(j);
    if (r.tests_total == 0) r.no_tests = true;
    return r;
}

} // namespace uqgen
