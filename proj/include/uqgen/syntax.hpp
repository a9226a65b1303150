// Syntax-tree providers: a pluggable parse(lang, source) interface used by the
// CodeBLEU syntax component and the built-in judge, plus a small built-in
// statement/expression language ("toy") used throughout the tests.
//
// Toy grammar:
//   program := stmt*
//   stmt    := "let" ident "=" expr ";" | "return" expr ";" | "print" expr ";"
//   expr    := term (("+" | "-") term)*
//   term    := factor (("*" | "/") factor)*
//   factor  := number | ident | "(" expr ")"
#pragma once

#include <cctype>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "uqgen/errors.hpp"

namespace uqgen {

struct SyntaxNode {
    std::string kind;
    std::string text; // leaf payload (number/ident), empty otherwise
    std::vector<SyntaxNode> children;
};

struct ParseResult {
    bool ok = false;
    SyntaxNode root;
    std::string error;
};

class SyntaxProvider {
public:
    virtual ~SyntaxProvider() = default;
    virtual std::string id() const = 0;
    virtual ParseResult parse(const std::string& source) const = 0;
    // Keywords for the keyword-weighted n-gram component.
    virtual std::vector<std::string> keywords() const { return {}; }
};

// Optional dataflow-match component; absent by default.
class DataflowProvider {
public:
    virtual ~DataflowProvider() = default;
    virtual double match(const std::string& candidate, const std::string& reference) const = 0;
};

// ---------------------------------------------------------------------------
// Toy language

inline std::vector<std::string> toy_tokenize(const std::string& src) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    };
    for (char ch : src) {
        if (std::isspace(static_cast<unsigned char>(ch))) {
            flush();
        } else if (std::string("+-*/();=").find(ch) != std::string::npos) {
            flush();
            out.push_back(std::string(1, ch));
        } else {
            cur += ch;
        }
    }
    flush();
    return out;
}

namespace detail {

class ToyParser {
public:
    explicit ToyParser(std::vector<std::string> toks) : toks_(std::move(toks)) {}

    SyntaxNode program() {
        SyntaxNode n{"program", "", {}};
        while (peek()) n.children.push_back(stmt());
        return n;
    }

private:
    const std::string* peek() const { return i_ < toks_.size() ? &toks_[i_] : nullptr; }

    std::string eat(const char* expect = nullptr) {
        const std::string* got = peek();
        if (!got || (expect && *got != expect))
            throw data_error(std::string("toy parse error near token ") + std::to_string(i_));
        ++i_;
        return *got;
    }

    SyntaxNode stmt() {
        const std::string* k = peek();
        if (*k == "let") {
            eat();
            std::string name = eat();
            if (!is_name(name)) throw data_error("toy parse error: bad let name");
            eat("=");
            SyntaxNode e = expr();
            eat(";");
            return SyntaxNode{"let_stmt", "", {SyntaxNode{"ident", name, {}}, std::move(e)}};
        }
        if (*k == "return" || *k == "print") {
            std::string kw = eat();
            SyntaxNode e = expr();
            eat(";");
            return SyntaxNode{kw == "return" ? "return_stmt" : "print_stmt", "", {std::move(e)}};
        }
        throw data_error("toy parse error: expected statement");
    }

    SyntaxNode expr() {
        SyntaxNode e = term();
        while (peek() && (*peek() == "+" || *peek() == "-")) {
            std::string op = eat();
            SyntaxNode r = term();
            e = SyntaxNode{op == "+" ? "add" : "sub", "", {std::move(e), std::move(r)}};
        }
        return e;
    }

    SyntaxNode term() {
        SyntaxNode e = factor();
        while (peek() && (*peek() == "*" || *peek() == "/")) {
            std::string op = eat();
            SyntaxNode r = factor();
            e = SyntaxNode{op == "*" ? "mul" : "div", "", {std::move(e), std::move(r)}};
        }
        return e;
    }

    SyntaxNode factor() {
        const std::string* k = peek();
        if (!k) throw data_error("toy parse error: unexpected end");
        if (*k == "(") {
            eat();
            SyntaxNode e = expr();
            eat(")");
            return e;
        }
        std::string tok = eat();
        if (is_number(tok)) return SyntaxNode{"number", tok, {}};
        if (is_name(tok)) return SyntaxNode{"ident", tok, {}};
        throw data_error("toy parse error: bad factor " + tok);
    }

    static bool is_number(const std::string& t) {
        if (t.empty()) return false;
        for (char c : t)
            if (!std::isdigit(static_cast<unsigned char>(c))) return false;
        return true;
    }

    static bool is_name(const std::string& t) {
        if (t.empty() || is_number(t)) return false;
        if (t == "let" || t == "return" || t == "print") return false;
        for (char c : t)
            if (std::string("+-*/();=").find(c) != std::string::npos) return false;
        return true;
    }

    std::vector<std::string> toks_;
    std::size_t i_ = 0;
};

} // namespace detail

class ToySyntaxProvider : public SyntaxProvider {
public:
    std::string id() const override { return "toy"; }

    ParseResult parse(const std::string& source) const override {
        ParseResult r;
        try {
            r.root = detail::ToyParser(toy_tokenize(source)).program();
            r.ok = true;
        } catch (const error& e) {
            r.error = e.what();
        }
        return r;
    }

    std::vector<std::string> keywords() const override { return {"let", "return", "print"}; }
};

// Evaluates a parsed toy program under integer variable bindings. `print`
// appends a value; `return` appends and stops. Unknown names and division by
// zero are runtime errors.
inline std::vector<long long> run_toy_program(const SyntaxNode& program,
                                              const std::map<std::string, long long>& bindings) {
    std::map<std::string, long long> env = bindings;

    struct Ev {
        std::map<std::string, long long>& env;
        long long expr(const SyntaxNode& n) {
            if (n.kind == "number") return std::stoll(n.text);
            if (n.kind == "ident") {
                auto it = env.find(n.text);
                if (it == env.end()) throw error("toy runtime: unbound name " + n.text);
                return it->second;
            }
            long long a = expr(n.children.at(0));
            long long b = expr(n.children.at(1));
            if (n.kind == "add") return a + b;
            if (n.kind == "sub") return a - b;
            if (n.kind == "mul") return a * b;
            if (n.kind == "div") {
                if (b == 0) throw error("toy runtime: division by zero");
                return a / b;
            }
            throw error("toy runtime: bad node kind " + n.kind);
        }
    } ev{env};

    std::vector<long long> out;
    for (const SyntaxNode& s : program.children) {
        if (s.kind == "let_stmt") {
            env[s.children.at(0).text] = ev.expr(s.children.at(1));
        } else if (s.kind == "print_stmt") {
            out.push_back(ev.expr(s.children.at(0)));
        } else if (s.kind == "return_stmt") {
            out.push_back(ev.expr(s.children.at(0)));
            break;
        } else {
            throw error("toy runtime: bad statement kind " + s.kind);
        }
    }
    return out;
}

// Parses "name=value" integer bindings separated by whitespace.
inline std::map<std::string, long long> parse_toy_bindings(const std::string& input) {
    std::map<std::string, long long> env;
    std::string cur;
    auto flush = [&] {
        if (cur.empty()) return;
        auto eq = cur.find('=');
        if (eq == std::string::npos || eq == 0)
            throw data_error("bad binding: " + cur);
        env[cur.substr(0, eq)] = std::stoll(cur.substr(eq + 1));
        cur.clear();
    };
    for (char ch : input) {
        if (std::isspace(static_cast<unsigned char>(ch)))
            flush();
        else
            cur += ch;
    }
    flush();
    return env;
}

// ---------------------------------------------------------------------------
// Provider registry

namespace detail {
struct SyntaxRegistry {
    SyntaxRegistry() { providers["toy"] = std::make_shared<ToySyntaxProvider>(); }
    std::mutex mu;
    std::map<std::string, std::shared_ptr<const SyntaxProvider>> providers;
    std::map<std::string, std::shared_ptr<const DataflowProvider>> dataflow;
};

inline SyntaxRegistry& syntax_registry() {
    static SyntaxRegistry reg;
    return reg;
}
} // namespace detail

inline void register_syntax_provider(const std::string& lang,
                                     std::shared_ptr<const SyntaxProvider> p) {
    auto& reg = detail::syntax_registry();
    std::lock_guard<std::mutex> lock(reg.mu);
    reg.providers[lang] = std::move(p);
}

inline std::shared_ptr<const SyntaxProvider> find_syntax_provider(const std::string& lang) {
    auto& reg = detail::syntax_registry();
    std::lock_guard<std::mutex> lock(reg.mu);
    auto it = reg.providers.find(lang);
    return it == reg.providers.end() ? nullptr : it->second;
}

inline void register_dataflow_provider(const std::string& lang,
                                       std::shared_ptr<const DataflowProvider> p) {
    auto& reg = detail::syntax_registry();
    std::lock_guard<std::mutex> lock(reg.mu);
    reg.dataflow[lang] = std::move(p);
}

inline std::shared_ptr<const DataflowProvider> find_dataflow_provider(const std::string& lang) {
    auto& reg = detail::syntax_registry();
    std::lock_guard<std::mutex> lock(reg.mu);
    auto it = reg.dataflow.find(lang);
    return it == reg.dataflow.end() ? nullptr : it->second;
}

} // namespace uqgen
