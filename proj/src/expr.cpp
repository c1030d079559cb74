#include "cpq/expr.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>

namespace cpq {

namespace {

constexpr int kMaxDepth = 200;

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

bool lookup_function(std::string_view name, Function& fn) {
    static const std::pair<std::string_view, Function> table[] = {
        {"sqrt", Function::Sqrt}, {"exp", Function::Exp}, {"log", Function::Log},
        {"sin", Function::Sin},   {"cos", Function::Cos},
    };
    for (const auto& [n, f] : table) {
        if (n == name) {
            fn = f;
            return true;
        }
    }
    return false;
}

}  // namespace

std::vector<Token> tokenize(std::string_view src) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < src.size()) {
        const char c = src[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        const std::size_t start = i;
        if (is_digit(c) || (c == '.' && i + 1 < src.size() && is_digit(src[i + 1]))) {
            while (i < src.size() && is_digit(src[i])) ++i;
            if (i < src.size() && src[i] == '.') {
                ++i;
                while (i < src.size() && is_digit(src[i])) ++i;
            }
            if (i < src.size() && (src[i] == 'e' || src[i] == 'E')) {
                std::size_t j = i + 1;
                if (j < src.size() && (src[j] == '+' || src[j] == '-')) ++j;
                if (j < src.size() && is_digit(src[j])) {
                    i = j;
                    while (i < src.size() && is_digit(src[i])) ++i;
                } else {
                    throw ParseError("malformed exponent in number", start, j - start);
                }
            }
            out.push_back({Token::Kind::Number, std::string(src.substr(start, i - start)), start, i - start});
        } else if (is_ident_start(c)) {
            while (i < src.size() && is_ident_char(src[i])) ++i;
            out.push_back({Token::Kind::Identifier, std::string(src.substr(start, i - start)), start, i - start});
        } else if (c == '+' || c == '-' || c == '*' || c == '/' || c == '^') {
            ++i;
            out.push_back({Token::Kind::Operator, std::string(1, c), start, 1});
        } else if (c == '(' || c == ')') {
            ++i;
            out.push_back({Token::Kind::Paren, std::string(1, c), start, 1});
        } else if (c == ',') {
            ++i;
            out.push_back({Token::Kind::Comma, ",", start, 1});
        } else {
            throw ParseError(std::string("unexpected character '") + (std::isprint(static_cast<unsigned char>(c)) ? std::string(1, c) : std::string("\\x") + std::to_string(static_cast<unsigned char>(c))) + "'", start, 1);
        }
    }
    return out;
}

struct Expr::Node {
    NodeKind kind = NodeKind::Constant;
    double value = 0.0;
    std::string name;
    Function fn = Function::Sqrt;
    Expr lhs;
    Expr rhs;
};

NodeKind Expr::kind() const { return node_->kind; }
double Expr::value() const { return node_->value; }
const std::string& Expr::name() const { return node_->name; }
Function Expr::function() const { return node_->fn; }
const Expr& Expr::lhs() const { return node_->lhs; }
const Expr& Expr::rhs() const { return node_->rhs; }

Expr Expr::constant(double v) {
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::Constant;
    n->value = v;
    return Expr(std::move(n));
}

Expr Expr::variable(std::string name) {
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::Variable;
    n->name = std::move(name);
    return Expr(std::move(n));
}

Expr Expr::neg(Expr a) {
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::Neg;
    n->lhs = std::move(a);
    return Expr(std::move(n));
}

Expr Expr::binary(NodeKind op, Expr a, Expr b) {
    auto n = std::make_shared<Node>();
    n->kind = op;
    n->lhs = std::move(a);
    n->rhs = std::move(b);
    return Expr(std::move(n));
}

Expr Expr::call(Function fn, Expr a) {
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::Call;
    n->fn = fn;
    n->lhs = std::move(a);
    return Expr(std::move(n));
}

bool Expr::operator==(const Expr& o) const {
    if (node_ == o.node_) return true;
    if (!node_ || !o.node_) return false;
    if (kind() != o.kind()) return false;
    switch (kind()) {
        case NodeKind::Constant: return value() == o.value();
        case NodeKind::Variable: return name() == o.name();
        case NodeKind::Neg: return lhs() == o.lhs();
        case NodeKind::Call: return function() == o.function() && lhs() == o.lhs();
        default: return lhs() == o.lhs() && rhs() == o.rhs();
    }
}

namespace {

class Parser {
public:
    Parser(std::string_view src, std::span<const std::string> vars) : src_(src), toks_(tokenize(src)), vars_(vars) {}

    Expr run() {
        if (toks_.empty()) throw ParseError("empty expression", 0, 0);
        Expr e = expr(0);
        if (pos_ < toks_.size()) throw unexpected();
        return e;
    }

private:
    const Token* peek() const { return pos_ < toks_.size() ? &toks_[pos_] : nullptr; }
    bool at_op(char c) const {
        const Token* t = peek();
        return t && t->kind == Token::Kind::Operator && t->text[0] == c;
    }
    bool at_paren(char c) const {
        const Token* t = peek();
        return t && t->kind == Token::Kind::Paren && t->text[0] == c;
    }

    ParseError unexpected() const {
        if (const Token* t = peek()) return ParseError("unexpected token '" + t->text + "'", t->offset, t->length);
        return ParseError("unexpected end of input", src_.size(), 0);
    }

    void guard(int depth) const {
        if (depth > kMaxDepth) {
            const std::size_t off = peek() ? peek()->offset : src_.size();
            throw ParseError("expression nested too deeply", off, 0);
        }
    }

    Expr expr(int depth) {
        guard(depth);
        Expr e = term(depth + 1);
        while (at_op('+') || at_op('-')) {
            const NodeKind op = peek()->text[0] == '+' ? NodeKind::Add : NodeKind::Sub;
            ++pos_;
            e = Expr::binary(op, e, term(depth + 1));
        }
        return e;
    }

    Expr term(int depth) {
        guard(depth);
        Expr e = unary(depth + 1);
        while (at_op('*') || at_op('/')) {
            const NodeKind op = peek()->text[0] == '*' ? NodeKind::Mul : NodeKind::Div;
            ++pos_;
            e = Expr::binary(op, e, unary(depth + 1));
        }
        return e;
    }

    Expr unary(int depth) {
        guard(depth);
        if (at_op('-')) {
            ++pos_;
            return Expr::neg(unary(depth + 1));
        }
        return power(depth + 1);
    }

    Expr power(int depth) {
        guard(depth);
        Expr base = primary(depth + 1);
        if (at_op('^')) {
            ++pos_;
            return Expr::binary(NodeKind::Pow, base, unary(depth + 1));
        }
        return base;
    }

    Expr primary(int depth) {
        guard(depth);
        const Token* t = peek();
        if (!t) throw unexpected();
        if (t->kind == Token::Kind::Number) {
            double v = 0.0;
            const auto res = std::from_chars(t->text.data(), t->text.data() + t->text.size(), v);
            if (res.ec != std::errc() || !std::isfinite(v)) throw ParseError("number out of range", t->offset, t->length);
            ++pos_;
            return Expr::constant(v);
        }
        if (t->kind == Token::Kind::Identifier) {
            Function fn{};
            if (lookup_function(t->text, fn)) {
                const Token name = *t;
                ++pos_;
                if (!at_paren('(')) {
                    if (peek()) throw ParseError("expected '(' after function " + name.text, peek()->offset, peek()->length);
                    throw ParseError("expected '(' after function " + name.text, src_.size(), 0);
                }
                ++pos_;
                Expr arg = expr(depth + 1);
                expect_close();
                return Expr::call(fn, arg);
            }
            bool known = false;
            for (const auto& v : vars_) known = known || v == t->text;
            if (!known) throw ParseError("unknown identifier '" + t->text + "'", t->offset, t->length);
            ++pos_;
            return Expr::variable(t->text);
        }
        if (at_paren('(')) {
            ++pos_;
            Expr e = expr(depth + 1);
            expect_close();
            return e;
        }
        throw unexpected();
    }

    void expect_close() {
        if (!at_paren(')')) {
            if (peek()) throw ParseError("expected ')'", peek()->offset, peek()->length);
            throw ParseError("unbalanced parenthesis: expected ')'", src_.size(), 0);
        }
        ++pos_;
    }

    std::string_view src_;
    std::vector<Token> toks_;
    std::span<const std::string> vars_;
    std::size_t pos_ = 0;
};

}  // namespace

Expr parse(std::string_view source, std::span<const std::string> declared_vars) {
    return Parser(source, declared_vars).run();
}

Expr parse(std::string_view source, std::initializer_list<std::string> declared_vars) {
    const std::vector<std::string> v(declared_vars);
    return parse(source, std::span<const std::string>(v));
}

const char* function_name(Function fn) {
    switch (fn) {
        case Function::Sqrt: return "sqrt";
        case Function::Exp: return "exp";
        case Function::Log: return "log";
        case Function::Sin: return "sin";
        case Function::Cos: return "cos";
    }
    return "?";
}

std::string to_string(const Expr& e) {
    switch (e.kind()) {
        case NodeKind::Constant: {
            char buf[40];
            std::snprintf(buf, sizeof buf, "%.17g", std::abs(e.value()));
            return e.value() < 0 ? "(-" + std::string(buf) + ")" : std::string(buf);
        }
        case NodeKind::Variable: return e.name();
        case NodeKind::Neg: return "(-" + to_string(e.lhs()) + ")";
        case NodeKind::Call: return std::string(function_name(e.function())) + "(" + to_string(e.lhs()) + ")";
        default: break;
    }
    const char* op = "+";
    switch (e.kind()) {
        case NodeKind::Sub: op = "-"; break;
        case NodeKind::Mul: op = "*"; break;
        case NodeKind::Div: op = "/"; break;
        case NodeKind::Pow: op = "^"; break;
        default: break;
    }
    return "(" + to_string(e.lhs()) + " " + op + " " + to_string(e.rhs()) + ")";
}

namespace {

void collect(const Expr& e, std::set<std::string>& out) {
    switch (e.kind()) {
        case NodeKind::Constant: return;
        case NodeKind::Variable: out.insert(e.name()); return;
        case NodeKind::Neg:
        case NodeKind::Call: collect(e.lhs(), out); return;
        default:
            collect(e.lhs(), out);
            collect(e.rhs(), out);
    }
}

// Exponent that is a literal (possibly negated) constant.
bool literal_exponent(const Expr& e, double& v) {
    if (e.kind() == NodeKind::Constant) {
        v = e.value();
        return true;
    }
    if (e.kind() == NodeKind::Neg && literal_exponent(e.lhs(), v)) {
        v = -v;
        return true;
    }
    return false;
}

const JetContext& env_context(const JetEnv& env) {
    if (env.empty()) throw ContextError("cannot evaluate an expression without a jet context");
    const JetContext& ctx = env.begin()->second.context();
    for (const auto& [name, jet] : env)
        if (&jet.context() != &ctx) throw ContextError("environment jets must share one context (variable " + name + ")");
    return ctx;
}

Jet eval_rec(const Expr& e, const JetEnv& env, const JetContext& ctx) {
    switch (e.kind()) {
        case NodeKind::Constant: return Jet(ctx, e.value());
        case NodeKind::Variable: {
            const auto it = env.find(e.name());
            if (it == env.end()) throw ContextError("unbound variable '" + e.name() + "'");
            return it->second;
        }
        case NodeKind::Neg: return -eval_rec(e.lhs(), env, ctx);
        case NodeKind::Call: {
            const Jet a = eval_rec(e.lhs(), env, ctx);
            switch (e.function()) {
                case Function::Sqrt: return sqrt(a);
                case Function::Exp: return exp(a);
                case Function::Log: return log(a);
                case Function::Sin: return sin(a);
                case Function::Cos: return cos(a);
            }
            break;
        }
        case NodeKind::Pow: {
            const Jet base = eval_rec(e.lhs(), env, ctx);
            double p = 0.0;
            if (literal_exponent(e.rhs(), p)) return pow(base, p);
            const Jet ex = eval_rec(e.rhs(), env, ctx);
            if (!(base.value() > 0.0)) throw DomainError("non-literal exponent requires a positive base");
            return exp(ex * log(base));
        }
        default: {
            const Jet a = eval_rec(e.lhs(), env, ctx);
            const Jet b = eval_rec(e.rhs(), env, ctx);
            switch (e.kind()) {
                case NodeKind::Add: return a + b;
                case NodeKind::Sub: return a - b;
                case NodeKind::Mul: return a * b;
                case NodeKind::Div:
                    if (b.value() == 0.0) throw DomainError("division by a jet with zero constant term");
                    return a / b;
                default: break;
            }
        }
    }
    throw ContextError("malformed expression tree");
}

}  // namespace

std::set<std::string> free_vars(const Expr& e) {
    std::set<std::string> out;
    collect(e, out);
    return out;
}

Jet eval_jet(const Expr& e, const JetEnv& env) { return eval_rec(e, env, env_context(env)); }

double eval(const Expr& e, const std::map<std::string, double, std::less<>>& env) {
    const JetContext& ctx = JetContext::get(1, 0);
    JetEnv jets;
    for (const auto& [k, v] : env) jets.emplace(k, Jet(ctx, v));
    if (jets.empty()) jets.emplace("", Jet(ctx, 0.0));
    return eval_rec(e, jets, ctx).value();
}

}  // namespace cpq
