#pragma once

#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cpq/jet.hpp"

namespace cpq {

struct Token {
    enum class Kind { Number, Identifier, Operator, Paren, Comma };
    Kind kind;
    std::string text;
    std::size_t offset;
    std::size_t length;
};

/// Split source into tokens; whitespace is skipped. Throws ParseError on a bad character.
std::vector<Token> tokenize(std::string_view source);

enum class NodeKind { Constant, Variable, Neg, Add, Sub, Mul, Div, Pow, Call };
enum class Function { Sqrt, Exp, Log, Sin, Cos };

/**
 * @brief Immutable expression tree.
 *
 * Grammar (whitespace insignificant):
 *   expr    := term (('+' | '-') term)*
 *   term    := unary (('*' | '/') unary)*
 *   unary   := '-' unary | power
 *   power   := primary ('^' unary)?
 *   primary := number | identifier | func '(' expr ')' | '(' expr ')'
 * so '^' is right-associative and binds tighter than unary minus.
 */
class Expr {
public:
    Expr() = default;

    static Expr constant(double v);
    static Expr variable(std::string name);
    static Expr neg(Expr a);
    static Expr binary(NodeKind op, Expr a, Expr b);
    static Expr call(Function fn, Expr a);

    bool valid() const { return node_ != nullptr; }
    NodeKind kind() const;
    double value() const;
    const std::string& name() const;
    Function function() const;
    const Expr& lhs() const;
    const Expr& rhs() const;

    /// Structural equality.
    bool operator==(const Expr& o) const;

private:
    struct Node;
    explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
    std::shared_ptr<const Node> node_;
};

Expr parse(std::string_view source, std::span<const std::string> declared_vars);
Expr parse(std::string_view source, std::initializer_list<std::string> declared_vars);

/// Fully parenthesized rendering that reparses to an identical tree.
std::string to_string(const Expr& e);
std::set<std::string> free_vars(const Expr& e);
const char* function_name(Function fn);

using JetEnv = std::map<std::string, Jet, std::less<>>;

/// Value and partials of the expression; every free variable must be bound in env.
Jet eval_jet(const Expr& e, const JetEnv& env);
double eval(const Expr& e, const std::map<std::string, double, std::less<>>& env);

}  // namespace cpq
