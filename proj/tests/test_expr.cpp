#include <gtest/gtest.h>

#include <cmath>

#include "cpq/errors.hpp"
#include "cpq/expr.hpp"
#include "cpq/sampling.hpp"

using namespace cpq;

namespace {

const std::vector<std::string> kVars{"x", "x1", "x2", "y"};

Expr P(std::string_view s) { return parse(s, std::span<const std::string>(kVars)); }

std::size_t error_offset(std::string_view s) {
    try {
        P(s);
    } catch (const ParseError& e) {
        return e.offset();
    }
    ADD_FAILURE() << "no error for " << s;
    return 0;
}

}  // namespace

TEST(Expr, GrammarShape) {
    const Expr e = P("x1^2 + 3*x2");
    EXPECT_EQ(e, Expr::binary(NodeKind::Add, Expr::binary(NodeKind::Pow, Expr::variable("x1"), Expr::constant(2)),
                              Expr::binary(NodeKind::Mul, Expr::constant(3), Expr::variable("x2"))));
}

TEST(Expr, UnaryMinusBindsLooserThanPower) {
    EXPECT_EQ(P("-x1^2"), Expr::neg(Expr::binary(NodeKind::Pow, Expr::variable("x1"), Expr::constant(2))));
    EXPECT_DOUBLE_EQ(eval(P("-x^2"), {{"x", 3.0}}), -9.0);
}

TEST(Expr, PowerIsRightAssociative) {
    EXPECT_DOUBLE_EQ(eval(P("2^3^2"), {}), 512.0);
    EXPECT_DOUBLE_EQ(eval(P("2^-1"), {}), 0.5);
    EXPECT_DOUBLE_EQ(eval(P("8/2/2"), {}), 2.0);
    EXPECT_DOUBLE_EQ(eval(P("1-2-3"), {}), -4.0);
}

TEST(Expr, ErrorsCarryPositions) {
    EXPECT_EQ(error_offset("x1 +"), 4u);
    EXPECT_EQ(error_offset("x1 $ 2"), 3u);
    EXPECT_EQ(error_offset("(x1 + 2"), 7u);
    EXPECT_EQ(error_offset("x1 + z"), 5u);
    EXPECT_EQ(error_offset("sin x"), 4u);
    EXPECT_EQ(error_offset("1e+"), 0u);
    EXPECT_THROW(P(""), ParseError);
    EXPECT_THROW(P("x1 x2"), ParseError);
}

TEST(Expr, TokensPartitionTheInput) {
    const std::string src = "sin(x1)*2.5e-1 + (x2)";
    const auto toks = tokenize(src);
    std::size_t last_end = 0;
    for (const auto& t : toks) {
        EXPECT_GE(t.offset, last_end);
        EXPECT_EQ(src.substr(t.offset, t.length), t.text);
        last_end = t.offset + t.length;
    }
    EXPECT_EQ(toks.size(), 10u);
}

TEST(Expr, RoundTripReparsesIdentically) {
    for (const char* s : {"x1^2 + 3*x2", "-x^2^3", "sqrt(exp(x) + log(2 + y))/(1 - sin(x1)*cos(x2))", "-(-x)", "2.5e-3*x - -y"}) {
        const Expr e = P(s);
        EXPECT_EQ(P(to_string(e)), e) << s << " -> " << to_string(e);
    }
}

TEST(Expr, FreeVariables) {
    EXPECT_EQ(free_vars(P("x1^2 + 3*x2")), (std::set<std::string>{"x1", "x2"}));
    EXPECT_TRUE(free_vars(P("2 + 2")).empty());
    EXPECT_EQ(free_vars(P("sin(x1)*x1")), (std::set<std::string>{"x1"}));
}

TEST(Expr, SineJetIsTaylorSeries) {
    const JetContext& ctx = JetContext::get(1, 3);
    const Jet j = eval_jet(P("sin(x)"), {{"x", lift_var(0, 0.0, ctx)}});
    EXPECT_DOUBLE_EQ(j[0], 0.0);
    EXPECT_DOUBLE_EQ(j[1], 1.0);
    EXPECT_NEAR(j[2], 0.0, 1e-16);
    EXPECT_NEAR(j[3], -1.0 / 6.0, 1e-16);
}

TEST(Expr, BilinearJet) {
    const JetContext& ctx = JetContext::get(2, 2);
    const Jet j = eval_jet(P("x1*x2 + 1"), {{"x1", lift_var(0, 2.0, ctx)}, {"x2", lift_var(1, 3.0, ctx)}});
    EXPECT_DOUBLE_EQ(j.value(), 7.0);
    EXPECT_DOUBLE_EQ(partial(j, MultiIndex({1, 0})), 3.0);
    EXPECT_DOUBLE_EQ(partial(j, MultiIndex({0, 1})), 2.0);
    EXPECT_DOUBLE_EQ(partial(j, MultiIndex({1, 1})), 1.0);
}

TEST(Expr, DomainAndBindingErrors) {
    const JetContext& ctx = JetContext::get(1, 2);
    EXPECT_THROW(eval_jet(P("log(x)"), {{"x", Jet(ctx, -1.0)}}), DomainError);
    EXPECT_THROW(eval_jet(P("x^0.5"), {{"x", Jet(ctx, -1.0)}}), DomainError);
    EXPECT_THROW(eval_jet(P("x + y"), {{"x", Jet(ctx, 1.0)}}), ContextError);
    EXPECT_THROW(eval_jet(P("x + y"), {{"x", Jet(ctx, 1.0)}, {"y", Jet(JetContext::get(1, 3), 1.0)}}), ContextError);
}

TEST(Expr, PolynomialMatchesJetArithmetic) {
    const JetContext& ctx = JetContext::get(2, 4);
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2);
        const Jet x = lift_var(0, a, ctx), y = lift_var(1, b, ctx);
        const Jet direct = 3.0 * powi(x, 3) * y - 2.0 * x * y * y + powi(y, 4) / 7.0 - 1.5;
        const Jet parsed = eval_jet(P("3*x^3*y - 2*x*y^2 + y^4/7 - 1.5"), {{"x", x}, {"y", y}});
        for (std::size_t k = 0; k < ctx.size(); ++k) EXPECT_NEAR(parsed[k], direct[k], 1e-13 * std::max(1.0, std::abs(direct[k])));
    }
}

TEST(Expr, FuzzedInputNeverCrashes) {
    Rng rng(5);
    const std::string alphabet = "x1y2+-*/^().,e sincolgqrtp0123456789$#";
    int parsed = 0, rejected = 0;
    for (int trial = 0; trial < 2000; ++trial) {
        std::string s;
        const int len = 1 + static_cast<int>(rng.next() % 40);
        for (int i = 0; i < len; ++i) s += alphabet[rng.next() % alphabet.size()];
        try {
            P(s);
            ++parsed;
        } catch (const ParseError& e) {
            EXPECT_LE(e.offset(), s.size());
            ++rejected;
        }
    }
    EXPECT_EQ(parsed + rejected, 2000);
    const std::string deep(40000, '(');
    EXPECT_THROW(P(deep + "x"), ParseError);
    std::string big = "x";
    while (big.size() < 60000) big += "+x";
    EXPECT_NO_THROW(P(big));
}
