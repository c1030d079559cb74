#include <gtest/gtest.h>

#include <cmath>

#include "cpq/errors.hpp"
#include "cpq/expr.hpp"
#include "cpq/geometry.hpp"
#include "fd.hpp"

using namespace cpq;
using cpq::testing::fd1;
using cpq::testing::rel_err;

namespace {

const std::vector<std::string> kXYZ{"x", "y", "z"};
// a non-diagonal, non-flat Riemannian metric on a box around the origin
const char* kMetric[3][3] = {{"2 + x^2", "x*y/2", "0.1*z"}, {"x*y/2", "3 + sin(y)", "z*x/4"}, {"0.1*z", "z*x/4", "2.5 + cos(x*z)"}};

Tensor metric_at(std::span<const double> p, const JetContext& ctx) {
    JetEnv env;
    for (int i = 0; i < 3; ++i) env.emplace(kXYZ[static_cast<std::size_t>(i)], lift_var(i, p[static_cast<std::size_t>(i)], ctx));
    Tensor g(3, 0, 2, ctx);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) g(i, j) = eval_jet(parse(kMetric[i][j], std::span<const std::string>(kXYZ)), env);
    return g;
}

double metric_value(const std::vector<double>& p, int i, int j) { return metric_at(p, JetContext::get(3, 0))(i, j).value(); }

/// Christoffel symbols from finite differences of g; independent of the jet path.
double gamma_fd(const std::vector<double>& p, int i, int j, int k, double h = 1e-5) {
    const Tensor g = metric_at(p, JetContext::get(3, 0));
    const MetricEval m = make_metric(g);
    double s = 0.0;
    for (int l = 0; l < 3; ++l) {
        auto gf = [](int a, int b) { return [a, b](const std::vector<double>& y) { return metric_value(y, a, b); }; };
        const double t = fd1(gf(l, j), p, k, h) + fd1(gf(l, k), p, j, h) - fd1(gf(j, k), p, l, h);
        s += 0.5 * m.ginv(i, l).value() * t;
    }
    return s;
}

Tensor sphere_metric(double theta, const JetContext& ctx) {
    const Jet th = lift_var(0, theta, ctx);
    Tensor g(2, 0, 2, ctx);
    g(0, 0) = Jet(ctx, 1.0);
    g(0, 1) = Jet(ctx, 0.0);
    g(1, 0) = Jet(ctx, 0.0);
    g(1, 1) = square(sin(th));
    return g;
}

}  // namespace

TEST(Tensor, IndexingRoundTrip) {
    const JetContext& ctx = JetContext::get(3, 1);
    Tensor t(3, 1, 2, ctx);
    EXPECT_EQ(t.rank(), 3);
    EXPECT_EQ(t.size(), 27u);
    for (std::size_t k = 0; k < t.size(); ++k) EXPECT_EQ(t.flat(t.unflat(k)), k);
    t(1, 2, 0) = Jet(ctx, 5.0);
    EXPECT_DOUBLE_EQ(t[t.flat({1, 2, 0})].value(), 5.0);
    EXPECT_EQ(Tensor(3, 0, 0, ctx).size(), 1u);
}

TEST(Tensor, SymmetricAndAntisymmetricParts) {
    const JetContext& ctx = JetContext::get(3, 0);
    Tensor t(3, 2, 0, ctx);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) t(i, j) = Jet(ctx, 1.0 + i + 10.0 * j);
    const Tensor s = symmetrize(t), a = antisymmetrize(t);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            EXPECT_DOUBLE_EQ(s(i, j).value(), s(j, i).value());
            EXPECT_DOUBLE_EQ(a(i, j).value(), -a(j, i).value());
            EXPECT_NEAR(s(i, j).value() + a(i, j).value(), t(i, j).value(), 1e-14);
        }
}

TEST(Tensor, InverseAndDeterminantJets) {
    const JetContext& ctx = JetContext::get(3, 3);
    const std::vector<double> p{0.3, -0.2, 0.5};
    const Tensor g = metric_at(p, ctx);
    const Tensor gi = invert_matrix_jets(g, 2, 0);
    const Tensor prod = matmul(g, gi, 1, 1);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (std::size_t k = 0; k < ctx.size(); ++k) EXPECT_NEAR(prod(i, j)[k], i == j && k == 0 ? 1.0 : 0.0, 1e-13);
    const Jet d = det_jets(g);
    auto det_value = [](const std::vector<double>& y) { return det_jets(metric_at(y, JetContext::get(3, 0))).value(); };
    for (int i = 0; i < 3; ++i) {
        std::vector<int> e(3, 0);
        e[static_cast<std::size_t>(i)] = 1;
        EXPECT_LT(rel_err(partial(d, MultiIndex(e)), fd1(det_value, p, i, 1e-5)), 1e-6);
    }
    Tensor sing(2, 1, 1, JetContext::get(2, 0));
    for (std::size_t k = 0; k < sing.size(); ++k) sing[k] = Jet(sing.context(), 1.0);
    EXPECT_THROW(invert_matrix_jets(sing, 1, 1), SingularError);
}

TEST(Geometry, FlatMetricHasNoConnection) {
    const JetContext& ctx = JetContext::get(3, 2);
    const MetricEval m = make_metric(identity_matrix(3, ctx, 0, 2));
    const ConnectionEval c = christoffel(m);
    EXPECT_EQ(c.gamma.max_abs(), 0.0);
    EXPECT_EQ(riemann(m, c).riemann.max_abs(), 0.0);
}

TEST(Geometry, ChristoffelMatchesFiniteDifferences) {
    const std::vector<double> p{0.4, 0.1, -0.3};
    const MetricEval m = make_metric(metric_at(p, JetContext::get(3, 2)));
    const ConnectionEval c = christoffel(m);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) EXPECT_LT(rel_err(c.gamma(i, j, k).value(), gamma_fd(p, i, j, k)), 1e-6) << i << j << k;
}

TEST(Geometry, RiemannMatchesChristoffelDerivatives) {
    const std::vector<double> p{0.4, 0.1, -0.3};
    const MetricEval m = make_metric(metric_at(p, JetContext::get(3, 2)));
    const ConnectionEval c = christoffel(m);
    const CurvatureEval R = riemann(m, c);
    auto G = [&](int i, int j, int k) { return c.gamma(i, j, k).value(); };
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k)
                for (int l = 0; l < 3; ++l) {
                    auto gf = [](int a, int b, int cc) { return [=](const std::vector<double>& y) { return gamma_fd(y, a, b, cc, 1e-4); }; };
                    double want = fd1(gf(i, l, j), p, k, 1e-3) - fd1(gf(i, k, j), p, l, 1e-3);
                    for (int s = 0; s < 3; ++s) want += G(i, k, s) * G(s, l, j) - G(i, l, s) * G(s, k, j);
                    EXPECT_LT(rel_err(R.riemann(i, j, k, l).value(), want), 1e-5) << i << j << k << l;
                }
    EXPECT_LT(bianchi_residual(R), 1e-13);
}

TEST(Geometry, UnitSphereCurvature) {
    const double th = 0.8;
    const MetricEval m = make_metric(sphere_metric(th, JetContext::get(2, 2)));
    const ConnectionEval c = christoffel(m);
    EXPECT_NEAR(c.gamma(0, 1, 1).value(), -std::sin(th) * std::cos(th), 1e-14);
    EXPECT_NEAR(c.gamma(1, 0, 1).value(), std::cos(th) / std::sin(th), 1e-14);
    const CurvatureEval R = riemann(m, c);
    EXPECT_NEAR(R.riemann(0, 1, 0, 1).value(), std::sin(th) * std::sin(th), 1e-14);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) EXPECT_NEAR(R.ricci(i, j).value(), m.g(i, j).value(), 1e-14);
}

TEST(Geometry, MetricIsParallel) {
    const std::vector<double> p{-0.2, 0.3, 0.6};
    const MetricEval m = make_metric(metric_at(p, JetContext::get(3, 2)));
    const ConnectionEval c = christoffel(m);
    EXPECT_LT(covariant_derivative(m.g, c).max_abs(), 1e-14);
    EXPECT_LT(covariant_derivative(m.ginv, c).max_abs(), 1e-14);
}

TEST(Geometry, DivergenceIsDensityFormula) {
    const std::vector<double> p{0.2, -0.4, 0.1};
    const JetContext& ctx = JetContext::get(3, 2);
    const MetricEval m = make_metric(metric_at(p, ctx));
    const ConnectionEval c = christoffel(m);
    Tensor V(3, 1, 0, ctx);
    const Jet x = lift_var(0, p[0], ctx), y = lift_var(1, p[1], ctx), z = lift_var(2, p[2], ctx);
    V(0) = x * y;
    V(1) = sin(z) + 1.0;
    V(2) = x * x - z;
    const Jet sg = sqrt(m.det);
    Jet want;
    for (int i = 0; i < 3; ++i) want += derivative(sg * V(i), i);
    EXPECT_NEAR(divergence(V, c).value(), (want / sg).value(), 1e-13);
    const Tensor df = gradient(x * y * z);
    EXPECT_DOUBLE_EQ(df(2).value(), p[0] * p[1]);
    EXPECT_EQ(partial_derivative(V).rank(), 2);
}

TEST(Geometry, DegenerateMetricRejected) {
    const JetContext& ctx = JetContext::get(2, 1);
    Tensor g(2, 0, 2, ctx);
    for (std::size_t k = 0; k < g.size(); ++k) g[k] = Jet(ctx, 1.0);
    EXPECT_THROW(make_metric(g), SingularError);
}
