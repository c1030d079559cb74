#include <gtest/gtest.h>

#include <cmath>

#include "cpq/errors.hpp"
#include "cpq/structures.hpp"
#include "fd.hpp"

using namespace cpq;
using cpq::testing::fd1;
using cpq::testing::fd2;
using cpq::testing::rel_err;

namespace {

double max_compat(const Structure& s, int n, std::uint64_t seed) {
    Rng rng(seed);
    double worst = 0.0;
    for (int i = 0; i < n; ++i) worst = std::max(worst, check_compatibility(s.evaluate(s.sample(rng), 1)).compat.relative());
    return worst;
}

}  // namespace

TEST(Sampling, SeededStreamsRepeat) {
    Rng a(42), b(42), c(43);
    for (int i = 0; i < 100; ++i) {
        const std::uint64_t x = a.next();
        EXPECT_EQ(x, b.next());
        EXPECT_NE(x, c.next());
    }
    Rng u(1);
    for (int i = 0; i < 1000; ++i) {
        const double v = u.uniform(-2.0, 3.0);
        EXPECT_GE(v, -2.0);
        EXPECT_LT(v, 3.0);
    }
}

TEST(Structures, BuiltinsAreListed) {
    const auto names = builtin_names();
    for (const char* n : {"flat_trivial", "dim4_two_eigen", "dim6_one_block", "liouville2d", "sphere2"})
        EXPECT_NE(std::find(names.begin(), names.end(), n), names.end()) << n;
    EXPECT_THROW(builtin_spec("dim5"), ConfigError);
}

TEST(Structures, NormalFormSatisfiesCompatibility) {
    for (const char* n : {"flat_trivial", "dim4_two_eigen", "dim6_one_block"}) {
        const Structure s(builtin_spec(n));
        EXPECT_LT(max_compat(s, 50, 3), 1e-9) << n;
    }
}

TEST(Structures, ProjectiveBuiltinsSatisfyCompatibility) {
    for (const char* n : {"liouville2d", "sphere2"}) {
        const Structure s(builtin_spec(n));
        EXPECT_EQ(s.geometry(), Geometry::Projective);
        EXPECT_LT(max_compat(s, 50, 4), 1e-9) << n;
    }
}

TEST(Structures, KahlerResiduals) {
    for (const char* n : {"flat_trivial", "dim4_two_eigen", "dim6_one_block"}) {
        const Structure s(builtin_spec(n));
        Rng rng(8);
        for (int i = 0; i < 30; ++i) {
            const KahlerResiduals k = check_kahler(s.evaluate(s.sample(rng), 2));
            for (const Residual* r : {&k.j_squared, &k.hermitian, &k.nabla_j, &k.nabla_omega, &k.d_omega, &k.a_hermitian})
                EXPECT_LT(r->relative(), 1e-9) << n;
        }
    }
}

TEST(Structures, PerturbationBreaksTheEquations) {
    const Structure a(builtin_spec("dim4_two_eigen"), parse_perturbation("A:1e-3"));
    EXPECT_GT(max_compat(a, 10, 3), 1e-5);
    const Structure j(builtin_spec("dim4_two_eigen"), parse_perturbation("J:1e-3"));
    Rng rng(2);
    EXPECT_GT(check_kahler(j.evaluate(j.sample(rng), 2)).j_squared.relative(), 1e-5);
    EXPECT_THROW(parse_perturbation("A"), ConfigError);
    EXPECT_THROW(parse_perturbation("B:1e-3"), ConfigError);
    EXPECT_THROW(parse_perturbation("A:1e-3x"), ConfigError);
}

TEST(Structures, JsonRoundTrip) {
    for (const auto& n : builtin_names()) {
        const nlohmann::json j = spec_to_json(builtin_spec(n));
        EXPECT_EQ(spec_to_json(spec_from_json(j)), j) << n;
    }
}

TEST(Structures, JsonErrorsNamePointer) {
    nlohmann::json j = spec_to_json(builtin_spec("dim6_one_block"));
    j["sigmass"] = j["sigmas"];
    try {
        spec_from_json(j);
        FAIL() << "accepted an unknown key";
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.pointer(), "/sigmass");
    }
    nlohmann::json k = spec_to_json(builtin_spec("dim6_one_block"));
    k["epsilons"] = {1, 2};
    EXPECT_THROW(Structure{spec_from_json(k)}, ConfigError);
    nlohmann::json s = spec_to_json(builtin_spec("dim4_two_eigen"));
    s["sigmas"][0] = "x2";
    EXPECT_THROW(Structure{spec_from_json(s)}, ConfigError);
}

TEST(Structures, EigenvaluesFollowSigmas) {
    const Structure s(builtin_spec("dim6_one_block"));
    Rng rng(5);
    const auto x = s.sample(rng);
    const StructureEval se = s.evaluate(x, 1);
    ASSERT_EQ(se.eigenvalues.size(), 3u);
    EXPECT_DOUBLE_EQ(se.eigenvalues[0].value(), x[0]);
    EXPECT_DOUBLE_EQ(se.eigenvalues[1].value(), x[1]);
    EXPECT_DOUBLE_EQ(se.eigenvalues[2].value(), 5.0);
    EXPECT_EQ(se.multiplicities, (std::vector<int>{2, 2, 2}));
    const EigenDecomposition ed = eigen_decomposition(se);
    EXPECT_LT(ed.eigen_residual, 1e-10);
    EXPECT_LT(ed.j_commutation, 1e-10);
    EXPECT_LT(charpoly_residual(se).relative(), 1e-12);
    EXPECT_LT(lambda_consistency(se).relative(), 1e-12);
    EXPECT_LT(s.alpha_closure_residual(x), 1e-12);
}

TEST(Structures, FrameReproducesMetric) {
    const Structure s(builtin_spec("dim6_one_block"));
    Rng rng(6);
    const auto x = s.sample(rng);
    const NormalFrame f = s.normal_frame(x, 1);
    const StructureEval se = s.evaluate(x, 1);
    const int n = s.dim();
    const Tensor I = matmul(f.T, f.Tinv, 1, 1);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            EXPECT_NEAR(I(a, b).value(), a == b ? 1.0 : 0.0, 1e-13);
            double G = 0.0;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) G += f.Tinv(i, a).value() * f.Tinv(j, b).value() * se.metric.g(i, j).value();
            EXPECT_NEAR(G, f.G(a, b).value(), 1e-12);
        }
}

// frozen from a run of this library: the metric is Ricci-flat while the full curvature is not
TEST(Structures, TwoEigenvalueMetricIsRicciFlatButCurved) {
    const Structure s(builtin_spec("dim4_two_eigen"));
    Rng rng(9);
    double ric = 0.0, rie = 0.0;
    for (int i = 0; i < 20; ++i) {
        const StructureEval se = s.evaluate(s.sample(rng), 2);
        const CurvatureEval c = riemann(se.metric, se.conn);
        ric = std::max(ric, c.ricci.max_abs());
        rie = std::max(rie, c.riemann.max_abs());
    }
    EXPECT_LT(ric, 1e-10);
    EXPECT_GT(rie, 1.0);
}

TEST(Structures, MetricJetsMatchFiniteDifferences) {
    const Structure s(builtin_spec("dim6_one_block"));
    Rng rng(10);
    const auto x0 = s.sample(rng);
    const std::vector<double> x(x0.begin(), x0.end());
    const StructureEval se = s.evaluate(x, 2);
    const int n = s.dim();
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            auto g = [&](const std::vector<double>& y) { return s.evaluate(y, 0).metric.g(a, b).value(); };
            auto A = [&](const std::vector<double>& y) { return s.evaluate(y, 0).A(a, b).value(); };
            for (int i = 0; i < n; ++i) {
                std::vector<int> e(static_cast<std::size_t>(n), 0);
                e[static_cast<std::size_t>(i)] = 1;
                EXPECT_LT(rel_err(partial(se.metric.g(a, b), MultiIndex(e)), fd1(g, x, i, 1e-5)), 1e-6);
                EXPECT_LT(rel_err(partial(se.A(a, b), MultiIndex(e)), fd1(A, x, i, 1e-5)), 1e-6);
                for (int j = i; j < n; ++j) {
                    std::vector<int> e2 = e;
                    e2[static_cast<std::size_t>(j)] += 1;
                    EXPECT_LT(rel_err(partial(se.metric.g(a, b), MultiIndex(e2)), fd2(g, x, i, j, 1e-4)), 1e-5);
                }
            }
        }
}

TEST(Structures, SamplesStayInTheBox) {
    const Structure s(builtin_spec("dim6_one_block"));
    Rng rng(12);
    for (int i = 0; i < 200; ++i) {
        const auto x = s.sample(rng);
        for (int k = 0; k < s.dim(); ++k) {
            EXPECT_GE(x[static_cast<std::size_t>(k)], s.range(k)[0]);
            EXPECT_LE(x[static_cast<std::size_t>(k)], s.range(k)[1]);
        }
    }
}
