#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "cpq/errors.hpp"
#include "cpq/separation.hpp"

using namespace cpq;

namespace {

const std::vector<double> kGrid{-1.0, 1.5, 4.0, 7.0, 10.0};

struct Case {
    std::shared_ptr<const Structure> owner;
    const Structure& s;
    SeparationProblem prob;
    Ansatz psi;
};

// omega fixed, f = rho^2 on the eigenvalue coordinates and 0.7 on each block
Case build(const std::string& name, bool sine = false) {
    auto owner = std::make_shared<const Structure>(builtin_spec(name));
    Case out{owner, *owner, {}, {}};
    const Structure& s = *owner;
    const int r = s.r();
    out.prob.structure = owner.get();
    Rng rng(1);
    for (int q = 0; q < r; ++q) out.prob.omega.push_back(0.3 + 0.4 * q);
    for (int k = 0; k < r; ++k) out.prob.f.push_back("rho^2");
    std::vector<double> constants, values;
    for (std::size_t b = 0; b < s.spec().blocks.size(); ++b) {
        out.prob.f.push_back("0.7");
        const double B = block_field(out.prob, b, s.sample(rng));
        BlockFactor Y{BlockFactor::Kind::Plane, 0.5, 1.2, 0.0};
        if (std::abs(B) > 1e-12) Y = {BlockFactor::Kind::Landau, 0.3, 0.0, B};
        else if (sine) Y = {BlockFactor::Kind::Sine, 1.1, 0.8, 0.0};
        out.psi.blocks.push_back(Y);
        constants.push_back(s.spec().blocks[b].c);
        values.push_back(block_lambda_value(out.prob, b, Y, 0.7));
    }
    std::vector<double> high;
    for (int k = 0; k < r; ++k) high.push_back(0.2 - 0.3 * k);
    out.prob.lambda_tilde = lambda_tilde_fit(constants, values, high);
    for (int k = 0; k < r; ++k) {
        const auto& rg = s.range(k);
        out.psi.phi.push_back(integrate_ode(out.prob, k, rg[0], rg[1], 1.0, 0.2, (rg[1] - rg[0]) / 1000.0));
    }
    return out;
}

std::vector<std::vector<double>> points(const Structure& s, int n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::vector<double>> out;
    for (int i = 0; i < n; ++i) out.push_back(s.sample(rng));
    return out;
}

}  // namespace

TEST(Separation, LambdaFitHitsBlockValues) {
    const std::vector<double> c{1.0, 3.0}, v{2.0, -1.0}, high{0.5, 0.25};
    const auto lt = lambda_tilde_fit(c, v, high);
    ASSERT_EQ(lt.size(), 4u);
    EXPECT_NEAR(polyval(lt, 1.0), 2.0, 1e-13);
    EXPECT_NEAR(polyval(lt, 3.0), -1.0, 1e-13);
    EXPECT_DOUBLE_EQ(lt[2], 0.5);
    EXPECT_DOUBLE_EQ(lt[3], 0.25);
    EXPECT_DOUBLE_EQ(polyval(std::vector<double>{1.0, 2.0, 3.0}, 2.0), 17.0);
}

TEST(Separation, LEigenvalueVanishesAtBlockConstant) {
    const Case st = build("dim6_one_block");
    EXPECT_NEAR(l_eigenvalue(st.prob, 5.0), 0.0, 1e-14);
    EXPECT_GT(std::abs(l_eigenvalue(st.prob, 1.5)), 1e-3);
    EXPECT_EQ(lambda_coefficients(st.prob).size(), 3u);
}

TEST(Separation, FrameAndInvariantRoutesAgree) {
    for (const char* n : {"dim4_two_eigen", "dim6_one_block", "flat_trivial"}) {
        const Structure s(builtin_spec(n));
        const auto battery = test_battery(s.dim(), phase_coordinates(s), 11);
        for (const auto& x : points(s, 5, 2))
            for (double v : kGrid)
                for (const auto& tf : battery) EXPECT_LT(normal_coords_operator(s, x, v, tf).residual.relative(), 1e-8) << n << " " << tf.name;
    }
}

TEST(Separation, OdeIsSolvedToFourthOrder) {
    for (const char* n : {"dim4_two_eigen", "dim6_one_block"}) {
        const Case st = build(n);
        for (int k = 0; k < st.s.r(); ++k) {
            const OdeGrid& g = st.psi.phi[static_cast<std::size_t>(k)];
            for (std::size_t i = 2; i + 2 < g.phi.size(); i += 7) EXPECT_LT(separated_ode_residual(st.prob, k, g, i).relative(), 1e-6) << n;
            const auto& rg = st.s.range(k);
            const double order = convergence_order(st.prob, k, rg[0], rg[1], 1.0, 0.2, (rg[1] - rg[0]) / 20.0);
            EXPECT_NEAR(order, 4.0, 0.2) << n << " k=" << k;
        }
    }
}

TEST(Separation, OdeCoefficientsAreConsistent) {
    const Case st = build("dim4_two_eigen");
    const double h = 1e-5, chi = 2.4;
    const double dp = (ode_coefficients(st.prob, 0, chi + h).p - ode_coefficients(st.prob, 0, chi - h).p) / (2 * h);
    EXPECT_NEAR(ode_coefficients(st.prob, 0, chi).dp, dp, 1e-7 * std::max(1.0, std::abs(dp)));
}

TEST(Separation, InterpolationIsExactOnQuartics) {
    OdeGrid g;
    g.a = -1.0;
    g.h = 0.1;
    auto f = [](double x) { return x * x * x * x - 2 * x + 1; };
    auto df = [](double x) { return 4 * x * x * x - 2; };
    for (int i = 0; i <= 20; ++i) {
        const double x = g.a + g.h * i;
        g.phi.push_back(f(x));
        g.dphi.push_back(df(x));
    }
    for (double x : {-0.97, -0.33, 0.05, 0.71, 0.999}) {
        const auto v = interpolate(g, x);
        EXPECT_NEAR(v[0], f(x), 1e-12);
        EXPECT_NEAR(v[1], df(x), 1e-10);
        EXPECT_NEAR(v[2], 12 * x * x, 1e-8);
    }
}

TEST(Separation, IntegrationRefusesSingularInterval) {
    const Case st = build("dim4_two_eigen");
    // x1 running into the range of x2 makes the leading coefficient vanish
    EXPECT_THROW(integrate_ode(st.prob, 0, 0.5, 2.5, 1.0, 0.0, 1e-3), SingularError);
}

TEST(Separation, LandauBlockSolvesMagneticEquation) {
    const Case st = build("dim6_one_block");
    ASSERT_EQ(st.psi.blocks.size(), 1u);
    const BlockFactor& Y = st.psi.blocks[0];
    EXPECT_EQ(Y.kind, BlockFactor::Kind::Landau);
    EXPECT_NEAR(Y.B, -5 * st.prob.omega[0] + st.prob.omega[1], 1e-12);
    EXPECT_DOUBLE_EQ(Y.mu(), std::abs(Y.B));
    for (const auto& x : points(st.s, 20, 3)) EXPECT_LT(separated_pde_residual(st.prob, 0, Y, x).relative(), 1e-8);
    BlockFactor wrong = Y;
    wrong.B *= 1.5;
    EXPECT_GT(separated_pde_residual(st.prob, 0, wrong, points(st.s, 1, 3)[0]).relative(), 1e-3);
}

TEST(Separation, SeparatedFunctionsAreJointEigenfunctions) {
    for (const char* n : {"dim4_two_eigen", "dim6_one_block"}) {
        const Case st = build(n);
        const EigenResiduals e = eigen_residual(st.prob, st.psi, kGrid, points(st.s, 10, 4));
        EXPECT_LT(e.Q.relative(), 1e-5) << n;
        EXPECT_LT(e.L.relative(), 1e-8) << n;
    }
}

TEST(Separation, FlatBlocksWithPlaneAndSineWaves) {
    for (bool sine : {false, true}) {
        const Case st = build("flat_trivial", sine);
        const EigenResiduals e = eigen_residual(st.prob, st.psi, kGrid, points(st.s, 10, 5));
        EXPECT_LT(e.Q.relative(), 1e-10) << sine;
        EXPECT_LT(e.L.relative(), 1e-10) << sine;
    }
}

TEST(Separation, CorruptedEigenvalueIsDetected) {
    Case st = build("dim4_two_eigen");
    st.prob.lambda_tilde[0] += 0.1;
    const EigenResiduals e = eigen_residual(st.prob, st.psi, kGrid, points(st.s, 5, 6));
    EXPECT_GT(e.Q.relative(), 1e-3);
}
