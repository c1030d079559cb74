#include <gtest/gtest.h>

#include <cmath>

#include "cpq/errors.hpp"
#include "cpq/integrals.hpp"
#include "fd.hpp"

using namespace cpq;
using cpq::testing::fd1;
using cpq::testing::rel_err;

namespace {

const std::vector<double> kGrid{-1.0, 1.5, 4.0, 7.0, 10.0};

std::vector<double> momenta(Rng& rng, int n) {
    std::vector<double> p(static_cast<std::size_t>(n));
    for (double& v : p) v = rng.uniform(-1.0, 1.0);
    return p;
}

}  // namespace

TEST(Integrals, SignedRootOfCharacteristicPolynomial) {
    const Structure s(builtin_spec("dim6_one_block"));
    Rng rng(1);
    const auto x = s.sample(rng);
    const StructureEval se = s.evaluate(x, 1);
    for (double t : kGrid) EXPECT_NEAR(sqrtdet_factor(se, t).value(), (t - x[0]) * (t - x[1]) * (t - 5.0), 1e-12);
    EXPECT_EQ(killing_degree(se), 2);
}

TEST(Integrals, KillingFamilyIsPolynomialInT) {
    const Structure s(builtin_spec("dim4_two_eigen"));
    Rng rng(2);
    const StructureEval se = s.evaluate(s.sample(rng), 1);
    const std::vector<Tensor> c = killing_coefficients(se);
    ASSERT_EQ(c.size(), 2u);
    for (double t : kGrid) {
        const Tensor direct = killing_tensor_product(se, t);
        const Tensor viaCoeff = c[0] + c[1] * t;
        EXPECT_LT((direct - viaCoeff).max_abs(), 1e-9 * std::max(1.0, direct.max_abs()));
    }
    // on the spectrum the product formula is singular; the coefficient path is not
    const double rho = se.eigenvalues[0].value();
    const Tensor K = killing_tensor_K(se, rho);
    EXPECT_TRUE(std::isfinite(K.max_abs()));
    EXPECT_LT((K - (c[0] + c[1] * rho)).max_abs(), 1e-12);
    EXPECT_THROW(t_coefficients([&](double t) { return killing_tensor_product(se, t) * (t * t); }, 1, interpolation_nodes(se, 4)),
                 DegreeOverflowError);
}

TEST(Integrals, KillingEquations) {
    for (const char* n : {"dim4_two_eigen", "dim6_one_block", "liouville2d", "sphere2"}) {
        const Structure s(builtin_spec(n));
        Rng rng(3);
        for (int i = 0; i < 20; ++i) {
            const StructureEval se = s.evaluate(s.sample(rng), 2);
            for (double t : {-1.0, 0.2, 1.5, 10.0}) {
                EXPECT_LT(killing_equation_residual(se, t).relative(), 1e-8) << n << " t=" << t;
                if (s.geometry() == Geometry::CProjective) {
                    const Tensor V = killing_vector_V(se, t);
                    EXPECT_LT(killing_vector_residual(V, se).relative(), 1e-8) << n;
                    EXPECT_LT(divergence_residual(V, se).relative(), 1e-8) << n;
                }
            }
        }
    }
}

TEST(Integrals, RandomTensorIsNotKilling) {
    const Structure s(builtin_spec("dim4_two_eigen"));
    Rng rng(4);
    const StructureEval se = s.evaluate(s.sample(rng), 2);
    Tensor K = killing_tensor_K(se, 1.5);
    const Jet x1 = lift_var(0, se.point[0], se.A.context());
    K(0, 0) = K(0, 0) + x1 * x1;
    EXPECT_GT(killing_tensor_residual(K, se).relative(), 1e-3);
}

TEST(Integrals, CanonicalBracketByHand) {
    // F = p1^2, G = x1 p1 on the plane: {F, G} = 2 p1^2
    const JetContext& ctx = JetContext::get(2, 2);
    Tensor K(2, 2, 0, ctx), V(2, 1, 0, ctx);
    for (std::size_t k = 0; k < K.size(); ++k) K[k] = Jet(ctx, 0.0);
    K(0, 0) = Jet(ctx, 1.0);
    V(0) = lift_var(0, 0.7, ctx);
    V(1) = Jet(ctx, 0.0);
    const std::vector<double> p{0.3, -0.8};
    const Residual r = poisson_bracket(Observable::quadratic(K), Observable::vector(V), p);
    EXPECT_NEAR(r.value, 2 * 0.3 * 0.3, 1e-15);
    const Observable b = poisson_observable(Observable::quadratic(K), Observable::vector(V));
    EXPECT_NEAR(std::abs(b.value(p)), 2 * 0.3 * 0.3, 1e-15);
    EXPECT_GE(r.scale, r.value);
}

TEST(Integrals, IntegralsPoissonCommute) {
    for (const char* n : {"dim4_two_eigen", "dim6_one_block"}) {
        const Structure s(builtin_spec(n));
        Rng rng(5);
        for (int i = 0; i < 20; ++i) {
            const StructureEval se = s.evaluate(s.sample(rng), 2);
            const auto p = momenta(rng, se.dim);
            for (double v : kGrid)
                for (double w : kGrid) {
                    EXPECT_LT(poisson_bracket(integral_I(se, v), integral_I(se, w), p).relative(), 1e-9) << n;
                    EXPECT_LT(poisson_bracket(integral_I(se, v), integral_L(se, w), p).relative(), 1e-9) << n;
                    EXPECT_LT(poisson_bracket(integral_L(se, v), integral_L(se, w), p).relative(), 1e-9) << n;
                }
        }
    }
}

TEST(Integrals, HamiltonianBelongsToTheFamily) {
    // the top coefficient of I(t) is the geodesic Hamiltonian g^{ij} p_i p_j
    const Structure s(builtin_spec("dim4_two_eigen"));
    Rng rng(6);
    const StructureEval se = s.evaluate(s.sample(rng), 1);
    const std::vector<Tensor> c = killing_coefficients(se);
    EXPECT_LT((c.back() - se.metric.ginv).max_abs(), 1e-10);
}

TEST(Integrals, KillingVectorIsJGradient) {
    const Structure s(builtin_spec("dim4_two_eigen"));
    Rng rng(7);
    const auto x0 = s.sample(rng);
    const std::vector<double> x(x0.begin(), x0.end());
    const StructureEval se = s.evaluate(x, 1);
    const double t = 4.0;
    const Tensor V = killing_vector_V(se, t);
    auto sd = [&](const std::vector<double>& y) { return sqrtdet_factor(s.evaluate(y, 0), t).value(); };
    for (int j = 0; j < se.dim; ++j) {
        double want = 0.0;
        for (int k = 0; k < se.dim; ++k)
            for (int i = 0; i < se.dim; ++i) want += se.J(j, k).value() * se.metric.ginv(k, i).value() * fd1(sd, x, i, 1e-5);
        EXPECT_LT(rel_err(V(j).value(), want), 1e-6);
    }
}

TEST(Integrals, AdmissiblePotentials) {
    for (const char* n : {"dim4_two_eigen", "dim6_one_block"}) {
        const Structure s(builtin_spec(n));
        const std::size_t count = s.spec().blocks.size() + static_cast<std::size_t>(s.r());
        for (const char* f : {"rho^2", "rho^3"}) {
            const Potential pot(s, std::vector<std::string>(count, f));
            Rng rng(8);
            for (int i = 0; i < 10; ++i) {
                const StructureEval se = s.evaluate(s.sample(rng), 2);
                for (double v : {-1.0, 4.0})
                    for (double w : {1.5, 10.0}) {
                        const PotentialResiduals r = potential_condition_residuals(se, pot, v, w);
                        EXPECT_LT(r.exactness.relative(), 1e-8) << n << " " << f;
                        EXPECT_LT(r.eigenform.relative(), 1e-8) << n << " " << f;
                        EXPECT_LT(r.killing.relative(), 1e-8) << n << " " << f;
                        const auto p = momenta(rng, se.dim);
                        const Observable Fv = integral_I(se, v) + Observable::scalar(pot.U(se, v));
                        const Observable Fw = integral_I(se, w) + Observable::scalar(pot.U(se, w));
                        EXPECT_LT(poisson_bracket(Fv, Fw, p).relative(), 1e-7);
                        EXPECT_LT(poisson_bracket(Fv, integral_L(se, w), p).relative(), 1e-7);
                    }
            }
        }
    }
}

TEST(Integrals, InadmissiblePotentialsAreDetected) {
    const Structure s(builtin_spec("dim4_two_eigen"));
    Rng rng(9);
    const StructureEval se = s.evaluate(s.sample(rng), 2);
    // f1 depending on the other eigenvalue's coordinate breaks the eigenform and exactness conditions
    const PotentialResiduals r = potential_condition_residuals(se, Potential(s, {"x2", "rho^2"}), -1.0, 4.0);
    EXPECT_GT(r.eigenform.relative(), 1e-3);
    EXPECT_GT(r.exactness.relative(), 1e-3);
    // f1 depending on t1 breaks invariance along V
    const PotentialResiduals q = potential_condition_residuals(se, Potential(s, {"t1", "rho^2"}), -1.0, 4.0);
    EXPECT_GT(q.killing.relative(), 1e-3);
}
