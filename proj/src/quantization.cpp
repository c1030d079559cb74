#include "cpq/quantization.hpp"

#include <algorithm>
#include <cmath>

namespace cpq {

namespace {

using cd = std::complex<double>;
constexpr cd I1{0.0, 1.0};

/// Real part of the operator for degree d, without the constant prefactor.
Jet raw_apply(int d, const Tensor& c, const ConnectionEval& conn, const Jet& g) {
    const int n = c.dim();
    if (d == 0) return c[0] * g;
    const Tensor dg = gradient(g);
    if (d == 1) {
        Jet s;
        for (int j = 0; j < n; ++j) s += c(j) * dg(j);
        return 2.0 * s + divergence(c, conn) * g;
    }
    if (d == 2) {
        Tensor W(n, 1, 0, dg.context());
        for (int j = 0; j < n; ++j) {
            Jet acc;
            for (int k = 0; k < n; ++k) acc += c(j, k) * dg(k);
            W(j) = acc;
        }
        return divergence(W, conn);
    }
    // degree 3
    const Tensor H = hessian(g, conn);
    Tensor W(n, 1, 0, H.context());
    Tensor Y(n, 2, 0, dg.context());
    for (int a = 0; a < n; ++a) {
        Jet acc;
        for (int b = 0; b < n; ++b) {
            Jet y;
            for (int cc = 0; cc < n; ++cc) {
                acc += c(a, b, cc) * H(b, cc);
                y += c(a, b, cc) * dg(cc);
            }
            Y(a, b) = y;
        }
        W(a) = acc;
    }
    const Tensor dY = covariant_derivative(Y, conn);
    Tensor Z(n, 1, 0, dY.context());
    for (int a = 0; a < n; ++a) {
        Jet acc;
        for (int b = 0; b < n; ++b) acc += dY(a, b, b);
        Z(a) = acc;
    }
    return divergence(W, conn) + divergence(Z, conn);
}

cd prefactor(int d) {
    switch (d) {
        case 0: return 1.0;
        case 1: return 0.5 * I1;
        case 2: return -1.0;
        default: return -0.5 * I1;
    }
}

std::vector<double> vals(const Tensor& t) { return t.values(); }

}  // namespace

Tensor hessian(const Jet& f, const ConnectionEval& conn) { return covariant_derivative(gradient(f), conn); }

DiffOperator quantize(const Observable& obs, const ConnectionEval& conn) {
    if (obs.degree() > 3) throw DegreeOverflowError("quantization is defined up to degree 3");
    return DiffOperator{obs, conn};
}

CJet apply_operator(const DiffOperator& op, const CJet& f) {
    const int deg = op.symbol.degree();
    if (f.order() < std::max(deg, 0)) throw ContextError("test function jet order too low for this operator");
    const Jet gr = real_part(f), gi = imag_part(f);
    CJet out;
    for (int d = 0; d <= deg; ++d) {
        if (!op.symbol.has(d)) continue;
        const Tensor& c = op.symbol.part(d);
        const CJet term = CJet(raw_apply(d, c, op.conn, gr)) + I1 * CJet(raw_apply(d, c, op.conn, gi));
        out += prefactor(d) * term;
    }
    if (!out.valid()) out = CJet(f.context());
    return out;
}

CJet commutator_apply(const DiffOperator& op1, const DiffOperator& op2, const CJet& f) {
    return apply_operator(op1, apply_operator(op2, f)) - apply_operator(op2, apply_operator(op1, f));
}

Residual commutator_residual(const DiffOperator& op1, const DiffOperator& op2, const CJet& f) {
    const cd a = apply_operator(op1, apply_operator(op2, f)).value();
    const cd b = apply_operator(op2, apply_operator(op1, f)).value();
    // floored by the size of f itself: when both orderings vanish the ratio alone is noise
    double fs = 0.0;
    for (const cd& c : f.coeffs()) fs = std::max(fs, std::abs(c));
    return Residual{std::abs(a - b), std::max({std::abs(a), std::abs(b), fs})};
}

GeometryEval geometry_of(const StructureEval& se) {
    GeometryEval g{se.metric, se.conn, {}};
    g.curv = riemann(se.metric, se.conn);
    return g;
}

namespace {

struct BTerms {
    Tensor t1pq, t1qp, t2pq, t2qp, t3, t4;
};

/// P^{lj} nabla_l nabla_m Q^{km}
Tensor term1(const Tensor& P, const Tensor& Q, const ConnectionEval& conn) {
    const int n = P.dim();
    const Tensor dQ = covariant_derivative(Q, conn);  // (k, m, l)
    Tensor div(n, 1, 0, dQ.context());
    for (int k = 0; k < n; ++k) {
        Jet acc;
        for (int m = 0; m < n; ++m) acc += dQ(k, m, m);
        div(k) = acc;
    }
    const Tensor ddiv = covariant_derivative(div, conn);  // (k, l)
    Tensor out(n, 2, 0, ddiv.context());
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
            Jet acc;
            for (int l = 0; l < n; ++l) acc += P(l, j) * ddiv(k, l);
            out(j, k) = acc;
        }
    return out;
}

/// P^{lj} R^k_{mnl} Q^{mn}
Tensor term2(const Tensor& P, const Tensor& Q, const Tensor& R) {
    const int n = P.dim();
    Tensor RQ(n, 1, 1, R.context());  // (k, l) = R^k_{mnl} Q^{mn}
    for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
            Jet acc;
            for (int m = 0; m < n; ++m)
                for (int q = 0; q < n; ++q) acc += R(k, m, q, l) * Q(m, q);
            RQ(k, l) = acc;
        }
    Tensor out(n, 2, 0, RQ.context());
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
            Jet acc;
            for (int l = 0; l < n; ++l) acc += P(l, j) * RQ(k, l);
            out(j, k) = acc;
        }
    return out;
}

BTerms b_terms(const Tensor& P, const Tensor& Q, const GeometryEval& geo, bool curvature) {
    const int n = P.dim();
    BTerms b;
    b.t1pq = term1(P, Q, geo.conn);
    b.t1qp = term1(Q, P, geo.conn);
    const Tensor dP = covariant_derivative(P, geo.conn);  // (m, j, l) = nabla_l P^{mj}
    const Tensor dQ = covariant_derivative(Q, geo.conn);  // (k, l, m) = nabla_m Q^{kl}
    b.t3 = Tensor(n, 2, 0, dP.context());
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
            Jet acc;
            for (int l = 0; l < n; ++l)
                for (int m = 0; m < n; ++m) acc += dP(m, j, l) * dQ(k, l, m);
            b.t3(j, k) = acc;
        }
    if (curvature) {
        b.t2pq = term2(P, Q, geo.curv.riemann);
        b.t2qp = term2(Q, P, geo.curv.riemann);
        const Tensor& Ric = geo.curv.ricci;
        b.t4 = Tensor(n, 2, 0, Ric.context());
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                Jet acc;
                for (int l = 0; l < n; ++l)
                    for (int m = 0; m < n; ++m) acc += P(l, j) * Ric(l, m) * Q(k, m);
                b.t4(j, k) = acc;
            }
    }
    return b;
}

Tensor div_first(const Tensor& B, const ConnectionEval& conn) {
    const int n = B.dim();
    const Tensor dB = covariant_derivative(B, conn);  // (j, k, l)
    Tensor out(n, 1, 0, dB.context());
    for (int k = 0; k < n; ++k) {
        Jet acc;
        for (int j = 0; j < n; ++j) acc += dB(j, k, j);
        out(k) = acc;
    }
    return out;
}

BTensorEval assemble(const BTerms& b, const ConnectionEval& conn, bool curvature) {
    Tensor sum = b.t1pq - b.t1qp - b.t3;
    if (curvature) sum = sum + b.t2pq - b.t2qp - b.t4;
    BTensorEval out;
    out.B = antisymmetrize(sum);
    out.divB = div_first(out.B, conn);
    return out;
}

}  // namespace

BTensorEval b_tensor(const Tensor& P, const Tensor& Q, const GeometryEval& geo) {
    return assemble(b_terms(P, Q, geo, true), geo.conn, true);
}

BTensorEval b_tensor_reduced(const Tensor& P, const Tensor& Q, const GeometryEval& geo) {
    return assemble(b_terms(P, Q, geo, false), geo.conn, false);
}

MasterIdentity commutator_formula_check(const Tensor& P, const Tensor& Q, const CJet& f, const GeometryEval& geo) {
    const Observable p = Observable::quadratic(P), q = Observable::quadratic(Q);
    const DiffOperator Ph = quantize(p, geo.conn), Qh = quantize(q, geo.conn);
    const cd pq = apply_operator(Ph, apply_operator(Qh, f)).value();
    const cd qp = apply_operator(Qh, apply_operator(Ph, f)).value();
    MasterIdentity out;
    out.lhs = pq - qp;
    out.bracket = I1 * apply_operator(quantize(poisson_observable(p, q), geo.conn), f).value();
    const BTensorEval B = b_tensor(P, Q, geo);
    const Jet fr = real_part(f), fi = imag_part(f);
    for (int k = 0; k < P.dim(); ++k) out.b_term += B.divB(k).value() * cd(derivative(fr, k).value(), derivative(fi, k).value());
    out.residual.value = std::abs(out.lhs - out.bracket - kMasterCoefficient * out.b_term);
    out.residual.scale = std::max({std::abs(pq), std::abs(qp), std::abs(out.bracket), std::abs(out.b_term)});
    return out;
}

DiffOperator operator_I(const StructureEval& se, double t) { return quantize(integral_I(se, t), se.conn); }

DiffOperator operator_L(const StructureEval& se, double t) { return quantize(integral_L(se, t), se.conn); }

DiffOperator operator_Q(const StructureEval& se, const Potential& pot, double t) {
    return quantize(integral_I(se, t) + Observable::scalar(pot.U(se, t)), se.conn);
}

MixedResiduals mixed_IL_commutator_check(const StructureEval& se, const Tensor& K, const Tensor& V, const CJet& f) {
    MixedResiduals out;
    out.commutator = commutator_residual(quantize(Observable::quadratic(K), se.conn), quantize(Observable::vector(V), se.conn), f);
    const Tensor lie = lie_derivative(V, K);
    out.lie.value = lie.max_abs();
    out.lie.scale = std::max({1.0, V.max_abs() * partial_derivative(K).max_abs() * se.dim,
                              partial_derivative(V).max_abs() * K.max_abs() * se.dim});
    out.divergence = divergence_residual(V, se);
    return out;
}

MixedResiduals mixed_IL_commutator_check(const StructureEval& se, double t, double s, const CJet& f) {
    return mixed_IL_commutator_check(se, killing_tensor_K(se, t), killing_vector_V(se, s), f);
}

Residual curvature_A_residual(const StructureEval& se, const Tensor& S, const CurvatureEval& curv) {
    const int n = se.dim;
    const std::vector<double> g = vals(se.metric.g), A = vals(se.A), R = vals(curv.riemann), s = vals(S);
    auto at2 = [n](const std::vector<double>& v, int i, int j) { return v[static_cast<std::size_t>(i * n + j)]; };
    auto at4 = [n](const std::vector<double>& v, int i, int j, int k, int l) {
        return v[static_cast<std::size_t>(((i * n + j) * n + k) * n + l)];
    };
    std::vector<double> Al(static_cast<std::size_t>(n * n), 0.0);  // A_{rl}
    for (int r = 0; r < n; ++r)
        for (int l = 0; l < n; ++l)
            for (int a = 0; a < n; ++a) Al[static_cast<std::size_t>(r * n + l)] += at2(g, r, a) * at2(A, a, l);
    // X(k, l) = R^r_{ijk} A_{rl} S^{ij}
    Residual out;
    std::vector<double> X(static_cast<std::size_t>(n * n), 0.0), Xa(static_cast<std::size_t>(n * n), 0.0);
    for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
            double x = 0.0, xa = 0.0;
            for (int r = 0; r < n; ++r)
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < n; ++j) {
                        const double term = at4(R, r, i, j, k) * at2(Al, r, l) * at2(s, i, j);
                        x += term;
                        xa += std::abs(term);
                    }
            X[static_cast<std::size_t>(k * n + l)] = x;
            Xa[static_cast<std::size_t>(k * n + l)] = xa;
        }
    for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
            out.value = std::max(out.value, std::abs(at2(X, k, l) - at2(X, l, k)));
            out.scale = std::max(out.scale, at2(Xa, k, l));
        }
    out.scale = std::max(out.scale, 1.0);
    return out;
}

LemmaResiduals lemma_diagnostics(const StructureEval& se, double v, double w, const Tensor* S) {
    const int n = se.dim;
    const GeometryEval geo = geometry_of(se);
    const Tensor Kv = killing_tensor_K(se, v), Kw = killing_tensor_K(se, w);
    LemmaResiduals out;
    out.hessian = hessian_selfadjointness(se);
    out.curvature_A = curvature_A_residual(se, S ? *S : Kw, geo.curv);

    const std::vector<double> R = vals(geo.curv.riemann), kv = vals(Kv), kw = vals(Kw);
    auto at2 = [n](const std::vector<double>& x, int i, int j) { return x[static_cast<std::size_t>(i * n + j)]; };
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
            double x = 0.0, sc = 0.0;
            for (int l = 0; l < n; ++l)
                for (int m = 0; m < n; ++m)
                    for (int q = 0; q < n; ++q) {
                        const double a = at2(kv, l, j) * R[static_cast<std::size_t>(((k * n + m) * n + q) * n + l)] * at2(kw, m, q);
                        const double b = at2(kv, l, k) * R[static_cast<std::size_t>(((j * n + m) * n + q) * n + l)] * at2(kw, m, q);
                        x += a - b;
                        sc += std::abs(a) + std::abs(b);
                    }
            out.curvature_K.value = std::max(out.curvature_K.value, std::abs(x));
            out.curvature_K.scale = std::max(out.curvature_K.scale, sc);
        }

    const Tensor M = invert_matrix_jets(identity_matrix(n, se.A.context()) * v - se.A, 1, 1);
    const std::vector<double> m = vals(M), gi = vals(se.metric.ginv), ric = vals(geo.curv.ricci);
    std::vector<double> Ric(static_cast<std::size_t>(n * n), 0.0);  // Ric^k_r
    for (int k = 0; k < n; ++k)
        for (int r = 0; r < n; ++r)
            for (int a = 0; a < n; ++a) Ric[static_cast<std::size_t>(k * n + r)] += at2(gi, k, a) * at2(ric, a, r);
    for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
            double x = 0.0, sc = 0.0;
            for (int r = 0; r < n; ++r) {
                const double a = at2(m, r, l) * at2(Ric, k, r), b = at2(m, k, r) * at2(Ric, r, l);
                x += a - b;
                sc += std::abs(a) + std::abs(b);
            }
            out.ricci.value = std::max(out.ricci.value, std::abs(x));
            out.ricci.scale = std::max(out.ricci.scale, sc);
        }

    const BTerms b = b_terms(Kv, Kw, geo, false);
    const BTensorEval red = assemble(b, geo.conn, false);
    out.reduced_div.value = red.divB.max_abs();
    for (const Tensor* t : {&b.t1pq, &b.t1qp, &b.t3})
        out.reduced_div.scale = std::max(out.reduced_div.scale, div_first(antisymmetrize(*t), geo.conn).max_abs());
    // curvature can vanish identically, so relative values need a unit floor
    for (Residual* r : {&out.curvature_K, &out.ricci, &out.reduced_div}) r->scale = std::max(r->scale, 1.0);
    return out;
}

PotentialOperatorResiduals potential_operator_checks(const StructureEval& se, const Potential& pot, double s, double t, const CJet& f) {
    PotentialOperatorResiduals out;
    const DiffOperator Qs = operator_Q(se, pot, s), Qt = operator_Q(se, pot, t);
    out.QQ = commutator_residual(Qs, Qt, f);
    if (se.J.size() > 0) {
        const DiffOperator Ls = operator_L(se, s), Lt = operator_L(se, t);
        out.QL = commutator_residual(Qs, Lt, f);
        out.LL = commutator_residual(Ls, Lt, f);
    }
    return out;
}

std::vector<int> phase_coordinates(const Structure& s) {
    std::vector<int> out;
    for (int q = 1; q <= s.r(); ++q) out.push_back(s.coordinate_index("t" + std::to_string(q)));
    return out;
}

std::vector<TestFunction> test_battery(int dim, std::vector<int> phase_coords, std::uint64_t seed) {
    Rng rng(seed);
    auto draw = [&](double lo, double hi) {
        std::vector<double> v(static_cast<std::size_t>(dim));
        for (auto& x : v) x = rng.uniform(lo, hi);
        return v;
    };
    auto idx = [&] { return static_cast<int>(rng.next() % static_cast<std::uint64_t>(dim)); };
    std::vector<TestFunction> out;

    {
        const std::vector<double> lin = draw(-1, 1);
        const int a = idx(), b = idx(), c = idx(), e = idx(), h = idx();
        const double c0 = rng.uniform(-1, 1), c2 = rng.uniform(-1, 1), c3 = rng.uniform(-1, 1), c3b = rng.uniform(-1, 1);
        out.push_back({"cubic", [=](std::span<const double> x, const JetContext& ctx) {
                           std::vector<Jet> X;
                           for (int i = 0; i < dim; ++i) X.push_back(lift_var(i, x[static_cast<std::size_t>(i)], ctx));
                           Jet f(ctx, c0);
                           for (int i = 0; i < dim; ++i) f += lin[static_cast<std::size_t>(i)] * X[static_cast<std::size_t>(i)];
                           f += c2 * X[static_cast<std::size_t>(a)] * X[static_cast<std::size_t>(b)];
                           f += c3 * X[static_cast<std::size_t>(a)] * X[static_cast<std::size_t>(c)] * X[static_cast<std::size_t>(e)];
                           f += c3b * X[static_cast<std::size_t>(h)] * X[static_cast<std::size_t>(h)] * X[static_cast<std::size_t>(b)];
                           return CJet(f);
                       }});
    }
    auto dot = [dim](const std::vector<double>& a, std::span<const double> x, const JetContext& ctx) {
        Jet s(ctx);
        for (int i = 0; i < dim; ++i) s += a[static_cast<std::size_t>(i)] * lift_var(i, x[static_cast<std::size_t>(i)], ctx);
        return s;
    };
    {
        const std::vector<double> a = draw(-0.5, 0.5);
        out.push_back({"exp", [=](std::span<const double> x, const JetContext& ctx) { return CJet(exp(dot(a, x, ctx))); }});
    }
    {
        const std::vector<double> a = draw(-1, 1), b = draw(-1, 1);
        out.push_back({"sincos", [=](std::span<const double> x, const JetContext& ctx) {
                           return CJet(sin(dot(a, x, ctx)) * cos(dot(b, x, ctx)));
                       }});
    }
    {
        if (phase_coords.empty())
            for (int i = 0; i < dim; ++i) phase_coords.push_back(i);
        std::vector<double> w(static_cast<std::size_t>(dim), 0.0), x0 = draw(-1, 1);
        std::vector<char> is_phase(static_cast<std::size_t>(dim), 0);
        for (int q : phase_coords) {
            w[static_cast<std::size_t>(q)] = rng.uniform(-2, 2);
            is_phase[static_cast<std::size_t>(q)] = 1;
        }
        out.push_back({"phase_gauss", [=](std::span<const double> x, const JetContext& ctx) {
                           Jet r2(ctx);
                           for (int i = 0; i < dim; ++i) {
                               if (is_phase[static_cast<std::size_t>(i)] && phase_coords.size() < static_cast<std::size_t>(dim)) continue;
                               const Jet d = lift_var(i, x[static_cast<std::size_t>(i)], ctx) - x0[static_cast<std::size_t>(i)];
                               r2 += d * d;
                           }
                           return expi(dot(w, x, ctx)) * CJet(exp(-0.5 * r2));
                       }});
    }
    return out;
}

Tensor random_quadratic(std::span<const double> x, const JetContext& ctx, std::uint64_t seed) {
    Rng rng(seed);
    const int n = ctx.dim();
    Tensor P(n, 2, 0, ctx);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            Jet p(ctx, rng.uniform(-1, 1));
            for (int k = 0; k < n; ++k) {
                const Jet X = lift_var(k, x[static_cast<std::size_t>(k)], ctx);
                p += rng.uniform(-1, 1) * X + rng.uniform(-0.5, 0.5) * X * X;
            }
            P(i, j) = p;
            P(j, i) = p;
        }
    return P;
}

}  // namespace cpq
