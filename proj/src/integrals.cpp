#include "cpq/integrals.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace cpq {

namespace {

int half_power(const StructureEval& se, int m) { return se.geometry == Geometry::CProjective ? m / 2 : m; }

double max_coeff(const Tensor& t) {
    double m = 0.0;
    for (std::size_t k = 0; k < t.size(); ++k)
        for (double c : t[k].coeffs()) m = std::max(m, std::abs(c));
    return m;
}

}  // namespace

Jet sqrtdet_factor(const StructureEval& se, double t) {
    const JetContext& ctx = se.A.context();
    Jet out(ctx, 1.0);
    for (std::size_t k = 0; k < se.eigenvalues.size(); ++k)
        out = out * powi(t - se.eigenvalues[k], half_power(se, se.multiplicities[k]));
    return out;
}

int killing_degree(const StructureEval& se) {
    return (se.geometry == Geometry::CProjective ? se.dim / 2 : se.dim) - 1;
}

Tensor killing_tensor_product(const StructureEval& se, double t) {
    const int d = se.dim;
    Tensor M = identity_matrix(d, se.A.context()) * t - se.A;
    const Tensor Minv = invert_matrix_jets(M, 1, 1);
    const Jet s = sqrtdet_factor(se, t);
    const Tensor& gi = se.metric.ginv;
    Tensor K(d, 2, 0, se.A.context());
    for (int i = 0; i < d; ++i)
        for (int j = i; j < d; ++j) {
            Jet acc(se.A.context());
            for (int l = 0; l < d; ++l) acc += Minv(i, l) * gi(l, j);
            K(i, j) = s * acc;
        }
    // symmetric by construction; copy the lower triangle rather than recompute it
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < i; ++j) K(i, j) = K(j, i);
    return K;
}

std::vector<double> interpolation_nodes(const StructureEval& se, int count) {
    double R = 0.0;
    for (const auto& e : se.eigenvalues) R = std::max(R, std::abs(e.value()));
    std::vector<double> nodes;
    for (int k = 0; k < count; ++k) nodes.push_back(-(R + 1.0) - k);
    return nodes;
}

std::vector<Tensor> t_coefficients(const std::function<Tensor(double)>& family, int degree, std::span<const double> nodes) {
    const int n = degree + 1;
    if (static_cast<int>(nodes.size()) < n) throw DomainError("not enough interpolation nodes");
    Eigen::MatrixXd V(n, n);
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) V(j, k) = std::pow(nodes[static_cast<std::size_t>(j)], k);
    const Eigen::MatrixXd W = V.inverse();
    std::vector<Tensor> samples;
    for (int j = 0; j < n; ++j) samples.push_back(family(nodes[static_cast<std::size_t>(j)]));
    std::vector<Tensor> coeff;
    for (int k = 0; k < n; ++k) {
        Tensor c = samples[0] * W(k, 0);
        for (int j = 1; j < n; ++j) c += samples[static_cast<std::size_t>(j)] * W(k, j);
        coeff.push_back(std::move(c));
    }
    for (std::size_t h = static_cast<std::size_t>(n); h < nodes.size(); ++h) {
        const double t = nodes[h];
        const Tensor want = family(t);
        Tensor got = coeff[0];
        double tk = 1.0;
        for (int k = 1; k < n; ++k) {
            tk *= t;
            got += coeff[static_cast<std::size_t>(k)] * tk;
        }
        const double err = max_coeff(got - want);
        if (err > 1e-8 * std::max(1.0, max_coeff(want)))
            throw DegreeOverflowError("family is not a polynomial of degree " + std::to_string(degree) + " in t");
    }
    return coeff;
}

std::vector<Tensor> killing_coefficients(const StructureEval& se) {
    const int deg = killing_degree(se);
    const std::vector<double> nodes = interpolation_nodes(se, deg + 2);
    return t_coefficients([&](double t) { return killing_tensor_product(se, t); }, deg, nodes);
}

Tensor killing_tensor_K(const StructureEval& se, double t) {
    double gap = INFINITY;
    for (const auto& e : se.eigenvalues) gap = std::min(gap, std::abs(t - e.value()));
    if (gap >= 1e-6) return killing_tensor_product(se, t);
    const std::vector<Tensor> c = killing_coefficients(se);
    Tensor K = c[0];
    double tk = 1.0;
    for (std::size_t k = 1; k < c.size(); ++k) {
        tk *= t;
        K += c[k] * tk;
    }
    return K;
}

Tensor projective_killing_K(const StructureEval& se, double t) {
    if (se.geometry != Geometry::Projective) throw ContextError("projective K(t) needs a projective structure");
    return killing_tensor_K(se, t);
}

Tensor killing_vector_V(const StructureEval& se, double t) {
    if (se.J.size() == 0) throw ContextError("Killing vectors V(t) need a complex structure");
    const int d = se.dim;
    const Tensor grad = gradient(sqrtdet_factor(se, t));
    Tensor V(d, 1, 0, grad.context());
    for (int j = 0; j < d; ++j) {
        Jet acc(grad.context());
        for (int k = 0; k < d; ++k) {
            Jet gk(grad.context());
            for (int i = 0; i < d; ++i) gk += se.metric.ginv(k, i) * grad(i);
            acc += se.J(j, k) * gk;
        }
        V(j) = acc;
    }
    return V;
}

Residual killing_tensor_residual(const Tensor& K, const StructureEval& se) {
    const int d = se.dim;
    const Tensor dK = covariant_derivative(K, se.conn);  // (j, k, l) = nabla_l K^{jk}
    std::vector<double> N(static_cast<std::size_t>(d * d * d), 0.0);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            for (int k = 0; k < d; ++k) {
                double s = 0.0;
                for (int l = 0; l < d; ++l) s += se.metric.ginv(i, l).value() * dK(j, k, l).value();
                N[static_cast<std::size_t>((i * d + j) * d + k)] = s;
            }
    Residual out;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            for (int k = 0; k < d; ++k) {
                const double v = N[static_cast<std::size_t>((i * d + j) * d + k)] + N[static_cast<std::size_t>((j * d + k) * d + i)] +
                                 N[static_cast<std::size_t>((k * d + i) * d + j)];
                out.value = std::max(out.value, std::abs(v) / 3.0);
            }
    out.scale = std::max({1.0, partial_derivative(K).max_abs(), K.max_abs() * se.conn.gamma.max_abs() * d});
    return out;
}

Residual killing_equation_residual(const StructureEval& se, double t) { return killing_tensor_residual(killing_tensor_K(se, t), se); }

Residual killing_vector_residual(const Tensor& V, const StructureEval& se) {
    const int d = se.dim;
    const Tensor Vl = lower_vector(V, se.metric.g);
    const Tensor dV = covariant_derivative(Vl, se.conn);  // (j, i) = nabla_i V_j
    Residual out;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) out.value = std::max(out.value, std::abs(dV(i, j).value() + dV(j, i).value()));
    out.scale = std::max({1.0, partial_derivative(Vl).max_abs(), Vl.max_abs() * se.conn.gamma.max_abs() * d});
    return out;
}

Residual divergence_residual(const Tensor& V, const StructureEval& se) {
    Residual out;
    out.value = std::abs(divergence(V, se.conn).value());
    out.scale = std::max({1.0, partial_derivative(V).max_abs(), V.max_abs() * se.conn.gamma.max_abs() * se.dim});
    return out;
}

Tensor lie_derivative(const Tensor& V, const Tensor& K) {
    const int d = K.dim();
    const Tensor dK = partial_derivative(K);  // (j, k, i) = d_i K^{jk}
    const Tensor dV = partial_derivative(V);  // (j, i) = d_i V^j
    Tensor out(d, 2, 0, dK.context().with_order(std::min(dK.order(), dV.order())));
    for (int j = 0; j < d; ++j)
        for (int k = 0; k < d; ++k) {
            Jet acc(out.context());
            for (int i = 0; i < d; ++i) acc += V(i) * dK(j, k, i) - dV(j, i) * K(i, k) - dV(k, i) * K(j, i);
            out(j, k) = acc;
        }
    return out;
}

// ---------------------------------------------------------------- observables

int Observable::degree() const {
    for (int d = static_cast<int>(coeff.size()) - 1; d >= 0; --d)
        if (has(d)) return d;
    return -1;
}

void Observable::set(int d, Tensor t) {
    if (t.rank() != d) throw ContextError("observable coefficient rank must equal its degree");
    if (static_cast<int>(coeff.size()) <= d) coeff.resize(static_cast<std::size_t>(d) + 1);
    coeff[static_cast<std::size_t>(d)] = std::move(t);
}

namespace {

/// sum over all index tuples of vals[idx] * p[idx_1] ... p[idx_d]
double contract_momenta(const Tensor& c, std::span<const double> p, int skip_first_as = -1) {
    const int d = c.dim();
    double sum = 0.0;
    for (std::size_t k = 0; k < c.size(); ++k) {
        const std::vector<int> idx = c.unflat(k);
        double w = c[k].value();
        std::size_t start = 0;
        if (skip_first_as >= 0) {
            if (idx.empty() || idx[0] != skip_first_as) continue;
            start = 1;
        }
        for (std::size_t a = start; a < idx.size(); ++a) w *= p[static_cast<std::size_t>(idx[a])];
        sum += w;
    }
    (void)d;
    return sum;
}

}  // namespace

double Observable::value(std::span<const double> p) const {
    double v = 0.0;
    for (int d = 0; d < static_cast<int>(coeff.size()); ++d)
        if (has(d)) v += contract_momenta(part(d), p);
    return v;
}

double Observable::max_abs() const {
    double m = 0.0;
    for (const auto& c : coeff)
        if (c.size() > 0) m = std::max(m, c.max_abs());
    return m;
}

Observable Observable::scalar(const Jet& u) {
    Observable o;
    Tensor t(u.dim(), 0, 0, u.context());
    t[0] = u;
    o.set(0, std::move(t));
    return o;
}

Observable Observable::vector(Tensor v) {
    Observable o;
    o.set(1, std::move(v));
    return o;
}

Observable Observable::quadratic(Tensor k) {
    Observable o;
    o.set(2, std::move(k));
    return o;
}

Observable operator+(const Observable& a, const Observable& b) {
    Observable out = a;
    for (int d = 0; d < static_cast<int>(b.coeff.size()); ++d) {
        if (!b.has(d)) continue;
        if (out.has(d)) out.coeff[static_cast<std::size_t>(d)] += b.part(d);
        else out.set(d, b.part(d));
    }
    return out;
}

Observable operator*(const Observable& a, double s) {
    Observable out = a;
    for (auto& c : out.coeff)
        if (c.size() > 0) c *= s;
    return out;
}

Residual poisson_bracket(const Observable& F, const Observable& G, std::span<const double> p) {
    int dim = 0;
    for (const auto* o : {&F, &G})
        for (const auto& c : o->coeff)
            if (c.size() > 0) dim = c.dim();
    Residual out;
    if (dim == 0) return out;
    // dH/dp_a and dH/dx_a at the phase point
    auto grads = [&](const Observable& H, std::vector<double>& dp, std::vector<double>& dx) {
        dp.assign(static_cast<std::size_t>(dim), 0.0);
        dx.assign(static_cast<std::size_t>(dim), 0.0);
        for (int d = 0; d < static_cast<int>(H.coeff.size()); ++d) {
            if (!H.has(d)) continue;
            const Tensor& c = H.part(d);
            if (d > 0)
                for (int a = 0; a < dim; ++a) dp[static_cast<std::size_t>(a)] += d * contract_momenta(c, p, a);
            const Tensor dc = partial_derivative(c);
            for (int a = 0; a < dim; ++a) {
                double s = 0.0;
                for (std::size_t k = 0; k < c.size(); ++k) {
                    const std::vector<int> idx = c.unflat(k);
                    double w = dc[k * static_cast<std::size_t>(dim) + static_cast<std::size_t>(a)].value();
                    for (int i : idx) w *= p[static_cast<std::size_t>(i)];
                    s += w;
                }
                dx[static_cast<std::size_t>(a)] += s;
            }
        }
    };
    std::vector<double> fp, fx, gp, gx;
    grads(F, fp, fx);
    grads(G, gp, gx);
    double v = 0.0, nf = 0.0, ng = 0.0;
    for (int a = 0; a < dim; ++a) {
        const std::size_t i = static_cast<std::size_t>(a);
        v += fp[i] * gx[i] - fx[i] * gp[i];
        nf += fp[i] * fp[i] + fx[i] * fx[i];
        ng += gp[i] * gp[i] + gx[i] * gx[i];
    }
    out.value = std::abs(v);
    out.scale = std::sqrt(nf * ng);
    return out;
}

namespace {

/// X[I, J] = sum_a F[a, I] d_a G[J], with F of rank >= 1.
Tensor contract_derivative(const Tensor& F, const Tensor& G) {
    const int d = F.dim();
    const Tensor dG = partial_derivative(G);
    const int rank = F.rank() - 1 + G.rank();
    Tensor X(d, rank, 0, dG.context().with_order(std::min(F.order(), dG.order())));
    for (std::size_t k = 0; k < X.size(); ++k) {
        const std::vector<int> idx = X.unflat(k);
        std::vector<int> fi(1 + static_cast<std::size_t>(F.rank() - 1));
        std::copy(idx.begin(), idx.begin() + (F.rank() - 1), fi.begin() + 1);
        std::vector<int> gi(idx.begin() + (F.rank() - 1), idx.end());
        const std::size_t gbase = G.flat(gi) * static_cast<std::size_t>(d);
        Jet acc(X.context());
        for (int a = 0; a < d; ++a) {
            fi[0] = a;
            const Jet& fv = F[F.flat(fi)];
            acc += fv * dG[gbase + static_cast<std::size_t>(a)];
        }
        X[k] = acc;
    }
    return X;
}

}  // namespace

Observable poisson_observable(const Observable& F, const Observable& G) {
    Observable out;
    for (int a = 0; a < static_cast<int>(F.coeff.size()); ++a) {
        if (!F.has(a)) continue;
        for (int b = 0; b < static_cast<int>(G.coeff.size()); ++b) {
            if (!G.has(b)) continue;
            if (a + b == 0) continue;
            Tensor term;
            if (a > 0) term = contract_derivative(F.part(a), G.part(b)) * static_cast<double>(a);
            if (b > 0) {
                // -b G^{a J} d_a F^{I}; reorder so F's indices come first (symmetrized below anyway)
                Tensor t2 = contract_derivative(G.part(b), F.part(a)) * static_cast<double>(-b);
                if (term.size() == 0) term = std::move(t2);
                else term += t2;
            }
            term = symmetrize(term);
            Observable piece;
            piece.set(a + b - 1, std::move(term));
            out = out + piece;
        }
    }
    return out;
}

Observable integral_I(const StructureEval& se, double t) { return Observable::quadratic(killing_tensor_K(se, t)); }

Observable integral_L(const StructureEval& se, double t) { return Observable::vector(killing_vector_V(se, t)); }

// ---------------------------------------------------------------- potentials

Potential::Potential(const Structure& s, std::vector<std::string> f) : coords_(s.coordinates()), src_(std::move(f)) {
    std::vector<std::string> vars = coords_;
    vars.push_back("rho");
    for (const auto& e : src_) f_.push_back(parse(e, vars));
}

std::vector<Jet> Potential::functions(const StructureEval& se) const {
    if (f_.size() != se.eigenvalues.size())
        throw ConfigError("need one potential function per distinct eigenvalue (" + std::to_string(se.eigenvalues.size()) + ")");
    const JetContext& ctx = se.A.context();
    JetEnv env;
    for (int v = 0; v < se.dim; ++v) env.emplace(coords_[static_cast<std::size_t>(v)], lift_var(v, se.point[static_cast<std::size_t>(v)], ctx));
    std::vector<Jet> out;
    for (std::size_t i = 0; i < f_.size(); ++i) {
        env.insert_or_assign("rho", se.eigenvalues[i]);
        out.push_back(eval_jet(f_[i], env));
    }
    return out;
}

Jet Potential::U(const StructureEval& se, double t) const {
    const std::vector<Jet> f = functions(se);
    const JetContext& ctx = se.A.context();
    Jet out(ctx);
    const std::size_t n = se.eigenvalues.size();
    for (std::size_t i = 0; i < n; ++i) {
        Jet term = f[i] * powi(t - se.eigenvalues[i], half_power(se, se.multiplicities[i]) - 1);
        for (std::size_t l = 0; l < n; ++l) {
            if (l == i) continue;
            term = term * powi((t - se.eigenvalues[l]) / (se.eigenvalues[i] - se.eigenvalues[l]), half_power(se, se.multiplicities[l]));
        }
        out += term;
    }
    return out;
}

PotentialResiduals potential_condition_residuals(const StructureEval& se, const Potential& pot, double s, double t) {
    const int d = se.dim;
    PotentialResiduals out;
    const Tensor Kt = killing_tensor_K(se, t), Ks = killing_tensor_K(se, s);
    const Tensor dUs = gradient(pot.U(se, s)), dUt = gradient(pot.U(se, t));
    for (int i = 0; i < d; ++i) {
        double a = 0.0, b = 0.0, sc = 0.0;
        for (int j = 0; j < d; ++j) {
            a += Kt(i, j).value() * dUs(j).value();
            b += Ks(i, j).value() * dUt(j).value();
            sc += std::abs(Kt(i, j).value() * dUs(j).value()) + std::abs(Ks(i, j).value() * dUt(j).value());
        }
        out.exactness.value = std::max(out.exactness.value, std::abs(a - b));
        out.exactness.scale = std::max({out.exactness.scale, sc, 1.0});
    }
    const std::vector<Jet> f = pot.functions(se);
    for (std::size_t i = 0; i < f.size(); ++i) {
        const Tensor df = gradient(f[i]);
        const double rho = se.eigenvalues[i].value();
        for (int k = 0; k < d; ++k) {
            double c = 0.0, sc = 0.0;
            for (int j = 0; j < d; ++j) {
                c += df(j).value() * se.A(j, k).value();
                sc += std::abs(df(j).value() * se.A(j, k).value());
            }
            out.eigenform.value = std::max(out.eigenform.value, std::abs(c - rho * df(k).value()));
            out.eigenform.scale = std::max({out.eigenform.scale, sc, std::abs(rho * df(k).value())});
        }
    }
    if (se.J.size() > 0) {
        const Tensor V = killing_vector_V(se, s);
        double c = 0.0, sc = 0.0;
        for (int j = 0; j < d; ++j) {
            c += dUt(j).value() * V(j).value();
            sc += std::abs(dUt(j).value() * V(j).value());
        }
        out.killing.value = std::abs(c);
        out.killing.scale = sc;
    }
    return out;
}

std::vector<Observable> quadratic_coefficients(const StructureEval& se, const Potential* pot) {
    const int deg = killing_degree(se);
    const std::vector<double> nodes = interpolation_nodes(se, deg + 2);
    const std::vector<Tensor> K = killing_coefficients(se);
    std::vector<Tensor> U;
    if (pot) {
        U = t_coefficients(
            [&](double t) {
                Tensor u(se.dim, 0, 0, se.A.context());
                u[0] = pot->U(se, t);
                return u;
            },
            deg, nodes);
    }
    std::vector<Observable> out;
    for (int l = 0; l <= deg; ++l) {
        Observable o = Observable::quadratic(K[static_cast<std::size_t>(l)]);
        if (pot) o.set(0, U[static_cast<std::size_t>(l)]);
        out.push_back(std::move(o));
    }
    return out;
}

std::vector<Observable> linear_coefficients(const StructureEval& se) {
    const int deg = killing_degree(se);
    const std::vector<double> nodes = interpolation_nodes(se, deg + 2);
    const std::vector<Tensor> V = t_coefficients([&](double t) { return killing_vector_V(se, t); }, deg, nodes);
    std::vector<Observable> out;
    for (const auto& v : V) out.push_back(Observable::vector(v));
    return out;
}

}  // namespace cpq
