#include "cpq/separation.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include <Eigen/Dense>

namespace cpq {

namespace {

using cd = std::complex<double>;

const Structure& need(const SeparationProblem& p) {
    if (!p.structure) throw ContextError("separation problem without a structure");
    if (p.structure->geometry() != Geometry::CProjective) throw ContextError("separation needs a normal-form structure");
    return *p.structure;
}

std::vector<double> polymul(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> out(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
    return out;
}

/// f_k as a jet in the one-dimensional chi context; other coordinates sit at their box centres.
Jet ode_potential(const SeparationProblem& prob, int k, const Jet& X, const Jet& rho) {
    if (prob.f.empty()) return Jet(X.context());
    const Structure& s = *prob.structure;
    std::vector<std::string> vars = s.coordinates();
    vars.push_back("rho");
    const Expr e = parse(prob.f.at(static_cast<std::size_t>(k)), vars);
    JetEnv env;
    for (int v = 0; v < s.dim(); ++v) {
        const auto& rg = s.range(v);
        env.emplace(s.coordinates()[static_cast<std::size_t>(v)], Jet(X.context(), 0.5 * (rg[0] + rg[1])));
    }
    env.insert_or_assign(s.coordinates()[static_cast<std::size_t>(k)], X);
    env.insert_or_assign("rho", rho);
    return eval_jet(e, env);
}

/// Weights for derivatives 0..2 at z from nodes x (Fornberg).
std::array<std::array<double, 5>, 3> fornberg(const std::array<double, 5>& x, double z) {
    constexpr int n = 5, m = 2;
    double c[m + 1][n] = {};
    double c1 = 1.0, c4 = x[0] - z;
    c[0][0] = 1.0;
    for (int i = 1; i < n; ++i) {
        const int mn = std::min(i, m);
        double c2 = 1.0;
        const double c5 = c4;
        c4 = x[static_cast<std::size_t>(i)] - z;
        for (int j = 0; j < i; ++j) {
            const double c3 = x[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(j)];
            c2 *= c3;
            if (j == i - 1) {
                for (int k = mn; k >= 1; --k) c[k][i] = c1 * (k * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for (int k = mn; k >= 1; --k) c[k][j] = (c4 * c[k][j] - k * c[k - 1][j]) / c3;
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    std::array<std::array<double, 5>, 3> out{};
    for (int k = 0; k <= m; ++k)
        for (int j = 0; j < n; ++j) out[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)] = c[k][j];
    return out;
}

double other_constant_product(const StructureSpec& sp, std::size_t b, bool reduced) {
    double P = 1.0;
    for (std::size_t o = 0; o < sp.blocks.size(); ++o) {
        if (o == b) continue;
        const double d = sp.blocks[b].c - sp.blocks[o].c;
        P *= reduced ? std::pow(d, sp.blocks[o].m / 2 - 1) : d;
    }
    return P;
}

}  // namespace

double polyval(std::span<const double> c, double s) {
    double v = 0.0;
    for (std::size_t i = c.size(); i-- > 0;) v = v * s + c[i];
    return v;
}

std::vector<double> lambda_coefficients(const SeparationProblem& p) {
    const Structure& s = need(p);
    std::vector<double> out(p.lambda_tilde.begin(), p.lambda_tilde.end());
    if (out.empty()) out.push_back(0.0);
    for (const auto& bl : s.spec().blocks)
        for (int e = 0; e < bl.m / 2 - 1; ++e) out = polymul(out, {-bl.c, 1.0});
    return out;
}

std::vector<double> lambda_tilde_fit(std::span<const double> constants, std::span<const double> values, std::span<const double> high) {
    const std::size_t R = constants.size();
    std::vector<double> out(R + high.size(), 0.0);
    std::copy(high.begin(), high.end(), out.begin() + static_cast<std::ptrdiff_t>(R));
    if (R == 0) return out;
    Eigen::MatrixXd V(static_cast<Eigen::Index>(R), static_cast<Eigen::Index>(R));
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(R));
    for (std::size_t i = 0; i < R; ++i) {
        double hv = 0.0, pw = std::pow(constants[i], static_cast<double>(R));
        for (double h : high) {
            hv += h * pw;
            pw *= constants[i];
        }
        rhs(static_cast<Eigen::Index>(i)) = values[i] - hv;
        for (std::size_t j = 0; j < R; ++j) V(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = std::pow(constants[i], static_cast<double>(j));
    }
    const Eigen::VectorXd low = V.partialPivLu().solve(rhs);
    for (std::size_t j = 0; j < R; ++j) out[j] = low(static_cast<Eigen::Index>(j));
    return out;
}

double l_eigenvalue(const SeparationProblem& p, double s) {
    const Structure& st = need(p);
    const int r = st.r();
    double sum = 0.0;
    for (int q = 1; q <= r; ++q) sum += (q % 2 ? -1.0 : 1.0) * std::pow(s, r - q) * p.omega.at(static_cast<std::size_t>(q - 1));
    for (const auto& bl : st.spec().blocks) sum *= std::pow(s - bl.c, bl.m / 2);
    return sum;
}

RouteComparison normal_coords_operator(const Structure& s, std::span<const double> x, double sarg, const TestFunction& tf) {
    if (s.geometry() != Geometry::CProjective) throw ContextError("frame route needs a normal-form structure");
    const int n = s.dim();
    const NormalFrame nf = s.normal_frame(x, 2);
    const StructureEval se = s.evaluate(x, 2);
    const JetContext& ctx = se.A.context();
    for (const auto& rp : nf.rho_prime)
        if (std::abs(rp.value()) < 1e-10) throw DegeneratePointError("d rho vanishes at the point");

    Jet sd(ctx, 1.0);
    for (const auto& rho : nf.rho) sd = sd * (sarg - rho);
    for (const auto& bl : s.spec().blocks) sd = sd * std::pow(sarg - bl.c, bl.m / 2);
    const Tensor Minv = invert_matrix_jets(identity_matrix(n, ctx) * sarg - nf.A, 1, 1);
    const Tensor Ginv = invert_matrix_jets(nf.G, 2, 0);
    Tensor Kf = matmul(Minv, Ginv, 2, 0);
    Kf = scale(Kf, sd);
    Jet detG = det_jets(nf.G);
    if (detG.value() < 0) detG = -detG;
    const Jet sqrtG = sqrt(detG);

    auto route = [&](const Jet& f) {
        const Tensor df = gradient(f);
        std::vector<Jet> Y(static_cast<std::size_t>(n));
        for (int b = 0; b < n; ++b) {
            Jet acc;
            for (int i = 0; i < n; ++i) acc += nf.Tinv(i, b) * df(i);
            Y[static_cast<std::size_t>(b)] = acc;
        }
        Jet out;
        for (int a = 0; a < n; ++a) {
            Jet z;
            for (int b = 0; b < n; ++b) z += Kf(a, b) * Y[static_cast<std::size_t>(b)];
            z = sqrtG * z;
            for (int j = 0; j < n; ++j) out += nf.Tinv(j, a) * derivative(z, j);
        }
        return (out / sqrtG).value();
    };
    const CJet f = tf.eval(x, ctx);
    RouteComparison rc;
    rc.frame = cd(route(real_part(f)), route(imag_part(f)));
    rc.invariant = -apply_operator(operator_I(se, sarg), f).value();
    rc.residual = Residual{std::abs(rc.frame - rc.invariant), std::max(std::abs(rc.frame), std::abs(rc.invariant))};
    return rc;
}

OdeCoefficients ode_coefficients(const SeparationProblem& prob, int k, double chi) {
    const Structure& s = need(prob);
    const int r = s.r();
    if (k < 0 || k >= r) throw DomainError("ODE index must name a non-constant eigenvalue");
    const JetContext& c1 = JetContext::get(1, 2);
    const Jet X = lift_var(0, chi, c1);
    const JetEnv env{{s.coordinates()[static_cast<std::size_t>(k)], X}};
    const Jet rho = eval_jet(s.sigma(k), env);
    const Jet rp = derivative(rho, 0);
    if (std::abs(rp.value()) < 1e-10) throw SingularError("d rho vanishes on the ODE interval");
    Jet prod(c1, 1.0);
    for (const auto& bl : s.spec().blocks) prod = prod * powi(rho - bl.c, bl.m / 2);
    const Jet p = rp * prod;
    double W = 0.0;
    for (int i = 1; i <= r; ++i) W += std::pow(-rho.value(), r - i) * prob.omega.at(static_cast<std::size_t>(i - 1));
    const double fk = ode_potential(prob, k, X, rho).value();
    const double lam = polyval(lambda_coefficients(prob), rho.value());
    const double eps = s.spec().epsilons.at(static_cast<std::size_t>(k));
    OdeCoefficients c;
    c.p = p.value();
    c.dp = derivative(p, 0).value();
    c.q = prod.value() * W * W / rp.value() + eps * rp.value() * (fk - lam);
    return c;
}

OdeGrid integrate_ode(const SeparationProblem& prob, int k, double a, double b, double phi0, double dphi0, double h) {
    const Structure& s = need(prob);
    if (!(h > 0.0) || !(b > a)) throw DomainError("ODE interval and step must be positive");
    // regularity: rho_k stays away from every other eigenvalue's range and from the constants
    std::vector<std::array<double, 2>> forbidden;
    auto sigma_range = [&](int j) {
        const auto& rg = s.range(j);
        const JetContext& c0 = JetContext::get(1, 0);
        double lo = INFINITY, hi = -INFINITY;
        for (int i = 0; i <= 256; ++i) {
            const double xv = rg[0] + (rg[1] - rg[0]) * i / 256.0;
            const JetEnv env{{s.coordinates()[static_cast<std::size_t>(j)], lift_var(0, xv, c0)}};
            const double v = eval_jet(s.sigma(j), env).value();
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        return std::array<double, 2>{lo, hi};
    };
    for (int j = 0; j < s.r(); ++j)
        if (j != k) forbidden.push_back(sigma_range(j));
    for (const auto& bl : s.spec().blocks) forbidden.push_back({bl.c, bl.c});
    const JetContext& c0 = JetContext::get(1, 0);
    for (int i = 0; i <= 256; ++i) {
        const double xv = a + (b - a) * i / 256.0;
        const JetEnv env{{s.coordinates()[static_cast<std::size_t>(k)], lift_var(0, xv, c0)}};
        const double v = eval_jet(s.sigma(k), env).value();
        for (const auto& f : forbidden)
            if (v >= f[0] - 1e-9 && v <= f[1] + 1e-9) throw SingularError("ODE interval meets another eigenvalue");
    }

    const auto steps = static_cast<std::size_t>(std::llround((b - a) / h));
    const double hh = (b - a) / static_cast<double>(steps);
    OdeGrid g;
    g.a = a;
    g.h = hh;
    auto rhs = [&](double chi, const std::array<double, 2>& y) {
        const OdeCoefficients c = ode_coefficients(prob, k, chi);
        if (std::abs(c.p) < 1e-12) throw SingularError("ODE leading coefficient vanishes");
        return std::array<double, 2>{y[1] / c.p, c.q * y[0]};
    };
    std::array<double, 2> y{phi0, ode_coefficients(prob, k, a).p * dphi0};
    g.phi.push_back(phi0);
    g.dphi.push_back(dphi0);
    for (std::size_t i = 0; i < steps; ++i) {
        const double t = a + hh * static_cast<double>(i);
        const auto k1 = rhs(t, y);
        const auto k2 = rhs(t + hh / 2, {y[0] + hh / 2 * k1[0], y[1] + hh / 2 * k1[1]});
        const auto k3 = rhs(t + hh / 2, {y[0] + hh / 2 * k2[0], y[1] + hh / 2 * k2[1]});
        const auto k4 = rhs(t + hh, {y[0] + hh * k3[0], y[1] + hh * k3[1]});
        for (int j = 0; j < 2; ++j)
            y[static_cast<std::size_t>(j)] += hh / 6 * (k1[static_cast<std::size_t>(j)] + 2 * k2[static_cast<std::size_t>(j)] +
                                                      2 * k3[static_cast<std::size_t>(j)] + k4[static_cast<std::size_t>(j)]);
        g.phi.push_back(y[0]);
        g.dphi.push_back(y[1] / ode_coefficients(prob, k, t + hh).p);
    }
    return g;
}

std::array<double, 3> interpolate(const OdeGrid& g, double chi) {
    if (g.phi.size() < 5) throw DomainError("grid too short for interpolation");
    const double u = (chi - g.a) / g.h;
    if (u < -1e-9 || u > static_cast<double>(g.phi.size() - 1) + 1e-9) throw DomainError("abscissa outside the grid");
    const long last = static_cast<long>(g.phi.size()) - 5;
    const long i0 = std::clamp(std::lround(u) - 2, 0L, last);
    std::array<double, 5> nodes{};
    for (int j = 0; j < 5; ++j) nodes[static_cast<std::size_t>(j)] = g.a + g.h * static_cast<double>(i0 + j);
    const auto w = fornberg(nodes, chi);
    std::array<double, 3> out{};
    for (int d = 0; d < 3; ++d)
        for (int j = 0; j < 5; ++j)
            out[static_cast<std::size_t>(d)] += w[static_cast<std::size_t>(d)][static_cast<std::size_t>(j)] * g.phi[static_cast<std::size_t>(i0 + j)];
    return out;
}

Residual separated_ode_residual(const SeparationProblem& prob, int k, const OdeGrid& g, std::size_t i) {
    if (i < 2 || i + 2 >= g.phi.size()) throw DomainError("residuals are reported on interior nodes only");
    const double chi = g.a + g.h * static_cast<double>(i);
    const auto f = interpolate(g, chi);
    const OdeCoefficients c = ode_coefficients(prob, k, chi);
    const double a = c.p * f[2], b = c.dp * f[1], q = c.q * f[0];
    return Residual{std::abs(a + b - q), std::max({std::abs(a), std::abs(b), std::abs(q)})};
}

double convergence_order(const SeparationProblem& prob, int k, double a, double b, double phi0, double dphi0, double h) {
    const double ref = integrate_ode(prob, k, a, b, phi0, dphi0, h / 8).phi.back();
    const double e1 = std::abs(integrate_ode(prob, k, a, b, phi0, dphi0, h).phi.back() - ref);
    const double e2 = std::abs(integrate_ode(prob, k, a, b, phi0, dphi0, h / 2).phi.back() - ref);
    return std::log2(e1 / e2);
}

CJet BlockFactor::eval(const Jet& y1, const Jet& y2) const {
    switch (kind) {
        case Kind::Plane: return expi(a * y1 + b * y2);
        case Kind::Sine: return CJet(sin(a * y1) * sin(b * y2));
        case Kind::Landau: {
            if (B == 0.0) throw DomainError("Landau factor needs a non-zero field");
            const Jet u = y1 + a / B;
            return expi(a * y2) * CJet(exp(-0.5 * std::abs(B) * u * u));
        }
    }
    throw DomainError("unknown block factor");
}

double BlockFactor::mu() const { return kind == Kind::Landau ? std::abs(B) : a * a + b * b; }

namespace {

/// a_j = sum_p omega_p alpha_{pj} on block b.
std::vector<Jet> block_potential(const SeparationProblem& prob, std::size_t b, const JetEnv& env, const JetContext& ctx) {
    const Structure& s = *prob.structure;
    const int m = s.spec().blocks.at(b).m;
    std::vector<Jet> a(static_cast<std::size_t>(m), Jet(ctx));
    for (int j = 0; j < m; ++j)
        for (int p = 0; p < s.r(); ++p) a[static_cast<std::size_t>(j)] += prob.omega.at(static_cast<std::size_t>(p)) * s.alpha(b, p, j, env);
    return a;
}

}  // namespace

double block_field(const SeparationProblem& prob, std::size_t b, std::span<const double> x) {
    const Structure& s = need(prob);
    const JetContext& ctx = JetContext::get(s.dim(), 1);
    const JetEnv env = s.environment(x, ctx);
    const std::vector<Jet> a = block_potential(prob, b, env, ctx);
    const int o = s.block_offset(b);
    return derivative(a[1], o).value() - derivative(a[0], o + 1).value();
}

Residual separated_pde_residual(const SeparationProblem& prob, std::size_t b, const BlockFactor& Yf, std::span<const double> x) {
    const Structure& s = need(prob);
    const BlockSpec& bl = s.spec().blocks.at(b);
    if (bl.m != 2) throw DomainError("block factors are implemented for two-dimensional blocks");
    const JetContext& ctx = JetContext::get(s.dim(), 2);
    const JetEnv env = s.environment(x, ctx);
    const int o = s.block_offset(b);
    const Tensor gb = s.block_metric(b, env, ctx);
    const Tensor gi = invert_matrix_jets(gb, 2, 0);
    Jet dg = det_jets(gb);
    if (dg.value() < 0) dg = -dg;
    const Jet sg = sqrt(dg);
    const std::vector<Jet> a = block_potential(prob, b, env, ctx);
    const CJet Y = Yf.eval(env.at(s.coordinates()[static_cast<std::size_t>(o)]), env.at(s.coordinates()[static_cast<std::size_t>(o + 1)]));
    const cd I1{0.0, 1.0};
    std::vector<CJet> D(2);
    for (int j = 0; j < 2; ++j) D[static_cast<std::size_t>(j)] = derivative(Y, o + j) + I1 * (CJet(a[static_cast<std::size_t>(j)]) * Y);
    CJet div;
    for (int i = 0; i < 2; ++i) {
        CJet W;
        for (int j = 0; j < 2; ++j) W += CJet(sg * gi(i, j)) * D[static_cast<std::size_t>(j)];
        div += derivative(W, o + i) + I1 * (CJet(a[static_cast<std::size_t>(i)]) * W);
    }
    const cd lap = (div / CJet(sg)).value();
    const double P = other_constant_product(s.spec(), b, false);
    const double Pr = other_constant_product(s.spec(), b, true);
    cd fterm = 0.0;
    if (!prob.f.empty()) {
        std::vector<std::string> vars = s.coordinates();
        vars.push_back("rho");
        JetEnv e2 = env;
        e2.insert_or_assign("rho", Jet(ctx, bl.c));
        const double fv = eval_jet(parse(prob.f.at(static_cast<std::size_t>(s.r()) + b), vars), e2).value();
        fterm = fv / Pr * Y.value();
    }
    const double lt = polyval(prob.lambda_tilde, bl.c);
    const cd lhs = -P * lap + fterm;
    const cd rhs = lt * Y.value();
    return Residual{std::abs(lhs - rhs), std::max({std::abs(P * lap), std::abs(fterm), std::abs(rhs)})};
}

double block_lambda_value(const SeparationProblem& prob, std::size_t b, const BlockFactor& Y, double f_const) {
    const Structure& s = need(prob);
    return other_constant_product(s.spec(), b, false) * Y.mu() + f_const / other_constant_product(s.spec(), b, true);
}

CJet Ansatz::eval(const SeparationProblem& prob, std::span<const double> x, const JetContext& ctx) const {
    const Structure& s = need(prob);
    if (ctx.order() > 2) throw ContextError("grid factors carry second derivatives only");
    const int r = s.r();
    if (static_cast<int>(phi.size()) != r || blocks.size() != s.spec().blocks.size()) throw ContextError("ansatz does not match the structure");
    CJet psi(ctx, cd(1.0));
    for (int k = 0; k < r; ++k) {
        const auto v = interpolate(phi[static_cast<std::size_t>(k)], x[static_cast<std::size_t>(k)]);
        const std::array<double, 3> series{v[0], v[1], 0.5 * v[2]};
        psi = psi * CJet(compose<double, double>(series, lift_var(k, x[static_cast<std::size_t>(k)], ctx)));
    }
    Jet phase(ctx);
    for (int q = 1; q <= r; ++q) {
        const int i = s.coordinate_index("t" + std::to_string(q));
        phase += prob.omega.at(static_cast<std::size_t>(q - 1)) * lift_var(i, x[static_cast<std::size_t>(i)], ctx);
    }
    psi = psi * expi(-phase);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        const int o = s.block_offset(b);
        psi = psi * blocks[b].eval(lift_var(o, x[static_cast<std::size_t>(o)], ctx), lift_var(o + 1, x[static_cast<std::size_t>(o + 1)], ctx));
    }
    return psi;
}

EigenResiduals eigen_residual(const SeparationProblem& prob, const Ansatz& psi, std::span<const double> ts,
                              const std::vector<std::vector<double>>& points) {
    const Structure& s = need(prob);
    std::vector<std::string> f = prob.f;
    if (f.empty()) f.assign(static_cast<std::size_t>(s.r()) + s.spec().blocks.size(), "0");
    const Potential pot(s, f);
    const std::vector<double> lam = lambda_coefficients(prob);
    EigenResiduals out;
    out.Q.scale = out.L.scale = 1.0;
    for (const auto& x : points) {
        const StructureEval se = s.evaluate(x, 2);
        const CJet p = psi.eval(prob, x, se.A.context());
        const double norm = std::abs(p.value());
        if (norm == 0.0) continue;
        for (double t : ts) {
            const cd q = apply_operator(operator_Q(se, pot, t), p).value();
            const cd l = apply_operator(operator_L(se, t), p).value();
            out.Q.value = std::max(out.Q.value, std::abs(q - polyval(lam, t) * p.value()) / norm);
            out.L.value = std::max(out.L.value, std::abs(l - l_eigenvalue(prob, t) * p.value()) / norm);
        }
    }
    return out;
}

}  // namespace cpq
