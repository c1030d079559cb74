#include "cpq/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace cpq {

namespace {

bool is_zero_jet(const Jet& j) {
    for (double c : j.coeffs())
        if (c != 0.0) return false;
    return true;
}

}  // namespace

MetricEval make_metric(const Tensor& g) {
    if (g.rank() != 2) throw ContextError("metric must be a rank-2 tensor");
    MetricEval m;
    m.dim = g.dim();
    m.g = g;
    m.ginv = invert_matrix_jets(g, 2, 0);
    m.det = det_jets(g);
    if (m.det.value() == 0.0) throw SingularError("degenerate metric");
    return m;
}

ConnectionEval christoffel(const MetricEval& m) {
    const int d = m.dim;
    const int order = m.g.order();
    if (order < 1) throw ContextError("christoffel symbols need metric jets of order >= 1");
    const JetContext& lo = m.g.context().with_order(order - 1);
    // dg(l, k, j) = d_j g_{lk}
    Tensor dg(d, 0, 3, lo);
    for (int l = 0; l < d; ++l)
        for (int k = 0; k < d; ++k)
            for (int j = 0; j < d; ++j) dg(l, k, j) = derivative(m.g(l, k), j);
    Tensor first(d, 0, 3, lo);
    for (int l = 0; l < d; ++l)
        for (int j = 0; j < d; ++j)
            for (int k = j; k < d; ++k) {
                first(l, j, k) = (dg(l, k, j) + dg(l, j, k) - dg(j, k, l)) * 0.5;
                first(l, k, j) = first(l, j, k);
            }
    ConnectionEval c;
    c.gamma = Tensor(d, 1, 2, lo);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            for (int k = j; k < d; ++k) {
                Jet s(lo);
                for (int l = 0; l < d; ++l) s += m.ginv(i, l) * first(l, j, k);
                c.gamma(i, j, k) = s;
                c.gamma(i, k, j) = s;
            }
    c.zero.resize(c.gamma.size());
    for (std::size_t k = 0; k < c.gamma.size(); ++k) c.zero[k] = is_zero_jet(c.gamma[k]) ? 1 : 0;
    return c;
}

CurvatureEval riemann(const MetricEval& m, const ConnectionEval& c) {
    const int d = m.dim;
    const int order = c.gamma.order();
    if (order < 1) throw ContextError("curvature needs metric jets of order >= 2");
    const JetContext& lo = c.gamma.context().with_order(order - 1);
    const Tensor gam = c.gamma.truncated(order - 1);
    CurvatureEval out;
    out.riemann = Tensor(d, 1, 3, lo);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            for (int k = 0; k < d; ++k)
                for (int l = k + 1; l < d; ++l) {
                    Jet r = derivative(c.gamma(i, l, j), k) - derivative(c.gamma(i, k, j), l);
                    for (int s = 0; s < d; ++s) {
                        if (!c.zero[gam.flat({i, k, s})] && !c.zero[gam.flat({s, l, j})]) r += gam(i, k, s) * gam(s, l, j);
                        if (!c.zero[gam.flat({i, l, s})] && !c.zero[gam.flat({s, k, j})]) r -= gam(i, l, s) * gam(s, k, j);
                    }
                    out.riemann(i, j, k, l) = r;
                    out.riemann(i, j, l, k) = -r;
                }
    out.ricci = ricci_from_riemann(out.riemann);
    return out;
}

CurvatureEval riemann(const MetricEval& m) { return riemann(m, christoffel(m)); }

Tensor ricci_from_riemann(const Tensor& R) {
    const int d = R.dim();
    Tensor ric(d, 0, 2, R.context().with_order(R.order()));
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            Jet s(ric.context());
            for (int k = 0; k < d; ++k) s += R(k, i, k, j);
            ric(i, j) = s;
        }
    return ric;
}

Tensor gradient(const Jet& f) {
    const int d = f.dim();
    Tensor g(d, 0, 1, f.context().with_order(f.order() - 1));
    for (int i = 0; i < d; ++i) g(i) = derivative(f, i);
    return g;
}

Tensor partial_derivative(const Tensor& t) {
    const int d = t.dim();
    const int order = t.order();
    if (order < 1) throw ContextError("partial derivative of an order-0 tensor");
    Tensor out(d, t.upper(), t.lower() + 1, t.context().with_order(order - 1));
    for (std::size_t k = 0; k < t.size(); ++k)
        for (int v = 0; v < d; ++v) out[k * static_cast<std::size_t>(d) + static_cast<std::size_t>(v)] = derivative(t[k].truncated(order), v);
    return out;
}

Tensor covariant_derivative(const Tensor& t, const ConnectionEval& c) {
    const int d = t.dim();
    if (c.gamma.dim() != d) throw ContextError("tensor and connection dimensions differ");
    const int order = std::min(t.order() - 1, c.gamma.order());
    if (t.order() < 1) throw ContextError("covariant derivative of an order-0 tensor");
    const JetContext& lo = t.context().with_order(order);
    Tensor out = partial_derivative(t).truncated(order);
    const int rank = t.rank();
    const Tensor tt = t.truncated(order);
    const Tensor gam = c.gamma.truncated(order);
    for (std::size_t flat = 0; flat < out.size(); ++flat) {
        std::vector<int> idx = out.unflat(flat);
        const int k = idx.back();
        idx.pop_back();
        Jet acc = out[flat];
        for (int a = 0; a < rank; ++a) {
            const int orig = idx[static_cast<std::size_t>(a)];
            for (int s = 0; s < d; ++s) {
                idx[static_cast<std::size_t>(a)] = s;
                if (a < t.upper()) {
                    const std::size_t gi = gam.flat({orig, k, s});
                    if (!c.zero[gi]) acc += gam[gi] * tt[tt.flat(idx)];
                } else {
                    const std::size_t gi = gam.flat({s, k, orig});
                    if (!c.zero[gi]) acc -= gam[gi] * tt[tt.flat(idx)];
                }
            }
            idx[static_cast<std::size_t>(a)] = orig;
        }
        out[flat] = acc;
    }
    (void)lo;
    return out;
}

Jet divergence(const Tensor& v, const ConnectionEval& c) {
    if (v.upper() != 1 || v.lower() != 0) throw ContextError("divergence expects a vector field");
    const Tensor dv = covariant_derivative(v, c);
    Jet s(dv.context());
    for (int j = 0; j < v.dim(); ++j) s += dv(j, j);
    return s;
}

Tensor lower_vector(const Tensor& v, const Tensor& g) {
    const int d = v.dim();
    Tensor out(d, 0, 1, v.context().with_order(std::min(v.order(), g.order())));
    for (int i = 0; i < d; ++i) {
        Jet s(out.context());
        for (int j = 0; j < d; ++j) s += g(i, j) * v(j);
        out(i) = s;
    }
    return out;
}

Tensor raise_form(const Tensor& w, const Tensor& ginv) {
    const int d = w.dim();
    Tensor out(d, 1, 0, w.context().with_order(std::min(w.order(), ginv.order())));
    for (int i = 0; i < d; ++i) {
        Jet s(out.context());
        for (int j = 0; j < d; ++j) s += ginv(i, j) * w(j);
        out(i) = s;
    }
    return out;
}

double bianchi_residual(const CurvatureEval& c) {
    const Tensor& R = c.riemann;
    const int d = R.dim();
    double worst = 0.0;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            for (int k = 0; k < d; ++k)
                for (int l = 0; l < d; ++l)
                    worst = std::max(worst, std::abs(R(i, j, k, l).value() + R(i, k, l, j).value() + R(i, l, j, k).value()));
    return worst;
}

}  // namespace cpq
