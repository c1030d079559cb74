#include "cpq/jet.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

namespace cpq {

MultiIndex::MultiIndex(std::vector<int> exponents) : e_(std::move(exponents)) {
    for (int x : e_)
        if (x < 0) throw ContextError("negative exponent in multi-index");
}

MultiIndex MultiIndex::unit(int dim, int i) {
    if (i < 0 || i >= dim) throw ContextError("unit multi-index out of range");
    std::vector<int> e(static_cast<std::size_t>(dim), 0);
    e[static_cast<std::size_t>(i)] = 1;
    return MultiIndex(std::move(e));
}

int MultiIndex::degree() const {
    int d = 0;
    for (int x : e_) d += x;
    return d;
}

double MultiIndex::factorial() const {
    double f = 1.0;
    for (int x : e_)
        for (int k = 2; k <= x; ++k) f *= k;
    return f;
}

namespace {

// All exponent vectors of total degree exactly d, lexicographically descending.
void enumerate_degree(int dim, int d, std::vector<int>& cur, int pos, std::vector<MultiIndex>& out) {
    if (pos == dim - 1) {
        cur[static_cast<std::size_t>(pos)] = d;
        out.emplace_back(cur);
        return;
    }
    for (int k = d; k >= 0; --k) {
        cur[static_cast<std::size_t>(pos)] = k;
        enumerate_degree(dim, d - k, cur, pos + 1, out);
    }
}

}  // namespace

JetContext::JetContext(int dim, int order) : dim_(dim), order_(order) {
    if (dim < 1) throw ContextError("jet dimension must be positive");
    if (order < 0) throw ContextError("jet order must be non-negative");
    std::vector<int> cur(static_cast<std::size_t>(dim), 0);
    for (int d = 0; d <= order; ++d) {
        enumerate_degree(dim, d, cur, 0, indices_);
        prefix_.push_back(indices_.size());
        if (indices_.size() > 200000) throw ContextError("jet context too large");
    }
    degree_.reserve(indices_.size());
    lookup_.reserve(indices_.size());
    for (std::size_t k = 0; k < indices_.size(); ++k) {
        degree_.push_back(indices_[k].degree());
        lookup_.emplace_back(key(indices_[k].exponents()), static_cast<std::uint32_t>(k));
    }
    std::sort(lookup_.begin(), lookup_.end());

    std::vector<int> sum(static_cast<std::size_t>(dim));
    for (std::size_t a = 0; a < indices_.size(); ++a) {
        for (std::size_t b = 0; b < indices_.size(); ++b) {
            if (degree_[a] + degree_[b] > order) break;  // b sorted by degree
            for (int i = 0; i < dim; ++i) sum[static_cast<std::size_t>(i)] = indices_[a][i] + indices_[b][i];
            const auto it = std::lower_bound(lookup_.begin(), lookup_.end(), std::make_pair(key(sum), std::uint32_t{0}));
            products_.push_back({static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b), it->second});
        }
    }

    derivative_.resize(static_cast<std::size_t>(dim));
    if (order > 0) {
        for (int var = 0; var < dim; ++var) {
            for (std::size_t dst = 0; dst < prefix_[static_cast<std::size_t>(order - 1)]; ++dst) {
                std::vector<int> e = indices_[dst].exponents();
                const int before = e[static_cast<std::size_t>(var)];
                e[static_cast<std::size_t>(var)] += 1;
                const auto it = std::lower_bound(lookup_.begin(), lookup_.end(), std::make_pair(key(e), std::uint32_t{0}));
                derivative_[static_cast<std::size_t>(var)].push_back(
                    {it->second, static_cast<std::uint32_t>(dst), static_cast<double>(before + 1)});
            }
        }
    }
}

std::uint64_t JetContext::key(const std::vector<int>& e) const {
    std::uint64_t k = 0;
    for (int x : e) k = k * static_cast<std::uint64_t>(order_ + 2) + static_cast<std::uint64_t>(x);
    return k;
}

const JetContext& JetContext::get(int dim, int order) {
    static std::mutex mu;
    static std::map<std::pair<int, int>, std::unique_ptr<JetContext>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto& slot = cache[{dim, order}];
    if (!slot) {
        try {
            slot = std::make_unique<JetContext>(dim, order);
        } catch (...) {
            cache.erase({dim, order});
            throw;
        }
    }
    return *slot;
}

std::size_t JetContext::size_at(int k) const {
    if (k < 0 || k > order_) throw ContextError("order outside jet context");
    return prefix_[static_cast<std::size_t>(k)];
}

std::size_t JetContext::position(const MultiIndex& m) const {
    if (m.size() != dim_) throw ContextError("multi-index length does not match jet dimension");
    if (m.degree() > order_) throw ContextError("multi-index degree exceeds jet order");
    const auto it = std::lower_bound(lookup_.begin(), lookup_.end(), std::make_pair(key(m.exponents()), std::uint32_t{0}));
    return it->second;
}

std::span<const JetContext::Shift> JetContext::derivative(int var) const {
    if (var < 0 || var >= dim_) throw ContextError("derivative variable out of range");
    return derivative_[static_cast<std::size_t>(var)];
}

Jet lift_var(int i, double value, const JetContext& ctx) {
    if (i < 0 || i >= ctx.dim()) throw ContextError("lift_var index out of range");
    Jet r(ctx, value);
    if (ctx.order() >= 1) r[static_cast<std::size_t>(1 + i)] = 1.0;
    return r;
}

namespace {

std::vector<double> falling_power_series(double a0, double p, int n) {
    // Taylor coefficients of x^p at a0: binom(p, k) a0^(p-k).
    std::vector<double> s(static_cast<std::size_t>(n) + 1);
    double binom = 1.0;
    for (int k = 0; k <= n; ++k) {
        s[static_cast<std::size_t>(k)] = binom * std::pow(a0, p - k);
        binom *= (p - k) / (k + 1);
    }
    return s;
}

}  // namespace

Jet sqrt(const Jet& a) {
    const double a0 = a.value();
    if (!(a0 > 0.0)) throw DomainError("sqrt of a jet with non-positive constant term");
    const auto s = falling_power_series(a0, 0.5, a.order());
    return compose<double, double>(s, a);
}

Jet pow(const Jet& a, double p) {
    const double a0 = a.value();
    if (p == std::floor(p) && std::abs(p) < 1e9) {
        if (p >= 0 || a0 != 0.0) return powi(a, static_cast<long>(p));
    }
    if (!(a0 > 0.0)) throw DomainError("fractional power of a jet with non-positive constant term");
    const auto s = falling_power_series(a0, p, a.order());
    return compose<double, double>(s, a);
}

Jet exp(const Jet& a) {
    std::vector<double> s(static_cast<std::size_t>(a.order()) + 1);
    double c = std::exp(a.value());
    for (std::size_t k = 0; k < s.size(); ++k) {
        s[k] = c;
        c /= static_cast<double>(k + 1);
    }
    return compose<double, double>(s, a);
}

CJet exp(const CJet& a) {
    std::vector<std::complex<double>> s(static_cast<std::size_t>(a.order()) + 1);
    std::complex<double> c = std::exp(a.value());
    for (std::size_t k = 0; k < s.size(); ++k) {
        s[k] = c;
        c /= static_cast<double>(k + 1);
    }
    return compose<std::complex<double>, std::complex<double>>(s, a);
}

CJet expi(const Jet& theta) {
    std::vector<std::complex<double>> s(static_cast<std::size_t>(theta.order()) + 1);
    std::complex<double> c = std::polar(1.0, theta.value());
    const std::complex<double> i(0.0, 1.0);
    for (std::size_t k = 0; k < s.size(); ++k) {
        s[k] = c;
        c *= i / static_cast<double>(k + 1);
    }
    return compose<std::complex<double>, double>(s, theta);
}

Jet log(const Jet& a) {
    const double a0 = a.value();
    if (!(a0 > 0.0)) throw DomainError("log of a jet with non-positive constant term");
    std::vector<double> s(static_cast<std::size_t>(a.order()) + 1);
    s[0] = std::log(a0);
    double p = 1.0;
    for (std::size_t k = 1; k < s.size(); ++k) {
        p /= a0;
        s[k] = ((k % 2 == 1) ? p : -p) / static_cast<double>(k);
    }
    return compose<double, double>(s, a);
}

namespace {

Jet trig(const Jet& a, double phase) {
    std::vector<double> s(static_cast<std::size_t>(a.order()) + 1);
    double fact = 1.0;
    for (std::size_t k = 0; k < s.size(); ++k) {
        if (k > 0) fact *= static_cast<double>(k);
        s[k] = std::sin(a.value() + phase + static_cast<double>(k) * std::numbers::pi / 2) / fact;
    }
    return compose<double, double>(s, a);
}

}  // namespace

Jet sin(const Jet& a) { return trig(a, 0.0); }
Jet cos(const Jet& a) { return trig(a, std::numbers::pi / 2); }

}  // namespace cpq
