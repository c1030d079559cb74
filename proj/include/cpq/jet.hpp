#pragma once

#include <algorithm>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <type_traits>
#include <utility>
#include <vector>

#include "cpq/errors.hpp"

namespace cpq {

/** @brief Exponent vector of a monomial, one entry per variable. */
class MultiIndex {
public:
    MultiIndex() = default;
    explicit MultiIndex(std::vector<int> exponents);
    MultiIndex(std::initializer_list<int> exponents) : MultiIndex(std::vector<int>(exponents)) {}

    static MultiIndex zero(int dim) { return MultiIndex(std::vector<int>(static_cast<std::size_t>(dim), 0)); }
    static MultiIndex unit(int dim, int i);

    int size() const { return static_cast<int>(e_.size()); }
    int operator[](int i) const { return e_[static_cast<std::size_t>(i)]; }
    int degree() const;
    /// Product of the factorials of the exponents.
    double factorial() const;
    const std::vector<int>& exponents() const { return e_; }

    bool operator==(const MultiIndex&) const = default;

private:
    std::vector<int> e_;
};

/**
 * @brief Enumeration of all multi-indices of total degree <= order.
 *
 * Storage is graded lexicographic: by total degree, then lexicographically
 * descending within a degree, so that (2,0) < (1,1) < (0,2). Because the
 * order is graded, the coefficients of a lower-order context are a prefix
 * of those of a higher-order one; mixed-order arithmetic relies on this.
 * Contexts are interned and live for the whole program.
 */
class JetContext {
public:
    struct Product {
        std::uint32_t a;
        std::uint32_t b;
        std::uint32_t out;
    };
    struct Shift {
        std::uint32_t src;
        std::uint32_t dst;
        double factor;
    };

    static const JetContext& get(int dim, int order);

    int dim() const { return dim_; }
    int order() const { return order_; }
    std::size_t size() const { return indices_.size(); }
    /// Number of monomials with degree <= k.
    std::size_t size_at(int k) const;
    const MultiIndex& multi_index(std::size_t pos) const { return indices_[pos]; }
    std::size_t position(const MultiIndex& m) const;
    int degree_of(std::size_t pos) const { return degree_[pos]; }

    /// Pairs (a, b) with deg a + deg b <= order and their product slot.
    std::span<const Product> products() const { return products_; }
    /// Coefficient map of d/dx_var into the context of order - 1.
    std::span<const Shift> derivative(int var) const;
    const JetContext& with_order(int order) const { return get(dim_, order); }

    JetContext(int dim, int order);
    JetContext(const JetContext&) = delete;
    JetContext& operator=(const JetContext&) = delete;

private:
    std::uint64_t key(const std::vector<int>& e) const;

    int dim_;
    int order_;
    std::vector<MultiIndex> indices_;
    std::vector<int> degree_;
    std::vector<std::size_t> prefix_;
    std::vector<std::pair<std::uint64_t, std::uint32_t>> lookup_;
    std::vector<Product> products_;
    std::vector<std::vector<Shift>> derivative_;
};

template <class T>
class BasicJet;

using Jet = BasicJet<double>;
using CJet = BasicJet<std::complex<double>>;

template <class T>
struct is_scalar_like : std::bool_constant<std::is_arithmetic_v<T>> {};
template <class T>
struct is_scalar_like<std::complex<T>> : std::true_type {};
template <class T>
inline constexpr bool is_scalar_like_v = is_scalar_like<T>::value;

/**
 * @brief Truncated multivariate Taylor polynomial.
 *
 * Coefficient k holds (d^alpha f)(x0) / alpha! for the k-th multi-index alpha of
 * the context. Binary operations between jets of different order truncate to
 * the lower order; differing dimensions are an error.
 */
template <class T>
class BasicJet {
public:
    using value_type = T;

    BasicJet() = default;
    explicit BasicJet(const JetContext& ctx, T constant = T{}) : ctx_(&ctx), c_(ctx.size(), T{}) { c_[0] = constant; }
    BasicJet(const JetContext& ctx, std::vector<T> coeffs) : ctx_(&ctx), c_(std::move(coeffs)) {
        if (c_.size() != ctx.size()) throw ContextError("coefficient count does not match jet context");
    }
    template <class U>
        requires(!std::is_same_v<U, T> && std::is_convertible_v<U, T>)
    explicit BasicJet(const BasicJet<U>& other) : ctx_(&other.context()), c_(other.coeffs().begin(), other.coeffs().end()) {}

    bool valid() const { return ctx_ != nullptr; }
    const JetContext& context() const {
        if (!ctx_) throw ContextError("use of an empty jet");
        return *ctx_;
    }
    int dim() const { return context().dim(); }
    int order() const { return context().order(); }

    T value() const { return c_.at(0); }
    std::span<const T> coeffs() const { return c_; }
    std::span<T> coeffs() { return c_; }
    T& operator[](std::size_t k) { return c_[k]; }
    const T& operator[](std::size_t k) const { return c_[k]; }

    BasicJet truncated(int order) const {
        const JetContext& lo = context().with_order(order);
        if (order > this->order()) throw ContextError("cannot raise the order of a jet");
        return BasicJet(lo, std::vector<T>(c_.begin(), c_.begin() + static_cast<std::ptrdiff_t>(lo.size())));
    }

    BasicJet operator-() const {
        BasicJet r(*this);
        for (auto& x : r.c_) x = -x;
        return r;
    }

    template <class S>
        requires is_scalar_like_v<S>
    BasicJet& operator*=(S s) {
        for (auto& x : c_) x *= static_cast<T>(s);
        return *this;
    }
    template <class S>
        requires is_scalar_like_v<S>
    BasicJet& operator+=(S s) {
        c_.at(0) += static_cast<T>(s);
        return *this;
    }
    BasicJet& operator+=(const BasicJet& o) { return accumulate(o, T(1)); }
    BasicJet& operator-=(const BasicJet& o) { return accumulate(o, T(-1)); }

private:
    BasicJet& accumulate(const BasicJet& o, T sign) {
        if (!valid()) {
            *this = o;
            if (sign != T(1)) *this = -*this;
            return *this;
        }
        if (o.dim() != dim()) throw ContextError("jet context mismatch (dimension)");
        if (o.order() < order()) *this = truncated(o.order());
        for (std::size_t k = 0; k < c_.size(); ++k) c_[k] += sign * o.c_[k];
        return *this;
    }

    const JetContext* ctx_ = nullptr;
    std::vector<T> c_;
};

namespace detail {

inline const JetContext& common_context(const JetContext& a, const JetContext& b) {
    if (a.dim() != b.dim()) throw ContextError("jet context mismatch (dimension)");
    return a.order() <= b.order() ? a : b;
}

}  // namespace detail

template <class T>
struct is_complex : std::false_type {};
template <class T>
struct is_complex<std::complex<T>> : std::true_type {};

/// Result scalar of mixing A and B: complex<double> if either is complex, else double.
template <class A, class B>
using jet_common_t = std::conditional_t<is_complex<A>::value || is_complex<B>::value, std::complex<double>, double>;

template <class A, class B>
BasicJet<jet_common_t<A, B>> operator+(const BasicJet<A>& a, const BasicJet<B>& b) {
    using R = jet_common_t<A, B>;
    const JetContext& ctx = detail::common_context(a.context(), b.context());
    BasicJet<R> r(ctx);
    for (std::size_t k = 0; k < ctx.size(); ++k) r[k] = R(a[k]) + R(b[k]);
    return r;
}

template <class A, class B>
BasicJet<jet_common_t<A, B>> operator-(const BasicJet<A>& a, const BasicJet<B>& b) {
    using R = jet_common_t<A, B>;
    const JetContext& ctx = detail::common_context(a.context(), b.context());
    BasicJet<R> r(ctx);
    for (std::size_t k = 0; k < ctx.size(); ++k) r[k] = R(a[k]) - R(b[k]);
    return r;
}

/// Truncated Cauchy product.
template <class A, class B>
BasicJet<jet_common_t<A, B>> operator*(const BasicJet<A>& a, const BasicJet<B>& b) {
    using R = jet_common_t<A, B>;
    const JetContext& ctx = detail::common_context(a.context(), b.context());
    BasicJet<R> r(ctx);
    for (const auto& p : ctx.products()) r[p.out] += R(a[p.a] * b[p.b]);
    return r;
}

template <class T, class S>
    requires is_scalar_like_v<S>
BasicJet<jet_common_t<T, S>> operator*(const BasicJet<T>& a, S s) {
    BasicJet<jet_common_t<T, S>> r(a);
    r *= s;
    return r;
}
template <class T, class S>
    requires is_scalar_like_v<S>
BasicJet<jet_common_t<T, S>> operator*(S s, const BasicJet<T>& a) {
    return a * s;
}
template <class T, class S>
    requires is_scalar_like_v<S>
BasicJet<jet_common_t<T, S>> operator+(const BasicJet<T>& a, S s) {
    BasicJet<jet_common_t<T, S>> r(a);
    r += s;
    return r;
}
template <class T, class S>
    requires is_scalar_like_v<S>
BasicJet<jet_common_t<T, S>> operator+(S s, const BasicJet<T>& a) {
    return a + s;
}
template <class T, class S>
    requires is_scalar_like_v<S>
BasicJet<jet_common_t<T, S>> operator-(const BasicJet<T>& a, S s) {
    return a + (-s);
}
template <class T, class S>
    requires is_scalar_like_v<S>
BasicJet<jet_common_t<T, S>> operator-(S s, const BasicJet<T>& a) {
    return (-a) + s;
}
template <class T, class S>
    requires is_scalar_like_v<S>
BasicJet<jet_common_t<T, S>> operator/(const BasicJet<T>& a, S s) {
    return a * (jet_common_t<T, S>(1) / jet_common_t<T, S>(s));
}

/// Coordinate function x_i at the given value.
Jet lift_var(int i, double value, const JetContext& ctx);
inline Jet constant_jet(double value, const JetContext& ctx) { return Jet(ctx, value); }

/**
 * @brief Compose a power series with a jet.
 *
 * series[k] is the k-th Taylor coefficient of a univariate f at a.value();
 * the result is sum_k series[k] (a - a0)^k truncated at the jet order.
 */
template <class S, class T>
BasicJet<jet_common_t<S, T>> compose(std::span<const S> series, const BasicJet<T>& a) {
    using R = jet_common_t<S, T>;
    BasicJet<T> shifted(a);
    shifted[0] = T{};
    const int n = std::min<int>(a.order(), static_cast<int>(series.size()) - 1);
    BasicJet<R> r(a.context(), R(series[static_cast<std::size_t>(n)]));
    for (int k = n - 1; k >= 0; --k) {
        r = r * shifted;
        r[0] += R(series[static_cast<std::size_t>(k)]);
    }
    return r;
}

template <class T>
BasicJet<T> inv(const BasicJet<T>& a) {
    const T a0 = a.value();
    if (a0 == T{}) throw SingularError("inverse of a jet with zero constant term");
    std::vector<T> s(static_cast<std::size_t>(a.order()) + 1);
    T p = T(1) / a0;
    for (std::size_t k = 0; k < s.size(); ++k) {
        s[k] = (k % 2 == 0) ? p : -p;
        p /= a0;
    }
    return compose<T, T>(s, a);
}

template <class A, class B>
BasicJet<jet_common_t<A, B>> operator/(const BasicJet<A>& a, const BasicJet<B>& b) {
    return a * inv(b);
}
template <class T, class S>
    requires is_scalar_like_v<S>
BasicJet<jet_common_t<T, S>> operator/(S s, const BasicJet<T>& a) {
    return inv(a) * s;
}

/// Integer power by repeated squaring; negative exponents invert first.
template <class T>
BasicJet<T> powi(const BasicJet<T>& a, long n) {
    if (n < 0) return powi(inv(a), -n);
    BasicJet<T> result(a.context(), T(1));
    BasicJet<T> base(a);
    while (n > 0) {
        if (n & 1) result = result * base;
        n >>= 1;
        if (n > 0) base = base * base;
    }
    return result;
}

Jet sqrt(const Jet& a);
Jet exp(const Jet& a);
Jet log(const Jet& a);
Jet sin(const Jet& a);
Jet cos(const Jet& a);
/// Real power; requires a positive constant term unless p is a non-negative integer.
Jet pow(const Jet& a, double p);
CJet exp(const CJet& a);
/// exp(i * theta) for a real jet theta.
CJet expi(const Jet& theta);

template <class T>
BasicJet<T> square(const BasicJet<T>& a) {
    return a * a;
}

/// d/dx_var; the result has order one less than the input.
template <class T>
BasicJet<T> derivative(const BasicJet<T>& a, int var) {
    const JetContext& ctx = a.context();
    if (var < 0 || var >= ctx.dim()) throw ContextError("derivative variable out of range");
    if (ctx.order() == 0) throw ContextError("cannot differentiate an order-0 jet");
    const JetContext& lo = ctx.with_order(ctx.order() - 1);
    BasicJet<T> r(lo);
    for (const auto& s : ctx.derivative(var)) r[s.dst] = a[s.src] * s.factor;
    return r;
}

/// Mixed partial derivative value at the expansion point.
template <class T>
T partial(const BasicJet<T>& a, const MultiIndex& m) {
    const JetContext& ctx = a.context();
    if (m.size() != ctx.dim()) throw ContextError("multi-index length does not match jet dimension");
    if (m.degree() > ctx.order()) throw ContextError("derivative degree exceeds jet order");
    return a[ctx.position(m)] * m.factorial();
}

/// Evaluate the Taylor polynomial at x0 + h.
template <class T>
T evaluate_at(const BasicJet<T>& a, std::span<const double> h) {
    const JetContext& ctx = a.context();
    T sum{};
    for (std::size_t k = 0; k < ctx.size(); ++k) {
        double mono = 1.0;
        const MultiIndex& m = ctx.multi_index(k);
        for (int i = 0; i < ctx.dim(); ++i)
            for (int e = 0; e < m[i]; ++e) mono *= h[static_cast<std::size_t>(i)];
        sum += a[k] * mono;
    }
    return sum;
}

inline Jet real_part(const CJet& a) {
    Jet r(a.context());
    for (std::size_t k = 0; k < r.coeffs().size(); ++k) r[k] = a[k].real();
    return r;
}
inline Jet imag_part(const CJet& a) {
    Jet r(a.context());
    for (std::size_t k = 0; k < r.coeffs().size(); ++k) r[k] = a[k].imag();
    return r;
}

}  // namespace cpq
