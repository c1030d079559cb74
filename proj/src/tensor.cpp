#include "cpq/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cpq {

Tensor::Tensor(int dim, int upper, int lower, const JetContext& ctx) : dim_(dim), upper_(upper), lower_(lower) {
    if (dim < 1 || upper < 0 || lower < 0) throw ContextError("invalid tensor shape");
    std::size_t n = 1;
    for (int r = 0; r < upper + lower; ++r) n *= static_cast<std::size_t>(dim);
    data_.assign(n, Jet(ctx));
}

int Tensor::order() const {
    int o = data_.at(0).order();
    for (const auto& j : data_) o = std::min(o, j.order());
    return o;
}

std::size_t Tensor::flat(std::initializer_list<int> idx) const {
    if (static_cast<int>(idx.size()) != rank()) throw ContextError("tensor index count does not match rank");
    std::size_t k = 0;
    for (int i : idx) {
        if (i < 0 || i >= dim_) throw ContextError("tensor index out of range");
        k = k * static_cast<std::size_t>(dim_) + static_cast<std::size_t>(i);
    }
    return k;
}

std::size_t Tensor::flat(const std::vector<int>& idx) const {
    if (static_cast<int>(idx.size()) != rank()) throw ContextError("tensor index count does not match rank");
    std::size_t k = 0;
    for (int i : idx) k = k * static_cast<std::size_t>(dim_) + static_cast<std::size_t>(i);
    return k;
}

std::vector<int> Tensor::unflat(std::size_t k) const {
    std::vector<int> idx(static_cast<std::size_t>(rank()));
    for (int r = rank() - 1; r >= 0; --r) {
        idx[static_cast<std::size_t>(r)] = static_cast<int>(k % static_cast<std::size_t>(dim_));
        k /= static_cast<std::size_t>(dim_);
    }
    return idx;
}

Tensor Tensor::truncated(int order) const {
    Tensor r(*this);
    for (auto& j : r.data_) j = j.truncated(order);
    return r;
}

std::vector<double> Tensor::values() const {
    std::vector<double> v(data_.size());
    for (std::size_t k = 0; k < data_.size(); ++k) v[k] = data_[k].value();
    return v;
}

double Tensor::max_abs() const {
    double m = 0.0;
    for (const auto& j : data_) m = std::max(m, std::abs(j.value()));
    return m;
}

Tensor& Tensor::operator+=(const Tensor& o) {
    if (o.size() != size()) throw ContextError("tensor shape mismatch");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
    return *this;
}

Tensor& Tensor::operator-=(const Tensor& o) {
    if (o.size() != size()) throw ContextError("tensor shape mismatch");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
    return *this;
}

Tensor& Tensor::operator*=(double s) {
    for (auto& j : data_) j *= s;
    return *this;
}

Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
Tensor operator-(Tensor a, const Tensor& b) { return a -= b; }
Tensor operator*(Tensor a, double s) { return a *= s; }

Tensor scale(const Tensor& a, const Jet& s) {
    Tensor r(a);
    for (std::size_t k = 0; k < r.size(); ++k) r[k] = a[k] * s;
    return r;
}

Tensor identity_matrix(int dim, const JetContext& ctx, int upper, int lower) {
    Tensor r(dim, upper, lower, ctx);
    for (int i = 0; i < dim; ++i) r(i, i) = Jet(ctx, 1.0);
    return r;
}

Tensor matmul(const Tensor& a, const Tensor& b, int upper, int lower) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim() != b.dim()) throw ContextError("matmul expects square matrices");
    const int d = a.dim();
    const JetContext& ctx = a.order() <= b.order() ? a.context().with_order(a.order()) : b.context().with_order(b.order());
    Tensor r(d, upper, lower, ctx);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            Jet s(ctx);
            for (int k = 0; k < d; ++k) s += a(i, k) * b(k, j);
            r(i, j) = s;
        }
    return r;
}

Tensor transpose(const Tensor& a) {
    if (a.rank() != 2) throw ContextError("transpose expects a matrix");
    Tensor r(a.dim(), a.upper(), a.lower(), a.context());
    for (int i = 0; i < a.dim(); ++i)
        for (int j = 0; j < a.dim(); ++j) r(i, j) = a(j, i);
    return r;
}

Tensor invert_matrix_jets(const Tensor& m, int upper, int lower) {
    if (m.rank() != 2) throw ContextError("inverse expects a matrix");
    const int d = m.dim();
    const JetContext& ctx = m.context().with_order(m.order());
    std::vector<Jet> a(static_cast<std::size_t>(d * d)), b(static_cast<std::size_t>(d * d), Jet(ctx));
    double scale_ = 0.0;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            a[static_cast<std::size_t>(i * d + j)] = m(i, j).truncated(ctx.order());
            scale_ = std::max(scale_, std::abs(m(i, j).value()));
        }
    for (int i = 0; i < d; ++i) b[static_cast<std::size_t>(i * d + i)] = Jet(ctx, 1.0);
    auto A = [&](int i, int j) -> Jet& { return a[static_cast<std::size_t>(i * d + j)]; };
    auto B = [&](int i, int j) -> Jet& { return b[static_cast<std::size_t>(i * d + j)]; };
    const double tol = 1e-12 * std::max(scale_, 1e-300);
    for (int col = 0; col < d; ++col) {
        int piv = col;
        for (int r = col + 1; r < d; ++r)
            if (std::abs(A(r, col).value()) > std::abs(A(piv, col).value())) piv = r;
        if (!(std::abs(A(piv, col).value()) > tol)) throw SingularError("matrix constant term is singular");
        if (piv != col)
            for (int j = 0; j < d; ++j) {
                std::swap(A(piv, j), A(col, j));
                std::swap(B(piv, j), B(col, j));
            }
        const Jet pinv = inv(A(col, col));
        for (int j = 0; j < d; ++j) {
            A(col, j) = A(col, j) * pinv;
            B(col, j) = B(col, j) * pinv;
        }
        for (int r = 0; r < d; ++r) {
            if (r == col) continue;
            const Jet f = A(r, col);
            bool zero = true;
            for (double c : f.coeffs()) zero = zero && c == 0.0;
            if (zero) continue;
            for (int j = 0; j < d; ++j) {
                A(r, j) -= f * A(col, j);
                B(r, j) -= f * B(col, j);
            }
        }
    }
    Tensor r(d, upper, lower, ctx);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) r(i, j) = B(i, j);
    return r;
}

namespace {

Jet cofactor_det(const std::vector<Jet>& a, int d, const JetContext& ctx) {
    if (d == 1) return a[0];
    Jet sum(ctx);
    for (int c = 0; c < d; ++c) {
        std::vector<Jet> minor;
        minor.reserve(static_cast<std::size_t>((d - 1) * (d - 1)));
        for (int i = 1; i < d; ++i)
            for (int j = 0; j < d; ++j)
                if (j != c) minor.push_back(a[static_cast<std::size_t>(i * d + j)]);
        const Jet term = a[static_cast<std::size_t>(c)] * cofactor_det(minor, d - 1, ctx);
        if (c % 2 == 0) sum += term;
        else sum -= term;
    }
    return sum;
}

}  // namespace

Jet det_jets(const Tensor& m) {
    if (m.rank() != 2) throw ContextError("determinant expects a matrix");
    const int d = m.dim();
    const JetContext& ctx = m.context().with_order(m.order());
    std::vector<Jet> a(static_cast<std::size_t>(d * d));
    double scale_ = 0.0;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            a[static_cast<std::size_t>(i * d + j)] = m(i, j).truncated(ctx.order());
            scale_ = std::max(scale_, std::abs(m(i, j).value()));
        }
    const std::vector<Jet> original = a;
    auto A = [&](int i, int j) -> Jet& { return a[static_cast<std::size_t>(i * d + j)]; };
    Jet det(ctx, 1.0);
    const double tol = 1e-12 * std::max(scale_, 1e-300);
    for (int col = 0; col < d; ++col) {
        int piv = col;
        for (int r = col + 1; r < d; ++r)
            if (std::abs(A(r, col).value()) > std::abs(A(piv, col).value())) piv = r;
        if (!(std::abs(A(piv, col).value()) > tol)) return cofactor_det(original, d, ctx);
        if (piv != col) {
            for (int j = 0; j < d; ++j) std::swap(A(piv, j), A(col, j));
            det = -det;
        }
        det = det * A(col, col);
        const Jet pinv = inv(A(col, col));
        for (int r = col + 1; r < d; ++r) {
            const Jet f = A(r, col) * pinv;
            for (int j = col; j < d; ++j) A(r, j) -= f * A(col, j);
        }
    }
    return det;
}

std::vector<double> characteristic_polynomial(const std::vector<double>& m, int n) {
    std::vector<double> c(static_cast<std::size_t>(n) + 1, 0.0);
    c[static_cast<std::size_t>(n)] = 1.0;
    std::vector<double> mk(static_cast<std::size_t>(n * n), 0.0), tmp(mk.size());
    for (int k = 1; k <= n; ++k) {
        // M_k = A M_{k-1} + c_{n-k+1} I
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                double s = 0.0;
                for (int l = 0; l < n; ++l) s += m[static_cast<std::size_t>(i * n + l)] * mk[static_cast<std::size_t>(l * n + j)];
                tmp[static_cast<std::size_t>(i * n + j)] = s + (i == j ? c[static_cast<std::size_t>(n - k + 1)] : 0.0);
            }
        mk = tmp;
        double tr = 0.0;
        for (int i = 0; i < n; ++i)
            for (int l = 0; l < n; ++l) tr += m[static_cast<std::size_t>(i * n + l)] * mk[static_cast<std::size_t>(l * n + i)];
        c[static_cast<std::size_t>(n - k)] = -tr / k;
    }
    return c;
}

Tensor symmetrize(const Tensor& t) {
    const int r = t.rank();
    Tensor out(t);
    if (r <= 1) return out;
    std::vector<int> perm(static_cast<std::size_t>(r));
    for (std::size_t k = 0; k < t.size(); ++k) {
        const std::vector<int> idx = t.unflat(k);
        std::iota(perm.begin(), perm.end(), 0);
        Jet sum(t[k].context().with_order(t.order()));
        int count = 0;
        do {
            std::vector<int> p(idx.size());
            for (std::size_t a = 0; a < idx.size(); ++a) p[a] = idx[static_cast<std::size_t>(perm[a])];
            sum += t[t.flat(p)];
            ++count;
        } while (std::next_permutation(perm.begin(), perm.end()));
        out[k] = sum * (1.0 / count);
    }
    return out;
}

Tensor antisymmetrize(const Tensor& t) {
    if (t.rank() != 2) throw ContextError("antisymmetrize expects a rank-2 tensor");
    Tensor out(t);
    for (int j = 0; j < t.dim(); ++j)
        for (int k = 0; k < t.dim(); ++k) out(j, k) = (t(j, k) - t(k, j)) * 0.5;
    return out;
}

}  // namespace cpq
