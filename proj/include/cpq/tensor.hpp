#pragma once

#include <array>
#include <initializer_list>
#include <vector>

#include "cpq/jet.hpp"

namespace cpq {

/**
 * @brief Dense coordinate tensor with jet entries.
 *
 * Components are stored row-major with all upper indices first, then the lower
 * ones: T^{a b}_{c} lives at ((a*d + b)*d + c). Valence is bookkeeping for
 * covariant differentiation; the linear-algebra helpers ignore it.
 */
class Tensor {
public:
    Tensor() = default;
    Tensor(int dim, int upper, int lower, const JetContext& ctx);

    int dim() const { return dim_; }
    int upper() const { return upper_; }
    int lower() const { return lower_; }
    int rank() const { return upper_ + lower_; }
    std::size_t size() const { return data_.size(); }
    /// Lowest jet order among the components.
    int order() const;
    const JetContext& context() const { return data_.at(0).context(); }

    Jet& operator[](std::size_t k) { return data_[k]; }
    const Jet& operator[](std::size_t k) const { return data_[k]; }
    Jet& at(std::initializer_list<int> idx) { return data_[flat(idx)]; }
    const Jet& at(std::initializer_list<int> idx) const { return data_[flat(idx)]; }
    Jet& operator()(int i) { return data_[static_cast<std::size_t>(i)]; }
    const Jet& operator()(int i) const { return data_[static_cast<std::size_t>(i)]; }
    Jet& operator()(int i, int j) { return data_[static_cast<std::size_t>(i * dim_ + j)]; }
    const Jet& operator()(int i, int j) const { return data_[static_cast<std::size_t>(i * dim_ + j)]; }
    Jet& operator()(int i, int j, int k) { return data_[static_cast<std::size_t>((i * dim_ + j) * dim_ + k)]; }
    const Jet& operator()(int i, int j, int k) const { return data_[static_cast<std::size_t>((i * dim_ + j) * dim_ + k)]; }
    Jet& operator()(int i, int j, int k, int l) {
        return data_[static_cast<std::size_t>(((i * dim_ + j) * dim_ + k) * dim_ + l)];
    }
    const Jet& operator()(int i, int j, int k, int l) const {
        return data_[static_cast<std::size_t>(((i * dim_ + j) * dim_ + k) * dim_ + l)];
    }

    std::size_t flat(std::initializer_list<int> idx) const;
    std::size_t flat(const std::vector<int>& idx) const;
    /// Multi-index of flat position k.
    std::vector<int> unflat(std::size_t k) const;

    Tensor truncated(int order) const;
    /// Constant terms, same layout.
    std::vector<double> values() const;
    /// Max |constant term| over components.
    double max_abs() const;

    Tensor& operator+=(const Tensor& o);
    Tensor& operator-=(const Tensor& o);
    Tensor& operator*=(double s);

private:
    int dim_ = 0;
    int upper_ = 0;
    int lower_ = 0;
    std::vector<Jet> data_;
};

Tensor operator+(Tensor a, const Tensor& b);
Tensor operator-(Tensor a, const Tensor& b);
Tensor operator*(Tensor a, double s);
Tensor scale(const Tensor& a, const Jet& s);

/// Square matrix helpers on rank-2 tensors. Valence of the result is given explicitly.
Tensor identity_matrix(int dim, const JetContext& ctx, int upper = 1, int lower = 1);
Tensor matmul(const Tensor& a, const Tensor& b, int upper, int lower);
Tensor transpose(const Tensor& a);

/// Inverse by Gaussian elimination with partial pivoting on constant terms.
Tensor invert_matrix_jets(const Tensor& m, int upper, int lower);
/// Determinant; falls back to cofactor expansion when the constant part is singular.
Jet det_jets(const Tensor& m);

/// Coefficients c_0..c_n of det(t Id - M0) for a numeric square matrix (c_n = 1).
std::vector<double> characteristic_polynomial(const std::vector<double>& m, int n);

/// Symmetrize over all indices of a fully contravariant or covariant tensor.
Tensor symmetrize(const Tensor& t);
/// Antisymmetric part ((T^{jk} - T^{kj}) / 2) of a rank-2 tensor.
Tensor antisymmetrize(const Tensor& t);

}  // namespace cpq
