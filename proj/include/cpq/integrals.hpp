#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cpq/structures.hpp"

namespace cpq {

/// Signed root prod (t - rho_i)^{m_i/2}; for projective structures the full det(t Id - A).
Jet sqrtdet_factor(const StructureEval& se, double t);
/// Degree of t -> K(t): n - 1 with 2n = dim (c-projective) or n = dim (projective).
int killing_degree(const StructureEval& se);
/// sqrtdet_factor * (t Id - A)^{-1} g^{-1} straight from the product formula.
Tensor killing_tensor_product(const StructureEval& se, double t);
/// Coefficients of t^0 .. t^{n-1}, interpolated away from the spectrum.
std::vector<Tensor> killing_coefficients(const StructureEval& se);
/// K(t); switches to the coefficient path within 1e-6 of an eigenvalue.
Tensor killing_tensor_K(const StructureEval& se, double t);
/// Projective K(t) = det(t Id - A)(t Id - A)^{-1} g^{-1}; se must be projective.
Tensor projective_killing_K(const StructureEval& se, double t);
/// V^j = J^j_k g^{ki} d_i sqrtdet(t); order drops by one.
Tensor killing_vector_V(const StructureEval& se, double t);

/// max |sym(nabla^i K^{jk})| for a contravariant symmetric 2-tensor.
Residual killing_tensor_residual(const Tensor& K, const StructureEval& se);
Residual killing_equation_residual(const StructureEval& se, double t);
/// nabla_i V_j + nabla_j V_i.
Residual killing_vector_residual(const Tensor& V, const StructureEval& se);
Residual divergence_residual(const Tensor& V, const StructureEval& se);
/// (L_V K)^{jk} = V^i d_i K^{jk} - d_i V^j K^{ik} - d_i V^k K^{ji}.
Tensor lie_derivative(const Tensor& V, const Tensor& K);

/**
 * @brief Polynomial in momenta, sum_d C_d^{i1..id} p_i1 .. p_id.
 *
 * coeff[d] is a symmetric contravariant tensor of rank d, or empty (size 0)
 * when that degree is absent. Degree 0 is stored as a rank-0 tensor.
 */
struct Observable {
    std::vector<Tensor> coeff;

    int degree() const;
    bool has(int d) const { return d < static_cast<int>(coeff.size()) && coeff[static_cast<std::size_t>(d)].size() > 0; }
    const Tensor& part(int d) const { return coeff.at(static_cast<std::size_t>(d)); }
    void set(int d, Tensor t);
    /// Value at momentum p (constant terms only).
    double value(std::span<const double> p) const;
    /// Largest constant-term magnitude among all coefficients.
    double max_abs() const;

    static Observable scalar(const Jet& u);
    static Observable vector(Tensor v);
    static Observable quadratic(Tensor k);
};
Observable operator+(const Observable& a, const Observable& b);
Observable operator*(const Observable& a, double s);

/// Canonical bracket at (x, p); scale is |dF| |dG| over phase space, which bounds it.
Residual poisson_bracket(const Observable& F, const Observable& G, std::span<const double> p);
/// The bracket as an observable; coefficient jets lose one order.
Observable poisson_observable(const Observable& F, const Observable& G);

Observable integral_I(const StructureEval& se, double t);
Observable integral_L(const StructureEval& se, double t);

/**
 * @brief Potential data f_i, one expression per distinct eigenvalue.
 *
 * Expressions may use the coordinate names and "rho", which is bound to the
 * eigenvalue the function belongs to.
 */
class Potential {
public:
    Potential(const Structure& s, std::vector<std::string> f);
    const std::vector<std::string>& sources() const { return src_; }
    /// f_i as jets at the evaluation point of se.
    std::vector<Jet> functions(const StructureEval& se) const;
    /// U(t) per the interpolation formula.
    Jet U(const StructureEval& se, double t) const;

private:
    std::vector<std::string> coords_, src_;
    std::vector<Expr> f_;
};

struct PotentialResiduals {
    Residual exactness;  ///< K(t) dU(s) - K(s) dU(t)
    Residual eigenform;  ///< df_i o A - rho_i df_i
    Residual killing;    ///< dU(t)(V(s))
};
PotentialResiduals potential_condition_residuals(const StructureEval& se, const Potential& pot, double s, double t);

/// Interpolation nodes away from the spectrum at the point.
std::vector<double> interpolation_nodes(const StructureEval& se, int count);
/**
 * @brief Coefficients of a polynomial family of tensors.
 *
 * Interpolates at the first degree + 1 nodes and checks the remaining ones;
 * throws DegreeOverflowError when a held-out node disagrees by more than 1e-8
 * relative.
 */
std::vector<Tensor> t_coefficients(const std::function<Tensor(double)>& family, int degree, std::span<const double> nodes);
/// Coefficient observables I_(l) + U_(l) (pot may be null) and L_(l).
std::vector<Observable> quadratic_coefficients(const StructureEval& se, const Potential* pot);
std::vector<Observable> linear_coefficients(const StructureEval& se);

}  // namespace cpq
