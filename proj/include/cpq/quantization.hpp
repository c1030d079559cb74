#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cpq/integrals.hpp"

namespace cpq {

/// Coefficient in front of (nabla_j B^{jk}) nabla_k in the commutator formula.
inline constexpr double kMasterCoefficient = 2.0 / 3.0;

/**
 * @brief Symmetric-ordered operator of a momentum polynomial of degree <= 3.
 *
 * deg 0: U f; deg 1: (i/2)(V^j nabla_j f + nabla_j(V^j f)); deg 2: -nabla_j(K^{jk} nabla_k f);
 * deg 3: -(i/2)(nabla_a(T^{abc} nabla_b nabla_c f) + nabla_a nabla_b(T^{abc} nabla_c f)).
 * Each derivative costs one jet order, so a degree-2 operator maps order N to N - 2.
 */
struct DiffOperator {
    Observable symbol;
    ConnectionEval conn;
};

/// Throws DegreeOverflowError above degree 3.
DiffOperator quantize(const Observable& obs, const ConnectionEval& conn);
/// (op f) as a jet at the same point; throws ContextError if f has too little order.
CJet apply_operator(const DiffOperator& op, const CJet& f);
/// op1(op2 f) - op2(op1 f).
CJet commutator_apply(const DiffOperator& op1, const DiffOperator& op2, const CJet& f);
/// |[op1, op2] f| at the point, scaled by max(|op1 op2 f|, |op2 op1 f|) and the largest jet coefficient of f.
Residual commutator_residual(const DiffOperator& op1, const DiffOperator& op2, const CJet& f);

/// nabla_a nabla_b f as a (0,2) tensor.
Tensor hessian(const Jet& f, const ConnectionEval& conn);

struct BTensorEval {
    Tensor B;     ///< B^{jk}, antisymmetric
    Tensor divB;  ///< nabla_j B^{jk}
};

/// Background geometry shared by the commutator checks.
struct GeometryEval {
    MetricEval metric;
    ConnectionEval conn;
    CurvatureEval curv;
};
GeometryEval geometry_of(const StructureEval& se);

/// Five-term B tensor for quadratic P, Q (rank-2 contravariant).
BTensorEval b_tensor(const Tensor& P, const Tensor& Q, const GeometryEval& geo);
/// B with the two curvature terms dropped (the reduced form).
BTensorEval b_tensor_reduced(const Tensor& P, const Tensor& Q, const GeometryEval& geo);

struct MasterIdentity {
    std::complex<double> lhs;      ///< [P^, Q^] f
    std::complex<double> bracket;  ///< i quantize({P, Q}) f
    std::complex<double> b_term;   ///< (nabla_j B^{jk}) nabla_k f, without the coefficient
    Residual residual;
};
MasterIdentity commutator_formula_check(const Tensor& P, const Tensor& Q, const CJet& f, const GeometryEval& geo);

struct MixedResiduals {
    Residual commutator;  ///< [I^(t), L^(s)] f
    Residual lie;         ///< L_V K
    Residual divergence;  ///< nabla_l V^l
};
MixedResiduals mixed_IL_commutator_check(const StructureEval& se, double t, double s, const CJet& f);
/// Same with explicit K and V (negative controls substitute a non-Killing V).
MixedResiduals mixed_IL_commutator_check(const StructureEval& se, const Tensor& K, const Tensor& V, const CJet& f);

struct LemmaResiduals {
    Residual hessian;       ///< A^j_l lambda_{j,k} - A^j_k lambda_{j,l}
    Residual curvature_A;   ///< R^r_{ijk} A_{rl} S^{ij} - R^r_{ijl} A_{rk} S^{ij}
    Residual curvature_K;   ///< 2 K(v)^{l[j} R^{k]}_{mnl} K(w)^{mn}
    Residual ricci;         ///< (v Id - A)^{-1} Ric - Ric (v Id - A)^{-1}
    Residual reduced_div;   ///< divergence of the reduced B
};
/// Needs se at order >= 3; S defaults to K(w).
LemmaResiduals lemma_diagnostics(const StructureEval& se, double v, double w, const Tensor* S = nullptr);
/// The A-curvature identity for a given S^{ij}.
Residual curvature_A_residual(const StructureEval& se, const Tensor& S, const CurvatureEval& curv);

struct PotentialOperatorResiduals {
    Residual QQ, QL, LL;
};
/// Q^(t) = I^(t) + U(t), L^(t) = i V(t)^j nabla_j.
PotentialOperatorResiduals potential_operator_checks(const StructureEval& se, const Potential& pot, double s, double t, const CJet& f);

DiffOperator operator_I(const StructureEval& se, double t);
DiffOperator operator_L(const StructureEval& se, double t);
DiffOperator operator_Q(const StructureEval& se, const Potential& pot, double t);

/**
 * @brief Seeded test functions.
 *
 * Cubic polynomial in the coordinates, exp(a.x), sin(a.x) cos(b.x) and
 * exp(i w.t) exp(-|x - x0|^2 / 2) where t are the phase coordinates (all
 * coordinates when none are given) and x the remaining ones.
 */
struct TestFunction {
    std::string name;
    std::function<CJet(std::span<const double>, const JetContext&)> eval;
};
std::vector<TestFunction> test_battery(int dim, std::vector<int> phase_coords, std::uint64_t seed);
/// Indices of the t1..tr coordinates of a structure (empty for projective ones).
std::vector<int> phase_coordinates(const Structure& s);

/// Random symmetric quadratic observable with quadratic-polynomial coefficients.
Tensor random_quadratic(std::span<const double> x, const JetContext& ctx, std::uint64_t seed);

}  // namespace cpq
