#pragma once

#include <array>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cpq/expr.hpp"
#include "cpq/geometry.hpp"
#include "cpq/sampling.hpp"
#include "json.hpp"

namespace cpq {

enum class Geometry { CProjective, Projective };

/// Constant-eigenvalue Kaehler block (g_c, omega_c, A_c = c Id) on coordinates y.
struct BlockSpec {
    double c = 0.0;
    int m = 2;
    std::vector<std::vector<std::string>> metric;  ///< m x m
    /// m x m Kaehler form components; may be empty for m = 2 (then sqrt|det g| dy1^dy2).
    std::vector<std::vector<std::string>> omega;
    /// alphas[i][q]: component of alpha_{i+1} along dy_q of this block.
    std::vector<std::vector<std::string>> alphas;
};

/**
 * @brief Declarative description of a compatible structure.
 *
 * c-projective structures use the normal form with real eigenvalues only:
 * coordinates are x1..xr (the chi_k), t1..tr, then y1..yM over all blocks in
 * order. Projective structures give (g, A) explicitly on named coordinates.
 */
struct StructureSpec {
    std::string name;
    Geometry geometry = Geometry::CProjective;

    int r = 0;
    std::vector<std::string> sigmas;
    std::vector<int> epsilons;
    std::vector<BlockSpec> blocks;

    std::vector<std::string> coordinates;
    std::vector<std::vector<std::string>> metric;
    std::vector<std::vector<std::string>> endomorphism;  ///< A^i_j
    std::vector<std::string> eigenvalues;
    std::vector<int> multiplicities;

    std::map<std::string, std::array<double, 2>> box;
};

/// Parse the JSON form; errors carry a JSON pointer below `where`.
StructureSpec spec_from_json(const nlohmann::json& j, const std::string& where = "");
nlohmann::json spec_to_json(const StructureSpec& s);

std::vector<std::string> builtin_names();
/// Throws ConfigError for an unknown name.
StructureSpec builtin_spec(std::string_view name);

/// Deliberate corruption used by negative controls.
struct Perturbation {
    enum class Target { None, A, J };
    Target target = Target::None;
    double eps = 0.0;
};
/// "A:1e-3" or "J:1e-3".
Perturbation parse_perturbation(std::string_view text);

/**
 * @brief All fields of a structure expanded as jets at one point.
 *
 * Every jet shares one context of dimension dim; derived quantities lose
 * one order per derivative taken.
 */
struct StructureEval {
    Geometry geometry = Geometry::CProjective;
    int dim = 0;
    int order = 0;
    std::vector<double> point;
    MetricEval metric;
    ConnectionEval conn;
    Tensor A;      ///< A^i_j
    Tensor J;      ///< J^i_j; empty for projective structures
    Tensor Omega;  ///< Omega_{ij} = J^k_i g_{kj}
    Jet lambda;
    Tensor dlambda;      ///< lambda_i
    Tensor dlambda_bar;  ///< J^j_i lambda_j
    /// Distinct eigenvalues: non-constant ones first, then block constants.
    std::vector<Jet> eigenvalues;
    std::vector<int> multiplicities;
    std::vector<char> constant;
    /// d sigma_k / d x_k for the non-constant eigenvalues (normal form only).
    std::vector<Jet> rho_prime;
};

/**
 * @brief Normal-form data in the frame (d chi, theta = dt + alpha, dy).
 *
 * T maps coordinate differentials to the coframe (theta_i = T^{t_i}_j dx^j); the
 * dual frame vectors are X_a = Tinv^j_a d_j. G, A and J are the frame components.
 */
struct NormalFrame {
    Tensor T, Tinv;
    Tensor G;  ///< g(X_a, X_b)
    Tensor A;  ///< A^a_b
    Tensor J;  ///< J^a_b
    std::vector<Jet> rho, rho_prime;
    std::vector<double> epsilons;
};

class Structure {
public:
    explicit Structure(StructureSpec spec, Perturbation p = {});

    const StructureSpec& spec() const { return spec_; }
    Geometry geometry() const { return spec_.geometry; }
    int dim() const { return static_cast<int>(coords_.size()); }
    const std::vector<std::string>& coordinates() const { return coords_; }
    int coordinate_index(std::string_view name) const;
    /// Non-constant eigenvalue count of the normal form (0 for projective specs).
    int r() const { return spec_.geometry == Geometry::CProjective ? spec_.r : 0; }
    /// Index of the first y coordinate of block b.
    int block_offset(std::size_t b) const { return block_offset_.at(b); }
    const std::array<double, 2>& range(int coord) const { return ranges_.at(static_cast<std::size_t>(coord)); }
    const Perturbation& perturbation() const { return perturb_; }

    StructureEval evaluate(std::span<const double> x, int order) const;
    /// Uniform point in the box.
    std::vector<double> sample(Rng& rng) const;
    /// Largest |d alpha_i - (-1)^i sum c^{r-i} omega| component at x.
    double alpha_closure_residual(std::span<const double> x) const;

    /// Parsed sigma_k (variable x_k).
    const Expr& sigma(int k) const { return sigma_.at(static_cast<std::size_t>(k)); }
    /// Block metric / form / alpha jets at a point (used by the separation layer).
    Tensor block_metric(std::size_t b, const JetEnv& env, const JetContext& ctx) const;
    Tensor block_omega(std::size_t b, const JetEnv& env, const JetContext& ctx) const;
    Jet alpha(std::size_t b, int i, int q, const JetEnv& env) const;
    JetEnv environment(std::span<const double> x, const JetContext& ctx) const;
    /// Frame data at x; c-projective specs only.
    NormalFrame normal_frame(std::span<const double> x, int order) const;

private:
    void validate();
    void build_projective_point(StructureEval& se, const JetEnv& env, const JetContext& ctx) const;
    NormalFrame frame_at(std::span<const double> x, const JetEnv& env, const JetContext& ctx) const;
    void build_normal_form_point(StructureEval& se, const JetEnv& env, const JetContext& ctx) const;

    StructureSpec spec_;
    Perturbation perturb_;
    std::vector<std::string> coords_;
    std::vector<std::array<double, 2>> ranges_;
    std::vector<int> block_offset_;
    std::vector<Expr> sigma_;
    std::vector<std::vector<std::vector<Expr>>> block_metric_, block_omega_, block_alpha_;
    std::vector<std::vector<Expr>> metric_, endo_;
    std::vector<Expr> eig_;
};

/// Raw max-norm residual and the magnitude it should be compared against.
struct Residual {
    double value = 0.0;
    double scale = 0.0;
    double relative() const { return value / (scale > 0.0 ? scale : 1.0); }
};

struct KahlerResiduals {
    Residual j_squared;    ///< J^2 + Id
    Residual hermitian;    ///< g(J., J.) - g
    Residual nabla_j;      ///< nabla J
    Residual nabla_omega;  ///< nabla Omega
    Residual d_omega;      ///< d Omega
    Residual a_hermitian;  ///< g-self-adjointness of A and [A, J]
};
KahlerResiduals check_kahler(const StructureEval& se);

struct CompatResiduals {
    Residual compat;  ///< nabla_k A_ij minus the lambda terms
    Residual ddet;    ///< Jacobi-formula cross-check; zero when A is not invertible
};
CompatResiduals check_c_compatibility(const StructureEval& se);
CompatResiduals check_projective_compatibility(const StructureEval& se);
/// Dispatches on se.geometry.
CompatResiduals check_compatibility(const StructureEval& se);

/// max |A^j_l lambda_{j,k} - A^j_k lambda_{j,l}|; needs order >= 2.
Residual hessian_selfadjointness(const StructureEval& se);
/// det(t Id - A) coefficients versus prod (t - rho_i)^{m_i}.
Residual charpoly_residual(const StructureEval& se);
/// Gradient of tr A / 4 (or / 2) versus the eigenvalue-jet route sum m_i d rho_i.
Residual lambda_consistency(const StructureEval& se);

struct EigenDecomposition {
    std::vector<Jet> eigenvalues;
    std::vector<int> multiplicities;
    /// Spectral projectors (constant terms), row-major dim x dim.
    std::vector<std::vector<double>> projectors;
    /// max |P J - J P| over projectors (zero for projective structures).
    double j_commutation = 0.0;
    /// max |A P_i - rho_i P_i|.
    double eigen_residual = 0.0;
};
/// Throws DegeneratePointError if two eigenvalues are within 1e-8.
EigenDecomposition eigen_decomposition(const StructureEval& se);

}  // namespace cpq
