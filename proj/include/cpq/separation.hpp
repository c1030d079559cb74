#pragma once

#include <array>
#include <complex>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cpq/quantization.hpp"

namespace cpq {

/**
 * @brief Joint eigenproblem data for a normal-form structure.
 *
 * omega has r entries, lambda_tilde r + R, f is empty (no potential) or holds
 * one expression per distinct eigenvalue in the Potential convention. The
 * phase factor is exp(-i omega.t), so i d_{t_q} psi = omega_q psi.
 */
struct SeparationProblem {
    const Structure* structure = nullptr;
    std::vector<double> omega;
    std::vector<double> lambda_tilde;
    std::vector<std::string> f;
};

/// lambda_0..lambda_{n-1} from prod (s - c)^{m/2 - 1} sum lambda~_j s^j.
std::vector<double> lambda_coefficients(const SeparationProblem& p);
double polyval(std::span<const double> c, double s);
/// lambda~ with prescribed values at the block constants; `high` fills the top coefficients.
std::vector<double> lambda_tilde_fit(std::span<const double> constants, std::span<const double> values, std::span<const double> high);
/// prod (s - c)^{m/2} sum_q (-1)^q s^{r-q} omega_q, the L^(s) eigenvalue.
double l_eigenvalue(const SeparationProblem& p, double s);

/// Frame route and invariant route of nabla_i K(s)^{ij} nabla_j f at x.
struct RouteComparison {
    std::complex<double> frame, invariant;
    Residual residual;
};
RouteComparison normal_coords_operator(const Structure& s, std::span<const double> x, double sarg, const TestFunction& f);

/// Coefficients of (p phi')' = q phi for coordinate chi_k at one abscissa.
struct OdeCoefficients {
    double p, dp, q;
};
OdeCoefficients ode_coefficients(const SeparationProblem& prob, int k, double chi);

/// Uniform grid solution; dphi holds phi'.
struct OdeGrid {
    double a = 0.0, h = 0.0;
    std::vector<double> phi, dphi;
    double end() const { return a + h * static_cast<double>(phi.size() - 1); }
};
/// Classical RK4 on y = (phi, p phi'); throws SingularError when the interval leaves the regular range.
OdeGrid integrate_ode(const SeparationProblem& prob, int k, double a, double b, double phi0, double dphi0, double h);
/// phi, phi', phi'' at chi from a five-node Lagrange stencil.
std::array<double, 3> interpolate(const OdeGrid& g, double chi);
/// |(p phi')' - q phi| at grid node i (interior only), relative to the largest term.
Residual separated_ode_residual(const SeparationProblem& prob, int k, const OdeGrid& g, std::size_t i);
/// log2 of the error ratio at the interval end for steps h and h/2 against an h/8 reference.
double convergence_order(const SeparationProblem& prob, int k, double a, double b, double phi0, double dphi0, double h);

/**
 * @brief Factor on a two-dimensional flat block.
 *
 * Plane: exp(i(a y1 + b y2)); Sine: sin(a y1) sin(b y2); Landau:
 * exp(i a y2) exp(-|B| (y1 + a/B)^2 / 2) for the potential (0, B y1).
 */
struct BlockFactor {
    enum class Kind { Plane, Sine, Landau };
    Kind kind = Kind::Plane;
    double a = 0.0, b = 0.0, B = 0.0;
    CJet eval(const Jet& y1, const Jet& y2) const;
    /// Eigenvalue of -D^a D_a on the flat block.
    double mu() const;
};
/// Magnetic field d(sum_p omega_p alpha_p) on block b at x (component y1 y2).
double block_field(const SeparationProblem& prob, std::size_t b, std::span<const double> x);
/// Residual of the block equation at x for block b.
Residual separated_pde_residual(const SeparationProblem& prob, std::size_t b, const BlockFactor& Y, std::span<const double> x);
/// Required lambda~(c_b) for the given block factor (constant f_b only).
double block_lambda_value(const SeparationProblem& prob, std::size_t b, const BlockFactor& Y, double f_const);

/// Separated solution psi = prod phi_k(chi_k) exp(-i omega.t) prod Y_b(y).
struct Ansatz {
    std::vector<OdeGrid> phi;
    std::vector<BlockFactor> blocks;
    CJet eval(const SeparationProblem& prob, std::span<const double> x, const JetContext& ctx) const;
};

struct EigenResiduals {
    Residual Q;  ///< |Q^(t) psi - lambda(t) psi| / |psi|
    Residual L;  ///< |L^(t) psi - l(t) psi| / |psi|
};
/// Max over the given points and t values; scale is |psi| so relative() is the normalized residual.
EigenResiduals eigen_residual(const SeparationProblem& prob, const Ansatz& psi, std::span<const double> ts,
                              const std::vector<std::vector<double>>& points);

}  // namespace cpq
