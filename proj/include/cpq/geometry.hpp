#pragma once

#include "cpq/tensor.hpp"

namespace cpq {

struct MetricEval {
    int dim = 0;
    Tensor g;     ///< g_{ij}, valence (0,2)
    Tensor ginv;  ///< g^{ij}, valence (2,0)
    Jet det;
};

/// Builds inverse and determinant; throws SingularError for a degenerate metric.
MetricEval make_metric(const Tensor& g);

struct ConnectionEval {
    Tensor gamma;  ///< Gamma^i_{jk} at (i, j, k)
    /// Entry is identically zero through its order; used to skip work.
    std::vector<char> zero;
};

ConnectionEval christoffel(const MetricEval& m);

/**
 * @brief Riemann tensor R^i_{jkl} at (i, j, k, l) and Ricci R_{ij}.
 *
 * R^i_{jkl} = d_k G^i_{lj} - d_l G^i_{kj} + G^i_{ks} G^s_{lj} - G^i_{ls} G^s_{kj},
 * Ricci R_{ij} = R^k_{ikj}. With these conventions the unit 2-sphere has
 * R^theta_{phi theta phi} = sin^2(theta) and Ricci = g.
 */
struct CurvatureEval {
    Tensor riemann;
    Tensor ricci;
};

CurvatureEval riemann(const MetricEval& m, const ConnectionEval& c);
CurvatureEval riemann(const MetricEval& m);
Tensor ricci_from_riemann(const Tensor& riemann);

/// Coordinate gradient of a scalar as a (0,1) tensor.
Tensor gradient(const Jet& f);
/// Plain partial derivative; appends a lower index.
Tensor partial_derivative(const Tensor& t);
/// Levi-Civita covariant derivative; appends a lower index.
Tensor covariant_derivative(const Tensor& t, const ConnectionEval& c);
/// nabla_j V^j for a (1,0) tensor.
Jet divergence(const Tensor& v, const ConnectionEval& c);

/// Contract a rank-2 tensor with the metric: lower both / raise both indices.
Tensor lower_vector(const Tensor& v, const Tensor& g);
Tensor raise_form(const Tensor& w, const Tensor& ginv);

/// Max |R^i_{jkl} + R^i_{klj} + R^i_{ljk}| over components.
double bianchi_residual(const CurvatureEval& c);

}  // namespace cpq
