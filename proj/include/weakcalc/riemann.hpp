#pragma once

#include <initializer_list>

#include "weakcalc/chartcalc.hpp"

namespace weakcalc {

/// Symmetric metric coefficients g_ij with cached inverse g^ij. Points that
/// fail the SPD test (smallest eigenvalue < spd_floor) are invalid.
struct MetricField : TensorField {
  Mat inverse;  ///< n x k*k, row-major
  double spd_floor = 1e-8;

  Mat inv(Index i) const;
};

/// Symmetrizes, checks positivity by Cholesky + eigenvalue floor, inverts.
MetricField make_metric(const TensorField& g, double spd_floor = 1e-8);
MetricField sample_metric(ChartPtr chart, const std::function<Mat(const Vec&)>& g,
                          double spd_floor = 1e-8);
MetricField euclidean_metric(ChartPtr chart);
/// Throws MetricNotSPD if any point failed the SPD test.
void require_spd(const MetricField& g);

/// Gamma^m_ij stored at column (m*k + i)*k + j.
struct Christoffel : FieldBase {
  double at(Index p, int m, int i, int j) const {
    const int k = dim();
    return values(p, (m * k + i) * k + j);
  }
};

Christoffel christoffel(const MetricField& g);

/// g(X, Y) pointwise.
ScalarField pairing(const MetricField& g, const VectorField& x, const VectorField& y);

/// (nabla_X Y)^m = X_i dY_m/dx_i + X_i Y_j Gamma^m_ij. `gamma` overrides the
/// Levi-Civita symbols of g when given.
VectorField covariant_derivative(const MetricField& g, const VectorField& x, const VectorField& y,
                                 const Christoffel* gamma = nullptr);

/// Residual of an identity: `abs` is the max over clean points of
/// |lhs - rhs|; `scale` the max of the identity's individual terms there.
struct Residual {
  double abs = 0.0;
  double scale = 0.0;
  Index points = 0;  ///< clean points measured
  double rel() const { return scale > 0.0 ? abs / scale : abs; }
};

Residual measure_residual(const FieldBase& diff, std::initializer_list<const FieldBase*> terms);

/// max over clean points of |2 g(nabla_X Y, Z) - Koszul right-hand side|.
double koszul_check(const MetricField& g, const VectorField& x, const VectorField& y,
                    const VectorField& z, const Christoffel* gamma = nullptr);

Residual koszul_residual(const MetricField& g, const VectorField& x, const VectorField& y,
                         const VectorField& z, const Christoffel* gamma = nullptr);

// Axiom residuals over clean points.
Residual additivity_residual(const MetricField& g, const VectorField& x, const VectorField& y,
                           const VectorField& z, const Christoffel* gamma = nullptr);
/// nabla_{fU + hV} W - f nabla_U W - h nabla_V W
Residual function_linearity_residual(const MetricField& g, const ScalarField& f, const VectorField& u,
                                   const ScalarField& h, const VectorField& v, const VectorField& w,
                                   const Christoffel* gamma = nullptr);
/// nabla_U (fV) - U(f) V - f nabla_U V
Residual leibniz_residual(const MetricField& g, const VectorField& u, const ScalarField& f,
                        const VectorField& v, const Christoffel* gamma = nullptr);
Residual torsion_residual(const MetricField& g, const VectorField& x, const VectorField& y,
                        const Christoffel* gamma = nullptr);
/// U g(V, W) - g(nabla_U V, W) - g(V, nabla_U W)
Residual compatibility_residual(const MetricField& g, const VectorField& u, const VectorField& v,
                              const VectorField& w, const Christoffel* gamma = nullptr);

// ---- musical isomorphisms -----------------------------------------------

PForm flat(const MetricField& g, const VectorField& x);
VectorField sharp(const MetricField& g, const PForm& omega);
VectorField gradient(const MetricField& g, const ScalarField& f);

// ---- second order -------------------------------------------------------

/// sum g(nabla_{d_i} omega^sharp, d_j) dx_i (x) dx_j
TensorField nabla_oneform(const MetricField& g, const PForm& omega);
/// d^2 f/dx_i dx_j - Gamma^m_ij df/dx_m, T(i, j) at column i*k + j.
TensorField hessian(const MetricField& g, const ScalarField& f);
/// sum_i (nabla_{d_i} X)^i
ScalarField divergence(const MetricField& g, const VectorField& x);
/// -div grad f
ScalarField laplacian(const MetricField& g, const ScalarField& f);
/// -g^ij Hess_ij, the cross-check form of the Laplacian.
ScalarField trace_laplacian(const MetricField& g, const TensorField& hess);
/// max over clean points of |T - T^t|.
double max_asymmetry(const TensorField& t);

// ---- chart changes ------------------------------------------------------

/// J^{-T} g J^{-1} moved to the target samples.
MetricField pushforward_metric(const ChartMap& map, const MetricField& g);
/// J^T T(G(x)) J for a (0,2) tensor on the target.
TensorField pullback_tensor(const ChartMap& map, const TensorField& t);

}  // namespace weakcalc
