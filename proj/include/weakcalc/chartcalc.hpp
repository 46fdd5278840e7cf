#pragma once

#include <functional>
#include <vector>

#include "weakcalc/fields.hpp"

namespace weakcalc {

// ---- first derivatives --------------------------------------------------

VectorField estimate_jacobian(const ScalarField& f);
/// J(i, a*k + b) = dX_a / dx_b.
TensorField vector_jacobian(const VectorField& x);
/// X(f) = sum_j X_j df/dx_j.
ScalarField directional_derivative(const VectorField& x, const ScalarField& f);

struct LipEstimate {
  double value = 0.0;          ///< at the smallest radius that had neighbors
  std::vector<double> radii;   ///< h, h/2, h/4
  std::vector<double> values;  ///< per radius; negative where no neighbor was found
};

/// Discrete Lip f(x): max |f(x)-f(y)| / |x-y| over valid y in B_r(x).
LipEstimate pointwise_lip(const ScalarField& f, Index x);

struct Mollified {
  ScalarField field;
  VectorField jacobian;
  bool under_resolved = false;  ///< eps < h
};

/// Convolution with the bump exp(-1/(1-|u|^2)) scaled to B_eps and
/// renormalized per point over the valid samples.
Mollified mollify(const ScalarField& f, double eps);

// ---- exterior calculus --------------------------------------------------

PForm exterior_derivative(const PForm& omega);
PForm wedge(const PForm& eta, const PForm& omega);
VectorField lie_bracket(const VectorField& x, const VectorField& y);

// ---- maps between charts ------------------------------------------------

/// G from a source chart into a target chart, sampled at the source points.
struct ChartMap {
  ChartPtr source;
  ChartPtr target;
  Mat image;     ///< n_source x k
  Mat jacobian;  ///< n_source x k*k, row-major, dG_a/dx_b
  Mask valid;
  /// Target sample index of G(x_i) when the image is itself a sample, else -1.
  std::vector<Index> image_index;
  double lip_lo = 0.0;
  double lip_hi = 0.0;

  Mat jac(Index i) const;
};

using MapFn = std::function<Vec(const Vec&)>;
using JacFn = std::function<Mat(const Vec&)>;

/// Analytic map with known Jacobian. Images are matched to target samples
/// when they coincide to within 1e-9 h.
ChartMap make_chart_map(ChartPtr source, ChartPtr target, const MapFn& g, const JacFn& jg);

/// Map known only through sampled images; the Jacobian is estimated by
/// least squares on the source chart.
ChartMap sampled_chart_map(ChartPtr source, ChartPtr target, const Mat& image,
                           std::vector<Index> image_index = {});

/// Chart whose samples are the images G(x_i) (weights scaled by |det J|),
/// with the map onto it. image_index is the identity.
ChartMap map_onto_image(ChartPtr source, const MapFn& g, const JacFn& jg);

/// Inverse of a map whose image_index covers the target samples.
ChartMap inverse(const ChartMap& g);

/// Values of f at arbitrary query points: exact sample lookup where
/// exact[q] >= 0, otherwise inverse-distance weighting over the k+1 nearest
/// valid samples; queries farther than 2h from every sample are invalid.
Mat transfer_values(const FieldBase& f, const Mat& queries, const std::vector<Index>& exact,
                    Mask& valid, Mask& interior);

PForm pullback(const ChartMap& g, const PForm& omega);
ScalarField pullback(const ChartMap& g, const ScalarField& f);
VectorField pushforward(const ChartMap& g, const VectorField& x);
/// f o G^{-1} on the target.
ScalarField pushforward(const ChartMap& g, const ScalarField& f);

/// Per-source-point values moved to the target samples (through the
/// preimage correspondence when complete, else by interpolation).
FieldBase push_values(const ChartMap& g, const FieldBase& src);

/// Determinant of the rows I, columns J minor (bitmask index sets).
double minor_det(const Mat& m, unsigned rows, unsigned cols);

}  // namespace weakcalc
