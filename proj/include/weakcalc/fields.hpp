#pragma once

#include <concepts>
#include <functional>
#include <vector>

#include "weakcalc/chart.hpp"

namespace weakcalc {

/// Per-point values on a chart. `values` is n x ncomp; `valid` models
/// "defined a.e."; `interior` marks points whose value (and every value it
/// was derived from) avoided boundary and degenerate stencils.
struct FieldBase {
  ChartPtr chart;
  Mat values;
  Mask valid;
  Mask interior;

  Index size() const { return values.rows(); }
  Index components() const { return values.cols(); }
  int dim() const { return chart->dim(); }
  bool ok(Index i) const { return valid[i] != 0; }
  bool clean(Index i) const { return valid[i] != 0 && interior[i] != 0; }
};

struct ScalarField : FieldBase {
  double operator()(Index i) const { return values(i, 0); }
};

/// Components X_i of sum_i X_i d/dx_i.
struct VectorField : FieldBase {
  Vec at(Index i) const { return values.row(i).transpose(); }
};

/// Coefficients over strictly increasing multi-indices, in the order of
/// multi_indices(k, degree).
struct PForm : FieldBase {
  int degree = 0;
};

/// (0,2) tensor, row-major k x k per point.
struct TensorField : FieldBase {
  Mat at(Index i) const;
  void set(Index i, const Mat& m);
};

// ---- multi-indices: bitmasks over {0..k-1}, lexicographic order --------

std::vector<unsigned> multi_indices(int k, int p);
int multi_index_position(int k, unsigned mask);
Index binomial(int n, int r);
/// Sign of sorting the concatenation (a, b) of two disjoint index sets.
int shuffle_sign(unsigned a, unsigned b);

// ---- construction -------------------------------------------------------

FieldBase make_field_base(ChartPtr chart, Index ncomp);
ScalarField sample_scalar(ChartPtr chart, const std::function<double(const Vec&)>& f);
VectorField sample_vector(ChartPtr chart, const std::function<Vec(const Vec&)>& f);
PForm sample_form(ChartPtr chart, int degree, const std::function<Vec(const Vec&)>& coeffs);
TensorField sample_tensor(ChartPtr chart, const std::function<Mat(const Vec&)>& f);

ScalarField constant_scalar(ChartPtr chart, double c);
VectorField coordinate_vector(ChartPtr chart, int axis);
/// dx_{axis}
PForm coordinate_form(ChartPtr chart, int axis);
PForm zero_form_from(const ScalarField& f);
ScalarField scalar_from(const PForm& f);
PForm oneform_from(const VectorField& components);
VectorField vector_from(const PForm& oneform);

// ---- pointwise algebra (masks combine by AND) ---------------------------

void require_same_chart(const FieldBase& a, const FieldBase& b);
void combine_masks(FieldBase& out, const FieldBase& a, const FieldBase& b);

template <class F>
F lincomb(double alpha, const F& a, double beta, const F& b) {
  require_same_chart(a, b);
  if (a.components() != b.components()) throw DimensionMismatch("lincomb: component mismatch");
  F out = a;
  out.values = alpha * a.values + beta * b.values;
  combine_masks(out, a, b);
  return out;
}

template <std::derived_from<FieldBase> F>
F operator+(const F& a, const F& b) { return lincomb(1.0, a, 1.0, b); }
template <std::derived_from<FieldBase> F>
F operator-(const F& a, const F& b) { return lincomb(1.0, a, -1.0, b); }

template <class F>
F scaled(const F& a, double s) {
  F out = a;
  out.values *= s;
  return out;
}

/// Pointwise product s(x) * a(x).
template <class F>
F multiply(const ScalarField& s, const F& a) {
  require_same_chart(s, a);
  F out = a;
  for (Index i = 0; i < a.size(); ++i) out.values.row(i) *= s(i);
  combine_masks(out, s, a);
  return out;
}

/// Sum of componentwise products (Euclidean pairing of coefficient arrays).
ScalarField dot(const FieldBase& a, const FieldBase& b);

// ---- derivatives --------------------------------------------------------

/// Least-squares derivatives of every component. Returns n x (ncomp*k) with
/// d(component c)/dx_a at column c*k + a; fills masks for the result.
Mat component_jacobians(const FieldBase& f, Mask& valid, Mask& interior);

// ---- equivalence --------------------------------------------------------

struct Equivalence {
  bool equivalent = false;
  double fraction = 0.0;  ///< weight fraction of mutually valid points in agreement
};

Equivalence fields_equivalent(const FieldBase& a, const FieldBase& b, double tol_eq,
                              double delta_meas = 0.05);

/// Max |value| over clean points (all components); 0 if there are none.
double max_abs_clean(const FieldBase& f);
/// Number of clean (valid and interior) points.
Index clean_count(const FieldBase& f);
/// Max |value| over valid points.
double max_abs_valid(const FieldBase& f);
/// Fraction (by weight) of valid points.
double valid_fraction(const FieldBase& f);

}  // namespace weakcalc
