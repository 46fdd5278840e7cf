#include "weakcalc/fields.hpp"

#include <bit>
#include <cmath>

#include "weakcalc/parallel.hpp"

namespace weakcalc {

Mat TensorField::at(Index i) const {
  const int k = dim();
  Mat m(k, k);
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b) m(a, b) = values(i, a * k + b);
  return m;
}

void TensorField::set(Index i, const Mat& m) {
  const int k = dim();
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b) values(i, a * k + b) = m(a, b);
}

std::vector<unsigned> multi_indices(int k, int p) {
  std::vector<unsigned> out;
  if (p < 0 || p > k) return out;
  // Enumerate combinations in lexicographic order of their sorted elements.
  std::vector<int> idx(p);
  for (int a = 0; a < p; ++a) idx[a] = a;
  for (;;) {
    unsigned m = 0;
    for (int v : idx) m |= 1u << v;
    out.push_back(m);
    int a = p - 1;
    while (a >= 0 && idx[a] == k - p + a) --a;
    if (a < 0) break;
    ++idx[a];
    for (int b = a + 1; b < p; ++b) idx[b] = idx[b - 1] + 1;
  }
  return out;
}

int multi_index_position(int k, unsigned mask) {
  auto all = multi_indices(k, std::popcount(mask));
  for (std::size_t a = 0; a < all.size(); ++a)
    if (all[a] == mask) return static_cast<int>(a);
  return -1;
}

Index binomial(int n, int r) {
  if (r < 0 || r > n) return 0;
  Index out = 1;
  for (int a = 1; a <= r; ++a) out = out * (n - r + a) / a;
  return out;
}

int shuffle_sign(unsigned a, unsigned b) {
  // Number of pairs (i in a, j in b) with i > j.
  int inversions = 0;
  for (unsigned rest = b; rest; rest &= rest - 1) {
    unsigned j = static_cast<unsigned>(std::countr_zero(rest));
    inversions += std::popcount(a & ~((2u << j) - 1));
  }
  return inversions % 2 ? -1 : 1;
}

FieldBase make_field_base(ChartPtr chart, Index ncomp) {
  FieldBase f;
  const Index n = chart->size();
  f.values = Mat::Zero(n, ncomp);
  f.valid = all_set(n);
  f.interior = chart->interior_mask();
  f.chart = std::move(chart);
  return f;
}

namespace {

template <class F>
F with_base(FieldBase b) {
  F f;
  static_cast<FieldBase&>(f) = std::move(b);
  return f;
}

void mark_nonfinite(FieldBase& f) {
  for (Index i = 0; i < f.size(); ++i)
    if (!f.values.row(i).allFinite()) {
      f.valid[i] = 0;
      f.values.row(i).setZero();
    }
}

}  // namespace

ScalarField sample_scalar(ChartPtr chart, const std::function<double(const Vec&)>& fn) {
  auto f = with_base<ScalarField>(make_field_base(chart, 1));
  for (Index i = 0; i < f.size(); ++i) f.values(i, 0) = fn(chart->point(i));
  mark_nonfinite(f);
  return f;
}

VectorField sample_vector(ChartPtr chart, const std::function<Vec(const Vec&)>& fn) {
  auto f = with_base<VectorField>(make_field_base(chart, chart->dim()));
  for (Index i = 0; i < f.size(); ++i) f.values.row(i) = fn(chart->point(i)).transpose();
  mark_nonfinite(f);
  return f;
}

PForm sample_form(ChartPtr chart, int degree, const std::function<Vec(const Vec&)>& fn) {
  if (degree < 0 || degree > chart->dim()) throw DegreeOverflow("form degree out of range");
  auto f = with_base<PForm>(make_field_base(chart, binomial(chart->dim(), degree)));
  f.degree = degree;
  for (Index i = 0; i < f.size(); ++i) f.values.row(i) = fn(chart->point(i)).transpose();
  mark_nonfinite(f);
  return f;
}

TensorField sample_tensor(ChartPtr chart, const std::function<Mat(const Vec&)>& fn) {
  const int k = chart->dim();
  auto f = with_base<TensorField>(make_field_base(chart, k * k));
  for (Index i = 0; i < f.size(); ++i) f.set(i, fn(chart->point(i)));
  mark_nonfinite(f);
  return f;
}

ScalarField constant_scalar(ChartPtr chart, double c) {
  return sample_scalar(chart, [c](const Vec&) { return c; });
}

VectorField coordinate_vector(ChartPtr chart, int axis) {
  const int k = chart->dim();
  return sample_vector(chart, [k, axis](const Vec&) { return Vec(Vec::Unit(k, axis)); });
}

PForm coordinate_form(ChartPtr chart, int axis) {
  const int k = chart->dim();
  return sample_form(chart, 1, [k, axis](const Vec&) { return Vec(Vec::Unit(k, axis)); });
}

PForm zero_form_from(const ScalarField& f) {
  PForm out = with_base<PForm>(f);
  out.degree = 0;
  return out;
}

ScalarField scalar_from(const PForm& f) {
  if (f.degree != 0) throw DimensionMismatch("scalar_from expects a 0-form");
  return with_base<ScalarField>(f);
}

PForm oneform_from(const VectorField& components) {
  PForm out = with_base<PForm>(components);
  out.degree = 1;
  return out;
}

VectorField vector_from(const PForm& oneform) {
  if (oneform.degree != 1) throw DimensionMismatch("vector_from expects a 1-form");
  return with_base<VectorField>(oneform);
}

void require_same_chart(const FieldBase& a, const FieldBase& b) {
  if (a.chart != b.chart) throw ChartMismatch("fields live on different charts");
}

void combine_masks(FieldBase& out, const FieldBase& a, const FieldBase& b) {
  for (Index i = 0; i < out.size(); ++i) {
    out.valid[i] = a.valid[i] && b.valid[i];
    out.interior[i] = a.interior[i] && b.interior[i];
    if (!out.valid[i]) out.values.row(i).setZero();
  }
}

ScalarField dot(const FieldBase& a, const FieldBase& b) {
  require_same_chart(a, b);
  if (a.components() != b.components()) throw DimensionMismatch("dot: component mismatch");
  auto out = with_base<ScalarField>(make_field_base(a.chart, 1));
  out.values.col(0) = a.values.cwiseProduct(b.values).rowwise().sum();
  combine_masks(out, a, b);
  return out;
}

Mat component_jacobians(const FieldBase& f, Mask& valid, Mask& interior) {
  const SampledChart& chart = *f.chart;
  const Index n = f.size();
  const Index nc = f.components();
  const int k = chart.dim();
  Mat out = Mat::Zero(n, nc * k);
  valid.assign(static_cast<std::size_t>(n), 0);
  interior.assign(static_cast<std::size_t>(n), 0);
  parallel_for(n, [&](Index i) {
    if (!f.ok(i)) return;
    const DerivativeStencil* st = &chart.stencil(i);
    if (!st->ok) return;
    bool complete = true;
    bool clean = chart.interior(i) && f.interior[i];
    for (Index j : st->neighbors) {
      if (!f.valid[j]) complete = false;
      if (!f.interior[j]) clean = false;
    }
    DerivativeStencil restricted;
    if (!complete) {
      restricted = chart.restricted_stencil(i, f.valid);
      if (!restricted.ok) return;
      st = &restricted;
      clean = false;
    }
    const Index nn = static_cast<Index>(st->neighbors.size());
    Mat diff(nn, nc);
    for (Index a = 0; a < nn; ++a) diff.row(a) = f.values.row(st->neighbors[a]) - f.values.row(i);
    Mat grad = st->coeffs * diff;  // k x nc
    for (Index c = 0; c < nc; ++c)
      for (int a = 0; a < k; ++a) out(i, c * k + a) = grad(a, c);
    valid[i] = 1;
    interior[i] = clean ? 1 : 0;
  });
  return out;
}

Equivalence fields_equivalent(const FieldBase& a, const FieldBase& b, double tol_eq,
                              double delta_meas) {
  require_same_chart(a, b);
  if (a.components() != b.components()) throw DimensionMismatch("fields_equivalent: rank mismatch");
  const Vec& w = a.chart->weights();
  double total = 0.0, agree = 0.0;
  for (Index i = 0; i < a.size(); ++i) {
    if (!a.ok(i) || !b.ok(i)) continue;
    total += w(i);
    if ((a.values.row(i) - b.values.row(i)).lpNorm<Eigen::Infinity>() <= tol_eq) agree += w(i);
  }
  Equivalence e;
  e.fraction = total > 0.0 ? agree / total : 0.0;
  e.equivalent = total > 0.0 && e.fraction >= 1.0 - delta_meas;
  return e;
}

double max_abs_clean(const FieldBase& f) {
  double m = 0.0;
  for (Index i = 0; i < f.size(); ++i)
    if (f.clean(i)) m = std::max(m, f.values.row(i).lpNorm<Eigen::Infinity>());
  return m;
}

Index clean_count(const FieldBase& f) {
  Index c = 0;
  for (Index i = 0; i < f.size(); ++i) c += f.clean(i) ? 1 : 0;
  return c;
}

double max_abs_valid(const FieldBase& f) {
  double m = 0.0;
  for (Index i = 0; i < f.size(); ++i)
    if (f.ok(i)) m = std::max(m, f.values.row(i).lpNorm<Eigen::Infinity>());
  return m;
}

double valid_fraction(const FieldBase& f) {
  const Vec& w = f.chart->weights();
  double total = w.sum(), good = 0.0;
  for (Index i = 0; i < f.size(); ++i)
    if (f.ok(i)) good += w(i);
  return total > 0.0 ? good / total : 0.0;
}

}  // namespace weakcalc
