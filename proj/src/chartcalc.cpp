#include "weakcalc/chartcalc.hpp"

#include <bit>
#include <cmath>

#include "weakcalc/parallel.hpp"

namespace weakcalc {

namespace {

template <class F>
F derived(const FieldBase& from, Index ncomp) {
  F out;
  static_cast<FieldBase&>(out) = make_field_base(from.chart, ncomp);
  return out;
}

}  // namespace

VectorField estimate_jacobian(const ScalarField& f) {
  auto out = derived<VectorField>(f, f.dim());
  out.values = component_jacobians(f, out.valid, out.interior);
  return out;
}

TensorField vector_jacobian(const VectorField& x) {
  auto out = derived<TensorField>(x, x.dim() * x.dim());
  out.values = component_jacobians(x, out.valid, out.interior);
  return out;
}

ScalarField directional_derivative(const VectorField& x, const ScalarField& f) {
  return dot(x, estimate_jacobian(f));
}

LipEstimate pointwise_lip(const ScalarField& f, Index x) {
  const SampledChart& chart = *f.chart;
  if (!f.ok(x)) throw InputError("pointwise_lip at an invalid point");
  LipEstimate est;
  const double h = chart.bandwidth();
  const Vec px = chart.point(x);
  auto nbrs = chart.grid().within(px, h, x);
  for (double r : {h, h / 2.0, h / 4.0}) {
    double best = -1.0;
    for (Index j : nbrs) {
      if (!f.ok(j)) continue;
      double d = (chart.point(j) - px).norm();
      if (d >= r) continue;
      best = std::max(best, std::abs(f(j) - f(x)) / d);
    }
    est.radii.push_back(r);
    est.values.push_back(best);
    if (best >= 0.0) est.value = best;
  }
  return est;
}

Mollified mollify(const ScalarField& f, double eps) {
  if (!(eps > 0.0)) throw InputError("mollify: eps must be positive");
  const SampledChart& chart = *f.chart;
  Mollified out;
  out.under_resolved = eps < chart.bandwidth();
  out.field = f;
  const Vec& w = chart.weights();
  parallel_for(f.size(), [&](Index i) {
    const Vec x = chart.point(i);
    auto nbrs = chart.grid().within(x, eps);
    double mass = 0.0, acc = 0.0;
    bool clean = chart.interior(i);
    for (Index j : nbrs) {
      if (!f.ok(j)) continue;
      double u = (chart.point(j) - x).norm() / eps;
      double rho = u < 1.0 ? std::exp(-1.0 / (1.0 - u * u)) : 0.0;
      mass += rho * w(j);
      acc += rho * w(j) * f(j);
      if (!f.interior[j]) clean = false;
    }
    if (mass > 0.0) {
      out.field.values(i, 0) = acc / mass;
      out.field.valid[i] = 1;
      out.field.interior[i] = clean ? 1 : 0;
    } else {
      out.field.values(i, 0) = 0.0;
      out.field.valid[i] = 0;
      out.field.interior[i] = 0;
    }
  });
  out.jacobian = estimate_jacobian(out.field);
  return out;
}

PForm exterior_derivative(const PForm& omega) {
  const int k = omega.dim();
  const int p = omega.degree;
  if (p >= k) throw DegreeOverflow("exterior derivative of a top-degree form");
  auto src = multi_indices(k, p);
  auto dst = multi_indices(k, p + 1);
  auto out = derived<PForm>(omega, static_cast<Index>(dst.size()));
  out.degree = p + 1;
  Mask valid, interior;
  Mat jac = component_jacobians(omega, valid, interior);
  out.valid = valid;
  out.interior = interior;
  for (std::size_t c = 0; c < src.size(); ++c) {
    const unsigned from = src[c];
    for (int l = 0; l < k; ++l) {
      if (from & (1u << l)) continue;
      const unsigned to = from | (1u << l);
      const int sign = std::popcount(from & ((1u << l) - 1)) % 2 ? -1 : 1;
      const int pos = multi_index_position(k, to);
      out.values.col(pos) += sign * jac.col(static_cast<Index>(c) * k + l);
    }
  }
  return out;
}

PForm wedge(const PForm& eta, const PForm& omega) {
  require_same_chart(eta, omega);
  const int k = eta.dim();
  const int p = eta.degree, q = omega.degree;
  if (p + q > k) throw DegreeOverflow("wedge product degree exceeds dimension");
  auto a_idx = multi_indices(k, p);
  auto b_idx = multi_indices(k, q);
  auto out = derived<PForm>(eta, binomial(k, p + q));
  out.degree = p + q;
  for (std::size_t a = 0; a < a_idx.size(); ++a)
    for (std::size_t b = 0; b < b_idx.size(); ++b) {
      if (a_idx[a] & b_idx[b]) continue;
      const int pos = multi_index_position(k, a_idx[a] | b_idx[b]);
      const double s = shuffle_sign(a_idx[a], b_idx[b]);
      out.values.col(pos) += s * eta.values.col(a).cwiseProduct(omega.values.col(b));
    }
  combine_masks(out, eta, omega);
  return out;
}

VectorField lie_bracket(const VectorField& x, const VectorField& y) {
  require_same_chart(x, y);
  const int k = x.dim();
  TensorField jx = vector_jacobian(x);
  TensorField jy = vector_jacobian(y);
  auto out = derived<VectorField>(x, k);
  for (Index n = 0; n < x.size(); ++n) {
    out.valid[n] = x.valid[n] && y.valid[n] && jx.valid[n] && jy.valid[n];
    out.interior[n] = jx.interior[n] && jy.interior[n] && x.interior[n] && y.interior[n];
    if (!out.valid[n]) continue;
    for (int i = 0; i < k; ++i) {
      double v = 0.0;
      for (int j = 0; j < k; ++j)
        v += x.values(n, j) * jy.values(n, i * k + j) - y.values(n, j) * jx.values(n, i * k + j);
      out.values(n, i) = v;
    }
  }
  return out;
}

}  // namespace weakcalc
