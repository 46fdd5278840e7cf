#include <bit>
#include <cmath>

#include "weakcalc/chartcalc.hpp"
#include "weakcalc/parallel.hpp"

namespace weakcalc {

Mat ChartMap::jac(Index i) const {
  const int k = source->dim();
  Mat m(k, k);
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b) m(a, b) = jacobian(i, a * k + b);
  return m;
}

double minor_det(const Mat& m, unsigned rows, unsigned cols) {
  std::vector<int> r, c;
  for (int a = 0; a < m.rows(); ++a)
    if (rows & (1u << a)) r.push_back(a);
  for (int a = 0; a < m.cols(); ++a)
    if (cols & (1u << a)) c.push_back(a);
  if (r.size() != c.size()) throw DimensionMismatch("minor_det: unequal index sets");
  if (r.empty()) return 1.0;
  Mat sub(r.size(), c.size());
  for (std::size_t a = 0; a < r.size(); ++a)
    for (std::size_t b = 0; b < c.size(); ++b) sub(a, b) = m(r[a], c[b]);
  return sub.determinant();
}

namespace {

void finish_map(ChartMap& g) {
  const Index n = g.source->size();
  const int k = g.source->dim();
  const double h = g.target->bandwidth();
  if (g.image_index.empty()) {
    g.image_index.assign(static_cast<std::size_t>(n), -1);
    for (Index i = 0; i < n; ++i) {
      auto near = g.target->grid().nearest(g.image.row(i).transpose(), 1);
      if (!near.empty() && near[0].first <= 1e-9 * h) g.image_index[i] = near[0].second;
    }
  }
  for (Index i = 0; i < n; ++i) {
    if (!g.valid[i]) continue;
    if (std::abs(g.jac(i).determinant()) <= 1e-12) g.valid[i] = 0;
    if (g.image_index[i] < 0) {
      auto near = g.target->grid().nearest(g.image.row(i).transpose(), 1);
      if (near.empty() || near[0].first > 2.0 * h) g.valid[i] = 0;
    }
  }
  // Bi-Lipschitz bounds from neighbor pairs plus a fixed spread of far pairs.
  double lo = INFINITY, hi = 0.0;
  auto visit = [&](Index i, Index j) {
    if (i == j || !g.valid[i] || !g.valid[j]) return;
    double d = (g.source->point(i) - g.source->point(j)).norm();
    double e = (g.image.row(i) - g.image.row(j)).norm();
    if (d <= 0.0) return;
    lo = std::min(lo, e / d);
    hi = std::max(hi, e / d);
  };
  for (Index i = 0; i < n; ++i)
    for (Index j : g.source->neighbors(i)) visit(i, j);
  for (Index i = 0; i < n; ++i) visit(i, (i * 7919 + 104729) % n);
  g.lip_lo = std::isfinite(lo) ? lo : 0.0;
  g.lip_hi = hi;
  (void)k;
}

}  // namespace

ChartMap make_chart_map(ChartPtr source, ChartPtr target, const MapFn& gfn, const JacFn& jg) {
  if (source->dim() != target->dim()) throw DimensionMismatch("chart map between different dimensions");
  ChartMap g;
  const Index n = source->size();
  const int k = source->dim();
  g.source = source;
  g.target = target;
  g.image.resize(n, k);
  g.jacobian.resize(n, k * k);
  g.valid = all_set(n);
  for (Index i = 0; i < n; ++i) {
    Vec x = source->point(i);
    g.image.row(i) = gfn(x).transpose();
    Mat j = jg(x);
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b) g.jacobian(i, a * k + b) = j(a, b);
    if (!g.image.row(i).allFinite() || !g.jacobian.row(i).allFinite()) g.valid[i] = 0;
  }
  finish_map(g);
  return g;
}

ChartMap sampled_chart_map(ChartPtr source, ChartPtr target, const Mat& image,
                           std::vector<Index> image_index) {
  if (image.rows() != source->size() || image.cols() != target->dim())
    throw DimensionMismatch("sampled_chart_map: image shape");
  const int k = source->dim();
  VectorField comps;
  static_cast<FieldBase&>(comps) = make_field_base(source, k);
  comps.values = image;
  TensorField jac = vector_jacobian(comps);
  ChartMap g;
  g.source = source;
  g.target = target;
  g.image = image;
  g.jacobian = jac.values;
  g.valid = jac.valid;
  g.image_index = std::move(image_index);
  finish_map(g);
  return g;
}

ChartMap map_onto_image(ChartPtr source, const MapFn& gfn, const JacFn& jg) {
  const Index n = source->size();
  const int k = source->dim();
  Mat pts(n, k);
  Vec w(n);
  for (Index i = 0; i < n; ++i) {
    Vec x = source->point(i);
    pts.row(i) = gfn(x).transpose();
    w(i) = source->weights()(i) * std::abs(jg(x).determinant());
  }
  ChartPtr target = make_chart(pts, w, source->options());
  ChartMap g;
  g.source = source;
  g.target = target;
  g.image = pts;
  g.jacobian.resize(n, k * k);
  g.valid = all_set(n);
  for (Index i = 0; i < n; ++i) {
    Mat j = jg(source->point(i));
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b) g.jacobian(i, a * k + b) = j(a, b);
  }
  g.image_index.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) g.image_index[i] = i;
  finish_map(g);
  return g;
}

namespace {

std::vector<Index> preimages(const ChartMap& g) {
  std::vector<Index> pre(static_cast<std::size_t>(g.target->size()), -1);
  for (Index i = 0; i < g.source->size(); ++i)
    if (g.image_index[i] >= 0 && g.valid[i]) pre[g.image_index[i]] = i;
  return pre;
}

}  // namespace

ChartMap inverse(const ChartMap& g) {
  const Index m = g.target->size();
  const int k = g.source->dim();
  auto pre = preimages(g);
  ChartMap inv;
  inv.source = g.target;
  inv.target = g.source;
  inv.image = Mat::Zero(m, k);
  inv.jacobian = Mat::Zero(m, k * k);
  inv.valid.assign(static_cast<std::size_t>(m), 0);
  inv.image_index = pre;
  for (Index j = 0; j < m; ++j) {
    Index i = pre[j];
    if (i < 0) continue;
    inv.image.row(j) = g.source->points().row(i);
    Mat ji = g.jac(i).inverse();
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b) inv.jacobian(j, a * k + b) = ji(a, b);
    inv.valid[j] = 1;
  }
  finish_map(inv);
  return inv;
}

Mat transfer_values(const FieldBase& f, const Mat& queries, const std::vector<Index>& exact,
                    Mask& valid, Mask& interior) {
  const SampledChart& chart = *f.chart;
  const Index nq = queries.rows();
  const Index nc = f.components();
  const int k = chart.dim();
  const double h = chart.bandwidth();
  Mat out = Mat::Zero(nq, nc);
  valid.assign(static_cast<std::size_t>(nq), 0);
  interior.assign(static_cast<std::size_t>(nq), 0);
  parallel_for(nq, [&](Index q) {
    if (!exact.empty() && exact[q] >= 0) {
      Index s = exact[q];
      out.row(q) = f.values.row(s);
      valid[q] = f.valid[s];
      interior[q] = f.clean(s) ? 1 : 0;
      return;
    }
    Vec y = queries.row(q).transpose();
    auto near = chart.grid().nearest(y, k + 1);
    if (near.empty() || near[0].first > 2.0 * h) return;
    if (near[0].first <= 1e-12 * h) {
      Index s = near[0].second;
      out.row(q) = f.values.row(s);
      valid[q] = f.valid[s];
      interior[q] = f.clean(s) ? 1 : 0;
      return;
    }
    double wsum = 0.0;
    bool clean = true;
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(nc);
    for (auto [d, s] : near) {
      if (!f.ok(s)) continue;
      double w = 1.0 / (d * d);
      acc += w * f.values.row(s);
      wsum += w;
      if (!f.interior[s]) clean = false;
    }
    if (wsum <= 0.0) return;
    out.row(q) = acc / wsum;
    valid[q] = 1;
    interior[q] = clean ? 1 : 0;
  });
  return out;
}

PForm pullback(const ChartMap& g, const PForm& omega) {
  if (omega.chart != g.target) throw ChartMismatch("pullback: form is not on the map's target");
  const int k = g.source->dim();
  const int p = omega.degree;
  auto idx = multi_indices(k, p);
  Mask tv, ti;
  Mat at = transfer_values(omega, g.image, g.image_index, tv, ti);
  PForm out;
  static_cast<FieldBase&>(out) = make_field_base(g.source, static_cast<Index>(idx.size()));
  out.degree = p;
  for (Index i = 0; i < g.source->size(); ++i) {
    out.valid[i] = g.valid[i] && tv[i];
    out.interior[i] = out.valid[i] && ti[i] && g.source->interior(i);
    if (!out.valid[i]) continue;
    Mat j = g.jac(i);
    for (std::size_t b = 0; b < idx.size(); ++b) {
      double v = 0.0;
      for (std::size_t a = 0; a < idx.size(); ++a) v += at(i, a) * minor_det(j, idx[a], idx[b]);
      out.values(i, b) = v;
    }
  }
  return out;
}

ScalarField pullback(const ChartMap& g, const ScalarField& f) {
  return scalar_from(pullback(g, zero_form_from(f)));
}

FieldBase push_values(const ChartMap& g, const FieldBase& src) {
  FieldBase out = make_field_base(g.target, src.components());
  auto pre = preimages(g);
  bool complete = true;
  for (Index j : pre)
    if (j < 0) complete = false;
  if (complete) {
    for (Index t = 0; t < g.target->size(); ++t) {
      Index i = pre[t];
      out.values.row(t) = src.values.row(i);
      out.valid[t] = src.valid[i];
      out.interior[t] = src.clean(i) && g.target->interior(t);
    }
    return out;
  }
  // Scatter through an auxiliary chart on the image points.
  Mat pts = g.image;
  Vec w = g.source->weights();
  ChartPtr aux = make_chart(pts, w, g.target->options());
  FieldBase on_aux = src;
  on_aux.chart = aux;
  Mask v, in;
  out.values = transfer_values(on_aux, g.target->points(), {}, v, in);
  for (Index t = 0; t < g.target->size(); ++t) {
    out.valid[t] = v[t];
    out.interior[t] = in[t] && g.target->interior(t);
  }
  return out;
}

VectorField pushforward(const ChartMap& g, const VectorField& x) {
  if (x.chart != g.source) throw ChartMismatch("pushforward: field is not on the map's source");
  FieldBase pushed = x;
  for (Index i = 0; i < x.size(); ++i) {
    if (!g.valid[i]) {
      pushed.valid[i] = 0;
      continue;
    }
    pushed.values.row(i) = (g.jac(i) * x.at(i)).transpose();
  }
  VectorField out;
  static_cast<FieldBase&>(out) = push_values(g, pushed);
  return out;
}

ScalarField pushforward(const ChartMap& g, const ScalarField& f) {
  if (f.chart != g.source) throw ChartMismatch("pushforward: field is not on the map's source");
  FieldBase src = f;
  for (Index i = 0; i < f.size(); ++i)
    if (!g.valid[i]) src.valid[i] = 0;
  ScalarField out;
  static_cast<FieldBase&>(out) = push_values(g, src);
  return out;
}

}  // namespace weakcalc
