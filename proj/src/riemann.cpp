#include "weakcalc/riemann.hpp"

#include <initializer_list>

#include "weakcalc/parallel.hpp"

namespace weakcalc {

namespace {

template <class F>
F blank(const ChartPtr& chart, Index ncomp) {
  F out;
  static_cast<FieldBase&>(out) = make_field_base(chart, ncomp);
  return out;
}

// valid/interior = AND over inputs; values at invalid points are zeroed.
void and_masks(FieldBase& out, std::initializer_list<const FieldBase*> ins) {
  for (Index i = 0; i < out.size(); ++i) {
    bool v = true, in = true;
    for (const FieldBase* f : ins) {
      v = v && f->valid[i];
      in = in && f->interior[i];
    }
    out.valid[i] = v;
    out.interior[i] = v && in;
    if (!v) out.values.row(i).setZero();
  }
}

const Christoffel& symbols(const MetricField& g, const Christoffel* gamma, Christoffel& storage) {
  if (gamma) return *gamma;
  storage = christoffel(g);
  return storage;
}

}  // namespace

Mat MetricField::inv(Index i) const {
  const int k = dim();
  Mat m(k, k);
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b) m(a, b) = inverse(i, a * k + b);
  return m;
}

MetricField make_metric(const TensorField& gin, double spd_floor) {
  MetricField g;
  static_cast<TensorField&>(g) = gin;
  g.spd_floor = spd_floor;
  const int k = g.dim();
  g.inverse = Mat::Zero(g.size(), k * k);
  for (Index i = 0; i < g.size(); ++i) {
    if (!g.valid[i]) continue;
    Mat m = g.at(i);
    m = 0.5 * (m + m.transpose());
    g.set(i, m);
    Eigen::LLT<Mat> llt(m);
    Eigen::SelfAdjointEigenSolver<Mat> eig(m, Eigen::EigenvaluesOnly);
    if (llt.info() != Eigen::Success || eig.eigenvalues().minCoeff() < spd_floor) {
      g.valid[i] = 0;
      g.interior[i] = 0;
      continue;
    }
    Mat inv = llt.solve(Mat::Identity(k, k));
    inv = 0.5 * (inv + inv.transpose());
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b) g.inverse(i, a * k + b) = inv(a, b);
  }
  return g;
}

MetricField sample_metric(ChartPtr chart, const std::function<Mat(const Vec&)>& fn, double spd_floor) {
  return make_metric(sample_tensor(std::move(chart), fn), spd_floor);
}

MetricField euclidean_metric(ChartPtr chart) {
  const int k = chart->dim();
  return sample_metric(chart, [k](const Vec&) { return Mat(Mat::Identity(k, k)); });
}

void require_spd(const MetricField& g) {
  for (Index i = 0; i < g.size(); ++i)
    if (!g.valid[i]) throw MetricNotSPD("metric is not positive definite at sample " + std::to_string(i));
}

Christoffel christoffel(const MetricField& g) {
  const int k = g.dim();
  Mask dv, di;
  Mat dg = component_jacobians(g, dv, di);
  auto out = blank<Christoffel>(g.chart, k * k * k);
  auto d = [&](Index p, int a, int b, int l) { return dg(p, (a * k + b) * k + l); };
  parallel_for(g.size(), [&](Index p) {
    out.valid[p] = dv[p] && g.valid[p];
    out.interior[p] = out.valid[p] && di[p];
    if (!out.valid[p]) return;
    for (int m = 0; m < k; ++m)
      for (int i = 0; i < k; ++i)
        for (int j = i; j < k; ++j) {
          double s = 0.0;
          for (int l = 0; l < k; ++l)
            s += g.inverse(p, m * k + l) * (d(p, j, l, i) + d(p, i, l, j) - d(p, i, j, l));
          out.values(p, (m * k + i) * k + j) = 0.5 * s;
          out.values(p, (m * k + j) * k + i) = 0.5 * s;
        }
  });
  return out;
}

ScalarField pairing(const MetricField& g, const VectorField& x, const VectorField& y) {
  require_same_chart(g, x);
  require_same_chart(x, y);
  const int k = g.dim();
  auto out = blank<ScalarField>(g.chart, 1);
  for (Index p = 0; p < g.size(); ++p) {
    double s = 0.0;
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b) s += g.values(p, a * k + b) * x.values(p, a) * y.values(p, b);
    out.values(p, 0) = s;
  }
  and_masks(out, {&g, &x, &y});
  return out;
}

VectorField covariant_derivative(const MetricField& g, const VectorField& x, const VectorField& y,
                                 const Christoffel* gamma) {
  require_same_chart(g, x);
  require_same_chart(x, y);
  const int k = g.dim();
  Christoffel storage;
  const Christoffel& gm = symbols(g, gamma, storage);
  TensorField dy = vector_jacobian(y);
  auto out = blank<VectorField>(g.chart, k);
  parallel_for(g.size(), [&](Index p) {
    for (int m = 0; m < k; ++m) {
      double s = 0.0;
      for (int i = 0; i < k; ++i) {
        s += x.values(p, i) * dy.values(p, m * k + i);
        for (int j = 0; j < k; ++j) s += x.values(p, i) * y.values(p, j) * gm.at(p, m, i, j);
      }
      out.values(p, m) = s;
    }
  });
  and_masks(out, {&x, &y, &dy, &gm});
  return out;
}

Residual measure_residual(const FieldBase& diff, std::initializer_list<const FieldBase*> terms) {
  Residual r;
  for (Index p = 0; p < diff.size(); ++p) {
    if (!diff.clean(p)) continue;
    ++r.points;
    r.abs = std::max(r.abs, diff.values.row(p).lpNorm<Eigen::Infinity>());
    for (const FieldBase* t : terms) r.scale = std::max(r.scale, t->values.row(p).lpNorm<Eigen::Infinity>());
  }
  return r;
}

Residual koszul_residual(const MetricField& g, const VectorField& x, const VectorField& y,
                         const VectorField& z, const Christoffel* gamma) {
  Christoffel storage;
  const Christoffel& gm = symbols(g, gamma, storage);
  ScalarField lhs = scaled(pairing(g, covariant_derivative(g, x, y, &gm), z), 2.0);
  ScalarField t1 = directional_derivative(x, pairing(g, y, z));
  ScalarField t2 = directional_derivative(y, pairing(g, x, z));
  ScalarField t3 = directional_derivative(z, pairing(g, x, y));
  ScalarField t4 = pairing(g, lie_bracket(x, y), z);
  ScalarField t5 = pairing(g, lie_bracket(x, z), y);
  ScalarField t6 = pairing(g, lie_bracket(y, z), x);
  ScalarField rhs = t1 + t2 - t3 + t4 - t5 - t6;
  return measure_residual(lhs - rhs, {&lhs, &t1, &t2, &t3, &t4, &t5, &t6});
}

double koszul_check(const MetricField& g, const VectorField& x, const VectorField& y,
                    const VectorField& z, const Christoffel* gamma) {
  return koszul_residual(g, x, y, z, gamma).abs;
}

Residual additivity_residual(const MetricField& g, const VectorField& x, const VectorField& y,
                             const VectorField& z, const Christoffel* gamma) {
  Christoffel storage;
  const Christoffel& gm = symbols(g, gamma, storage);
  auto xy = covariant_derivative(g, x, y, &gm);
  auto xz = covariant_derivative(g, x, z, &gm);
  auto yz = covariant_derivative(g, y, z, &gm);
  auto x_sum = covariant_derivative(g, x, y + z, &gm);
  auto sum_z = covariant_derivative(g, x + y, z, &gm);
  Residual upper = measure_residual(x_sum - xy - xz, {&x_sum, &xy, &xz});
  Residual lower = measure_residual(sum_z - xz - yz, {&sum_z, &xz, &yz});
  return upper.rel() >= lower.rel() ? upper : lower;
}

Residual function_linearity_residual(const MetricField& g, const ScalarField& f, const VectorField& u,
                                     const ScalarField& h, const VectorField& v, const VectorField& w,
                                     const Christoffel* gamma) {
  Christoffel storage;
  const Christoffel& gm = symbols(g, gamma, storage);
  auto lhs = covariant_derivative(g, multiply(f, u) + multiply(h, v), w, &gm);
  auto a = multiply(f, covariant_derivative(g, u, w, &gm));
  auto b = multiply(h, covariant_derivative(g, v, w, &gm));
  return measure_residual(lhs - a - b, {&lhs, &a, &b});
}

Residual leibniz_residual(const MetricField& g, const VectorField& u, const ScalarField& f,
                          const VectorField& v, const Christoffel* gamma) {
  Christoffel storage;
  const Christoffel& gm = symbols(g, gamma, storage);
  auto lhs = covariant_derivative(g, u, multiply(f, v), &gm);
  auto a = multiply(directional_derivative(u, f), v);
  auto b = multiply(f, covariant_derivative(g, u, v, &gm));
  return measure_residual(lhs - a - b, {&lhs, &a, &b});
}

Residual torsion_residual(const MetricField& g, const VectorField& x, const VectorField& y,
                          const Christoffel* gamma) {
  Christoffel storage;
  const Christoffel& gm = symbols(g, gamma, storage);
  auto a = covariant_derivative(g, x, y, &gm);
  auto b = covariant_derivative(g, y, x, &gm);
  auto c = lie_bracket(x, y);
  return measure_residual(a - b - c, {&a, &b, &c});
}

Residual compatibility_residual(const MetricField& g, const VectorField& u, const VectorField& v,
                                const VectorField& w, const Christoffel* gamma) {
  Christoffel storage;
  const Christoffel& gm = symbols(g, gamma, storage);
  auto lhs = directional_derivative(u, pairing(g, v, w));
  auto a = pairing(g, covariant_derivative(g, u, v, &gm), w);
  auto b = pairing(g, v, covariant_derivative(g, u, w, &gm));
  return measure_residual(lhs - a - b, {&lhs, &a, &b});
}

PForm flat(const MetricField& g, const VectorField& x) {
  require_same_chart(g, x);
  const int k = g.dim();
  auto out = blank<PForm>(g.chart, k);
  out.degree = 1;
  for (Index p = 0; p < g.size(); ++p) out.values.row(p) = (g.at(p) * x.at(p)).transpose();
  and_masks(out, {&g, &x});
  return out;
}

VectorField sharp(const MetricField& g, const PForm& omega) {
  require_same_chart(g, omega);
  if (omega.degree != 1) throw DimensionMismatch("sharp expects a 1-form");
  const int k = g.dim();
  auto out = blank<VectorField>(g.chart, k);
  for (Index p = 0; p < g.size(); ++p)
    out.values.row(p) = (g.inv(p) * omega.values.row(p).transpose()).transpose();
  and_masks(out, {&g, &omega});
  return out;
}

VectorField gradient(const MetricField& g, const ScalarField& f) {
  return sharp(g, oneform_from(estimate_jacobian(f)));
}

TensorField nabla_oneform(const MetricField& g, const PForm& omega) {
  const int k = g.dim();
  VectorField v = sharp(g, omega);
  TensorField dv = vector_jacobian(v);
  Christoffel gm = christoffel(g);
  auto out = blank<TensorField>(g.chart, k * k);
  parallel_for(g.size(), [&](Index p) {
    Mat nab(k, k);  // column i: nabla_{d_i} v
    for (int i = 0; i < k; ++i)
      for (int m = 0; m < k; ++m) {
        double s = dv.values(p, m * k + i);
        for (int j = 0; j < k; ++j) s += v.values(p, j) * gm.at(p, m, i, j);
        nab(m, i) = s;
      }
    Mat t = (g.at(p) * nab).transpose();  // t(i, j) = g(nabla_i v, d_j)
    out.set(p, t);
  });
  and_masks(out, {&g, &v, &dv, &gm});
  return out;
}

TensorField hessian(const MetricField& g, const ScalarField& f) {
  const int k = g.dim();
  VectorField df = estimate_jacobian(f);
  TensorField ddf = vector_jacobian(df);
  Christoffel gm = christoffel(g);
  auto out = blank<TensorField>(g.chart, k * k);
  parallel_for(g.size(), [&](Index p) {
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) {
        double s = ddf.values(p, j * k + i);
        for (int m = 0; m < k; ++m) s -= gm.at(p, m, i, j) * df.values(p, m);
        out.values(p, i * k + j) = s;
      }
  });
  and_masks(out, {&g, &df, &ddf, &gm});
  return out;
}

ScalarField divergence(const MetricField& g, const VectorField& x) {
  const int k = g.dim();
  TensorField dx = vector_jacobian(x);
  Christoffel gm = christoffel(g);
  auto out = blank<ScalarField>(g.chart, 1);
  for (Index p = 0; p < g.size(); ++p) {
    double s = 0.0;
    for (int i = 0; i < k; ++i) {
      s += dx.values(p, i * k + i);
      for (int j = 0; j < k; ++j) s += x.values(p, j) * gm.at(p, i, i, j);
    }
    out.values(p, 0) = s;
  }
  and_masks(out, {&g, &x, &dx, &gm});
  return out;
}

ScalarField laplacian(const MetricField& g, const ScalarField& f) {
  return scaled(divergence(g, gradient(g, f)), -1.0);
}

ScalarField trace_laplacian(const MetricField& g, const TensorField& hess) {
  auto out = blank<ScalarField>(g.chart, 1);
  for (Index p = 0; p < g.size(); ++p) out.values(p, 0) = -(g.inv(p).cwiseProduct(hess.at(p))).sum();
  and_masks(out, {&g, &hess});
  return out;
}

double max_asymmetry(const TensorField& t) {
  double m = 0.0;
  for (Index p = 0; p < t.size(); ++p)
    if (t.clean(p)) {
      Mat a = t.at(p);
      m = std::max(m, (a - a.transpose()).lpNorm<Eigen::Infinity>());
    }
  return m;
}

MetricField pushforward_metric(const ChartMap& map, const MetricField& g) {
  if (g.chart != map.source) throw ChartMismatch("pushforward_metric: metric not on the map's source");
  const int k = g.dim();
  FieldBase src = g;
  for (Index i = 0; i < g.size(); ++i) {
    if (!g.valid[i] || !map.valid[i]) {
      src.valid[i] = 0;
      continue;
    }
    Eigen::FullPivLU<Mat> lu(map.jac(i));
    if (!lu.isInvertible()) throw SingularJacobian("pushforward_metric: singular Jacobian");
    Mat ji = lu.inverse();
    Mat m = ji.transpose() * g.at(i) * ji;
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b) src.values(i, a * k + b) = m(a, b);
  }
  TensorField moved;
  static_cast<FieldBase&>(moved) = push_values(map, src);
  return make_metric(moved, g.spd_floor);
}

TensorField pullback_tensor(const ChartMap& map, const TensorField& t) {
  if (t.chart != map.target) throw ChartMismatch("pullback_tensor: tensor not on the map's target");
  const int k = t.dim();
  Mask tv, ti;
  Mat at = transfer_values(t, map.image, map.image_index, tv, ti);
  auto out = blank<TensorField>(map.source, k * k);
  for (Index i = 0; i < map.source->size(); ++i) {
    out.valid[i] = map.valid[i] && tv[i];
    out.interior[i] = out.valid[i] && ti[i] && map.source->interior(i);
    if (!out.valid[i]) continue;
    Mat m(k, k);
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b) m(a, b) = at(i, a * k + b);
    Mat j = map.jac(i);
    out.set(i, j.transpose() * m * j);
  }
  return out;
}

}  // namespace weakcalc
