#include <cmath>
#include <numbers>

#include "doctest.h"
#include "weakcalc/atlas.hpp"
#include "weakcalc/chartcalc.hpp"
#include "weakcalc/geodesic.hpp"

using namespace weakcalc;

namespace {

using V3 = Eigen::Vector3d;

PresetOptions small_flat() {
  PresetOptions o;
  o.n = 4096;
  o.bandwidth = 0.15;
  return o;
}

const Atlas& flat_single() {
  static Atlas a = flat_single_atlas(small_flat());
  return a;
}

const Atlas& flat_two() {
  static Atlas a = flat_two_chart_atlas(small_flat());
  return a;
}

const Atlas& sphere() {
  static Atlas a = sphere_caps_atlas();
  return a;
}

const GlobalMetric& sphere_canonical() {
  static GlobalMetric g = canonical_metric(sphere());
  return g;
}

// Frame of the stereographic cap around the chart's centre, matching the preset.
struct CapFrame {
  V3 c, e1, e2;
  explicit CapFrame(std::size_t chart) {
    const int a = static_cast<int>(chart) / 2;
    c.setZero();
    c(a) = chart % 2 ? -1.0 : 1.0;
    e1.setZero();
    e1((a + 1) % 3) = 1.0;
    e2 = c.cross(e1);
  }
  V3 point(const Vec& u) const {
    const double s = u.squaredNorm();
    return (2.0 * u(0) * e1 + 2.0 * u(1) * e2 + (1.0 - s) * c) / (1.0 + s);
  }
  Eigen::Matrix<double, 3, 2> jacobian(const Vec& u) const {
    Eigen::Matrix<double, 3, 2> j;
    for (int a = 0; a < 2; ++a) {
      Vec up = u, um = u;
      up(a) += 1e-6;
      um(a) -= 1e-6;
      j.col(a) = (point(up) - point(um)) / 2e-6;
    }
    return j;
  }
};

GlobalMetric round_metric(const Atlas& a) {
  GlobalMetric g;
  for (const auto& ch : a.charts)
    g.local.push_back(sample_metric(ch.chart, [](const Vec& u) {
      return Mat(4.0 / std::pow(1.0 + u.squaredNorm(), 2) * Mat::Identity(2, 2));
    }));
  return g;
}

GlobalMetric euclidean(const Atlas& a) {
  GlobalMetric g;
  for (const auto& ch : a.charts) g.local.push_back(euclidean_metric(ch.chart));
  return g;
}

Vec ambient(const Atlas& a, const std::function<double(const Vec&)>& f) {
  Vec v(a.space->size());
  for (Index i = 0; i < v.size(); ++i) v(i) = f(a.space->point(i));
  return v;
}

// Vector field given in ambient square coordinates, expressed in each chart.
GlobalVector planar_field(const Atlas& a, const std::function<Vec(const Vec&)>& x) {
  GlobalVector out;
  for (std::size_t c = 0; c < a.charts.size(); ++c) {
    const double shift = a.charts[c].id == "right" ? 0.3 : 0.0;
    out.local.push_back(sample_vector(a.charts[c].chart, [&, shift](const Vec& u) {
      return x(Vec{{u(0) + shift, u(1)}});
    }));
  }
  return out;
}

}  // namespace

TEST_CASE("flat identity chart certifies with small distortion") {
  RectifiabilityReport r = certify_rectifiable(flat_single(), 0.1);
  REQUIRE(r.charts.size() == 1);
  CHECK(r.pass);
  CHECK(r.charts[0].distortion <= 0.01);
  CHECK(r.charts[0].ahlfors_c <= 1.3);
  CHECK(r.charts[0].centers > 0);
  CHECK(r.uncovered_mass == doctest::Approx(0.0));
}

TEST_CASE("sphere caps certify and a stretched chart does not") {
  RectifiabilityReport r = certify_rectifiable(sphere(), 0.1);
  CHECK(r.pass);
  for (const auto& c : r.charts) CHECK(c.distortion <= 0.1);
  CHECK(r.uncovered_mass <= 0.05);

  RectifiabilityReport b = certify_rectifiable(broken_transition_atlas(small_flat()), 0.1);
  CHECK_FALSE(b.pass);
  bool named = false;
  for (const auto& t : b.transitions) named = named || (t.name == "left/right" && !t.pass);
  CHECK(named);
  // stretch 2 in one axis: (2 - 1) / (2 + 1)
  CHECK(b.charts[1].distortion == doctest::Approx(1.0 / 3.0).epsilon(0.02));
}

TEST_CASE("global forms: restriction of an ambient form is compatible") {
  const Atlas& a = sphere();
  GlobalForm dz, raw;
  for (std::size_t c = 0; c < a.charts.size(); ++c) {
    CapFrame f(c);
    dz.local.push_back(sample_form(a.charts[c].chart, 1, [&](const Vec& u) { return Vec(f.jacobian(u).row(2).transpose()); }));
    raw.local.push_back(sample_form(a.charts[c].chart, 1, [](const Vec& u) { return Vec{{u(0), -u(1)}}; }));
  }
  CompatibilityReport ok = check_global_form(a, dz);
  CHECK(ok.compatible);
  CHECK(ok.max_residual <= a.overlap_tol());
  CompatibilityReport bad = check_global_form(a, raw);
  CHECK_FALSE(bad.compatible);
  CHECK(bad.max_residual > 0.3);

  GlobalForm single;
  single.local.push_back(coordinate_form(flat_single().charts[0].chart, 0));
  CompatibilityReport one = check_global_form(flat_single(), single);
  CHECK(one.max_residual == 0.0);
  CHECK(one.overlaps.empty());
}

TEST_CASE("canonical metric on flat and scaled charts") {
  const Atlas& a = flat_single();
  GlobalMetric g = canonical_metric(a);
  CHECK(g.spd_fraction >= 0.99);
  double err = 0.0;
  for (Index k = 0; k < g.local[0].size(); ++k)
    if (g.local[0].clean(k)) err = std::max(err, (g.local[0].at(k) - Mat::Identity(2, 2)).norm());
  CHECK(err <= 0.1);

  // x -> (x1, 2 x2): dual Gram diag(1, 4), metric diag(1, 1/4)
  AtlasChart scaled;
  scaled.id = "scaled";
  const SampledChart& base = *a.charts[0].chart;
  Mat pts = base.points();
  pts.col(1) *= 2.0;
  ChartOptions co = base.options();
  co.bandwidth *= 2.0;
  scaled.chart = make_chart(pts, base.weights() * 2.0, co);
  scaled.ids = a.charts[0].ids;
  Atlas s = assemble_atlas(a.space, {scaled});
  GlobalMetric gs = canonical_metric(s);
  Mat expect{{1.0, 0.0}, {0.0, 0.25}};
  double serr = 0.0;
  for (Index k = 0; k < gs.local[0].size(); ++k)
    if (gs.local[0].clean(k)) serr = std::max(serr, (gs.local[0].at(k) - expect).norm() / expect.norm());
  CHECK(serr <= 0.1);
}

TEST_CASE("canonical metric of the sphere caps") {
  const Atlas& a = sphere();
  const GlobalMetric& g = sphere_canonical();
  CHECK(g.spd_fraction >= 0.95);
  double err = 0.0;
  for (std::size_t c = 0; c < a.charts.size(); ++c)
    for (Index k = 0; k < g.local[c].size(); ++k) {
      if (!g.local[c].clean(k)) continue;
      Vec u = a.charts[c].chart->point(k);
      Mat ex = 4.0 / std::pow(1.0 + u.squaredNorm(), 2) * Mat::Identity(2, 2);
      err = std::max(err, (g.local[c].at(k) - ex).norm() / ex.norm());
    }
  CHECK(err <= 0.1);
  Regularity r = classify_metric_regularity(g);
  CHECK(r.kind == "weakly Lipschitz");
  CHECK(std::isfinite(r.constant));
  CHECK(check_global_metric(a, g).compatible);
}

TEST_CASE("metric regularity classes") {
  const Atlas& a = flat_single();
  GlobalMetric c;
  c.local.push_back(sample_metric(a.charts[0].chart, [](const Vec&) { return Mat(Mat{{2.0, 0.3}, {0.3, 1.0}}); }));
  Regularity rc = classify_metric_regularity(c);
  CHECK(rc.kind == "weakly Lipschitz");
  CHECK(rc.alpha == 1.0);
  CHECK(rc.constant <= 1e-9);

  GlobalMetric h;
  h.local.push_back(sample_metric(a.charts[0].chart, [](const Vec& x) {
    return Mat((1.0 + std::sqrt(std::abs(x(0) - 0.5))) * Mat::Identity(2, 2));
  }));
  Regularity rh = classify_metric_regularity(h);
  CHECK(rh.alpha == doctest::Approx(0.5).epsilon(0.2));
  CHECK(rh.kind == "weakly Holder");

  GlobalMetric smooth;
  smooth.local.push_back(sample_metric(a.charts[0].chart, [](const Vec& x) {
    return Mat((1.0 + x(0) * x(1)) * Mat::Identity(2, 2));
  }));
  CHECK(classify_metric_regularity(smooth).kind == "weakly Lipschitz");

  Vec y{{1.0, 2.0}};
  GlobalVector x;
  x.local.push_back(sample_vector(a.charts[0].chart, [&](const Vec&) { return y; }));
  CHECK_THROWS_AS(global_levi_civita(a, h, x, x), MetricNotLipschitz);
}

TEST_CASE("Levi-Civita across a translation transition") {
  const Atlas& a = flat_two();
  GlobalMetric g = euclidean(a);
  GlobalVector x = planar_field(a, [](const Vec& p) { return Vec{{p(1), 1.0 - p(0)}}; });
  GlobalVector y = planar_field(a, [](const Vec& p) { return Vec{{2.0 * p(0) + p(1), 0.5 - p(1)}}; });
  GlobalVectorResult r = global_levi_civita(a, g, x, y);
  CHECK(r.consistency.max_residual <= 1e-8);

  std::vector<Christoffel> gammas;
  for (const auto& m : g.local) gammas.push_back(christoffel(m));
  gammas[1].values.array() += 0.1;
  GlobalVectorResult bad = global_levi_civita(a, g, x, y, {&gammas[0], &gammas[1]});
  CHECK(bad.consistency.max_residual >= 0.05);
}

TEST_CASE("Levi-Civita of rotational fields on the sphere") {
  const Atlas& a = sphere();
  GlobalVector x, y;
  for (std::size_t c = 0; c < a.charts.size(); ++c) {
    CapFrame f(c);
    auto field = [&](V3 axis) {
      return sample_vector(a.charts[c].chart, [&, axis](const Vec& u) {
        auto j = f.jacobian(u);
        return Vec((j.transpose() * j).ldlt().solve(j.transpose() * axis.cross(f.point(u))));
      });
    };
    x.local.push_back(field(V3(0, 0, 1)));
    y.local.push_back(field(V3(1, 0, 0)));
  }
  GlobalVectorResult r = global_levi_civita(a, round_metric(a), x, y);
  CHECK(r.consistency.max_residual <= 0.05);
}

TEST_CASE("Laplacian and Hessian through the atlas") {
  const Atlas& s = sphere();
  Vec z = ambient(s, [](const Vec& p) { return p(2); });
  GlobalSecondOrder so = global_hessian_laplacian(s, sphere_canonical(), chart_scalars(s, z));
  double err = 0.0;
  for (std::size_t c = 0; c < s.charts.size(); ++c) {
    const ScalarField& l = so.laplacian.local[c];
    for (Index k = 0; k < l.size(); ++k)
      if (l.clean(k)) err = std::max(err, std::abs(l(k) - 2.0 * z(s.charts[c].ids[k])) / 2.0);
  }
  CHECK(err <= 0.1);
  CHECK(so.laplacian_consistency.max_residual <= s.overlap_tol());

  const Atlas& f = flat_two();
  Vec affine = ambient(f, [](const Vec& p) { return 0.3 + 2.0 * p(0) - p(1); });
  GlobalSecondOrder fo = global_hessian_laplacian(f, euclidean(f), chart_scalars(f, affine));
  for (std::size_t c = 0; c < f.charts.size(); ++c) {
    CHECK(max_abs_clean(fo.hessian.local[c]) <= 1e-8);
    CHECK(max_abs_clean(fo.laplacian.local[c]) <= 1e-8);
  }
  CHECK(fo.laplacian_consistency.max_residual <= 1e-8);
}

TEST_CASE("Laplacian product rule on a sphere cap") {
  const Atlas& s = sphere();
  const ChartPtr chart = s.charts[4].chart;
  MetricField g = round_metric(s).local[4];
  CapFrame fr(4);
  ScalarField x = sample_scalar(chart, [&](const Vec& u) { return fr.point(u)(0); });
  ScalarField y = sample_scalar(chart, [&](const Vec& u) { return fr.point(u)(1) + 0.5; });
  ScalarField lhs = laplacian(g, multiply(x, y));
  ScalarField rhs = multiply(y, laplacian(g, x)) - scaled(pairing(g, gradient(g, x), gradient(g, y)), 2.0) +
                    multiply(x, laplacian(g, y));
  CHECK(max_abs_clean(lhs - rhs) <= 2.0 * chart->bandwidth());
}

TEST_CASE("weak Holder partition") {
  const Atlas& a = flat_single();
  Mask all(a.space->size(), 1);
  HolderPartition lip = classify_weak_holder(a, ambient(a, [](const Vec& p) { return p(0) + 0.5 * p(1); }), all, 1.0, 2.0);
  CHECK(lip.pieces.size() == 1);
  CHECK(lip.covered_fraction >= 0.99);
  CHECK(lip.fitted_alpha == doctest::Approx(1.0).epsilon(0.1));

  Vec jump = ambient(a, [](const Vec& p) { return (p(1) > 0.3 + 0.4 * p(0) * p(0) ? 1.0 : 0.0) + p(0); });
  HolderPartition two = classify_weak_holder(a, jump, all, 1.0, 2.0);
  REQUIRE(two.pieces.size() >= 2);
  CHECK(two.covered_fraction >= 0.99);
  CHECK(two.pieces[0].mass + two.pieces[1].mass >= 0.99 * a.space->weights.sum());
}

TEST_CASE("angle cosine field splits into Holder pieces") {
  const Atlas& a = flat_single();
  const GeodesicSpace& s = *a.space;
  const Index p = s.ambient_index().nearest(Vec{{0.2, 0.3}}, 1, -1).front().second;
  const Index q = s.ambient_index().nearest(Vec{{0.8, 0.6}}, 1, -1).front().second;
  AngleField field = angle_field(s, p, q, 0.1);
  Vec f(s.size());
  for (Index i = 0; i < s.size(); ++i) f(i) = field.valid[i] ? field.cos_angle[i] : 0.0;
  HolderPartition part = classify_weak_holder(a, f, field.valid, 0.5, 20.0);
  REQUIRE_FALSE(part.pieces.empty());
  CHECK(part.fitted_alpha > 0.0);
  CHECK(part.fitted_alpha >= 0.5 - a.thresholds.tol_alpha);
}

TEST_CASE("atlas assembly errors") {
  const Atlas& a = flat_single();
  AtlasChart one = a.charts[0], tiny;
  tiny.id = "tiny";
  Mat pts(5, 2);
  std::vector<Index> ids;
  for (Index k = 0; k < 5; ++k) {
    pts.row(k) = a.charts[0].chart->points().row(k);
    ids.push_back(a.charts[0].ids[k]);
  }
  ChartOptions co = a.charts[0].chart->options();
  tiny.chart = make_chart(pts, Vec::Constant(5, 1e-3), co);
  tiny.ids = ids;
  CHECK_THROWS_AS(assemble_atlas(a.space, {one, tiny}), InsufficientOverlapSamples);

  AtlasChart line;
  line.id = "line";
  line.ids = a.charts[0].ids;
  line.chart = make_chart(a.charts[0].chart->points().col(0), a.charts[0].chart->weights(), co);
  CHECK_THROWS_AS(assemble_atlas(a.space, {one, line}), DimensionMismatch);
}

TEST_CASE("cocycle of three translated strips") {
  const Atlas& a = flat_single();
  const GeodesicSpace& s = *a.space;
  auto strip = [&](const std::string& id, double lo, double scale) {
    AtlasChart c;
    c.id = id;
    std::vector<Vec> pts;
    for (Index i = 0; i < s.size(); ++i) {
      Vec y = s.point(i);
      if (y(0) < lo || y(0) > lo + 0.6) continue;
      c.ids.push_back(i);
      pts.push_back(Vec{{scale * (y(0) - lo), y(1)}});
    }
    Mat m(pts.size(), 2);
    for (std::size_t k = 0; k < pts.size(); ++k) m.row(k) = pts[k].transpose();
    ChartOptions co = a.charts[0].chart->options();
    c.chart = make_chart(m, Vec::Constant(pts.size(), scale / s.size()), co);
    return c;
  };
  Atlas t = assemble_atlas(a.space, {strip("a", 0.0, 1.0), strip("b", 0.2, 1.0), strip("c", 0.4, 1.0)});
  CHECK(t.overlaps.size() == 3);
  CHECK(cocycle_residual(t) <= 1e-8);
  CHECK(cocycle_residual(flat_two()) == 0.0);
}
