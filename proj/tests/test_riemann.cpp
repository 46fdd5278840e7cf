#include <cmath>

#include "doctest.h"
#include "weakcalc/corpus.hpp"

using namespace weakcalc;

namespace {

double max_clean_error(const FieldBase& f, const std::function<Vec(const Vec&)>& oracle) {
  double m = 0.0;
  for (Index i = 0; i < f.size(); ++i)
    if (f.clean(i))
      m = std::max(m, (f.values.row(i).transpose() - oracle(f.chart->point(i))).lpNorm<Eigen::Infinity>());
  return m;
}

Mat round_metric(const Vec& x) {
  double s = 1.0 + x.squaredNorm();
  return 4.0 / (s * s) * Mat::Identity(2, 2);
}

double sphere_height(const Vec& x) {
  double r2 = x.squaredNorm();
  return (r2 - 1.0) / (r2 + 1.0);
}

}  // namespace

TEST_CASE("Christoffel symbols against closed forms") {
  const double h = 0.025;
  auto chart = make_square_grid(2, 0.5, 1.5, h);
  auto flat_g = euclidean_metric(chart);
  CHECK(max_abs_valid(christoffel(flat_g)) < 1e-12);

  auto polar = christoffel(sample_metric(chart, [](const Vec& x) { return Mat(Mat{{1.0, 0.0}, {0.0, x(0) * x(0)}}); }));
  double err = 0.0, sym = 0.0;
  for (Index p = 0; p < polar.size(); ++p) {
    if (!polar.clean(p)) continue;
    double x1 = chart->point(p)(0);
    err = std::max({err, std::abs(polar.at(p, 0, 1, 1) + x1), std::abs(polar.at(p, 1, 0, 1) - 1.0 / x1),
                    std::abs(polar.at(p, 0, 0, 0)), std::abs(polar.at(p, 1, 1, 1))});
    for (int m = 0; m < 2; ++m) sym = std::max(sym, std::abs(polar.at(p, m, 0, 1) - polar.at(p, m, 1, 0)));
  }
  CHECK(err < h);
  CHECK(sym <= 1e-10);

  auto conf = christoffel(sample_metric(chart, [](const Vec& x) { return Mat(std::exp(2.0 * x(0)) * Mat::Identity(2, 2)); }));
  err = 0.0;
  for (Index p = 0; p < conf.size(); ++p) {
    if (!conf.clean(p)) continue;
    err = std::max({err, std::abs(conf.at(p, 0, 0, 0) - 1.0), std::abs(conf.at(p, 0, 1, 1) + 1.0),
                    std::abs(conf.at(p, 1, 0, 1) - 1.0), std::abs(conf.at(p, 1, 1, 0) - 1.0)});
  }
  CHECK(err < h);
}

TEST_CASE("covariant derivative and Koszul residual") {
  auto chart = make_square_grid(2, 0.5, 1.5, 0.05);
  auto g = euclidean_metric(chart);
  auto c = sample_vector(chart, [](const Vec&) { return Vec(Vec{{0.3, -2.0}}); });
  auto x = corpus_vector(chart, 3, 5);
  CHECK(max_abs_valid(covariant_derivative(g, x, c)) < 1e-12);

  auto d1 = coordinate_vector(chart, 0);
  auto y = sample_vector(chart, [](const Vec& p) { return Vec(Vec{{0.0, p(0)}}); });
  CHECK(max_clean_error(covariant_derivative(g, d1, y), [](const Vec&) { return Vec(Vec{{0.0, 1.0}}); }) < 1e-10);

  auto polar = sample_metric(chart, [](const Vec& p) { return Mat(Mat{{1.0, 0.0}, {0.0, p(0) * p(0)}}); });
  auto u = corpus_vector(chart, 3, 1), v = corpus_vector(chart, 3, 2), w = corpus_vector(chart, 3, 3);
  CHECK(torsion_residual(polar, u, v).rel() < 1e-12);

  auto d2 = coordinate_vector(chart, 1);
  CHECK(koszul_check(g, d1, d2, d1) <= 1e-10);
  auto kp = koszul_residual(polar, u, v, w);
  CHECK(kp.rel() <= 2 * 0.05);
  auto doubled = sample_metric(chart, [](const Vec& p) { return Mat(Mat{{2.0, 0.0}, {0.0, 2.0 * p(0) * p(0)}}); });
  double k1 = koszul_check(polar, u, v, w), k2 = koszul_check(doubled, u, v, w);
  CHECK(k2 == doctest::Approx(2.0 * k1).epsilon(1e-9));
}

TEST_CASE("a perturbed connection violates the axioms") {
  auto chart = make_square_grid(2, 0.5, 1.5, 0.05);
  auto polar = sample_metric(chart, [](const Vec& p) { return Mat(Mat{{1.0, 0.0}, {0.0, p(0) * p(0)}}); });
  auto u = corpus_vector(chart, 1, 1), v = corpus_vector(chart, 1, 2), w = corpus_vector(chart, 1, 3);
  Christoffel gamma = christoffel(polar);
  double base = koszul_residual(polar, u, v, w).rel();
  Christoffel bent = gamma;
  bent.values.array() += 0.1;
  CHECK(koszul_residual(polar, u, v, w, &bent).rel() > 10.0 * base);
  CHECK(compatibility_residual(polar, u, v, w, &bent).rel() > 10.0 * compatibility_residual(polar, u, v, w).rel());
}

TEST_CASE("musical isomorphisms") {
  auto chart = make_square_grid(2, 0.0, 1.0, 0.1);
  auto g = sample_metric(chart, [](const Vec&) { return Mat(Mat{{1.0, 0.0}, {0.0, 4.0}}); });
  auto s = sharp(g, coordinate_form(chart, 1));
  for (Index i = 0; i < s.size(); ++i) CHECK((s.at(i) - Vec(Vec{{0.0, 0.25}})).norm() < 1e-14);
  auto curved = sample_metric(chart, [](const Vec& x) { return Mat(Mat{{2.0 + x(0), 0.3}, {0.3, 1.0 + x(1) * x(1)}}); });
  auto x = corpus_vector(chart, 3, 9);
  CHECK(max_abs_valid(sharp(curved, flat(curved, x)) - x) <= 1e-8);
  auto f = sample_polynomial(chart, corpus_polynomial(2, 3, 4));
  auto e = euclidean_metric(chart);
  CHECK(max_abs_valid(gradient(e, f) - estimate_jacobian(f)) == 0.0);
}

TEST_CASE("Hessian, divergence and Laplacian on the flat plane") {
  const double h = 0.05;
  auto chart = make_square_grid(2, -1.0, 1.0, h);
  auto g = euclidean_metric(chart);
  Mat a{{2.0, 0.5}, {0.5, -1.0}};
  auto q = sample_scalar(chart, [a](const Vec& x) { return 0.5 * x.dot(a * x); });
  auto nab = nabla_oneform(g, oneform_from(estimate_jacobian(q)));
  auto flat_a = [a](const Vec&) { return Vec(Eigen::Map<const Vec>(a.data(), 4)); };
  CHECK(max_clean_error(nab, flat_a) < 1e-9);
  auto half_norm = sample_scalar(chart, [](const Vec& x) { return 0.5 * x.squaredNorm(); });
  auto hs = hessian(g, half_norm);
  CHECK(max_clean_error(hs, [](const Vec&) { return Vec(Vec{{1.0, 0.0, 0.0, 1.0}}); }) < 1e-10);
  CHECK(max_asymmetry(hessian(g, q)) <= 1e-10);
  auto affine = sample_scalar(chart, [](const Vec& x) { return 3.0 * x(0) - x(1); });
  CHECK(max_abs_clean(hessian(g, affine)) < 1e-10);
  CHECK(max_abs_clean(laplacian(g, affine)) < 1e-10);

  auto radial = sample_vector(chart, [](const Vec& x) { return x; });
  CHECK(max_clean_error(divergence(g, radial), [](const Vec&) { return Vec::Constant(1, 2.0); }) < 1e-10);
  auto c = sample_vector(chart, [](const Vec&) { return Vec(Vec{{1.0, 2.0}}); });
  CHECK(max_abs_valid(divergence(g, c)) < 1e-12);
  auto r2 = sample_scalar(chart, [](const Vec& x) { return x.squaredNorm(); });
  CHECK(max_clean_error(laplacian(g, r2), [](const Vec&) { return Vec::Constant(1, -4.0); }) < h);
  auto harm = sample_scalar(chart, [](const Vec& x) { return x(0) * x(0) - x(1) * x(1); });
  CHECK(max_abs_clean(laplacian(g, harm)) < h);
}

TEST_CASE("round metric on a stereographic chart") {
  const double h = 0.025;
  auto chart = make_square_grid(2, -0.6, 0.6, h);
  auto g = sample_metric(chart, round_metric);
  auto z = sample_scalar(chart, sphere_height);
  auto hz = hessian(g, z);
  double err = 0.0;
  for (Index p = 0; p < hz.size(); ++p)
    if (hz.clean(p)) err = std::max(err, (hz.at(p) + sphere_height(chart->point(p)) * g.at(p)).lpNorm<Eigen::Infinity>());
  CHECK(err < 2 * h);
  auto lz = laplacian(g, z);
  CHECK(max_clean_error(lz, [](const Vec& x) { return Vec::Constant(1, 2.0 * sphere_height(x)); }) < 2 * h);
  CHECK(max_abs_clean(lz - trace_laplacian(g, hz)) < 2 * h);
}

TEST_CASE("metric pushforward and SPD handling") {
  auto chart = make_square_grid(2, -1.0, 1.0, 0.2);
  auto g = euclidean_metric(chart);
  Mat m{{2.0, 1.0}, {0.0, 1.0}};
  auto lin = map_onto_image(chart, [m](const Vec& x) { return Vec(m * x); }, [m](const Vec&) { return m; });
  auto pg = pushforward_metric(lin, g);
  Mat mi = m.inverse();
  Mat expect = mi.transpose() * mi;
  for (Index i = 0; i < pg.size(); ++i) CHECK((pg.at(i) - expect).norm() < 1e-12);
  auto id = make_chart_map(chart, chart, [](const Vec& x) { return x; }, [](const Vec&) { return Mat(Mat::Identity(2, 2)); });
  CHECK(max_abs_valid(pushforward_metric(id, g) - g) < 1e-14);

  auto bad = sample_metric(chart, [](const Vec& x) { return Mat(Mat{{x(0), 0.0}, {0.0, 1.0}}); });
  Index invalid = 0;
  for (Index i = 0; i < bad.size(); ++i) invalid += !bad.ok(i);
  CHECK(invalid > 0);
  CHECK_THROWS_AS(require_spd(bad), MetricNotSPD);
}
