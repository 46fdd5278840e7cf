#include <cmath>
#include <random>

#include "doctest.h"
#include "weakcalc/chartcalc.hpp"

using namespace weakcalc;

namespace {

double max_clean_diff(const FieldBase& a, const std::function<Vec(const Vec&)>& oracle) {
  double m = 0.0;
  for (Index i = 0; i < a.size(); ++i)
    if (a.clean(i))
      m = std::max(m, (a.values.row(i).transpose() - oracle(a.chart->point(i))).lpNorm<Eigen::Infinity>());
  return m;
}

ChartPtr line_grid(double lo, double hi, double spacing, double h) {
  ChartOptions o;
  o.bandwidth = h;
  return make_grid_chart(Vec::Constant(1, lo), Vec::Constant(1, hi), spacing, o);
}

}  // namespace

TEST_CASE("gradient of constant and affine functions") {
  auto chart = make_square_grid(2, -1.0, 1.0, 0.2);
  auto c = estimate_jacobian(constant_scalar(chart, 3.5));
  CHECK(max_abs_valid(c) < 1e-12);
  auto g = estimate_jacobian(sample_scalar(chart, [](const Vec& x) { return 2.0 * x(0) - 0.5 * x(1) + 1.0; }));
  Index valid = 0;
  for (Index i = 0; i < g.size(); ++i)
    if (g.ok(i)) {
      ++valid;
      CHECK(std::abs(g.values(i, 0) - 2.0) < 1e-10);
      CHECK(std::abs(g.values(i, 1) + 0.5) < 1e-10);
    }
  CHECK(valid == g.size());
}

TEST_CASE("gradient of |x|^2 matches 2x to second order") {
  auto chart = make_square_grid(2, -1.0, 1.0, 0.2);
  auto g = estimate_jacobian(sample_scalar(chart, [](const Vec& x) { return x.squaredNorm(); }));
  CHECK(clean_count(g) > 0);
  // Symmetric stencils reproduce quadratics exactly; the bound only needs O(h^2).
  CHECK(max_clean_diff(g, [](const Vec& x) { return Vec(2.0 * x); }) < 0.04);
}

TEST_CASE("boundary and interior flags on a grid") {
  auto chart = make_square_grid(2, 0.0, 1.0, 0.1);
  Index corner = 0;
  CHECK(chart->boundary(corner));
  // Grid is 21 x 21; the center point is interior.
  CHECK(chart->interior(10 * 21 + 10));
  // An edge row point is flagged.
  CHECK(chart->boundary(10));
}

TEST_CASE("pointwise Lipschitz constants") {
  auto chart = make_square_grid(2, 0.0, 1.0, 0.1);
  auto zero = pointwise_lip(constant_scalar(chart, 1.0), 220);
  CHECK(zero.value == doctest::Approx(0.0));
  auto x1 = pointwise_lip(sample_scalar(chart, [](const Vec& x) { return x(0); }), 220);
  CHECK(x1.value == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(x1.radii.size() == 3);

  auto line = line_grid(-1.0, 1.0, 0.01, 0.05);
  auto absx = sample_scalar(line, [](const Vec& x) { return std::abs(x(0)); });
  Index origin = 100;
  REQUIRE(std::abs(line->point(origin)(0)) < 1e-12);
  double brute = 0.0;
  for (Index j = 0; j < line->size(); ++j)
    if (j != origin)
      brute = std::max(brute, std::abs(absx(j) - absx(origin)) / std::abs(line->point(j)(0)));
  CHECK(pointwise_lip(absx, origin).value == doctest::Approx(brute));
}

TEST_CASE("mollifier reproduces affine data and converges on |x|") {
  auto chart = make_square_grid(2, 0.0, 1.0, 0.1);
  auto affine = sample_scalar(chart, [](const Vec& x) { return 1.0 + 3.0 * x(0) - x(1); });
  auto m = mollify(affine, 0.1);
  double err = 0.0;
  for (Index i = 0; i < m.field.size(); ++i)
    if (m.field.clean(i)) err = std::max(err, std::abs(m.field(i) - affine(i)));
  CHECK(err < 1e-10);

  auto line = line_grid(-1.0, 1.0, 0.001, 0.01);
  auto absx = sample_scalar(line, [](const Vec& x) { return std::abs(x(0)); });
  double prev = INFINITY;
  for (double eps : {0.4, 0.2, 0.1}) {
    auto me = mollify(absx, eps);
    double sup = 0.0;
    for (Index i = 0; i < me.field.size(); ++i) sup = std::max(sup, std::abs(me.field(i) - absx(i)));
    CHECK(sup <= eps);
    CHECK(sup < prev);
    prev = sup;
  }
  auto me = mollify(absx, 0.05);
  Index half = 1500;
  REQUIRE(std::abs(line->point(half)(0) - 0.5) < 1e-12);
  CHECK(std::abs(me.jacobian.values(half, 0) - 1.0) < 0.05);
  CHECK(mollify(absx, 0.005).under_resolved);
}

TEST_CASE("exterior derivative") {
  auto chart = make_square_grid(2, 0.0, 1.0, 0.05);
  auto omega = sample_form(chart, 1, [](const Vec& x) { return Vec(Vec{{x(1), 0.0}}); });
  auto d = exterior_derivative(omega);
  CHECK(d.degree == 2);
  CHECK(max_clean_diff(d, [](const Vec&) { return Vec::Constant(1, -1.0); }) < 1e-9);
  CHECK(max_abs_valid(exterior_derivative(coordinate_form(chart, 0))) < 1e-12);
  CHECK_THROWS_AS(exterior_derivative(d), DegreeOverflow);

  auto f = sample_scalar(chart, [](const Vec& x) { return x(0) * x(0) * x(1); });
  auto ddf = exterior_derivative(exterior_derivative(zero_form_from(f)));
  CHECK(max_abs_clean(ddf) <= 0.05);
}

TEST_CASE("d(df) converges on jittered samples") {
  // Quadratic fits on perturbed grids; the pointwise residual is noisy, so
  // the order is read off the root-mean-square over clean points.
  std::vector<double> rms;
  for (double h : {0.1, 0.025}) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-0.15, 0.15);
    double s = h / 3.0;
    Index m = static_cast<Index>(std::llround(1.0 / s)) + 1;
    Mat pts(m * m, 2);
    for (Index i = 0; i < m; ++i)
      for (Index j = 0; j < m; ++j) pts.row(i * m + j) << i * s + u(rng) * s, j * s + u(rng) * s;
    ChartOptions o;
    o.bandwidth = h;
    o.fit_order = 2;
    auto chart = make_chart(pts, Vec::Constant(m * m, s * s), o);
    auto f = sample_scalar(chart, [](const Vec& x) { return std::sin(2.0 * x(0)) * x(1) * x(1) * x(1); });
    auto dd = exterior_derivative(exterior_derivative(zero_form_from(f)));
    double ss = 0.0;
    Index c = 0;
    for (Index i = 0; i < dd.size(); ++i)
      if (dd.clean(i)) {
        ss += dd.values(i, 0) * dd.values(i, 0);
        ++c;
      }
    REQUIRE(c > 0);
    rms.push_back(std::sqrt(ss / c));
  }
  CHECK(std::log2(rms[0] / rms[1]) / 2.0 > 0.9);
}

TEST_CASE("wedge products") {
  auto chart = make_square_grid(2, 0.0, 1.0, 0.2);
  auto dx1 = coordinate_form(chart, 0);
  auto dx2 = coordinate_form(chart, 1);
  auto w = wedge(dx1, dx2);
  CHECK(max_clean_diff(w, [](const Vec&) { return Vec::Constant(1, 1.0); }) == 0.0);
  CHECK(max_abs_valid(wedge(dx1, dx1)) == 0.0);
  CHECK(max_abs_valid(wedge(dx2, dx1) + w) == 0.0);
  auto a = sample_form(chart, 1, [](const Vec& x) { return Vec(Vec{{x(0), 0.0}}); });
  auto b = sample_form(chart, 1, [](const Vec& x) { return Vec(Vec{{0.0, x(1)}}); });
  auto ab = wedge(a, b);
  for (Index i = 0; i < ab.size(); ++i) {
    Vec x = chart->point(i);
    CHECK(ab.values(i, 0) == doctest::Approx(x(0) * x(1)));
  }
  CHECK_THROWS_AS(wedge(w, dx1), DegreeOverflow);
}

TEST_CASE("Lie bracket") {
  auto chart = make_square_grid(2, 0.0, 1.0, 0.1);
  auto x = coordinate_vector(chart, 0);
  auto y = sample_vector(chart, [](const Vec& p) { return Vec(Vec{{0.0, p(0)}}); });
  auto b = lie_bracket(x, y);
  CHECK(max_clean_diff(b, [](const Vec&) { return Vec(Vec{{0.0, 1.0}}); }) < 1e-10);
  auto z = sample_vector(chart, [](const Vec& p) { return Vec(Vec{{p(1) * p(1), p(0) * p(1)}}); });
  CHECK(max_abs_valid(lie_bracket(z, z)) == 0.0);
  CHECK(max_abs_valid(lie_bracket(x, coordinate_vector(chart, 1))) < 1e-12);
}

TEST_CASE("pullback and pushforward along linear maps") {
  auto chart = make_square_grid(2, -1.0, 1.0, 0.2);
  Mat m{{2.0, 1.0}, {0.5, 3.0}};
  auto g = map_onto_image(chart, [m](const Vec& x) { return Vec(m * x); },
                          [m](const Vec&) { return m; });
  CHECK(g.lip_lo > 0.0);
  auto dx1 = coordinate_form(g.target, 0);
  auto pb = pullback(g, dx1);
  for (Index i = 0; i < pb.size(); ++i) {
    CHECK(pb.values(i, 0) == doctest::Approx(2.0));
    CHECK(pb.values(i, 1) == doctest::Approx(1.0));
  }
  auto v = sample_vector(chart, [](const Vec&) { return Vec(Vec{{1.0, -1.0}}); });
  auto pf = pushforward(g, v);
  Vec mv = m * Vec(Vec{{1.0, -1.0}});
  for (Index i = 0; i < pf.size(); ++i) CHECK((pf.at(i) - mv).norm() < 1e-12);

  auto id = make_chart_map(chart, chart, [](const Vec& x) { return x; },
                           [](const Vec&) { return Mat(Mat::Identity(2, 2)); });
  auto om = sample_form(chart, 1, [](const Vec& x) { return Vec(Vec{{x(1), x(0) * x(0)}}); });
  CHECK(fields_equivalent(pullback(id, om), om, 1e-12).fraction == 1.0);
}

TEST_CASE("pullback commutes with d for a shear map") {
  auto chart = make_square_grid(2, 0.0, 1.0, 0.025);
  auto g = map_onto_image(
      chart, [](const Vec& x) { return Vec(Vec{{x(0), x(1) + x(0) * x(0)}}); },
      [](const Vec& x) { return Mat(Mat{{1.0, 0.0}, {2.0 * x(0), 1.0}}); });
  auto omega = sample_form(g.target, 1, [](const Vec& y) { return Vec(Vec{{y(1), 0.0}}); });
  auto lhs = exterior_derivative(pullback(g, omega));
  auto rhs = pullback(g, exterior_derivative(omega));
  auto diff = lhs - rhs;
  CHECK(clean_count(diff) > 100);
  CHECK(max_abs_clean(diff) < 5 * 0.025);
}

TEST_CASE("field equivalence thresholds") {
  auto chart = make_square_grid(2, 0.0, 1.0, 0.1);
  auto a = sample_scalar(chart, [](const Vec& x) { return x(0); });
  auto e = fields_equivalent(a, a, 1e-9);
  CHECK(e.equivalent);
  CHECK(e.fraction == 1.0);
  auto shifted = a;
  shifted.values.array() += 1e-8;
  e = fields_equivalent(a, shifted, 1e-9);
  CHECK_FALSE(e.equivalent);
  CHECK(e.fraction == 0.0);
  auto chart2 = make_grid_chart(Vec::Zero(1), Vec::Constant(1, 0.99), 0.01, ChartOptions{});
  auto c = sample_scalar(chart2, [](const Vec& x) { return x(0); });
  auto d = c;
  d.values(0, 0) += 1.0;
  e = fields_equivalent(c, d, 1e-9, 0.05);
  CHECK(e.equivalent);
  CHECK(e.fraction == doctest::Approx(0.99));
  CHECK_THROWS_AS(fields_equivalent(a, c, 1e-9), ChartMismatch);
}
