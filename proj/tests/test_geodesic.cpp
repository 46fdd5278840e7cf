#include <cmath>
#include <numbers>

#include "doctest.h"
#include "weakcalc/geodesic.hpp"

using namespace weakcalc;

namespace {

SpacePtr square(Index n) {
  GeneratorSpec g;
  g.kind = "flat_square";
  g.n = n;
  g.seed = 3;
  g.graph = GraphParams{8, 0.0, 7.0, true};
  return generate_space(g);
}

const GeodesicSpace& big_square() {
  static SpacePtr s = square(16384);
  return *s;
}

const GeodesicSpace& sphere() {
  static SpacePtr s = [] {
    GeneratorSpec g;
    g.kind = "unit_sphere";
    g.n = 16384;
    g.seed = 5;
    g.graph = GraphParams{8, 0.0, 7.0, true};
    return generate_space(g);
  }();
  return *s;
}

Index nearest(const GeodesicSpace& s, const Vec& y) { return s.ambient_index().nearest(y, 1, -1).front().second; }

double euclid_angle(const Vec& x, const Vec& p, const Vec& q) {
  const Vec a = p - x, b = q - x;
  return std::acos(a.dot(b) / (a.norm() * b.norm()));
}

// Spherical law of cosines on the unit sphere.
double sphere_angle(const Vec& x, const Vec& p, const Vec& q) {
  const double a = std::acos(std::clamp(x.dot(p), -1.0, 1.0));
  const double b = std::acos(std::clamp(x.dot(q), -1.0, 1.0));
  const double c = std::acos(std::clamp(p.dot(q), -1.0, 1.0));
  return std::acos((std::cos(c) - std::cos(a) * std::cos(b)) / (std::sin(a) * std::sin(b)));
}

}  // namespace

TEST_CASE("graph distances approximate the flat metric") {
  SpacePtr s = square(4096);
  CHECK(s->size() == 4096);
  CHECK(s->calibration == doctest::Approx(1.0).epsilon(0.1));
  const Index a = nearest(*s, Vec{{0.2, 0.2}}), b = nearest(*s, Vec{{0.8, 0.7}});
  auto d = shortest_paths(*s, a);
  const double truth = (s->point(a) - s->point(b)).norm();
  CHECK(d.dist[b] == doctest::Approx(truth).epsilon(0.03));
  CHECK(d.pred[a] == -1);
  auto back = shortest_paths(*s, b);
  CHECK(back.dist[a] == doctest::Approx(d.dist[b]).epsilon(1e-12));
  const std::vector<double> some = distances_to(*s, a, {b});
  CHECK(some[0] == doctest::Approx(s->intrinsic(a, b)).epsilon(0.03));
}

TEST_CASE("walking a shortest-path tree") {
  SpacePtr s = square(4096);
  const Index a = nearest(*s, Vec{{0.1, 0.5}}), b = nearest(*s, Vec{{0.9, 0.5}});
  auto f = s->distances(b);
  EdgePoint e = walk_towards(*s, *f, a, 0.3);
  CHECK(f->dist[a] - field_at(*f, e) == doctest::Approx(0.3).epsilon(1e-9));
  CHECK(edge_point_coords(*s, e)(0) == doctest::Approx(0.4).epsilon(0.1));
}

TEST_CASE("disconnected edge lists are rejected") {
  Mat c(4, 2);
  c << 0, 0, 1, 0, 5, 5, 6, 5;
  std::vector<std::tuple<Index, Index, double>> edges{{0, 1, 1.0}, {2, 3, 1.0}};
  CHECK_THROWS_AS(make_space_from_edges("file", 2, c, Vec::Ones(4), edges), DisconnectedGraph);
}

TEST_CASE("reachability sets need room beyond x") {
  const GeodesicSpace& s = big_square();
  const Index p = nearest(s, Vec{{0.5, 0.5}});
  ReachabilitySet r = reachability_set(s, p, 0.1);
  CHECK(r.contains(nearest(s, Vec{{0.4, 0.5}})));
  CHECK_FALSE(r.contains(nearest(s, Vec{{0.98, 0.5}})));
  for (Index z = 0; z < s.size(); z += 97)
    if (r.contains(z)) CHECK(s.intrinsic(z, r.witness[z]) >= 0.1 - 1e-12);
  CHECK_THROWS_AS(reachability_set(s, p, 0.0), InputError);
}

TEST_CASE("angle estimators on the flat square") {
  const GeodesicSpace& s = big_square();
  const Index x = nearest(s, Vec{{0.5, 0.5}}), p = nearest(s, Vec{{0.1, 0.5}}), q = nearest(s, Vec{{0.5, 0.1}});
  const double truth = euclid_angle(s.point(x), s.point(p), s.point(q));
  CHECK(oracle_angle(s, x, p, q) == doctest::Approx(truth).epsilon(1e-12));
  AngleEstimate lim = angle_limit(s, x, p, q), avg = angle_average(s, x, p, q);
  CHECK(std::abs(lim.value - truth) <= 0.05);
  CHECK(std::abs(avg.value - truth) <= 0.05);
  CHECK(lim.radii.size() == lim.samples.size());
  for (std::size_t k = 1; k < lim.radii.size(); ++k) CHECK(lim.radii[k] < lim.radii[k - 1]);

  AngleEstimate bad = angle_limit(s, x, x, q);
  CHECK(std::isnan(bad.value));
  CHECK_FALSE(bad.confident);
}

TEST_CASE("angle estimators on the sphere") {
  const GeodesicSpace& s = sphere();
  const Index x = nearest(s, Vec{{0.0, 0.0, 1.0}});
  const Index p = nearest(s, Vec{{std::sin(0.8), 0.0, std::cos(0.8)}});
  for (double lam : {std::numbers::pi / 6, std::numbers::pi / 3, std::numbers::pi / 2}) {
    const Index q = nearest(s, Vec{{std::sin(0.8) * std::cos(lam), std::sin(0.8) * std::sin(lam), std::cos(0.8)}});
    const double truth = sphere_angle(s.point(x), s.point(p), s.point(q));
    CHECK(std::abs(truth - lam) <= 0.05);
    CHECK(std::abs(angle_limit(s, x, p, q).value - truth) <= 0.05);
    CHECK(std::abs(angle_average(s, x, p, q).value - truth) <= 0.05);
  }
}

TEST_CASE("first variation residual shrinks with delta") {
  const GeodesicSpace& s = big_square();
  const Index x = nearest(s, Vec{{0.5, 0.5}}), p = nearest(s, Vec{{0.15, 0.4}}), q = nearest(s, Vec{{0.6, 0.15}});
  const double c = std::cos(euclid_angle(s.point(x), s.point(p), s.point(q)));
  VariationTable t = first_variation_residual(s, x, p, q, {0.05, 0.4}, c);
  REQUIRE(t.residual_over_delta.size() == 2);
  CHECK(t.residual_over_delta[0] <= 0.5 * t.residual_over_delta[1]);
}

TEST_CASE("distance coordinates embed bi-Lipschitz") {
  GeneratorSpec g;
  g.kind = "flat_square";
  g.n = 16384;
  g.side = 4.0;
  g.seed = 2;
  g.graph = GraphParams{8, 0.0, 7.0, true};
  SpacePtr s = generate_space(g);
  const Index x = nearest(*s, Vec{{2.0, 2.0}});
  const Index a = nearest(*s, Vec{{0.2, 2.0}}), b = nearest(*s, Vec{{2.0, 0.2}});
  EmbeddingReport r = bilip_embed(*s, x, {a, b}, 0.1);
  CHECK(r.pairs > 0);
  CHECK(r.distortion <= 1.05);
  CHECK(std::abs(r.gram(0, 1)) <= 0.05);
}

TEST_CASE("edge perturbation") {
  const GeodesicSpace& s = big_square();
  SpacePtr same = perturb_edges(s, 0.0, 1);
  CHECK(same->lengths == s.lengths);
  SpacePtr noisy = perturb_edges(s, 0.02, 1);
  for (std::size_t e = 0; e < s.lengths.size(); e += 101) {
    CHECK(noisy->lengths[e] >= 0.98 * s.lengths[e] - 1e-15);
    CHECK(noisy->lengths[e] <= 1.02 * s.lengths[e] + 1e-15);
  }
  const Index x = nearest(s, Vec{{0.5, 0.5}}), p = nearest(s, Vec{{0.1, 0.5}}), q = nearest(s, Vec{{0.5, 0.1}});
  CHECK(perturbation_stability(s, x, p, q, 0.0, 1) <= 1e-12);
  CHECK(perturbation_stability(s, x, p, q, 0.01, 1) <= 0.05);
}

TEST_CASE("Holder oscillation decreases towards x") {
  const GeodesicSpace& s = big_square();
  const Index x = nearest(s, Vec{{0.5, 0.5}}), p = nearest(s, Vec{{0.1, 0.45}}), q = nearest(s, Vec{{0.55, 0.1}});
  OscillationTable t = holder_oscillation(s, x, p, q, {0.15, 0.1, 0.06, 0.04}, 0.1, 0.1);
  REQUIRE(t.oscillation.size() == 4);
  CHECK(t.oscillation.back() < t.oscillation.front());
  CHECK(t.fit.slope >= 0.5);
}
