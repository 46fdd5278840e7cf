#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "weakcalc/corpus.hpp"
#include "weakcalc/suites.hpp"

namespace weakcalc {

namespace {

SpacePtr model_space(const GeometryConfig& cfg, const std::string& kind, double side = 1.0) {
  GeneratorSpec g;
  g.kind = kind;
  g.n = cfg.n;
  g.seed = cfg.seed;
  g.side = side;
  g.graph = cfg.graph;
  return generate_space(g);
}

Index nearest(const GeodesicSpace& s, const Vec& y) { return s.ambient_index().nearest(y, 1).front().second; }

Check check(const std::string& test, const std::string& space, double value, double threshold,
            const std::string& relation = "<=", const std::string& measure = "abs") {
  Check c;
  c.test = test;
  c.metric = space;
  c.value = value;
  c.threshold = threshold;
  c.relation = relation;
  c.measure = measure;
  return c;
}

/// Hand-picked generic configuration per model space.
struct Triple {
  Index x, p, q;
};

Triple fixed_triple(const GeodesicSpace& s) {
  if (s.kind == "flat_square")
    return {nearest(s, Vec{{0.5, 0.5}}), nearest(s, Vec{{0.1, 0.45}}), nearest(s, Vec{{0.55, 0.1}})};
  Vec q{{0.3, 0.95, 0.0}};
  q.head(2) *= std::sin(0.9) / q.head(2).norm();
  q(2) = std::cos(0.9);
  return {nearest(s, Vec{{0.0, 0.0, 1.0}}), nearest(s, Vec{{std::sin(0.8), 0.0, std::cos(0.8)}}), nearest(s, q)};
}

const char* kSpaces[] = {"flat_square", "unit_sphere"};

}  // namespace

std::vector<AngleRow> angle_table(const GeometryConfig& cfg) {
  std::vector<AngleRow> rows;
  for (const char* kind : kSpaces) {
    auto s = model_space(cfg, kind);
    SeededStream rng(cfg.seed + 4);
    const bool flat = s->kind == "flat_square";
    int attempts = 0;
    for (int c = 0; c < cfg.configurations;) {
      if (++attempts > 200 * std::max(1, cfg.configurations))
        throw InputError("angle_table: could not place configurations on " + s->kind);
      Vec x, p, q;
      if (flat) {
        x = Vec{{rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7)}};
        const double a1 = rng.uniform(0.0, 2.0 * std::numbers::pi), a2 = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double r1 = rng.uniform(0.3, 0.45), r2 = rng.uniform(0.3, 0.45);
        p = x + r1 * Vec{{std::cos(a1), std::sin(a1)}};
        q = x + r2 * Vec{{std::cos(a2), std::sin(a2)}};
        auto outside = [](const Vec& y) { return (y.array() < 0.02).any() || (y.array() > 0.98).any(); };
        if (outside(p) || outside(q)) continue;
      } else {
        Eigen::Vector3d x3;
        for (int i = 0; i < 3; ++i) x3(i) = rng.uniform(-1.0, 1.0);
        x3.normalize();
        Eigen::Vector3d e1 = Eigen::Vector3d(0, 0, 1).cross(x3);
        if (e1.norm() < 0.1) continue;
        e1.normalize();
        Eigen::Vector3d e2 = x3.cross(e1);
        auto go = [&](double a, double r) {
          Eigen::Vector3d dir = std::cos(a) * e1 + std::sin(a) * e2;
          return Vec(std::cos(r) * x3 + std::sin(r) * dir);
        };
        x = x3;
        const double a1 = rng.uniform(0.0, 2.0 * std::numbers::pi), r1 = rng.uniform(0.6, 1.2);
        const double a2 = rng.uniform(0.0, 2.0 * std::numbers::pi), r2 = rng.uniform(0.6, 1.2);
        p = go(a1, r1);
        q = go(a2, r2);
      }
      AngleRow row;
      row.space = s->kind;
      row.x = nearest(*s, x);
      row.p = nearest(*s, p);
      row.q = nearest(*s, q);
      row.oracle = oracle_angle(*s, row.x, row.p, row.q);
      if (!(row.oracle >= 0.4 && row.oracle <= std::numbers::pi - 0.4)) continue;
      if (!reachability_set(*s, row.p, cfg.tau, cfg.eps_excess).contains(row.x) ||
          !reachability_set(*s, row.q, cfg.tau, cfg.eps_excess).contains(row.x))
        continue;
      AngleEstimate lim = angle_limit(*s, row.x, row.p, row.q, cfg.angle);
      AngleEstimate avg = angle_average(*s, row.x, row.p, row.q, cfg.angle);
      row.config = c++;
      row.limit = lim.value;
      row.average = avg.value;
      row.confident = lim.confident && avg.confident;
      rows.push_back(row);
    }
  }
  return rows;
}

SuiteReport angle_suite(const GeometryConfig& cfg, std::vector<AngleRow>* rows_out) {
  SuiteReport r;
  r.name = "angles";
  std::vector<AngleRow> rows = angle_table(cfg);
  for (const char* kind : kSpaces) {
    double lim = 0.0, avg = 0.0, diff = 0.0;
    int n = 0;
    for (const auto& row : rows) {
      if (row.space != kind) continue;
      ++n;
      lim = std::max(lim, std::abs(row.limit - row.oracle));
      avg = std::max(avg, std::abs(row.average - row.oracle));
      diff = std::max(diff, std::abs(row.limit - row.average));
      if (!std::isfinite(row.limit) || !std::isfinite(row.average)) lim = avg = diff = INFINITY;
    }
    r.add(check("limit_vs_oracle", kind, lim, cfg.tol_angle));
    r.add(check("average_vs_oracle", kind, avg, cfg.tol_angle));
    r.add(check("limit_vs_average", kind, diff, cfg.tol_angle));
    Check cnt = check("configurations", kind, n, cfg.configurations, ">=", "count");
    r.add(cnt);
  }
  if (rows_out) *rows_out = std::move(rows);
  return r;
}

SuiteReport oscillation_suite(const GeometryConfig& cfg) {
  SuiteReport r;
  r.name = "holder_oscillation";
  for (const char* kind : kSpaces) {
    auto s = model_space(cfg, kind);
    Triple t = fixed_triple(*s);
    const bool flat = s->kind == "flat_square";
    const double hi = flat ? 0.15 : 0.35, lo = flat ? 0.03 : 0.08;
    std::vector<double> radii;
    for (int k = 0; k < 6; ++k) radii.push_back(hi * std::pow(lo / hi, k / 5.0));
    OscillationTable tab = holder_oscillation(*s, t.x, t.p, t.q, radii, 0.1, cfg.tau, cfg.angle);
    int inversions = 0;
    for (std::size_t k = 1; k < tab.oscillation.size(); ++k)
      if (tab.oscillation[k] > tab.oscillation[k - 1]) ++inversions;
    r.add(check("fitted_exponent", kind, tab.fit.slope, 0.5, ">=", "exponent"));
    r.add(check("inversions", kind, inversions, 1, "<=", "count"));
    Json rows = Json::array();
    for (std::size_t k = 0; k < tab.radii.size(); ++k)
      rows.push_back(Json{{"r", tab.radii[k]}, {"oscillation", tab.oscillation[k]}, {"count", tab.counts[k]}});
    r.extra[kind] = rows;
  }
  return r;
}

SuiteReport variation_suite(const GeometryConfig& cfg) {
  SuiteReport r;
  r.name = "first_variation";
  for (const char* kind : kSpaces) {
    auto s = model_space(cfg, kind);
    Triple t = fixed_triple(*s);
    VariationTable v = first_variation_residual(*s, t.x, t.p, t.q, {0.05, 0.1, 0.2, 0.4},
                                                std::numeric_limits<double>::quiet_NaN(), cfg.angle);
    const double ratio = v.residual_over_delta.front() / v.residual_over_delta.back();
    r.add(check("ratio_0.05_over_0.4", kind, ratio, 0.5, "<=", "ratio"));
    Json rows = Json::array();
    for (std::size_t k = 0; k < v.deltas.size(); ++k)
      rows.push_back(Json{{"delta", v.deltas[k]}, {"residual_over_delta", v.residual_over_delta[k]}});
    r.extra[kind] = rows;
  }
  return r;
}

SuiteReport embedding_suite(const GeometryConfig& cfg) {
  SuiteReport r;
  r.name = "bilipschitz_embedding";
  const double side = 4.0, reach = 1.8, t = 0.1;
  auto s = model_space(cfg, "flat_square", side);
  const Vec c = Vec::Constant(2, side / 2);
  const Index x = nearest(*s, c);
  const Index a1 = nearest(*s, c + reach * Vec{{-1.0, 0.0}});
  auto anchor = [&](double ang) { return nearest(*s, c + reach * Vec{{-std::cos(ang), -std::sin(ang)}}); };
  EmbeddingReport ortho = bilip_embed(*s, x, {a1, anchor(std::numbers::pi / 2)}, t, true, cfg.angle);
  EmbeddingReport white = bilip_embed(*s, x, {a1, anchor(std::numbers::pi / 3)}, t, true, cfg.angle);
  EmbeddingReport raw = bilip_embed(*s, x, {a1, anchor(std::numbers::pi / 3)}, t, false, cfg.angle);
  r.add(check("orthogonal", "flat_square", ortho.distortion, 1.05, "<=", "distortion"));
  r.add(check("sixty_whitened", "flat_square", white.distortion, 1.1, "<=", "distortion"));
  r.add(check("sixty_raw", "flat_square", raw.distortion, 1.2, ">=", "distortion"));
  return r;
}

SuiteReport stability_suite(const GeometryConfig& cfg) {
  SuiteReport r;
  r.name = "perturbation_stability";
  auto s = model_space(cfg, "flat_square");
  Triple t = fixed_triple(*s);
  std::vector<double> medians;
  Json rows = Json::array();
  for (double delta : {0.01, 0.02, 0.04}) {
    std::vector<double> v;
    for (int k = 0; k < 10; ++k)
      v.push_back(perturbation_stability(*s, t.x, t.p, t.q, delta, cfg.seed + 99 + k, cfg.angle));
    std::sort(v.begin(), v.end());
    medians.push_back(0.5 * (v[4] + v[5]));
    rows.push_back(Json{{"delta", delta}, {"median", medians.back()}, {"max", v.back()}});
  }
  double drop = 0.0;
  for (std::size_t k = 1; k < medians.size(); ++k) drop = std::max(drop, medians[k - 1] - medians[k]);
  r.add(check("median_at_0.01", "flat_square", medians.front(), cfg.tol_angle));
  r.add(check("largest_decrease", "flat_square", drop, 0.0, "<=", "abs"));
  r.extra["flat_square"] = rows;
  return r;
}

std::vector<SuiteReport> verify_geometry(const GeometryConfig& cfg) {
  return {angle_suite(cfg), oscillation_suite(cfg), variation_suite(cfg), embedding_suite(cfg), stability_suite(cfg)};
}

// ---- atlases --------------------------------------------------------------

SuiteReport canonical_suite(const AtlasConfig& cfg) {
  SuiteReport r;
  r.name = "canonical_metric";
  Atlas atlas = sphere_caps_atlas(cfg.options);
  GlobalMetric g = canonical_metric(atlas, cfg.canonical);
  double gram = 0.0;
  Index clean = 0;
  for (std::size_t c = 0; c < atlas.charts.size(); ++c) {
    const SampledChart& ch = *atlas.charts[c].chart;
    for (Index k = 0; k < ch.size(); ++k) {
      if (!g.local[c].clean(k)) continue;
      Mat exact = 4.0 / std::pow(1.0 + ch.point(k).squaredNorm(), 2) * Mat::Identity(2, 2);
      gram = std::max(gram, (g.local[c].at(k) - exact).norm() / exact.norm());
      ++clean;
    }
  }
  Vec z(atlas.space->size());
  for (Index i = 0; i < z.size(); ++i) z(i) = atlas.space->coords(i, 2);
  GlobalSecondOrder so = global_hessian_laplacian(atlas, g, chart_scalars(atlas, z));
  double lap = 0.0;
  Index lap_clean = 0;
  for (std::size_t c = 0; c < atlas.charts.size(); ++c) {
    const ScalarField& l = so.laplacian.local[c];
    for (Index k = 0; k < l.size(); ++k) {
      if (!l.clean(k)) continue;
      lap = std::max(lap, std::abs(l(k) - 2.0 * z(atlas.charts[c].ids[k])) / 2.0);
      ++lap_clean;
    }
  }
  if (clean == 0) gram = INFINITY;
  if (lap_clean == 0) lap = INFINITY;
  r.add(check("gram_vs_round", "unit_sphere", gram, 0.1, "<=", "rel"));
  r.add(check("laplacian_height", "unit_sphere", lap, 0.1, "<=", "rel"));
  Check spd = check("spd_fraction", "unit_sphere", g.spd_fraction, 1.0 - atlas.thresholds.delta_meas, ">=", "mass");
  r.add(spd);
  r.extra["clean_points"] = Json{{"gram", clean}, {"laplacian", lap_clean}};
  return r;
}

SuiteReport atlas_suite(const AtlasConfig& cfg) { return atlas_suite(preset_atlas(cfg.preset, cfg.options), cfg); }

SuiteReport atlas_suite(const Atlas& atlas, const AtlasConfig& cfg) {
  SuiteReport r;
  r.name = "atlas";
  RectifiabilityReport cert = certify_rectifiable(atlas, cfg.delta);
  Check cc = check("certificate", cfg.preset, cert.pass ? 1.0 : 0.0, 1.0, ">=", "pass");
  for (const auto& t : cert.transitions)
    if (!t.pass) cc.note += (cc.note.empty() ? "transition " : ", ") + t.name;
  for (const auto& c : cert.charts)
    if (!c.pass) cc.note += (cc.note.empty() ? "chart " : ", chart ") + c.chart;
  r.add(cc);
  r.add(check("uncovered_mass", cfg.preset, cert.uncovered_mass, atlas.thresholds.delta_meas, "<=", "mass"));
  GlobalMetric g = canonical_metric(atlas, cfg.canonical);
  r.add(check("spd_fraction", cfg.preset, g.spd_fraction, 1.0 - atlas.thresholds.delta_meas, ">=", "mass"));
  CompatibilityReport mc = check_global_metric(atlas, g);
  Check m = check("metric_compatibility", cfg.preset, mc.max_residual, atlas.overlap_tol(), "<=", "rel");
  r.add(m);
  Check reg = check("metric_exponent", cfg.preset, mc.regularity.alpha, 1.0 - atlas.thresholds.tol_alpha, ">=",
                    "exponent");
  reg.note = mc.regularity.kind;
  r.add(reg);
  // height on the sphere, |x|^2 on the square
  const GeodesicSpace& s = *atlas.space;
  Vec f(s.size());
  for (Index i = 0; i < s.size(); ++i)
    f(i) = s.coords.cols() == 3 ? s.coords(i, 2) : s.point(i).squaredNorm();
  GlobalSecondOrder so = global_hessian_laplacian(atlas, g, chart_scalars(atlas, f));
  r.add(check("laplacian_consistency", cfg.preset, so.laplacian_consistency.max_residual, atlas.overlap_tol()));
  Check hc = check("hessian_consistency", cfg.preset, so.hessian_consistency.max_residual, atlas.overlap_tol());
  hc.gating = false;
  r.add(hc);
  Check co = check("cocycle", cfg.preset, cocycle_residual(atlas), atlas.overlap_tol(), "<=", "rel");
  r.add(co);
  r.extra["certificate"] = cert.to_json();
  r.extra["metric_compatibility"] = mc.to_json();
  r.extra["laplacian_consistency"] = so.laplacian_consistency.to_json();
  return r;
}

}  // namespace weakcalc
