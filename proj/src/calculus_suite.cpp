#include <cmath>
#include <limits>

#include "weakcalc/corpus.hpp"
#include "weakcalc/fitting.hpp"
#include "weakcalc/suites.hpp"

namespace weakcalc {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Check residual_check(const std::string& test, const std::string& metric, std::int64_t seed, double h,
                     const Residual& r, bool relative, double threshold, bool gating = true) {
  Check c;
  c.test = test;
  c.metric = metric;
  c.field_seed = seed;
  c.h = h;
  c.measure = relative ? "rel" : "abs";
  c.threshold = threshold;
  c.gating = gating;
  if (r.points == 0) {
    c.value = kNaN;
    c.note = "no interior samples";
  } else {
    c.value = relative ? r.rel() : r.abs;
  }
  return c;
}

Residual max_residual(const FieldBase& f) {
  Residual r;
  r.abs = max_abs_clean(f);
  r.points = clean_count(f);
  return r;
}

ChartPtr unit_square(double h, int fit_order = 1) { return make_square_grid(2, 0.0, 1.0, h, fit_order); }
ChartPtr metric_square(double h) { return make_square_grid(2, 0.5, 1.5, h); }

PForm form_from_components(ChartPtr chart, const std::vector<Polynomial>& comps) {
  return sample_form(chart, 1, [&comps](const Vec& x) {
    Vec v(comps.size());
    for (std::size_t c = 0; c < comps.size(); ++c) v(c) = comps[c](x);
    return v;
  });
}

struct MetricCase {
  std::string name;
  MetricField g;
  bool flat = false;
};

std::vector<MetricCase> metric_cases(const CalculusConfig& cfg, double h) {
  std::vector<MetricCase> out;
  auto chart = metric_square(h);
  for (const TestMetric& tm : metric_corpus())
    out.push_back({tm.name, sample_metric(chart, tm.g, cfg.lambda_min), tm.name == "flat"});
  return out;
}

}  // namespace

SuiteReport dd_suite(const CalculusConfig& cfg) {
  SuiteReport rep;
  rep.name = "exterior_derivative_squared";
  const std::vector<double> hs = {cfg.h, cfg.h / 2.0};
  std::vector<std::vector<double>> per_seed(cfg.seeds);
  for (double h : hs) {
    auto chart = unit_square(h);
    for (int s = 1; s <= cfg.seeds; ++s) {
      auto f = sample_polynomial(chart, corpus_polynomial(2, 3, 1000 + s));
      Residual r = max_residual(exterior_derivative(exterior_derivative(zero_form_from(f))));
      rep.add(residual_check("d(df) max coefficient", "flat", 1000 + s, h, r, false, 0.5 * h));
      per_seed[s - 1].push_back(r.points ? r.abs : kNaN);
    }
  }
  for (int s = 1; s <= cfg.seeds; ++s) {
    const auto& r = per_seed[s - 1];
    Check c;
    c.test = "d(df) convergence order";
    c.metric = "flat";
    c.field_seed = 1000 + s;
    c.h = hs[1];
    if (std::max(r[0], r[1]) <= cfg.roundoff_floor) {
      c.measure = "roundoff_floor";
      c.value = std::max(r[0], r[1]);
      c.threshold = cfg.roundoff_floor;
      c.note = "both residuals at roundoff; grid stencils commute exactly";
    } else {
      c.measure = "order";
      c.value = observed_order(hs[0], r[0], hs[1], r[1]);
      c.threshold = 0.9;
      c.relation = ">=";
    }
    rep.add(c);
  }
  // d(d omega) for 1-forms needs 3-forms to be nonzero a priori: in R^3.
  for (double h : {2.0 * cfg.h, cfg.h}) {
    auto chart = make_square_grid(3, 0.0, 1.0, h);
    for (int s = 1; s <= std::min(cfg.seeds, 2); ++s) {
      auto omega = form_from_components(chart, corpus_vector_components(3, 3, 2000 + s));
      Residual r = max_residual(exterior_derivative(exterior_derivative(omega)));
      rep.add(residual_check("d(d omega) max coefficient, R^3", "flat", 2000 + s, h, r, false, 0.5 * h));
    }
  }
  // Perturbed samples with quadratic fits: genuine O(h) decay, measured in RMS.
  std::vector<double> rms;
  const std::vector<double> jh = {2.0 * cfg.h, cfg.h / 2.0};
  for (double h : jh) {
    SeededStream rng(77);
    const double sp = h / 3.0;
    const Index m = static_cast<Index>(std::llround(1.0 / sp)) + 1;
    Mat pts(m * m, 2);
    for (Index i = 0; i < m; ++i)
      for (Index j = 0; j < m; ++j)
        pts.row(i * m + j) << (i + rng.uniform(-0.15, 0.15)) * sp, (j + rng.uniform(-0.15, 0.15)) * sp;
    ChartOptions o;
    o.bandwidth = h;
    o.fit_order = 2;
    auto chart = make_chart(pts, Vec::Constant(m * m, sp * sp), o);
    auto f = sample_polynomial(chart, corpus_polynomial(2, 3, 1001));
    auto dd = exterior_derivative(exterior_derivative(zero_form_from(f)));
    double ss = 0.0;
    Index c = 0;
    for (Index i = 0; i < dd.size(); ++i)
      if (dd.clean(i)) {
        ss += dd.values(i, 0) * dd.values(i, 0);
        ++c;
      }
    rms.push_back(c ? std::sqrt(ss / c) : kNaN);
  }
  Check jc;
  jc.test = "d(df) RMS order on perturbed samples (quadratic fit)";
  jc.metric = "flat";
  jc.field_seed = 1001;
  jc.h = jh[1];
  jc.measure = "order";
  jc.value = observed_order(jh[0], rms[0], jh[1], rms[1]);
  jc.threshold = 0.9;
  jc.relation = ">=";
  rep.add(jc);
  rep.extra["perturbed_rms"] = rms;
  return rep;
}

SuiteReport connection_suite(const CalculusConfig& cfg) {
  SuiteReport rep;
  rep.name = "connection_axioms";
  for (double h : {cfg.h, cfg.h / 2.0}) {
    std::vector<MetricCase> cases = metric_cases(cfg, h);
    for (const NamedMetric& nm : cfg.extra_metrics)
      if (h == cfg.h) cases.push_back({nm.name, nm.metric, false});
    for (const MetricCase& mc : cases) {
      const MetricField& g = mc.g;
      auto chart = g.chart;
      const double hc = chart->bandwidth();
      Christoffel gamma = christoffel(g);
      for (int s = 1; s <= cfg.seeds; ++s) {
        const std::int64_t seed = 3000 + 10 * s;
        auto v3 = [&](int off) { return corpus_vector(chart, 3, seed + off); };
        auto v1 = [&](int off) { return corpus_vector(chart, 1, seed + off); };
        auto f3 = [&](int off) { return sample_polynomial(chart, corpus_polynomial(2, 3, seed + off)); };
        auto f1 = [&](int off) { return sample_polynomial(chart, corpus_polynomial(2, 1, seed + off)); };
        if (mc.flat) {
          const double tol = 1e-9;
          rep.add(residual_check("additivity", mc.name, seed, hc, additivity_residual(g, v3(1), v3(2), v3(3), &gamma), false, tol));
          rep.add(residual_check("function linearity", mc.name, seed, hc,
                                 function_linearity_residual(g, f3(4), v3(1), f3(5), v3(2), v3(3), &gamma), false, tol));
          rep.add(residual_check("Leibniz", mc.name, seed, hc, leibniz_residual(g, v3(1), f1(4), v1(2), &gamma), false, tol));
          rep.add(residual_check("torsion", mc.name, seed, hc, torsion_residual(g, v3(1), v3(2), &gamma), false, tol));
          rep.add(residual_check("metric compatibility", mc.name, seed, hc,
                                 compatibility_residual(g, v3(1), v1(2), v1(3), &gamma), false, tol));
          rep.add(residual_check("Koszul", mc.name, seed, hc, koszul_residual(g, v1(1), v1(2), v1(3), &gamma), false, tol));
          // Products of cubics leave the estimator's exact class; reported only.
          rep.add(residual_check("Leibniz, cubic fields", mc.name, seed, hc, leibniz_residual(g, v3(1), f3(4), v3(2), &gamma),
                                 true, 2.0 * hc, false));
          rep.add(residual_check("metric compatibility, cubic fields", mc.name, seed, hc,
                                 compatibility_residual(g, v3(1), v3(2), v3(3), &gamma), true, 2.0 * hc, false));
          rep.add(residual_check("Koszul, cubic fields", mc.name, seed, hc, koszul_residual(g, v3(1), v3(2), v3(3), &gamma),
                                 true, 2.0 * hc, false));
        } else {
          const double tol = 2.0 * hc;
          rep.add(residual_check("additivity", mc.name, seed, hc, additivity_residual(g, v3(1), v3(2), v3(3), &gamma), true, tol));
          rep.add(residual_check("function linearity", mc.name, seed, hc,
                                 function_linearity_residual(g, f3(4), v3(1), f3(5), v3(2), v3(3), &gamma), true, tol));
          rep.add(residual_check("Leibniz", mc.name, seed, hc, leibniz_residual(g, v3(1), f3(4), v3(2), &gamma), true, tol));
          rep.add(residual_check("torsion", mc.name, seed, hc, torsion_residual(g, v3(1), v3(2), &gamma), true, tol));
          rep.add(residual_check("metric compatibility", mc.name, seed, hc,
                                 compatibility_residual(g, v3(1), v3(2), v3(3), &gamma), true, tol));
          rep.add(residual_check("Koszul", mc.name, seed, hc, koszul_residual(g, v3(1), v3(2), v3(3), &gamma), true, tol));
        }
      }
    }
  }
  return rep;
}

SuiteReport hessian_suite(const CalculusConfig& cfg) {
  SuiteReport rep;
  rep.name = "hessian_symmetry";
  for (double h : {cfg.h, cfg.h / 2.0}) {
    std::vector<MetricCase> cases = metric_cases(cfg, h);
    for (const NamedMetric& nm : cfg.extra_metrics)
      if (h == cfg.h) cases.push_back({nm.name, nm.metric, false});
    for (const MetricCase& mc : cases) {
      auto chart = mc.g.chart;
      const double hc = chart->bandwidth();
      for (int s = 1; s <= cfg.seeds; ++s) {
        const std::int64_t seed = 4000 + s;
        auto f = sample_polynomial(chart, corpus_polynomial(2, 3, seed));
        auto hs = hessian(mc.g, f);
        Residual r;
        r.abs = max_asymmetry(hs);
        r.points = clean_count(hs);
        rep.add(residual_check("Hessian asymmetry", mc.name, seed, hc, r, false, 2.0 * hc));
        auto lap = laplacian(mc.g, f);
        auto trl = trace_laplacian(mc.g, hs);
        rep.add(residual_check("Laplacian vs -trace Hessian", mc.name, seed, hc, measure_residual(lap - trl, {&lap, &trl}),
                               true, 2.0 * hc, false));
      }
      if (mc.flat) {
        auto q = sample_polynomial(chart, corpus_polynomial(2, 2, 4100));
        auto hs = hessian(mc.g, q);
        Residual r;
        r.abs = max_asymmetry(hs);
        r.points = clean_count(hs);
        rep.add(residual_check("Hessian asymmetry, quadratic f", mc.name, 4100, hc, r, false, 1e-10));
      }
    }
  }
  return rep;
}

SuiteReport naturality_suite(const CalculusConfig& cfg) {
  SuiteReport rep;
  rep.name = "naturality";
  const double h = cfg.h / 2.0;
  const double tol = 5.0 * h;
  auto src = metric_square(h);
  ChartMap gmap = map_onto_image(src, shear_map, shear_jacobian);
  ChartMap ginv = inverse(gmap);
  auto tgt = gmap.target;
  rep.extra["map"] = "G(x) = (x1, x2 + x1^2)";
  rep.extra["lip_bounds"] = {gmap.lip_lo, gmap.lip_hi};
  for (const TestMetric& tm : metric_corpus()) {
    auto g = sample_metric(src, tm.g, cfg.lambda_min);
    auto pg = pushforward_metric(gmap, g);
    for (int s = 1; s <= cfg.seeds; ++s) {
      const std::int64_t seed = 5000 + 10 * s;
      auto comps = corpus_vector_components(2, 3, seed);
      auto om_t = form_from_components(tgt, comps);
      auto a1 = exterior_derivative(pullback(gmap, om_t));
      auto b1 = pullback(gmap, exterior_derivative(om_t));
      rep.add(residual_check("d(G*w) = G*(dw)", tm.name, seed, h, measure_residual(a1 - b1, {&a1, &b1}), true, tol));

      auto x = corpus_vector(src, 3, seed + 1), y = corpus_vector(src, 3, seed + 2);
      auto gx = pushforward(gmap, x), gy = pushforward(gmap, y);
      auto a2 = lie_bracket(gx, gy);
      auto b2 = pushforward(gmap, lie_bracket(x, y));
      rep.add(residual_check("[G*X, G*Y] = G*[X, Y]", tm.name, seed, h, measure_residual(a2 - b2, {&a2, &b2}), true, tol));

      auto a3 = pushforward(gmap, covariant_derivative(g, x, y));
      auto b3 = covariant_derivative(pg, gx, gy);
      rep.add(residual_check("G*(nabla_X Y) = nabla_{G*X} G*Y", tm.name, seed, h, measure_residual(a3 - b3, {&a3, &b3}),
                             true, tol));

      auto om_s = form_from_components(src, comps);
      auto a4 = nabla_oneform(g, om_s);
      auto b4 = pullback_tensor(gmap, nabla_oneform(pg, pullback(ginv, om_s)));
      rep.add(residual_check("nabla w = G*(nabla (G^-1)*w)", tm.name, seed, h, measure_residual(a4 - b4, {&a4, &b4}), true,
                             tol));

      auto f = sample_polynomial(src, corpus_polynomial(2, 3, seed + 3));
      auto a5 = hessian(g, f);
      auto b5 = pullback_tensor(gmap, hessian(pg, pushforward(gmap, f)));
      rep.add(residual_check("Hess f = G*(Hess f o G^-1)", tm.name, seed, h, measure_residual(a5 - b5, {&a5, &b5}), true,
                             tol));

      auto a6 = pushforward(gmap, divergence(g, x));
      auto b6 = divergence(pg, gx);
      rep.add(residual_check("div X o G^-1 = div G*X", tm.name, seed, h, measure_residual(a6 - b6, {&a6, &b6}), true, tol));
    }
  }
  return rep;
}

SuiteReport product_rule_suite(const CalculusConfig& cfg) {
  SuiteReport rep;
  rep.name = "product_rules";
  for (double h : {cfg.h, cfg.h / 2.0}) {
    const double tol = 5.0 * h;
    for (MetricCase& mc : metric_cases(cfg, h)) {
      const MetricField& g = mc.g;
      auto chart = g.chart;
      for (int s = 1; s <= cfg.seeds; ++s) {
        const std::int64_t seed = 6000 + 10 * s;
        auto f = sample_polynomial(chart, corpus_polynomial(2, 3, seed + 1));
        auto k = sample_polynomial(chart, corpus_polynomial(2, 3, seed + 2));
        auto gf = gradient(g, f), gk = gradient(g, k);
        auto lf = laplacian(g, f), lk = laplacian(g, k);
        auto cross = pairing(g, gf, gk);

        auto a1 = divergence(g, multiply(k, gf));
        auto t1 = scaled(multiply(k, lf), -1.0);
        auto b1 = t1 + cross;
        rep.add(residual_check("div(h grad f) = -h Lap f + g(grad f, grad h)", mc.name, seed, h,
                               measure_residual(a1 - b1, {&a1, &t1, &cross}), true, tol));

        auto a2 = laplacian(g, multiply(f, k));
        auto u = multiply(k, lf), v = scaled(cross, 2.0), w = multiply(f, lk);
        auto b2 = u - v + w;
        rep.add(residual_check("Lap(fh) = h Lap f - 2 g(grad f, grad h) + f Lap h", mc.name, seed, h,
                               measure_residual(a2 - b2, {&a2, &u, &v, &w}), true, tol));

        if (mc.flat) {
          auto omega = form_from_components(chart, corpus_vector_components(2, 3, seed + 3));
          auto f0 = zero_form_from(f);
          auto a3 = exterior_derivative(wedge(f0, omega));
          auto p3 = wedge(exterior_derivative(f0), omega), q3 = wedge(f0, exterior_derivative(omega));
          auto b3 = p3 + q3;
          rep.add(residual_check("d(f w) = df ^ w + f dw", "", seed, h, measure_residual(a3 - b3, {&a3, &p3, &q3}), true, tol));
          auto a4 = exterior_derivative(wedge(omega, f0));
          auto p4 = wedge(exterior_derivative(omega), f0), q4 = wedge(omega, exterior_derivative(f0));
          auto b4 = p4 - q4;
          rep.add(residual_check("d(w ^ f) = dw ^ f - w ^ df", "", seed, h, measure_residual(a4 - b4, {&a4, &p4, &q4}), true,
                                 tol));
        }
      }
    }
  }
  return rep;
}

SuiteReport mollifier_suite(const CalculusConfig& cfg) {
  SuiteReport rep;
  rep.name = "mollifier";
  {
    auto chart = unit_square(cfg.h);
    auto affine = sample_polynomial(chart, corpus_polynomial(2, 1, 7001));
    auto m = mollify(affine, 2.0 * cfg.h);
    auto diff = m.field - affine;
    rep.add(residual_check("affine reproduction", "", 7001, cfg.h, max_residual(diff), false, 1e-10));
  }
  ChartOptions o;
  o.bandwidth = 0.01;
  auto line = make_grid_chart(Vec::Constant(1, -1.0), Vec::Constant(1, 1.0), 0.001, o);
  auto absx = sample_scalar(line, [](const Vec& x) { return std::abs(x(0)); });
  double prev = std::numeric_limits<double>::infinity();
  std::vector<double> sups;
  for (double eps : {0.4, 0.2, 0.1, 0.05}) {
    auto me = mollify(absx, eps);
    double sup = 0.0;
    for (Index i = 0; i < me.field.size(); ++i)
      if (me.field.ok(i)) sup = std::max(sup, std::abs(me.field(i) - absx(i)));
    Check c;
    c.test = "sup |F_eps - F| <= Lip(f) eps, eps = " + format_number(eps, 2);
    c.h = o.bandwidth;
    c.measure = "abs";
    c.value = sup;
    c.threshold = eps;
    rep.add(c);
    Check mono;
    mono.test = "sup error decreases, eps = " + format_number(eps, 2);
    mono.h = o.bandwidth;
    mono.measure = "difference";
    mono.value = sup - prev;
    mono.threshold = 0.0;
    mono.relation = "<=";
    if (std::isfinite(prev)) rep.add(mono);
    prev = sup;
    sups.push_back(sup);
  }
  auto me = mollify(absx, 0.05);
  Index at = 1500;
  Check d;
  d.test = "|F_eps'(0.5) - 1|, eps = 0.05";
  d.h = o.bandwidth;
  d.measure = "abs";
  d.value = me.jacobian.ok(at) ? std::abs(me.jacobian.values(at, 0) - 1.0) : kNaN;
  d.threshold = 0.05;
  rep.add(d);
  rep.extra["sup_errors"] = sups;
  return rep;
}

std::vector<SuiteReport> verify_calculus(const CalculusConfig& cfg) {
  return {dd_suite(cfg),         connection_suite(cfg),   hessian_suite(cfg),
          naturality_suite(cfg), product_rule_suite(cfg), mollifier_suite(cfg)};
}

}  // namespace weakcalc
