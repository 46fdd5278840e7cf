#include "weakcalc/atlas.hpp"

#include <algorithm>
#include <functional>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>

#include "weakcalc/corpus.hpp"
#include "weakcalc/fitting.hpp"
#include "weakcalc/parallel.hpp"

namespace weakcalc {
namespace {

double unit_ball_volume(int l) { return std::pow(std::numbers::pi, 0.5 * l) / std::tgamma(0.5 * l + 1.0); }

/// Distances from abstract point a to every point: oracle if known, else graph.
std::vector<double> distances_from(const GeodesicSpace& s, Index a) {
  if (!s.oracle) return shortest_paths(s, a).dist;
  std::vector<double> d(s.size());
  const Vec x = s.point(a);
  for (Index b = 0; b < s.size(); ++b) d[b] = s.oracle(x, s.point(b));
  return d;
}

ChartPtr sub_chart(const SampledChart& c, const std::vector<Index>& rows) {
  Mat pts(rows.size(), c.dim());
  Vec w(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    pts.row(k) = c.points().row(rows[k]);
    w(k) = c.weights()(rows[k]);
  }
  return make_chart(pts, w, c.options());
}

/// Transition from chart a to chart b on the shared rows; the Jacobian comes
/// from chart a's stencils restricted to overlap samples.
ChartMap transition(const SampledChart& a, const SampledChart& b, const std::vector<Index>& rows_a,
                    const std::vector<Index>& rows_b, ChartPtr sub_a, ChartPtr sub_b) {
  const Index m = static_cast<Index>(rows_a.size());
  const int k = a.dim();
  std::vector<Index> slot(a.size(), -1);
  Mask usable(a.size(), 0);
  for (Index q = 0; q < m; ++q) {
    slot[rows_a[q]] = q;
    usable[rows_a[q]] = 1;
  }
  ChartMap g;
  g.source = std::move(sub_a);
  g.target = std::move(sub_b);
  g.image.resize(m, k);
  for (Index q = 0; q < m; ++q) g.image.row(q) = b.points().row(rows_b[q]);
  g.jacobian = Mat::Zero(m, k * k);
  g.valid.assign(m, 0);
  g.image_index.resize(m);
  std::iota(g.image_index.begin(), g.image_index.end(), Index{0});
  parallel_for(m, [&](Index q) {
    DerivativeStencil st = a.restricted_stencil(rows_a[q], usable);
    if (!st.ok) return;
    Mat diff(st.neighbors.size(), k);
    for (std::size_t n = 0; n < st.neighbors.size(); ++n)
      diff.row(n) = g.image.row(slot[st.neighbors[n]]) - g.image.row(q);
    Mat jac = (st.coeffs * diff).transpose();  // jac(row, col) = d image_row / dx_col
    if (!jac.allFinite() || std::abs(jac.determinant()) <= 1e-12) return;
    for (int r = 0; r < k; ++r)
      for (int c = 0; c < k; ++c) g.jacobian(q, r * k + c) = jac(r, c);
    g.valid[q] = 1;
  });
  double lo = INFINITY, hi = 0.0;
  for (Index q = 0; q < m; ++q) {
    if (!g.valid[q]) continue;
    for (Index nb : a.neighbors(rows_a[q])) {
      Index p = slot[nb];
      if (p < 0 || p == q || !g.valid[p]) continue;
      double d = (a.points().row(rows_a[q]) - a.points().row(nb)).norm();
      if (d <= 0.0) continue;
      double e = (g.image.row(q) - g.image.row(p)).norm() / d;
      lo = std::min(lo, e);
      hi = std::max(hi, e);
    }
  }
  g.lip_lo = std::isfinite(lo) ? lo : 0.0;
  g.lip_hi = hi;
  return g;
}

/// Rows of an overlap where both chart fields and the transition are valid,
/// as (overlap slot, row in chart i, row in chart j). Overlaps of small caps
/// sit near both chart boundaries, so interior flags are not required.
template <class Body>
void for_clean_overlap(const Overlap& ov, const FieldBase& fi, const FieldBase& fj, Body&& body) {
  for (std::size_t q = 0; q < ov.ids.size(); ++q) {
    Index a = ov.rows_i[q], b = ov.rows_j[q];
    if (!ov.map.valid[q] || !fi.valid[a] || !fj.valid[b]) continue;
    body(static_cast<Index>(q), a, b);
  }
}

template <class F>
void require_local(const Atlas& atlas, const Global<F>& g, const char* what) {
  if (g.local.size() != atlas.charts.size())
    throw DimensionMismatch(std::string(what) + ": one field per chart is required");
  for (std::size_t c = 0; c < atlas.charts.size(); ++c)
    if (g.local[c].chart != atlas.charts[c].chart)
      throw ChartMismatch(std::string(what) + ": field " + std::to_string(c) + " is not on chart " +
                          atlas.charts[c].id);
}

void finish(CompatibilityReport& r, double tol) {
  r.max_residual = 0.0;
  for (const auto& o : r.overlaps) r.max_residual = std::max(r.max_residual, o.value);
  r.compatible = r.max_residual <= tol;
}

Mat pull_form_coeffs(const Mat& jac, int k, int p, const Eigen::RowVectorXd& omega_j) {
  auto idx = multi_indices(k, p);
  Mat out(1, idx.size());
  for (std::size_t I = 0; I < idx.size(); ++I) {
    double acc = 0.0;
    for (std::size_t J = 0; J < idx.size(); ++J) acc += omega_j(J) * minor_det(jac, idx[J], idx[I]);
    out(0, I) = acc;
  }
  return out;
}

struct Bucketed {
  std::vector<double> r, maxdiff;
  std::vector<Index> pairs;
  double magnitude = 0.0;  ///< mean max-abs value over the usable samples
};

/// Max |f(x) - f(y)| per dyadic distance bucket over pairs with equal labels,
/// from h / 16 up to an eighth of the chart extent. Each bucket is labelled
/// by its outer radius.
Bucketed bucket_pairs(const SampledChart& chart, const Mat& values, const Mask& usable,
                      const std::vector<Index>& label) {
  Vec lo = chart.points().colwise().minCoeff(), hi = chart.points().colwise().maxCoeff();
  const double extent = (hi - lo).maxCoeff();
  const double r0 = chart.bandwidth() / 16.0;
  int buckets = 0;
  while (r0 * std::pow(2.0, buckets + 1) <= extent / 8.0 && buckets < 6) ++buckets;
  Bucketed b;
  std::vector<Index> centers;
  for (Index i = 0; i < chart.size(); ++i)
    if (usable[i]) {
      centers.push_back(i);
      b.magnitude += values.row(i).cwiseAbs().maxCoeff();
    }
  if (!centers.empty()) b.magnitude /= static_cast<double>(centers.size());
  if (buckets == 0) return b;
  b.maxdiff.assign(buckets, 0.0);
  b.pairs.assign(buckets, 0);
  for (int q = 0; q < buckets; ++q) b.r.push_back(r0 * std::pow(2.0, q + 1));
  const std::size_t stride = std::max<std::size_t>(1, centers.size() / 400);
  const double rmax = r0 * std::pow(2.0, buckets);
  for (std::size_t c = 0; c < centers.size(); c += stride) {
    Index i = centers[c];
    for (Index j : chart.grid().within(chart.point(i), rmax)) {
      if (j == i || !usable[j] || label[j] != label[i]) continue;
      double d = (chart.point(i) - chart.point(j)).norm();
      if (d < r0) continue;
      int q = static_cast<int>(std::floor(std::log2(d / r0)));
      if (q < 0 || q >= buckets) continue;
      b.maxdiff[q] = std::max(b.maxdiff[q], (values.row(i) - values.row(j)).cwiseAbs().maxCoeff());
      ++b.pairs[q];
    }
  }
  return b;
}

/// Variation below this fraction of the field's magnitude counts as constant.
constexpr double kFlat = 0.05;

Regularity classify(const Bucketed& b, double tol_alpha) {
  Regularity r;
  r.kind = "Borel";
  std::vector<double> x, y;
  double top = 0.0;
  for (std::size_t q = 0; q < b.r.size(); ++q) {
    if (b.pairs[q] < 30) continue;
    top = std::max(top, b.maxdiff[q]);
    x.push_back(b.r[q]);
    y.push_back(b.maxdiff[q]);
  }
  if (x.empty()) return r;
  if (top <= kFlat * b.magnitude || top <= 1e-12) {
    r.kind = "weakly Lipschitz";
    r.alpha = 1.0;
    r.constant = top / x.back();
    return r;
  }
  if (x.size() < 2) return r;
  for (double v : y)
    if (!(v > 0.0)) return r;
  LogLogFit f = fit_loglog(x, y);
  r.alpha = f.slope;
  r.constant = std::exp(f.intercept);
  r.kind = r.alpha >= 1.0 - tol_alpha ? "weakly Lipschitz" : r.alpha >= tol_alpha ? "weakly Holder" : "Borel";
  return r;
}

Regularity worst(const std::vector<std::pair<std::string, Regularity>>& per_chart) {
  Regularity out;
  out.kind = "weakly Lipschitz";
  out.alpha = 1.0;
  bool first = true;
  for (const auto& [name, r] : per_chart)
    if (first || r.alpha < out.alpha) {
      out = r;
      out.chart = name;
      first = false;
    }
  return out;
}

Json regularity_json(const Regularity& r) {
  return Json{{"kind", r.kind}, {"alpha", r.alpha}, {"constant", r.constant}, {"chart", r.chart}};
}

}  // namespace

// ---- atlas ----------------------------------------------------------------

std::vector<int> Atlas::multiplicity() const {
  std::vector<int> m(space->size(), 0);
  for (const auto& c : charts)
    for (Index id : c.ids) ++m[id];
  return m;
}

double Atlas::uncovered_mass() const {
  auto m = multiplicity();
  double total = space->weights.sum(), miss = 0.0;
  for (Index i = 0; i < space->size(); ++i)
    if (m[i] == 0) miss += space->weights(i);
  return total > 0.0 ? miss / total : 0.0;
}

double Atlas::overlap_tol() const {
  if (thresholds.overlap_tol > 0.0) return thresholds.overlap_tol;
  double h = 0.0;
  for (const auto& c : charts) h = std::max(h, c.chart->bandwidth());
  return 2.0 * h;
}

Index Atlas::row(std::size_t c, Index id) const { return rows_[c][id]; }

Atlas assemble_atlas(SpacePtr space, std::vector<AtlasChart> charts, AtlasThresholds thresholds) {
  if (!space) throw InputError("atlas needs a space");
  Atlas a;
  a.space = std::move(space);
  a.charts = std::move(charts);
  a.thresholds = std::move(thresholds);
  const Index n = a.space->size();
  for (const auto& c : a.charts) {
    if (!c.chart) throw InputError("chart " + c.id + " has no samples");
    if (static_cast<Index>(c.ids.size()) != c.chart->size())
      throw InputError("chart " + c.id + ": point id list does not match the samples");
    std::vector<Index> r(n, -1);
    for (std::size_t k = 0; k < c.ids.size(); ++k) {
      Index id = c.ids[k];
      if (id < 0 || id >= n) throw InputError("chart " + c.id + ": point id out of range");
      if (r[id] >= 0) throw InputError("chart " + c.id + ": duplicate point id " + std::to_string(id));
      r[id] = static_cast<Index>(k);
    }
    a.rows_.push_back(std::move(r));
  }
  for (std::size_t i = 0; i < a.charts.size(); ++i)
    for (std::size_t j = i + 1; j < a.charts.size(); ++j) {
      Overlap ov;
      ov.i = i;
      ov.j = j;
      for (Index id : a.charts[i].ids)
        if (a.rows_[j][id] >= 0) ov.ids.push_back(id);
      if (ov.ids.empty()) continue;
      std::sort(ov.ids.begin(), ov.ids.end());
      const auto& ci = a.charts[i];
      const auto& cj = a.charts[j];
      if (ci.dim() != cj.dim())
        throw DimensionMismatch("charts " + ci.id + " and " + cj.id + " share points but differ in dimension");
      if (static_cast<Index>(ov.ids.size()) < a.thresholds.min_overlap)
        throw InsufficientOverlapSamples("overlap " + ci.id + "/" + cj.id + " has " + std::to_string(ov.ids.size()) +
                                         " shared samples, fewer than " + std::to_string(a.thresholds.min_overlap));
      for (Index id : ov.ids) {
        ov.rows_i.push_back(a.rows_[i][id]);
        ov.rows_j.push_back(a.rows_[j][id]);
      }
      ov.sub_i = sub_chart(*ci.chart, ov.rows_i);
      ov.sub_j = sub_chart(*cj.chart, ov.rows_j);
      ov.map = transition(*ci.chart, *cj.chart, ov.rows_i, ov.rows_j, ov.sub_i, ov.sub_j);
      ov.inverse = transition(*cj.chart, *ci.chart, ov.rows_j, ov.rows_i, ov.sub_j, ov.sub_i);
      a.overlaps.push_back(std::move(ov));
    }
  return a;
}

// ---- certificates -----------------------------------------------------------

RectifiabilityReport certify_rectifiable(const Atlas& atlas, double delta) {
  const GeodesicSpace& s = *atlas.space;
  const auto& th = atlas.thresholds;
  RectifiabilityReport rep;
  rep.delta = delta;
  rep.uncovered_mass = atlas.uncovered_mass();
  bool all = true;
  for (std::size_t c = 0; c < atlas.charts.size(); ++c) {
    const AtlasChart& ch = atlas.charts[c];
    const SampledChart& sc = *ch.chart;
    const Index m = sc.size();
    ChartCertificate cert;
    cert.chart = ch.id;
    SeededStream rng(0x5EEDULL + 977ULL * c);
    // bi-Lipschitz distortion over sampled pairs
    const int sources = std::max(1, std::min<int>(64, static_cast<int>(m)));
    const int per = std::max(1, th.distortion_pairs / sources);
    std::vector<Index> src(sources);
    for (auto& v : src) v = static_cast<Index>(rng.uniform() * m);
    std::vector<double> lo(sources, INFINITY), hi(sources, 0.0);
    std::vector<Index> used(sources, 0);
    std::vector<std::vector<Index>> dst(sources);
    for (auto& d : dst)
      for (int k = 0; k < per; ++k) d.push_back(static_cast<Index>(rng.uniform() * m));
    parallel_for(sources, [&](Index q) {
      Index a = src[q];
      std::vector<double> d = distances_from(s, ch.ids[a]);
      for (Index b : dst[q]) {
        double dd = d[ch.ids[b]];
        if (b == a || !(dd > 0.0)) continue;
        double ratio = (sc.point(a) - sc.point(b)).norm() / dd;
        lo[q] = std::min(lo[q], ratio);
        hi[q] = std::max(hi[q], ratio);
        ++used[q];
      }
    });
    double rlo = *std::min_element(lo.begin(), lo.end()), rhi = *std::max_element(hi.begin(), hi.end());
    cert.pairs = std::accumulate(used.begin(), used.end(), Index{0});
    if (cert.pairs > 0) {
      cert.distortion = (rhi - rlo) / (rhi + rlo);
      cert.scale = 0.5 * (rhi + rlo);
    } else {
      cert.distortion = INFINITY;
    }
    // Ahlfors ratios at centres whose balls stay inside the chart
    const double omega = unit_ball_volume(sc.dim());
    cert.radii = th.ahlfors_radii;
    std::sort(cert.radii.begin(), cert.radii.end(), std::greater<>());
    const std::size_t nr = cert.radii.size();
    std::vector<double> alo(nr, INFINITY), ahi(nr, 0.0);
    std::vector<Index> order(m);
    std::iota(order.begin(), order.end(), Index{0});
    for (Index k = m - 1; k > 0; --k) std::swap(order[k], order[static_cast<Index>(rng.uniform() * (k + 1))]);
    std::vector<Index> in_chart(s.size(), -1);
    for (Index k = 0; k < m; ++k) in_chart[ch.ids[k]] = k;
    int accepted = 0;
    const std::size_t batch = 64;
    for (std::size_t start = 0; start < order.size() && accepted < th.ahlfors_centers; start += batch) {
      std::size_t end = std::min(order.size(), start + batch);
      std::vector<std::vector<double>> ratio(end - start, std::vector<double>(nr, -1.0));
      parallel_for(static_cast<Index>(end - start), [&](Index q) {
        Index a = order[start + q];
        std::vector<double> d = distances_from(s, ch.ids[a]);
        for (std::size_t r = 0; r < nr; ++r) {
          const double t = cert.radii[r];
          double mass = 0.0;
          Index count = 0;
          bool inside = true;
          for (Index y = 0; y < s.size() && inside; ++y) {
            if (!(d[y] < t)) continue;
            Index row = in_chart[y];
            if (row < 0 || sc.boundary(row) || sc.degenerate(row)) inside = false;
            mass += s.weights(y);
            ++count;
          }
          if (inside && count >= th.ahlfors_min_count) ratio[q][r] = mass / (omega * std::pow(t, sc.dim()));
        }
      });
      for (std::size_t q = 0; q < ratio.size() && accepted < th.ahlfors_centers; ++q) {
        bool any = false;
        for (double v : ratio[q]) any = any || v > 0.0;
        if (!any) continue;
        ++accepted;
        for (std::size_t r = 0; r < nr; ++r)
          if (ratio[q][r] > 0.0) {
            alo[r] = std::min(alo[r], ratio[q][r]);
            ahi[r] = std::max(ahi[r], ratio[q][r]);
          }
      }
    }
    cert.centers = accepted;
    cert.ahlfors_c = 0.0;
    bool measured = false;
    for (std::size_t r = 0; r < nr; ++r) {
      if (!std::isfinite(alo[r])) {
        cert.ahlfors_lo.push_back(-1.0);
        cert.ahlfors_hi.push_back(-1.0);
        continue;
      }
      measured = true;
      cert.ahlfors_lo.push_back(alo[r]);
      cert.ahlfors_hi.push_back(ahi[r]);
      cert.ahlfors_c = std::max({cert.ahlfors_c, ahi[r], 1.0 / alo[r]});
    }
    if (!measured) cert.ahlfors_c = INFINITY;
    cert.pass = cert.distortion <= delta && cert.ahlfors_c <= th.ahlfors_c;
    all = all && cert.pass;
    rep.charts.push_back(std::move(cert));
  }
  const double bound = std::pow((1.0 + delta) / (1.0 - delta), 2);
  for (const auto& ov : atlas.overlaps) {
    TransitionCertificate tc;
    tc.name = atlas.charts[ov.i].id + "/" + atlas.charts[ov.j].id;
    tc.lip_lo = ov.map.lip_lo;
    tc.lip_hi = ov.map.lip_hi;
    tc.ratio = tc.lip_lo > 0.0 ? tc.lip_hi / tc.lip_lo : INFINITY;
    tc.pass = tc.ratio <= bound;
    all = all && tc.pass;
    rep.transitions.push_back(tc);
  }
  rep.pass = all && rep.uncovered_mass <= th.delta_meas && !atlas.charts.empty();
  return rep;
}

Json RectifiabilityReport::to_json() const {
  Json j;
  j["pass"] = pass;
  j["delta"] = delta;
  j["uncovered_mass"] = uncovered_mass;
  Json cs = Json::array();
  for (const auto& c : charts) {
    Json radii = Json::array();
    for (std::size_t r = 0; r < c.radii.size(); ++r) {
      Json e{{"t", c.radii[r]}};
      if (c.ahlfors_lo[r] > 0.0) {
        e["lo"] = c.ahlfors_lo[r];
        e["hi"] = c.ahlfors_hi[r];
      } else {
        e["lo"] = nullptr;
        e["hi"] = nullptr;
      }
      radii.push_back(e);
    }
    cs.push_back(Json{{"chart", c.chart},
                      {"pass", c.pass},
                      {"distortion", std::isfinite(c.distortion) ? Json(c.distortion) : Json(nullptr)},
                      {"scale", c.scale},
                      {"pairs", c.pairs},
                      {"ahlfors_c", std::isfinite(c.ahlfors_c) ? Json(c.ahlfors_c) : Json(nullptr)},
                      {"centers", c.centers},
                      {"ahlfors", radii}});
  }
  j["charts"] = cs;
  Json ts = Json::array();
  for (const auto& t : transitions)
    ts.push_back(Json{{"overlap", t.name},
                      {"lip_lo", t.lip_lo},
                      {"lip_hi", t.lip_hi},
                      {"ratio", std::isfinite(t.ratio) ? Json(t.ratio) : Json(nullptr)},
                      {"pass", t.pass}});
  j["transitions"] = ts;
  return j;
}

// ---- global fields ----------------------------------------------------------

GlobalScalar chart_scalars(const Atlas& atlas, const Vec& f, const Mask& valid) {
  if (f.size() != atlas.space->size()) throw DimensionMismatch("chart_scalars: one value per point is required");
  GlobalScalar g;
  for (const auto& c : atlas.charts) {
    ScalarField s;
    static_cast<FieldBase&>(s) = make_field_base(c.chart, 1);
    for (Index k = 0; k < c.chart->size(); ++k) {
      Index id = c.ids[k];
      s.values(k, 0) = f(id);
      if (!valid.empty() && !valid[id]) s.valid[k] = s.interior[k] = 0;
    }
    g.local.push_back(std::move(s));
  }
  return g;
}

Json CompatibilityReport::to_json() const {
  Json ov = Json::array();
  for (const auto& o : overlaps) ov.push_back(Json{{"i", o.i}, {"j", o.j}, {"residual", o.value}, {"points", o.points}});
  return Json{{"max_residual", max_residual},
              {"compatible", compatible},
              {"regularity", regularity_json(regularity)},
              {"overlaps", ov}};
}

CompatibilityReport check_global_form(const Atlas& atlas, const GlobalForm& form) {
  require_local(atlas, form, "check_global_form");
  CompatibilityReport rep;
  std::vector<std::pair<std::string, Regularity>> regs;
  for (std::size_t c = 0; c < atlas.charts.size(); ++c) regs.emplace_back(atlas.charts[c].id, fit_holder(form.local[c]));
  rep.regularity = worst(regs);
  for (const auto& ov : atlas.overlaps) {
    const PForm& wi = form.local[ov.i];
    const PForm& wj = form.local[ov.j];
    if (wi.degree != wj.degree) throw DimensionMismatch("check_global_form: degrees differ between charts");
    const int k = wi.dim();
    OverlapResidual r{ov.i, ov.j, 0.0, 0};
    for_clean_overlap(ov, wi, wj, [&](Index q, Index a, Index b) {
      Mat pulled = pull_form_coeffs(ov.map.jac(q), k, wi.degree, wj.values.row(b));
      r.value = std::max(r.value, (pulled.row(0) - wi.values.row(a)).cwiseAbs().maxCoeff());
      ++r.points;
    });
    rep.overlaps.push_back(r);
  }
  finish(rep, atlas.overlap_tol());
  return rep;
}

CompatibilityReport check_global_metric(const Atlas& atlas, const GlobalMetric& g) {
  require_local(atlas, g, "check_global_metric");
  CompatibilityReport rep;
  rep.regularity = classify_metric_regularity(g, atlas.thresholds.tol_alpha);
  for (const auto& ov : atlas.overlaps) {
    const MetricField& gi = g.local[ov.i];
    const MetricField& gj = g.local[ov.j];
    OverlapResidual r{ov.i, ov.j, 0.0, 0};
    for_clean_overlap(ov, gi, gj, [&](Index q, Index a, Index b) {
      Mat jac = ov.map.jac(q);
      Mat pulled = jac.transpose() * gj.at(b) * jac;
      r.value = std::max(r.value, (pulled - gi.at(a)).cwiseAbs().maxCoeff() / std::max(1.0, gi.at(a).norm()));
      ++r.points;
    });
    rep.overlaps.push_back(r);
  }
  finish(rep, atlas.overlap_tol());
  return rep;
}

Regularity fit_holder(const FieldBase& f) {
  const SampledChart& chart = *f.chart;
  Mask usable(f.size(), 0);
  for (Index i = 0; i < f.size(); ++i) usable[i] = f.clean(i) ? 1 : 0;
  std::vector<Index> label(f.size(), 0);
  return classify(bucket_pairs(chart, f.values, usable, label), 0.1);
}

GlobalMetric canonical_metric(const Atlas& atlas, const CanonicalOptions& o) {
  const GeodesicSpace& s = *atlas.space;
  GlobalMetric out;
  double good = 0.0, total = 0.0;
  for (std::size_t c = 0; c < atlas.charts.size(); ++c) {
    const AtlasChart& ch = atlas.charts[c];
    const SampledChart& sc = *ch.chart;
    const int l = sc.dim();
    const Index m = sc.size();
    TensorField t;
    static_cast<FieldBase&>(t) = make_field_base(ch.chart, l * l);
    parallel_for(m, [&](Index k) {
      const Index id = ch.ids[k];
      // Lip of every +-combination of coordinate pairs from graph neighbours
      Mat lip_sum = Mat::Zero(l, l), lip_diff = Mat::Zero(l, l);
      Vec lip = Vec::Zero(l);
      Index seen = 0;
      const Vec u = sc.point(k);
      for (Index e = s.offsets[id]; e < s.offsets[id + 1]; ++e) {
        Index r = atlas.row(c, s.targets[e]);
        if (r < 0) continue;
        const double d = s.lengths[e] * s.calibration;
        if (!(d > 0.0)) continue;
        Vec du = (sc.point(r) - u) / d;
        ++seen;
        for (int a = 0; a < l; ++a) {
          lip(a) = std::max(lip(a), std::abs(du(a)));
          for (int b = a + 1; b < l; ++b) {
            lip_sum(a, b) = std::max(lip_sum(a, b), std::abs(du(a) + du(b)));
            lip_diff(a, b) = std::max(lip_diff(a, b), std::abs(du(a) - du(b)));
          }
        }
      }
      Mat gram(l, l);
      for (int a = 0; a < l; ++a) {
        gram(a, a) = lip(a) * lip(a);
        for (int b = a + 1; b < l; ++b)
          gram(a, b) = gram(b, a) = 0.25 * (lip_sum(a, b) * lip_sum(a, b) - lip_diff(a, b) * lip_diff(a, b));
      }
      Eigen::LLT<Mat> llt(gram);
      if (seen < l + 1 || llt.info() != Eigen::Success) {
        t.set(k, Mat::Identity(l, l));
        t.valid[k] = t.interior[k] = 0;
        return;
      }
      t.set(k, llt.solve(Mat::Identity(l, l)));
      t.interior[k] = sc.interior(k) ? 1 : 0;
    });
    if (o.smoothing > 0.0) {
      const double eps = o.smoothing * sc.bandwidth();
      TensorField sm = t;
      const Vec& w = sc.weights();
      parallel_for(m, [&](Index i) {
        const Vec x = sc.point(i);
        double mass = 0.0;
        Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(l * l);
        bool clean = sc.interior(i);
        for (Index j : sc.grid().within(x, eps)) {
          if (!t.valid[j]) continue;
          double r = (sc.point(j) - x).norm() / eps;
          double rho = r < 1.0 ? std::exp(-1.0 / (1.0 - r * r)) : 0.0;
          mass += rho * w(j);
          acc += rho * w(j) * t.values.row(j);
          clean = clean && t.interior[j];
        }
        if (mass > 0.0) sm.values.row(i) = acc / mass;
        sm.valid[i] = mass > 0.0 ? 1 : 0;
        sm.interior[i] = mass > 0.0 && clean ? 1 : 0;
      });
      t = std::move(sm);
    }
    Mask pre = t.valid;
    MetricField g = make_metric(t);
    for (Index k = 0; k < m; ++k) {
      total += sc.weights()(k);
      if (g.valid[k] && pre[k]) good += sc.weights()(k);
    }
    out.local.push_back(std::move(g));
  }
  out.spd_fraction = total > 0.0 ? good / total : 0.0;
  return out;
}

Regularity classify_metric_regularity(const GlobalMetric& g, double tol_alpha) {
  std::vector<std::pair<std::string, Regularity>> regs;
  for (std::size_t c = 0; c < g.local.size(); ++c) {
    const MetricField& m = g.local[c];
    Mask usable(m.size(), 0);
    for (Index i = 0; i < m.size(); ++i) usable[i] = m.clean(i) ? 1 : 0;
    std::vector<Index> label(m.size(), 0);
    regs.emplace_back("chart " + std::to_string(c),
                      classify(bucket_pairs(*m.chart, m.values, usable, label), tol_alpha));
  }
  return worst(regs);
}

// ---- global operators -----------------------------------------------------

namespace {

CompatibilityReport vector_consistency(const Atlas& atlas, const GlobalVector& v) {
  CompatibilityReport rep;
  for (const auto& ov : atlas.overlaps) {
    const VectorField& vi = v.local[ov.i];
    const VectorField& vj = v.local[ov.j];
    OverlapResidual r{ov.i, ov.j, 0.0, 0};
    for_clean_overlap(ov, vi, vj, [&](Index q, Index a, Index b) {
      Vec pushed = ov.map.jac(q) * vi.at(a);
      r.value = std::max(r.value, (pushed - vj.at(b)).cwiseAbs().maxCoeff());
      ++r.points;
    });
    rep.overlaps.push_back(r);
  }
  finish(rep, atlas.overlap_tol());
  return rep;
}

}  // namespace

GlobalVectorResult global_levi_civita(const Atlas& atlas, const GlobalMetric& g, const GlobalVector& x,
                                      const GlobalVector& y, const std::vector<const Christoffel*>& gammas) {
  require_local(atlas, g, "global_levi_civita");
  require_local(atlas, x, "global_levi_civita");
  require_local(atlas, y, "global_levi_civita");
  Regularity reg = classify_metric_regularity(g, atlas.thresholds.tol_alpha);
  if (reg.kind != "weakly Lipschitz")
    throw MetricNotLipschitz("metric classified " + reg.kind + " (alpha " + format_number(reg.alpha, 3) + " on " +
                             reg.chart + "); the connection needs a weakly Lipschitz metric");
  GlobalVectorResult out;
  for (std::size_t c = 0; c < atlas.charts.size(); ++c) {
    const Christoffel* gam = c < gammas.size() ? gammas[c] : nullptr;
    out.field.local.push_back(covariant_derivative(g.local[c], x.local[c], y.local[c], gam));
  }
  out.consistency = vector_consistency(atlas, out.field);
  out.consistency.regularity = reg;
  return out;
}

GlobalSecondOrder global_hessian_laplacian(const Atlas& atlas, const GlobalMetric& g, const GlobalScalar& f) {
  require_local(atlas, g, "global_hessian_laplacian");
  require_local(atlas, f, "global_hessian_laplacian");
  GlobalSecondOrder out;
  for (std::size_t c = 0; c < atlas.charts.size(); ++c) {
    out.hessian.local.push_back(hessian(g.local[c], f.local[c]));
    out.laplacian.local.push_back(laplacian(g.local[c], f.local[c]));
  }
  for (const auto& ov : atlas.overlaps) {
    OverlapResidual rh{ov.i, ov.j, 0.0, 0}, rl{ov.i, ov.j, 0.0, 0};
    const TensorField& hi = out.hessian.local[ov.i];
    const TensorField& hj = out.hessian.local[ov.j];
    for_clean_overlap(ov, hi, hj, [&](Index q, Index a, Index b) {
      Mat jac = ov.map.jac(q);
      rh.value = std::max(rh.value, (jac.transpose() * hj.at(b) * jac - hi.at(a)).cwiseAbs().maxCoeff());
      ++rh.points;
    });
    const ScalarField& li = out.laplacian.local[ov.i];
    const ScalarField& lj = out.laplacian.local[ov.j];
    for_clean_overlap(ov, li, lj, [&](Index, Index a, Index b) {
      rl.value = std::max(rl.value, std::abs(li(a) - lj(b)));
      ++rl.points;
    });
    out.hessian_consistency.overlaps.push_back(rh);
    out.laplacian_consistency.overlaps.push_back(rl);
  }
  finish(out.hessian_consistency, atlas.overlap_tol());
  finish(out.laplacian_consistency, atlas.overlap_tol());
  return out;
}

// ---- weak Holder partition --------------------------------------------------

HolderPartition classify_weak_holder(const Atlas& atlas, const Vec& f, const Mask& valid, double alpha,
                                     double k_max) {
  const GeodesicSpace& s = *atlas.space;
  const Index n = s.size();
  if (f.size() != n) throw DimensionMismatch("classify_weak_holder: one value per point is required");
  auto ok = [&](Index id) { return std::isfinite(f(id)) && (valid.empty() || valid[id]); };
  std::vector<Index> parent(n);
  std::iota(parent.begin(), parent.end(), Index{0});
  std::function<Index(Index)> root = [&](Index a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  for (const auto& ch : atlas.charts) {
    const SampledChart& sc = *ch.chart;
    for (Index k = 0; k < sc.size(); ++k) {
      Index a = ch.ids[k];
      if (!ok(a)) continue;
      for (Index r : sc.neighbors(k)) {
        Index b = ch.ids[r];
        if (b == a || !ok(b)) continue;
        double d = (sc.point(k) - sc.point(r)).norm();
        if (std::abs(f(a) - f(b)) <= k_max * std::pow(d, alpha)) {
          Index ra = root(a), rb = root(b);
          if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
        }
      }
    }
  }
  std::map<Index, HolderPiece> pieces;
  double valid_mass = 0.0;
  auto mult = atlas.multiplicity();
  for (Index id = 0; id < n; ++id) {
    if (!ok(id) || mult[id] == 0) continue;
    valid_mass += s.weights(id);
    HolderPiece& p = pieces[root(id)];
    p.ids.push_back(id);
    p.mass += s.weights(id);
  }
  HolderPartition out;
  out.alpha = alpha;
  out.k_max = k_max;
  std::vector<Index> label(n, -1);
  for (auto& [r, p] : pieces) {
    for (Index id : p.ids) label[id] = r;
    out.pieces.push_back(std::move(p));
  }
  std::stable_sort(out.pieces.begin(), out.pieces.end(),
                   [](const HolderPiece& a, const HolderPiece& b) { return a.mass > b.mass; });
  double covered = 0.0;
  for (auto& p : out.pieces)
    if (p.mass >= 0.01 * valid_mass) covered += p.mass;
  out.covered_fraction = valid_mass > 0.0 ? covered / valid_mass : 0.0;
  // empirical constants and fitted exponent within pieces, per chart
  std::map<Index, double> constant;
  out.fitted_alpha = INFINITY;
  for (const auto& ch : atlas.charts) {
    const SampledChart& sc = *ch.chart;
    Mask usable(sc.size(), 0);
    std::vector<Index> lab(sc.size(), -1);
    Mat vals(sc.size(), 1);
    for (Index k = 0; k < sc.size(); ++k) {
      Index id = ch.ids[k];
      vals(k, 0) = ok(id) ? f(id) : 0.0;
      usable[k] = ok(id) && sc.interior(k) ? 1 : 0;
      lab[k] = label[id];
      if (!ok(id)) continue;
      for (Index r : sc.neighbors(k)) {
        Index b = ch.ids[r];
        if (b == id || !ok(b) || label[b] != label[id]) continue;
        double d = (sc.point(k) - sc.point(r)).norm();
        if (d > 0.0) constant[label[id]] = std::max(constant[label[id]], std::abs(f(id) - f(b)) / std::pow(d, alpha));
      }
    }
    Regularity reg = classify(bucket_pairs(sc, vals, usable, lab), 0.1);
    if (!reg.kind.empty()) out.fitted_alpha = std::min(out.fitted_alpha, reg.alpha);
  }
  if (!std::isfinite(out.fitted_alpha)) out.fitted_alpha = 0.0;
  for (auto& p : out.pieces)
    if (!p.ids.empty()) p.constant = constant[label[p.ids.front()]];
  return out;
}

Json HolderPartition::to_json() const {
  Json ps = Json::array();
  for (const auto& p : pieces)
    if (p.mass > 0.0) ps.push_back(Json{{"points", p.ids.size()}, {"mass", p.mass}, {"constant", p.constant}});
  return Json{{"alpha", alpha},
              {"k_max", k_max},
              {"covered_fraction", covered_fraction},
              {"fitted_alpha", fitted_alpha},
              {"pieces", ps}};
}

double cocycle_residual(const Atlas& atlas) {
  std::map<std::pair<std::size_t, std::size_t>, const Overlap*> by_pair;
  for (const auto& ov : atlas.overlaps) by_pair[{ov.i, ov.j}] = &ov;
  auto jac_at = [&](std::size_t a, std::size_t b, Index id, Mat& out) {
    bool forward = a < b;
    auto it = by_pair.find(forward ? std::make_pair(a, b) : std::make_pair(b, a));
    if (it == by_pair.end()) return false;
    const Overlap& ov = *it->second;
    auto pos = std::lower_bound(ov.ids.begin(), ov.ids.end(), id);
    if (pos == ov.ids.end() || *pos != id) return false;
    Index q = pos - ov.ids.begin();
    const ChartMap& m = forward ? ov.map : ov.inverse;
    if (!m.valid[q]) return false;
    out = m.jac(q);
    return true;
  };
  double worst_res = 0.0;
  const std::size_t nc = atlas.charts.size();
  for (std::size_t i = 0; i < nc; ++i)
    for (std::size_t j = i + 1; j < nc; ++j)
      for (std::size_t k = j + 1; k < nc; ++k) {
        auto ij = by_pair.find({i, j});
        if (ij == by_pair.end() || !by_pair.count({j, k}) || !by_pair.count({i, k})) continue;
        for (Index id : ij->second->ids) {
          Mat a, b, c;
          if (!jac_at(i, j, id, a) || !jac_at(j, k, id, b) || !jac_at(i, k, id, c)) continue;
          worst_res = std::max(worst_res, (b * a - c).norm() / c.norm());
        }
      }
  return worst_res;
}

// ---- presets ----------------------------------------------------------------

namespace {

AtlasChart planar_chart(const GeodesicSpace& s, const std::string& id, const std::function<bool(const Vec&)>& keep,
                        const std::function<Vec(const Vec&)>& phi, double jac_det, const PresetOptions& o) {
  AtlasChart c;
  c.id = id;
  std::vector<Vec> pts;
  std::vector<double> w;
  for (Index i = 0; i < s.size(); ++i) {
    Vec y = s.point(i);
    if (!keep(y)) continue;
    c.ids.push_back(i);
    pts.push_back(phi(y));
    w.push_back(s.weights(i) * jac_det);
  }
  Mat m(pts.size(), 2);
  for (std::size_t k = 0; k < pts.size(); ++k) m.row(k) = pts[k].transpose();
  ChartOptions co;
  co.bandwidth = o.bandwidth;
  co.fit_order = o.fit_order;
  c.chart = make_chart(m, Eigen::Map<Vec>(w.data(), w.size()), co);
  return c;
}

SpacePtr flat_space(const PresetOptions& o) {
  GeneratorSpec g;
  g.kind = "flat_square";
  g.n = o.n;
  g.seed = o.seed;
  g.graph = o.graph;
  return generate_space(g);
}

Atlas two_chart(const PresetOptions& o, double stretch) {
  auto s = flat_space(o);
  std::vector<AtlasChart> charts;
  charts.push_back(planar_chart(
      *s, "left", [](const Vec& y) { return y(0) <= 0.7; }, [](const Vec& y) { return y; }, 1.0, o));
  charts.push_back(planar_chart(
      *s, "right", [](const Vec& y) { return y(0) >= 0.3; },
      [stretch](const Vec& y) { return Vec{{stretch * (y(0) - 0.3), y(1)}}; }, stretch, o));
  return assemble_atlas(s, std::move(charts));
}

}  // namespace

Atlas sphere_caps_atlas(const PresetOptions& o) {
  GeneratorSpec g;
  g.kind = "unit_sphere";
  g.n = o.n;
  g.seed = o.seed;
  g.graph = o.graph;
  auto s = generate_space(g);
  const double cos_cap = std::cos(o.cap_degrees * std::numbers::pi / 180.0);
  static const char* names[] = {"+x", "-x", "+y", "-y", "+z", "-z"};
  std::vector<AtlasChart> charts;
  for (int a = 0; a < 3; ++a)
    for (int sign : {1, -1}) {
      Eigen::Vector3d c = Eigen::Vector3d::Zero(), e1 = Eigen::Vector3d::Zero();
      c(a) = sign;
      e1((a + 1) % 3) = 1.0;
      Eigen::Vector3d e2 = c.cross(e1);
      AtlasChart ch;
      ch.id = names[2 * a + (sign < 0)];
      std::vector<Vec> pts;
      std::vector<double> w;
      for (Index i = 0; i < s->size(); ++i) {
        Eigen::Vector3d y = s->point(i);
        double cz = y.dot(c);
        if (cz <= cos_cap) continue;
        Vec u{{y.dot(e1) / (1.0 + cz), y.dot(e2) / (1.0 + cz)}};
        double conf = 0.5 * (1.0 + u.squaredNorm());
        ch.ids.push_back(i);
        pts.push_back(u);
        w.push_back(s->weights(i) * conf * conf);
      }
      Mat m(pts.size(), 2);
      for (std::size_t k = 0; k < pts.size(); ++k) m.row(k) = pts[k].transpose();
      ChartOptions co;
      co.bandwidth = o.bandwidth;
      co.fit_order = o.fit_order;
      ch.chart = make_chart(m, Eigen::Map<Vec>(w.data(), w.size()), co);
      charts.push_back(std::move(ch));
    }
  return assemble_atlas(s, std::move(charts));
}

Atlas flat_single_atlas(const PresetOptions& o) {
  auto s = flat_space(o);
  std::vector<AtlasChart> charts;
  charts.push_back(planar_chart(
      *s, "square", [](const Vec&) { return true; }, [](const Vec& y) { return y; }, 1.0, o));
  return assemble_atlas(s, std::move(charts));
}

Atlas flat_two_chart_atlas(const PresetOptions& o) { return two_chart(o, 1.0); }

Atlas broken_transition_atlas(const PresetOptions& o) { return two_chart(o, 2.0); }

Atlas preset_atlas(const std::string& name, const PresetOptions& o) {
  if (name == "sphere_caps") return sphere_caps_atlas(o);
  if (name == "flat_single") return flat_single_atlas(o);
  if (name == "flat_two_chart") return flat_two_chart_atlas(o);
  if (name == "broken_transition") return broken_transition_atlas(o);
  throw InputError("unknown atlas preset '" + name + "' (sphere_caps, flat_single, flat_two_chart, broken_transition)");
}

}  // namespace weakcalc
