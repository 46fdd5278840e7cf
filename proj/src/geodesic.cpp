#include "weakcalc/geodesic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <queue>
#include <unordered_map>

#include "weakcalc/parallel.hpp"

namespace weakcalc {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double clamp_cos(double c, bool& clamped) {
  clamped = c > 1.0 || c < -1.0;
  return std::clamp(c, -1.0, 1.0);
}

AngleEstimate invalid_estimate(const std::string& method, const std::string& note) {
  AngleEstimate e;
  e.method = method;
  e.confident = false;
  e.note = note;
  return e;
}

struct Frame {
  bool ok = false;
  Mat basis;  // ambient x l
  std::vector<Index> nbrs;
  Mat local;  // m x l
  Vec w;
};

Frame tangent_frame(const GeodesicSpace& s, Index z, double radius) {
  Frame f;
  const int l = s.dim;
  Vec y = s.point(z);
  f.nbrs = s.ambient_index().within(y, radius);
  const Index m = static_cast<Index>(f.nbrs.size());
  if (m < l + 3) return f;
  Mat pts(m, s.coords.cols());
  for (Index a = 0; a < m; ++a) pts.row(a) = s.coords.row(f.nbrs[a]);
  Mat centered = pts.rowwise() - pts.colwise().mean();
  Eigen::SelfAdjointEigenSolver<Mat> eig(centered.transpose() * centered);
  const Index amb = pts.cols();
  const Vec& ev = eig.eigenvalues();
  if (!(ev(amb - l) > 1e-6 * ev(amb - 1))) return f;
  f.basis = eig.eigenvectors().rightCols(l).rowwise().reverse();
  f.local = (pts.rowwise() - y.transpose()) * f.basis;
  f.w.resize(m);
  for (Index a = 0; a < m; ++a) {
    double r2 = (pts.row(a).transpose() - y).squaredNorm() / (radius * radius);
    f.w(a) = (1.0 - r2) * (1.0 - r2);
  }
  f.ok = true;
  return f;
}

/// Unit gradient of r in the frame by weighted LS with intercept.
bool frame_gradient(const Frame& f, const DistanceField& r, Vec& g) {
  const Index m = static_cast<Index>(f.nbrs.size());
  const Index l = f.local.cols();
  Mat a(m, l + 1);
  Vec b(m);
  for (Index i = 0; i < m; ++i) {
    double sw = std::sqrt(f.w(i));
    a(i, 0) = sw;
    a.row(i).tail(l) = sw * f.local.row(i);
    b(i) = sw * r.dist[f.nbrs[i]];
  }
  Mat ata = a.transpose() * a;
  Eigen::LDLT<Mat> ldlt(ata);
  if (ldlt.info() != Eigen::Success || ldlt.rcond() < 1e-10) return false;
  Vec sol = ldlt.solve(a.transpose() * b);
  g = sol.tail(l);
  double norm = g.norm();
  if (!(norm > 1e-12)) return false;
  g /= norm;
  return true;
}

/// A + B t^2 when the trend is resolved (residual below half that of a
/// constant), else the weighted mean.
PowerFit extrapolate(const std::vector<double>& t, const std::vector<double>& c, const std::vector<double>& w) {
  PowerFit full = fit_power_law(t, c, w, 2.0, 2.0);
  double sw = 0.0, sc = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    sw += w[k];
    sc += w[k] * c[k];
  }
  PowerFit flat{sc / sw, 0.0, 0.0, 0.0};
  double rss = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) rss += w[k] * (c[k] - flat.a) * (c[k] - flat.a);
  flat.residual = std::sqrt(rss / sw);
  return full.residual < 0.5 * flat.residual ? full : flat;
}

std::vector<double> geometric_radii(double hi, double lo, int count) {
  std::vector<double> r(count);
  for (int k = 0; k < count; ++k) r[k] = count == 1 ? hi : hi * std::pow(lo / hi, static_cast<double>(k) / (count - 1));
  return r;
}

}  // namespace

ReachabilitySet reachability_set(const GeodesicSpace& s, Index p, double tau, double eps_excess) {
  if (!(tau > 0.0)) throw InputError("reachability tau must be positive");
  const Index n = s.size();
  ReachabilitySet rs;
  rs.base = p;
  rs.tau = tau;
  rs.eps_excess = eps_excess > 0.0 ? eps_excess : 3.0 * s.mean_edge * s.calibration;
  rs.member.assign(n, 0);
  rs.witness.assign(n, -1);
  auto fp = s.distances(p);
  const auto& d = fp->dist;
  // Height of each shortest-path subtree and its deepest descendant.
  std::vector<Index> order(n);
  for (Index i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&d](Index a, Index b) { return d[a] > d[b] || (d[a] == d[b] && a < b); });
  std::vector<double> height(n, 0.0);
  std::vector<Index> deepest(n);
  for (Index i = 0; i < n; ++i) deepest[i] = i;
  for (Index u : order) {
    Index v = fp->pred[u];
    if (v < 0) continue;
    double cand = height[u] + d[u] - d[v];
    if (cand > height[v] || (cand == height[v] && deepest[u] < deepest[v])) {
      height[v] = cand;
      deepest[v] = deepest[u];
    }
  }
  const double eps = rs.eps_excess;
  parallel_for(n, [&](Index z) {
    // z itself or a neighbour y with d(p,z) + d(z,y) - d(p,y) <= eps lends its subtree as witnesses.
    double best = std::numeric_limits<double>::infinity();
    Index witness = -1;
    for (Index e = s.offsets[z] - 1; e < s.offsets[z + 1]; ++e) {
      Index y = e < s.offsets[z] ? z : s.targets[e];
      double ell = e < s.offsets[z] ? 0.0 : s.lengths[e] * s.calibration;
      if (ell > eps) continue;
      double excess = d[z] + ell - d[y];
      if (excess > eps || height[y] - ell < tau) continue;
      if (excess < best || (excess == best && deepest[y] < witness)) {
        best = excess;
        witness = deepest[y];
      }
    }
    if (witness >= 0) {
      rs.member[z] = 1;
      rs.witness[z] = witness;
    }
  });
  return rs;
}

AngleEstimate angle_limit(const GeodesicSpace& s, Index x, Index p, Index q, const AngleOptions& o) {
  const std::string method = "limit_extrapolation";
  if (x == p || x == q) return invalid_estimate(method, "angle undefined at a base point");
  auto fp = s.distances(p), fq = s.distances(q);
  const double reach = std::min(fp->dist[x], fq->dist[x]);
  const double t_min = o.t_min > 0.0 ? o.t_min : 3.0 * s.mean_edge * s.calibration;
  const double t_max = o.t_max > 0.0 ? o.t_max : 0.8 * reach;
  if (reach < t_max || t_max <= t_min)
    throw GeodesicTooShort("geodesics from x are too short for the scale range");
  AngleEstimate e;
  e.method = method;
  e.radii = geometric_radii(t_max, t_min, std::max(o.scales, 6));
  e.samples.resize(e.radii.size());
  // A single graph geodesic runs in a channel that tilts its direction at x.
  // Geodesics from x to the samples nearest p (and q) leave x through
  // different channels, and the comparison triangle is taken between x and
  // the centroids of the two point clouds.
  auto fx = s.distances(x);
  auto nearest_to = [&](const DistanceField& f) {
    std::vector<std::pair<double, Index>> v;
    v.reserve(s.size());
    for (Index z = 0; z < s.size(); ++z) v.emplace_back(f.dist[z], z);
    const Index m = std::min<Index>(std::max(1, o.targets), s.size());
    std::partial_sort(v.begin(), v.begin() + m, v.end());
    std::vector<Index> out;
    for (Index a = 0; a < m; ++a) out.push_back(v[a].second);
    return out;
  };
  const std::vector<Index> tp = nearest_to(*fp), tq = nearest_to(*fq);
  const Index np = static_cast<Index>(tp.size()), nq = static_cast<Index>(tq.size());
  parallel_for(static_cast<Index>(e.radii.size()), [&](Index k) {
    double t = e.radii[k];
    std::vector<EdgePoint> all{EdgePoint{x, x, 0.0}};
    for (Index z : tp) all.push_back(walk_towards(s, *fx, z, fx->dist[z] - t));
    for (Index z : tq) all.push_back(walk_towards(s, *fx, z, fx->dist[z] - t));
    Mat d2m = squared_distances(s, all);
    double vu = 0.5 * d2m.block(1, 1, np, np).mean(), vv = 0.5 * d2m.block(1 + np, 1 + np, nq, nq).mean();
    double a2 = d2m.block(0, 1, 1, np).mean() - vu, b2 = d2m.block(0, 1 + np, 1, nq).mean() - vv;
    double d2 = d2m.block(1, 1 + np, np, nq).mean() - vu - vv;
    e.samples[k] = (a2 + b2 - d2) / (2.0 * std::sqrt(a2 * b2));
  });
  std::vector<double> w(e.radii.size());
  for (std::size_t k = 0; k < w.size(); ++k) w[k] = e.radii[k] * e.radii[k];
  e.fit = extrapolate(e.radii, e.samples, w);
  e.value = std::acos(clamp_cos(e.fit.a, e.clamped));
  e.confident = e.fit.residual <= o.fit_threshold;
  if (!e.confident) e.note = "fit residual above threshold";
  return e;
}

TangentGradient tangent_gradient(const GeodesicSpace& s, const DistanceField& r, Index z, double radius) {
  TangentGradient out;
  Frame f = tangent_frame(s, z, radius);
  if (!f.ok) return out;
  out.basis = f.basis;
  out.ok = frame_gradient(f, r, out.grad);
  return out;
}

std::vector<double> direction_pairing(const GeodesicSpace& s, Index p, Index q, const std::vector<Index>& points,
                                      double radius) {
  auto fp = s.distances(p), fq = s.distances(q);
  std::vector<double> out(points.size(), kNaN);
  parallel_for(static_cast<Index>(points.size()), [&](Index k) {
    Frame f = tangent_frame(s, points[k], radius);
    if (!f.ok) return;
    Vec gp, gq;
    if (!frame_gradient(f, *fp, gp)) return;
    if (p == q) {
      out[k] = 1.0;
      return;
    }
    if (!frame_gradient(f, *fq, gq)) return;
    out[k] = gp.dot(gq);
  });
  return out;
}

AngleEstimate angle_average(const GeodesicSpace& s, Index x, Index p, Index q, const AngleOptions& o) {
  const std::string method = "ball_average";
  if (x == p || x == q) return invalid_estimate(method, "angle undefined at a base point");
  auto fp = s.distances(p), fq = s.distances(q), fx = s.distances(x);
  const double reach = std::min(fp->dist[x], fq->dist[x]);
  const double radius = o.tangent_radius > 0.0 ? o.tangent_radius : 5.0 * s.spacing();
  const double r_max = o.t_max > 0.0 ? o.t_max : reach / 4.0;
  const double r_min = o.t_min > 0.0 ? o.t_min : 3.0 * s.spacing();
  if (r_max <= r_min) throw GeodesicTooShort("x is too close to p or q for ball averages");
  std::vector<Index> pts = ball(s, x, r_max);
  const Index amb = s.coords.cols();
  Mat gp = Mat::Constant(pts.size(), amb, kNaN), gq = gp;
  parallel_for(static_cast<Index>(pts.size()), [&](Index k) {
    Frame f = tangent_frame(s, pts[k], radius);
    Vec a, b;
    if (!f.ok || !frame_gradient(f, *fp, a) || !frame_gradient(f, *fq, b)) return;
    gp.row(k) = (f.basis * a).transpose();
    gq.row(k) = (f.basis * b).transpose();
  });
  AngleEstimate e;
  e.method = method;
  for (double r : geometric_radii(r_max, r_min, std::max(o.scales, 6))) {
    double sum = 0.0, mass = 0.0, count = 0.0;
    Vec mp = Vec::Zero(amb), mq = Vec::Zero(amb);
    for (std::size_t k = 0; k < pts.size(); ++k)
      if (fx->dist[pts[k]] < r && std::isfinite(gp(k, 0))) {
        double wk = s.weights(pts[k]);
        sum += wk * gp.row(k).dot(gq.row(k));
        mp += wk * gp.row(k).transpose();
        mq += wk * gq.row(k).transpose();
        mass += wk;
        count += 1.0;
      }
    if (count < o.min_ball) continue;
    double c = sum / mass;
    // Jitter in the unit gradients shrinks the mean pairing towards zero.
    c /= (mp.norm() / mass) * (mq.norm() / mass);
    e.radii.push_back(r);
    e.samples.push_back(c);
    e.counts.push_back(count);
  }
  if (e.radii.size() < 4) throw EmptyBall("fewer than four radii hold enough samples around x");
  e.fit = extrapolate(e.radii, e.samples, e.counts);
  e.value = std::acos(clamp_cos(e.fit.a, e.clamped));
  e.confident = e.fit.residual <= o.fit_threshold;
  if (!e.confident) e.note = "fit residual above threshold";
  return e;
}

OscillationTable holder_oscillation(const GeodesicSpace& s, Index x, Index p, Index q, const std::vector<double>& radii,
                                    double beta, double tau, const AngleOptions& o) {
  if (radii.empty()) throw InputError("holder_oscillation needs radii");
  OscillationTable t;
  auto fp = s.distances(p), fq = s.distances(q), fx = s.distances(x);
  if (fp->dist[x] < beta || fq->dist[x] < beta) {
    t.in_reach = false;
    t.note = "x closer than beta to p or q";
  } else if (!reachability_set(s, p, tau).contains(x) || !reachability_set(s, q, tau).contains(x)) {
    t.in_reach = false;
    t.note = "x outside the reachability sets";
  }
  const double radius = o.tangent_radius > 0.0 ? o.tangent_radius : 5.0 * s.spacing();
  const double r_max = *std::max_element(radii.begin(), radii.end());
  std::vector<Index> pts = ball(s, x, r_max);
  std::vector<double> pair = direction_pairing(s, p, q, pts, radius);
  for (double r : radii) {
    double sum = 0.0, mass = 0.0;
    Index count = 0;
    for (std::size_t k = 0; k < pts.size(); ++k)
      if (fx->dist[pts[k]] < r && std::isfinite(pair[k])) {
        sum += s.weights(pts[k]) * pair[k];
        mass += s.weights(pts[k]);
        ++count;
      }
    if (count < o.min_ball) {
      if (t.note.empty()) t.note = "radii with fewer than " + std::to_string(o.min_ball) + " samples skipped";
      continue;
    }
    double avg = sum / mass, dev = 0.0;
    for (std::size_t k = 0; k < pts.size(); ++k)
      if (fx->dist[pts[k]] < r && std::isfinite(pair[k])) dev += s.weights(pts[k]) * std::abs(pair[k] - avg);
    t.radii.push_back(r);
    t.average.push_back(avg);
    t.oscillation.push_back(dev / mass);
    t.counts.push_back(count);
  }
  if (t.radii.size() < 2) throw EmptyBall("fewer than two radii hold enough samples around x");
  t.fit = fit_loglog(t.radii, t.oscillation);
  return t;
}

VariationTable first_variation_residual(const GeodesicSpace& s, Index x, Index p, Index q,
                                        const std::vector<double>& deltas, double cos_angle, const AngleOptions& o) {
  if (deltas.empty()) throw InputError("first_variation_residual needs deltas");
  VariationTable v;
  v.deltas = deltas;
  v.cos_angle = std::isfinite(cos_angle) ? cos_angle : std::cos(angle_average(s, x, p, q, o).value);
  const double longest = *std::max_element(deltas.begin(), deltas.end());
  ReachabilitySet rs = reachability_set(s, p, longest);
  if (!rs.contains(x)) throw NoExtension("the geodesic from p does not extend past x by the largest delta");
  auto fw = s.distances(rs.witness[x]);
  auto fq = s.distances(q);
  const double dqx = fq->dist[x];
  for (double delta : deltas) {
    EdgePoint g = walk_towards(s, *fw, x, delta);
    v.residual_over_delta.push_back(std::abs(field_at(*fq, g) - dqx - delta * v.cos_angle) / delta);
  }
  return v;
}

EmbeddingReport bilip_embed(const GeodesicSpace& s, Index x, const std::vector<Index>& anchors, double t, bool whiten,
                            const AngleOptions& o) {
  const Index k = static_cast<Index>(anchors.size());
  if (k == 0) throw InputError("bilip_embed needs anchors");
  EmbeddingReport rep;
  rep.gram = Mat::Identity(k, k);
  for (Index i = 0; i < k; ++i)
    for (Index j = i + 1; j < k; ++j)
      rep.gram(i, j) = rep.gram(j, i) = std::cos(angle_average(s, x, anchors[i], anchors[j], o).value);
  Eigen::SelfAdjointEigenSolver<Mat> eig(rep.gram);
  if (!(eig.eigenvalues().minCoeff() > 1e-6)) throw SingularGram("anchor Gram matrix is not positive definite");
  Mat m = whiten ? Mat(eig.operatorInverseSqrt()) : Mat(Mat::Identity(k, k));
  rep.points = ball(s, x, t);
  const Index np = static_cast<Index>(rep.points.size());
  Mat r(np, k);
  for (Index j = 0; j < k; ++j) {
    auto f = s.distances(anchors[j]);
    for (Index i = 0; i < np; ++i) r(i, j) = f->dist[rep.points[i]];
  }
  rep.values = r * m;
  std::vector<double> lo(np, std::numeric_limits<double>::infinity()), hi(np, 0.0);
  std::vector<Index> used(np, 0);
  parallel_for(np, [&](Index a) {
    std::vector<double> da;
    if (!s.oracle) da = shortest_paths(s, rep.points[a]).dist;
    for (Index b = a + 1; b < np; ++b) {
      double d = s.oracle ? s.intrinsic(rep.points[a], rep.points[b]) : da[rep.points[b]];
      if (d < 0.5 * t) continue;
      double ratio = (rep.values.row(a) - rep.values.row(b)).norm() / d;
      lo[a] = std::min(lo[a], ratio);
      hi[a] = std::max(hi[a], ratio);
      ++used[a];
    }
  });
  rep.min_ratio = *std::min_element(lo.begin(), lo.end());
  rep.max_ratio = *std::max_element(hi.begin(), hi.end());
  for (Index u : used) rep.pairs += u;
  if (rep.pairs == 0) throw EmptyBall("no sample pairs in B_t(x) at separation >= t/2");
  rep.distortion = std::max(rep.max_ratio, 1.0 / rep.min_ratio);
  return rep;
}

double perturbation_stability(const GeodesicSpace& s, Index x, Index p, Index q, double delta, std::uint64_t seed,
                              const AngleOptions& o) {
  double base = angle_average(s, x, p, q, o).value;
  auto noisy = perturb_edges(s, delta, seed);
  return std::abs(angle_average(*noisy, x, p, q, o).value - base);
}

AngleField angle_field(const GeodesicSpace& s, Index p, Index q, double tau, const std::vector<Index>& points,
                       const AngleOptions& o) {
  std::vector<Index> pts = points;
  if (pts.empty()) {
    pts.resize(s.size());
    for (Index i = 0; i < s.size(); ++i) pts[i] = i;
  }
  const double radius = o.tangent_radius > 0.0 ? o.tangent_radius : 5.0 * s.spacing();
  ReachabilitySet dp = reachability_set(s, p, tau), dq = reachability_set(s, q, tau);
  auto fp = s.distances(p), fq = s.distances(q);
  std::vector<double> pair = direction_pairing(s, p, q, pts, radius);
  AngleField out;
  out.cos_angle.assign(pts.size(), kNaN);
  out.valid.assign(pts.size(), 0);
  for (std::size_t k = 0; k < pts.size(); ++k) {
    Index z = pts[k];
    if (!std::isfinite(pair[k]) || !dp.contains(z) || !dq.contains(z)) continue;
    if (z == p || z == q || fp->dist[z] < 2.0 * radius || fq->dist[z] < 2.0 * radius) continue;
    out.cos_angle[k] = std::clamp(pair[k], -1.0, 1.0);
    out.valid[k] = 1;
  }
  return out;
}

double oracle_angle(const GeodesicSpace& s, Index x, Index p, Index q) {
  if (x == p || x == q) return kNaN;
  if (s.kind == "flat_square" || s.kind == "line") {
    Vec a = s.point(p) - s.point(x), b = s.point(q) - s.point(x);
    return std::acos(std::clamp(a.dot(b) / (a.norm() * b.norm()), -1.0, 1.0));
  }
  if (s.kind == "unit_sphere") {
    double a = s.oracle(s.point(x), s.point(p)), b = s.oracle(s.point(x), s.point(q));
    double c = s.oracle(s.point(p), s.point(q));
    return std::acos(std::clamp((std::cos(c) - std::cos(a) * std::cos(b)) / (std::sin(a) * std::sin(b)), -1.0, 1.0));
  }
  return kNaN;
}

}  // namespace weakcalc
