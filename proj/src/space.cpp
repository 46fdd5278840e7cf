#include "weakcalc/space.hpp"

#include <cmath>
#include <numbers>
#include <map>
#include <queue>
#include <unordered_map>

#include "weakcalc/corpus.hpp"
#include "weakcalc/spatial_index.hpp"

namespace weakcalc {

std::shared_ptr<const DistanceField> GeodesicSpace::distances(Index p) const {
  {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = cache_.find(p);
    if (it != cache_.end()) return it->second;
  }
  auto f = std::make_shared<const DistanceField>(shortest_paths(*this, p));
  std::lock_guard<std::mutex> lock(mutex_);
  return cache_.emplace(p, std::move(f)).first->second;
}

double GeodesicSpace::spacing() const { return std::pow(weights.sum() / static_cast<double>(size()), 1.0 / dim); }

double GeodesicSpace::intrinsic(Index a, Index b) const {
  if (oracle) return oracle(point(a), point(b));
  return distances(a)->dist[b];
}

const PointGrid& GeodesicSpace::ambient_index() const {
  std::lock_guard<std::mutex> lock(mutex_);
  if (!grid_) grid_ = std::make_shared<PointGrid>(coords, 2.0 * std::pow(weights.sum() / size(), 1.0 / dim));
  return *grid_;
}

void GeodesicSpace::clear_cache() const {
  std::lock_guard<std::mutex> lock(mutex_);
  cache_.clear();
}

namespace {

void check_connected(const GeodesicSpace& s) {
  const Index n = s.size();
  std::vector<char> seen(n, 0);
  std::vector<Index> stack{0};
  seen[0] = 1;
  Index count = 1;
  while (!stack.empty()) {
    Index u = stack.back();
    stack.pop_back();
    for (Index e = s.offsets[u]; e < s.offsets[u + 1]; ++e)
      if (!seen[s.targets[e]]) {
        seen[s.targets[e]] = 1;
        ++count;
        stack.push_back(s.targets[e]);
      }
  }
  if (count != n)
    throw DisconnectedGraph("graph has " + std::to_string(n - count) + " of " + std::to_string(n) +
                            " points outside the component of point 0; increase k or radius");
}

SpacePtr assemble(std::string kind, int dim, Mat coords, Vec weights,
                  const std::vector<std::tuple<Index, Index, double>>& edges) {
  auto s = std::make_shared<GeodesicSpace>();
  s->kind = std::move(kind);
  s->dim = dim;
  s->coords = std::move(coords);
  s->weights = std::move(weights);
  const Index n = s->size();
  if (n == 0) throw InputError("space has no points");
  std::vector<std::vector<std::pair<Index, double>>> adj(n);
  for (const auto& [i, j, len] : edges) {
    if (i < 0 || j < 0 || i >= n || j >= n || i == j) throw InputError("edge endpoint out of range");
    if (!(len > 0.0) || !std::isfinite(len)) throw InputError("edge lengths must be positive");
    adj[i].emplace_back(j, len);
    adj[j].emplace_back(i, len);
  }
  s->offsets.assign(1, 0);
  double total = 0.0;
  Index count = 0;
  for (Index i = 0; i < n; ++i) {
    auto& a = adj[i];
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end(), [](auto& x, auto& y) { return x.first == y.first; }), a.end());
    for (auto& [j, len] : a) {
      s->targets.push_back(j);
      s->lengths.push_back(len);
      total += len;
      ++count;
    }
    s->offsets.push_back(static_cast<Index>(s->targets.size()));
  }
  s->mean_edge = count ? total / count : 0.0;
  check_connected(*s);
  return s;
}

}  // namespace

SpacePtr make_space_from_edges(std::string kind, int dim, Mat coords, Vec weights,
                               const std::vector<std::tuple<Index, Index, double>>& edges) {
  return assemble(std::move(kind), dim, std::move(coords), std::move(weights), edges);
}

SpacePtr make_space(std::string kind, int dim, Mat coords, Vec weights, const GraphParams& params,
                    const DistanceFn& edge_length, DistanceFn oracle) {
  const Index n = coords.rows();
  if (n < 2) throw InputError("a space needs at least two points");
  if (params.k < 1 && params.radius <= 0.0 && params.radius_spacings <= 0.0) throw InputError("graph needs k >= 1 or radius > 0");
  const double spacing = std::pow(weights.sum() / static_cast<double>(n), 1.0 / dim);
  const double radius = params.radius_spacings > 0.0 ? params.radius_spacings * spacing : params.radius;
  PointGrid grid(coords, std::max(2.0 * spacing, radius / 2.0));
  std::vector<std::pair<Index, Index>> pairs;
  for (Index i = 0; i < n; ++i) {
    Vec y = coords.row(i).transpose();
    if (params.k > 0)
      for (auto& [d, j] : grid.nearest(y, params.k, i)) pairs.emplace_back(std::min(i, j), std::max(i, j));
    if (radius > 0.0)
      for (Index j : grid.within(y, radius, i))
        if (i < j) pairs.emplace_back(i, j);
  }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  std::vector<std::tuple<Index, Index, double>> edges;
  edges.reserve(pairs.size());
  for (auto [i, j] : pairs) edges.emplace_back(i, j, edge_length(coords.row(i).transpose(), coords.row(j).transpose()));
  auto s = assemble(std::move(kind), dim, std::move(coords), std::move(weights), edges);
  s->oracle = std::move(oracle);
  s->manifest["graph"] = {{"k", params.k}, {"radius", radius}};
  return s;
}

namespace {

double arc(const Vec& a, const Vec& b) {
  double c = (a - b).norm();
  return 2.0 * std::asin(std::min(1.0, 0.5 * c));
}

}  // namespace

SpacePtr generate_space(const GeneratorSpec& spec) {
  if (spec.n < 2) throw InputError("n_points must be at least 2");
  SeededStream rng(spec.seed * 0x9E3779B97F4A7C15ULL + 17);
  const Index n = spec.n;
  SpacePtr s;
  if (spec.kind == "flat_square") {
    Mat pts(n, 2);
    for (Index i = 0; i < n; ++i) pts.row(i) << rng.uniform(0.0, spec.side), rng.uniform(0.0, spec.side);
    auto euclid = [](const Vec& a, const Vec& b) { return (a - b).norm(); };
    s = make_space("flat_square", 2, pts, Vec::Constant(n, spec.side * spec.side / n), spec.graph, euclid, euclid);
  } else if (spec.kind == "line") {
    Mat pts = Mat::Zero(n, 2);
    for (Index i = 0; i < n; ++i) pts(i, 0) = spec.side * i / static_cast<double>(n - 1);
    auto euclid = [](const Vec& a, const Vec& b) { return (a - b).norm(); };
    GraphParams g = spec.graph;
    g.k = std::min<int>(g.k, 1);
    s = make_space("line", 1, pts, Vec::Constant(n, spec.side / n), g, euclid, euclid);
  } else if (spec.kind == "unit_sphere") {
    Mat pts(n, 3);
    for (Index i = 0; i < n; ++i) {
      // Uniform on S^2 by Archimedes: z uniform, longitude uniform.
      double z = rng.uniform(-1.0, 1.0), phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
      double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      pts.row(i) << r * std::cos(phi), r * std::sin(phi), z;
    }
    s = make_space("unit_sphere", 2, pts, Vec::Constant(n, 4.0 * std::numbers::pi / n), spec.graph, arc, arc);
  } else if (spec.kind == "flat_torus") {
    const double L = spec.side, R = L / (2.0 * std::numbers::pi);
    Mat pts(n, 4);
    for (Index i = 0; i < n; ++i) {
      double u = rng.uniform(0.0, L) / R, v = rng.uniform(0.0, L) / R;
      pts.row(i) << R * std::cos(u), R * std::sin(u), R * std::cos(v), R * std::sin(v);
    }
    auto flat = [R](const Vec& a, const Vec& b) {
      double du = std::abs(std::remainder(std::atan2(a(1), a(0)) - std::atan2(b(1), b(0)), 2.0 * std::numbers::pi));
      double dv = std::abs(std::remainder(std::atan2(a(3), a(2)) - std::atan2(b(3), b(2)), 2.0 * std::numbers::pi));
      return R * std::hypot(du, dv);
    };
    s = make_space("flat_torus", 2, pts, Vec::Constant(n, L * L / n), spec.graph, flat, flat);
  } else if (spec.kind == "ellipsoid") {
    if (spec.axes.size() != 3 || (spec.axes.array() <= 0.0).any()) throw InputError("ellipsoid needs three positive axes");
    const Vec& ax = spec.axes;
    // Area-uniform by rejection on the pulled-back sphere density.
    auto density = [&ax](const Vec& u) {
      return std::sqrt(std::pow(ax(1) * ax(2) * u(0), 2) + std::pow(ax(0) * ax(2) * u(1), 2) +
                       std::pow(ax(0) * ax(1) * u(2), 2));
    };
    const double dmax = std::max({ax(1) * ax(2), ax(0) * ax(2), ax(0) * ax(1)});
    Mat pts(n, 3);
    double area_acc = 0.0;
    Index tries = 0;
    for (Index i = 0; i < n;) {
      double z = rng.uniform(-1.0, 1.0), phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
      double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      Vec u(3);
      u << r * std::cos(phi), r * std::sin(phi), z;
      double d = density(u);
      area_acc += d;
      ++tries;
      if (rng.uniform() * dmax > d) continue;
      pts.row(i++) = u.cwiseProduct(ax).transpose();
    }
    const double area = 4.0 * std::numbers::pi * area_acc / static_cast<double>(tries);
    auto chord = [](const Vec& a, const Vec& b) { return (a - b).norm(); };
    s = make_space("ellipsoid", 2, pts, Vec::Constant(n, area / n), spec.graph, chord);
  } else {
    throw InputError("unknown space kind '" + spec.kind + "'");
  }
  s->manifest["kind"] = spec.kind;
  s->manifest["n"] = spec.n;
  s->manifest["seed"] = spec.seed;
  if (spec.kind == "flat_square" || spec.kind == "flat_torus" || spec.kind == "line") s->manifest["side"] = spec.side;
  if (spec.kind == "ellipsoid") s->manifest["axes"] = {spec.axes(0), spec.axes(1), spec.axes(2)};
  if (spec.graph.calibrate && s->oracle && spec.kind != "line") calibrate(*s, 32, spec.seed);
  s->manifest["calibration"] = s->calibration;
  return s;
}

DistanceField shortest_paths(const GeodesicSpace& s, Index p) {
  const Index n = s.size();
  if (p < 0 || p >= n) throw InputError("source point out of range");
  DistanceField f;
  f.source = p;
  f.dist.assign(n, std::numeric_limits<double>::infinity());
  f.pred.assign(n, -1);
  std::vector<char> done(n, 0);
  using Item = std::pair<double, Index>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
  f.dist[p] = 0.0;
  heap.emplace(0.0, p);
  while (!heap.empty()) {
    auto [d, u] = heap.top();
    heap.pop();
    if (done[u]) continue;
    done[u] = 1;
    for (Index e = s.offsets[u]; e < s.offsets[u + 1]; ++e) {
      Index v = s.targets[e];
      if (done[v]) continue;
      double nd = d + s.lengths[e];
      if (nd < f.dist[v] || (nd == f.dist[v] && u < f.pred[v])) {
        f.dist[v] = nd;
        f.pred[v] = u;
        heap.emplace(nd, v);
      }
    }
  }
  for (double& d : f.dist) d *= s.calibration;
  return f;
}

double calibrate(GeodesicSpace& s, int pairs, std::uint64_t seed) {
  if (!s.oracle) return s.calibration;
  SeededStream rng(seed ^ 0xC0FFEEULL);
  const Index n = s.size();
  const double saved = s.calibration;
  s.calibration = 1.0;
  double num = 0.0, den = 0.0;
  for (int k = 0; k < pairs; ++k) {
    Index a = static_cast<Index>(rng.uniform() * n), b = static_cast<Index>(rng.uniform() * n);
    if (a == b) b = (b + 1) % n;
    num += s.oracle(s.point(a), s.point(b));
    den += shortest_paths(s, a).dist[b];
  }
  s.calibration = den > 0.0 ? num / den : saved;
  s.clear_cache();
  return s.calibration;
}

namespace {

double edge_noise(std::uint64_t seed, Index i, Index j) {
  SeededStream r(seed * 0x100000001B3ULL ^ (static_cast<std::uint64_t>(std::min(i, j)) << 32 |
                                           static_cast<std::uint64_t>(std::max(i, j))));
  r.next();
  return r.uniform(-1.0, 1.0);
}

}  // namespace

SpacePtr perturb_edges(const GeodesicSpace& s, double delta, std::uint64_t seed) {
  if (!(delta >= 0.0 && delta < 1.0)) throw InputError("edge noise must lie in [0, 1)");
  auto out = std::make_shared<GeodesicSpace>(s);
  double total = 0.0;
  for (Index i = 0; i < s.size(); ++i)
    for (Index e = s.offsets[i]; e < s.offsets[i + 1]; ++e) {
      out->lengths[e] = s.lengths[e] * (1.0 + delta * edge_noise(seed, i, s.targets[e]));
      total += out->lengths[e];
    }
  out->mean_edge = total / static_cast<double>(out->lengths.size());
  out->oracle = {};
  out->manifest["edge_noise"] = {{"delta", delta}, {"seed", seed}};
  return out;
}

SpacePtr scale_space(const GeodesicSpace& s, double factor) {
  if (!(factor > 0.0)) throw InputError("scale factor must be positive");
  auto out = std::make_shared<GeodesicSpace>(s);
  out->coords *= factor;
  for (double& l : out->lengths) l *= factor;
  out->mean_edge *= factor;
  out->weights *= std::pow(factor, s.dim);
  if (s.oracle) {
    DistanceFn base = s.oracle;
    out->oracle = [base, factor](const Vec& a, const Vec& b) { return factor * base(a / factor, b / factor); };
  }
  return out;
}

std::vector<Index> ball(const GeodesicSpace& s, Index x, double r) {
  auto f = s.distances(x);
  std::vector<Index> out;
  for (Index i = 0; i < s.size(); ++i)
    if (f->dist[i] < r) out.push_back(i);
  return out;
}

EdgePoint walk_towards(const GeodesicSpace& s, const DistanceField& field, Index x, double len) {
  (void)s;
  EdgePoint e{x, x, 0.0};
  if (len <= 0.0) return e;
  double walked = 0.0;
  Index u = x;
  while (field.pred[u] >= 0) {
    Index v = field.pred[u];
    double step = field.dist[u] - field.dist[v];
    if (walked + step >= len) return EdgePoint{u, v, step > 0.0 ? (len - walked) / step : 0.0};
    walked += step;
    u = v;
  }
  throw GeodesicTooShort("geodesic of length " + format_number(walked, 6) + " is shorter than " +
                         format_number(len, 6));
}

double field_at(const DistanceField& f, const EdgePoint& e) {
  return (1.0 - e.t) * f.dist[e.a] + e.t * f.dist[e.b];
}

std::vector<double> distances_to(const GeodesicSpace& s, Index src, const std::vector<Index>& targets) {
  const Index n = s.size();
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::vector<char> done(n, 0), wanted(n, 0);
  std::size_t left = 0;
  for (Index t : targets)
    if (!wanted[t]) {
      wanted[t] = 1;
      ++left;
    }
  using Item = std::pair<double, Index>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
  dist[src] = 0.0;
  heap.emplace(0.0, src);
  while (!heap.empty() && left > 0) {
    auto [d, u] = heap.top();
    heap.pop();
    if (done[u]) continue;
    done[u] = 1;
    if (wanted[u]) --left;
    for (Index e = s.offsets[u]; e < s.offsets[u + 1]; ++e) {
      Index v = s.targets[e];
      double nd = d + s.lengths[e];
      if (nd < dist[v]) {
        dist[v] = nd;
        heap.emplace(nd, v);
      }
    }
  }
  std::vector<double> out(targets.size());
  for (std::size_t k = 0; k < targets.size(); ++k) out[k] = dist[targets[k]] * s.calibration;
  return out;
}

Mat squared_distances(const GeodesicSpace& s, const std::vector<EdgePoint>& pts) {
  const std::size_t m = pts.size();
  std::vector<Index> ends;
  for (const auto& e : pts) {
    ends.push_back(e.a);
    ends.push_back(e.b);
  }
  Mat d2(2 * m, 2 * m);
  std::map<Index, std::vector<double>> from;
  for (Index e : ends)
    if (!from.count(e)) from[e] = distances_to(s, e, ends);
  for (std::size_t i = 0; i < 2 * m; ++i) {
    const auto& d = from[ends[i]];
    for (std::size_t j = 0; j < 2 * m; ++j) d2(i, j) = d[j] * d[j];
  }
  d2 = 0.5 * (d2 + d2.transpose()).eval();
  // Stewart's theorem on each edge: exact for straight segments.
  auto edge2 = [&](std::size_t i) { return d2(2 * i, 2 * i + 1); };
  Mat half(2 * m, m);
  for (std::size_t j = 0; j < m; ++j) {
    double t = pts[j].t;
    half.col(j) = (1.0 - t) * d2.col(2 * j) + t * d2.col(2 * j + 1) - Vec::Constant(2 * m, t * (1.0 - t) * edge2(j));
  }
  Mat out(m, m);
  for (std::size_t i = 0; i < m; ++i) {
    double t = pts[i].t;
    for (std::size_t j = 0; j < m; ++j)
      out(i, j) = std::max(0.0, (1.0 - t) * half(2 * i, j) + t * half(2 * i + 1, j) - t * (1.0 - t) * edge2(i));
  }
  return 0.5 * (out + out.transpose());
}

double edge_point_distance(const GeodesicSpace& s, const EdgePoint& u, const EdgePoint& v) {
  return std::sqrt(squared_distances(s, {u, v})(0, 1));
}

Vec edge_point_coords(const GeodesicSpace& s, const EdgePoint& e) {
  return (1.0 - e.t) * s.point(e.a) + e.t * s.point(e.b);
}

}  // namespace weakcalc
