#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <tuple>
#include <vector>

#include "weakcalc/report.hpp"
#include "weakcalc/spatial_index.hpp"
#include "weakcalc/types.hpp"

namespace weakcalc {

struct GraphParams {
  int k = 8;            ///< nearest neighbours per point (symmetrised)
  double radius = 0.0;  ///< if > 0, also connect all pairs closer than this
  double radius_spacings = 0.0;  ///< radius in units of the sample spacing (overrides radius)
  bool calibrate = true;
};

/// Single-source shortest paths. pred[source] == -1.
struct DistanceField {
  Index source = -1;
  std::vector<double> dist;
  std::vector<Index> pred;
};

using DistanceFn = std::function<double(const Vec&, const Vec&)>;

/// A sampled geodesic space: points with optional ambient coordinates, a
/// symmetric weighted graph in CSR layout and per-point measure.
class GeodesicSpace {
 public:
  std::string kind;
  int dim = 2;  ///< intrinsic dimension
  Mat coords;   ///< ambient coordinates (n x a)
  Vec weights;
  std::vector<Index> offsets;  ///< CSR row starts, size n + 1
  std::vector<Index> targets;
  std::vector<double> lengths;  ///< raw edge lengths
  /// Multiplicative correction applied to every path length.
  double calibration = 1.0;
  double mean_edge = 0.0;
  /// Analytic intrinsic distance, if the generator knows one.
  DistanceFn oracle;
  Json manifest = Json::object();

  GeodesicSpace() = default;
  GeodesicSpace(const GeodesicSpace& o)
      : kind(o.kind), dim(o.dim), coords(o.coords), weights(o.weights), offsets(o.offsets), targets(o.targets),
        lengths(o.lengths), calibration(o.calibration), mean_edge(o.mean_edge), oracle(o.oracle),
        manifest(o.manifest) {}

  Index size() const { return static_cast<Index>(weights.size()); }
  Vec point(Index i) const { return coords.row(i).transpose(); }
  /// (total measure / n)^(1 / dim): typical distance between samples.
  double spacing() const;

  /// Cached shortest-path field from p (thread safe).
  std::shared_ptr<const DistanceField> distances(Index p) const;
  /// Distance between samples: oracle if known, else calibrated graph distance.
  double intrinsic(Index a, Index b) const;
  void clear_cache() const;
  /// Spatial hash over the ambient coordinates, built on first use.
  const PointGrid& ambient_index() const;

 private:
  mutable std::mutex mutex_;
  mutable std::map<Index, std::shared_ptr<const DistanceField>> cache_;
  mutable std::shared_ptr<PointGrid> grid_;
};

using SpacePtr = std::shared_ptr<GeodesicSpace>;

/// Builds the graph over the given samples. lengths(a, b) gives the edge
/// weight between ambient points; throws DisconnectedGraph.
SpacePtr make_space(std::string kind, int dim, Mat coords, Vec weights, const GraphParams& params,
                    const DistanceFn& edge_length, DistanceFn oracle = {});

/// Space from an explicit edge list (i, j, length).
SpacePtr make_space_from_edges(std::string kind, int dim, Mat coords, Vec weights,
                               const std::vector<std::tuple<Index, Index, double>>& edges);

struct GeneratorSpec {
  std::string kind = "flat_square";  ///< flat_square, unit_sphere, flat_torus, ellipsoid, line
  Index n = 4096;
  std::uint64_t seed = 1;
  double side = 1.0;               ///< flat_square / flat_torus edge length
  Vec axes = Vec::Ones(3);         ///< ellipsoid semi-axes
  GraphParams graph;
};

SpacePtr generate_space(const GeneratorSpec& spec);

/// Dijkstra with ties broken towards the smaller predecessor id.
DistanceField shortest_paths(const GeodesicSpace& s, Index p);

/// Scales all path lengths by sum(oracle)/sum(graph) over `pairs` random pairs.
double calibrate(GeodesicSpace& s, int pairs, std::uint64_t seed);

/// Independent multiplicative noise in [1 - delta, 1 + delta] on each edge.
SpacePtr perturb_edges(const GeodesicSpace& s, double delta, std::uint64_t seed);
/// Every length multiplied by factor (calibration kept).
SpacePtr scale_space(const GeodesicSpace& s, double factor);

/// Samples in the intrinsic ball B_r(x) (strict), sorted by id.
std::vector<Index> ball(const GeodesicSpace& s, Index x, double r);

/// A point on an edge: (1 - t) * a + t * b.
struct EdgePoint {
  Index a = -1, b = -1;
  double t = 0.0;
};

/// Walks the shortest-path tree of `field` from x towards its source and
/// returns the point at path length `len` from x, interpolated on the last edge.
EdgePoint walk_towards(const GeodesicSpace& s, const DistanceField& field, Index x, double len);

double field_at(const DistanceField& f, const EdgePoint& e);
/// Calibrated distances from src to each target; Dijkstra stops once all are settled.
std::vector<double> distances_to(const GeodesicSpace& s, Index src, const std::vector<Index>& targets);
/// Distance between two edge points, interpolating squared endpoint distances
/// along each edge (Stewart's theorem).
double edge_point_distance(const GeodesicSpace& s, const EdgePoint& u, const EdgePoint& v);
/// Pairwise squared distances between edge points, interpolated the same way.
Mat squared_distances(const GeodesicSpace& s, const std::vector<EdgePoint>& pts);
Vec edge_point_coords(const GeodesicSpace& s, const EdgePoint& e);

}  // namespace weakcalc
