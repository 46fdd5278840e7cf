#pragma once

#include <string>
#include <vector>

#include "weakcalc/atlas.hpp"
#include "weakcalc/geodesic.hpp"
#include "weakcalc/report.hpp"
#include "weakcalc/riemann.hpp"

namespace weakcalc {

/// A metric supplied from outside the built-in corpus (e.g. loaded from file).
struct NamedMetric {
  std::string name;
  MetricField metric;
};

struct CalculusConfig {
  double h = 0.05;  ///< coarse bandwidth; every suite also runs at h / 2
  int seeds = 3;
  double tol_eq = 1e-6;
  double delta_meas = 0.05;
  double lambda_min = 1e-8;
  double roundoff_floor = 1e-10;
  std::vector<NamedMetric> extra_metrics;
};

SuiteReport dd_suite(const CalculusConfig& cfg);
SuiteReport connection_suite(const CalculusConfig& cfg);
SuiteReport hessian_suite(const CalculusConfig& cfg);
/// Chart change G(x) = (x1, x2 + x1^2) at bandwidth h / 2.
SuiteReport naturality_suite(const CalculusConfig& cfg);
SuiteReport product_rule_suite(const CalculusConfig& cfg);
SuiteReport mollifier_suite(const CalculusConfig& cfg);

/// All of the above, in that order.
std::vector<SuiteReport> verify_calculus(const CalculusConfig& cfg);

// ---- sampled spaces -------------------------------------------------------

struct GeometryConfig {
  Index n = 16384;
  std::uint64_t seed = 1;
  GraphParams graph{8, 0.0, 7.0, true};
  int configurations = 20;  ///< angle configurations per space
  double tau = 0.1;         ///< reachability margin
  double eps_excess = 0.0;  ///< 0: 3 * mean edge
  double tol_angle = 0.05;
  AngleOptions angle;
};

struct AngleRow {
  std::string space;
  int config = 0;
  Index x = -1, p = -1, q = -1;
  double oracle = 0.0, limit = 0.0, average = 0.0;
  bool confident = true;
};

/// Random (x, p, q) with x in both reachability sets and an oracle angle in
/// [0.4, pi - 0.4], on the flat square and the unit sphere.
std::vector<AngleRow> angle_table(const GeometryConfig& cfg);
SuiteReport angle_suite(const GeometryConfig& cfg, std::vector<AngleRow>* rows = nullptr);
SuiteReport oscillation_suite(const GeometryConfig& cfg);
SuiteReport variation_suite(const GeometryConfig& cfg);
/// Distance-coordinate embedding on a square of side 4 around its centre.
SuiteReport embedding_suite(const GeometryConfig& cfg);
SuiteReport stability_suite(const GeometryConfig& cfg);

/// Every sampled-space suite above, in that order.
std::vector<SuiteReport> verify_geometry(const GeometryConfig& cfg);

// ---- atlases --------------------------------------------------------------

struct AtlasConfig {
  std::string preset = "sphere_caps";
  PresetOptions options;
  double delta = 0.1;
  CanonicalOptions canonical;
};

/// Canonical metric of the stereographic sphere atlas against the round
/// metric, and the Laplacian of the height function against 2z.
SuiteReport canonical_suite(const AtlasConfig& cfg);

/// Certificate, canonical metric compatibility and Laplacian consistency of
/// a test function for one preset. `extra` holds the certificate report.
SuiteReport atlas_suite(const AtlasConfig& cfg);
/// Same for a given atlas; `cfg.preset` only labels the checks.
SuiteReport atlas_suite(const Atlas& atlas, const AtlasConfig& cfg);

}  // namespace weakcalc
