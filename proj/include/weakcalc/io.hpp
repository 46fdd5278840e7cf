#pragma once

#include <string>
#include <vector>

#include "weakcalc/atlas.hpp"
#include "weakcalc/riemann.hpp"
#include "weakcalc/space.hpp"

namespace weakcalc {

/// Whitespace-separated numeric table. An optional first line
/// `#! {json}` carries metadata, other `#` lines are comments, and the first
/// non-comment line names the columns.
struct Table {
  Json meta = Json::object();
  std::vector<std::string> columns;
  Mat rows;

  /// Column position; throws InputError if absent.
  Index column(const std::string& name) const;
  bool has(const std::string& name) const;
};

Table read_table(const std::string& path);
void write_table(const std::string& path, const Table& t);

/// Content hash of a chart's points and weights (hex).
std::string chart_hash(const SampledChart& chart);

/// Chart file: meta {"format": "weakcalc-chart", "k", "n", "h", "fit_order"},
/// columns of coordinates, a `weight` column and an optional integer `id`
/// column naming the abstract point behind each row.
struct ChartFile {
  ChartPtr chart;
  std::vector<Index> ids;  ///< empty without an id column
};

/// `coords` selects the coordinate columns (default: every column except
/// id and weight, in file order). Bandwidth and fit order come from the
/// meta block unless `options` is given.
ChartFile read_chart(const std::string& path, const std::vector<std::string>& coords = {},
                     const ChartOptions* options = nullptr);
void write_chart(const std::string& path, const SampledChart& chart, const std::vector<Index>& ids = {});

/// Field file: meta {"format": "weakcalc-field", "chart": hash, "kind",
/// "components"}, one column per component plus a 0/1 `valid` column.
/// Tensors and metrics are stored row-major (g11 g12 g21 g22 ...).
void write_field(const std::string& path, const FieldBase& f, const std::string& kind);
/// Reads values onto `chart`. Throws InputError on a hash or size mismatch.
FieldBase read_field(const std::string& path, ChartPtr chart, Index components);

/// Throws MetricNotSPD naming the first row that is not symmetric positive definite.
MetricField read_metric(const std::string& path, ChartPtr chart);

/// Point table (id, coordinates..., weight) and edge table (i, j, length).
SpacePtr read_space(const std::string& points_path, const std::string& edges_path);
void write_space(const std::string& points_path, const std::string& edges_path, const GeodesicSpace& s);

/// Reads a JSON document; throws InputError with the parser message.
Json read_json(const std::string& path);

/// Space from a JSON spec: {"generator": {"kind", "n", "seed", "side",
/// "graph": {"k", "radius", "radius_spacings", "calibrate"}}} or
/// {"points": path, "edges": path}. Relative paths resolve against `base_dir`.
SpacePtr space_from_json(const Json& spec, const std::string& base_dir = ".", std::uint64_t seed_override = 0);
GraphParams graph_from_json(const Json& j, GraphParams defaults = {});

/// Atlas manifest (JSON):
///   {"space": <space spec>,
///    "charts": [{"id", "dim", "file", "columns": [...]}],
///    "overlaps": [{"charts": [id, id], "ids": [...]}],   optional, checked
///    "thresholds": {"delta", "ahlfors_c", "delta_meas", "tol_alpha",
///                   "overlap_tol", "min_overlap"}}
/// Chart files need an id column.
Atlas read_atlas(const std::string& manifest_path, std::uint64_t seed_override = 0);
/// Writes points.txt, edges.txt, chart<k>.txt and <name>.json into dir;
/// returns the manifest path.
std::string write_atlas(const std::string& dir, const Atlas& atlas, const std::string& name);

}  // namespace weakcalc
