#include "weakcalc/io.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace weakcalc {

namespace fs = std::filesystem;

namespace {

std::string shortest(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void check_keys(const Json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw InputError(where + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) throw InputError(where + ": unknown key '" + it.key() + "'");
}

std::string resolve(const std::string& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? p : (fs::path(base) / path).string();
}

Index as_index(double v, const std::string& where) {
  if (!(v >= 0.0) || v != std::floor(v)) throw InputError(where + ": expected a non-negative integer id");
  return static_cast<Index>(v);
}

}  // namespace

Index Table::column(const std::string& name) const {
  for (std::size_t c = 0; c < columns.size(); ++c)
    if (columns[c] == name) return static_cast<Index>(c);
  throw InputError("table has no column '" + name + "'");
}

bool Table::has(const std::string& name) const {
  return std::find(columns.begin(), columns.end(), name) != columns.end();
}

Table read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  Table t;
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind("#!", 0) == 0) {
      try {
        t.meta = Json::parse(line.substr(2));
      } catch (const Json::exception& e) {
        throw InputError(path + ":" + std::to_string(lineno) + ": bad metadata: " + e.what());
      }
      continue;
    }
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string tok;
    if (t.columns.empty()) {
      while (ss >> tok) t.columns.push_back(tok);
      continue;
    }
    std::vector<double> row;
    while (ss >> tok) {
      double v = 0.0;
      auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
        throw InputError(path + ":" + std::to_string(lineno) + ": not a number: '" + tok + "'");
      row.push_back(v);
    }
    if (row.empty()) continue;
    if (row.size() != t.columns.size())
      throw InputError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.columns.size()) +
                       " values, found " + std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  if (t.columns.empty()) throw InputError(path + ": missing column header");
  t.rows.resize(rows.size(), t.columns.size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < t.columns.size(); ++c) t.rows(r, c) = rows[r][c];
  return t;
}

void write_table(const std::string& path, const Table& t) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  if (!t.meta.empty()) out << "#! " << t.meta.dump() << "\n";
  for (std::size_t c = 0; c < t.columns.size(); ++c) out << (c ? " " : "") << t.columns[c];
  out << "\n";
  for (Index r = 0; r < t.rows.rows(); ++r) {
    for (Index c = 0; c < t.rows.cols(); ++c) out << (c ? " " : "") << shortest(t.rows(r, c));
    out << "\n";
  }
}

std::string chart_hash(const SampledChart& chart) {
  std::string bytes;
  auto put = [&bytes](double v) { bytes.append(reinterpret_cast<const char*>(&v), sizeof v); };
  for (Index i = 0; i < chart.size(); ++i) {
    for (int c = 0; c < chart.dim(); ++c) put(chart.points()(i, c));
    put(chart.weights()(i));
  }
  return hex64(fnv1a(bytes));
}

// ---- charts and fields ------------------------------------------------------

ChartFile read_chart(const std::string& path, const std::vector<std::string>& coords, const ChartOptions* options) {
  Table t = read_table(path);
  if (t.meta.contains("format") && t.meta["format"] != "weakcalc-chart")
    throw InputError(path + ": not a chart file");
  std::vector<Index> cols;
  if (coords.empty()) {
    for (std::size_t c = 0; c < t.columns.size(); ++c)
      if (t.columns[c] != "id" && t.columns[c] != "weight") cols.push_back(static_cast<Index>(c));
  } else {
    for (const auto& name : coords) cols.push_back(t.column(name));
  }
  if (cols.empty()) throw InputError(path + ": no coordinate columns");
  const Index n = t.rows.rows();
  if (n == 0) throw InputError(path + ": no samples");
  if (t.meta.contains("k") && t.meta["k"].get<Index>() != static_cast<Index>(cols.size()) && coords.empty())
    throw InputError(path + ": header says k=" + t.meta["k"].dump() + " but the file has " +
                     std::to_string(cols.size()) + " coordinate columns");
  if (t.meta.contains("n") && t.meta["n"].get<Index>() != n)
    throw InputError(path + ": header says n=" + t.meta["n"].dump() + " but the file has " + std::to_string(n) +
                     " rows");
  Mat pts(n, cols.size());
  for (std::size_t c = 0; c < cols.size(); ++c) pts.col(c) = t.rows.col(cols[c]);
  Vec w = t.has("weight") ? Vec(t.rows.col(t.column("weight"))) : Vec::Constant(n, 1.0 / n);
  if (!pts.allFinite() || !w.allFinite() || (w.array() < 0.0).any())
    throw InputError(path + ": coordinates and weights must be finite, weights non-negative");
  ChartOptions o;
  if (options) {
    o = *options;
  } else {
    if (!t.meta.contains("h")) throw InputError(path + ": header lacks the bandwidth h");
    o.bandwidth = t.meta["h"].get<double>();
    if (t.meta.contains("fit_order")) o.fit_order = t.meta["fit_order"].get<int>();
  }
  if (!(o.bandwidth > 0.0)) throw InputError(path + ": bandwidth must be positive");
  ChartFile out;
  if (t.has("id")) {
    const Index c = t.column("id");
    for (Index r = 0; r < n; ++r) out.ids.push_back(as_index(t.rows(r, c), path));
  }
  out.chart = make_chart(pts, w, o);
  return out;
}

void write_chart(const std::string& path, const SampledChart& chart, const std::vector<Index>& ids) {
  Table t;
  t.meta = Json{{"format", "weakcalc-chart"},
                {"k", chart.dim()},
                {"n", chart.size()},
                {"h", chart.bandwidth()},
                {"fit_order", chart.options().fit_order}};
  const bool with_ids = !ids.empty();
  if (with_ids) t.columns.push_back("id");
  for (int c = 0; c < chart.dim(); ++c) t.columns.push_back("x" + std::to_string(c + 1));
  t.columns.push_back("weight");
  t.rows.resize(chart.size(), t.columns.size());
  for (Index i = 0; i < chart.size(); ++i) {
    Index c = 0;
    if (with_ids) t.rows(i, c++) = static_cast<double>(ids[i]);
    for (int a = 0; a < chart.dim(); ++a) t.rows(i, c++) = chart.points()(i, a);
    t.rows(i, c) = chart.weights()(i);
  }
  write_table(path, t);
}

void write_field(const std::string& path, const FieldBase& f, const std::string& kind) {
  Table t;
  t.meta = Json{{"format", "weakcalc-field"},
                {"chart", chart_hash(*f.chart)},
                {"kind", kind},
                {"components", f.components()}};
  for (Index c = 0; c < f.components(); ++c) t.columns.push_back("c" + std::to_string(c));
  t.columns.push_back("valid");
  t.rows.resize(f.size(), f.components() + 1);
  t.rows.leftCols(f.components()) = f.values;
  for (Index i = 0; i < f.size(); ++i) t.rows(i, f.components()) = f.valid[i] ? 1.0 : 0.0;
  write_table(path, t);
}

FieldBase read_field(const std::string& path, ChartPtr chart, Index components) {
  Table t = read_table(path);
  if (t.meta.contains("chart") && t.meta["chart"].get<std::string>() != chart_hash(*chart))
    throw InputError(path + ": field belongs to a different chart (hash " + t.meta["chart"].get<std::string>() + ")");
  const bool has_valid = t.has("valid");
  const Index ncols = static_cast<Index>(t.columns.size()) - (has_valid ? 1 : 0);
  if (ncols != components)
    throw InputError(path + ": expected " + std::to_string(components) + " components, found " +
                     std::to_string(ncols));
  if (t.rows.rows() != chart->size())
    throw InputError(path + ": " + std::to_string(t.rows.rows()) + " rows for a chart of " +
                     std::to_string(chart->size()) + " samples");
  FieldBase f = make_field_base(chart, components);
  Index col = 0;
  for (std::size_t c = 0; c < t.columns.size(); ++c) {
    if (t.columns[c] == "valid") continue;
    f.values.col(col++) = t.rows.col(c);
  }
  for (Index i = 0; i < f.size(); ++i) {
    bool ok = f.values.row(i).allFinite() && (!has_valid || t.rows(i, t.column("valid")) != 0.0);
    if (!ok) f.valid[i] = f.interior[i] = 0;
  }
  return f;
}

MetricField read_metric(const std::string& path, ChartPtr chart) {
  const int k = chart->dim();
  TensorField t;
  static_cast<FieldBase&>(t) = read_field(path, chart, k * k);
  for (Index i = 0; i < t.size(); ++i) {
    if (!t.valid[i]) continue;
    Mat g = t.at(i);
    const double scale = std::max(1.0, g.cwiseAbs().maxCoeff());
    if ((g - g.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale)
      throw MetricNotSPD(path + ": row " + std::to_string(i + 1) + " is not symmetric");
  }
  MetricField g = make_metric(t);
  for (Index i = 0; i < g.size(); ++i)
    if (t.valid[i] && !g.valid[i])
      throw MetricNotSPD(path + ": row " + std::to_string(i + 1) + " is not positive definite");
  return g;
}

// ---- spaces -----------------------------------------------------------------

SpacePtr read_space(const std::string& points_path, const std::string& edges_path) {
  Table pt = read_table(points_path);
  Table et = read_table(edges_path);
  const Index n = pt.rows.rows();
  if (n == 0) throw InputError(points_path + ": no points");
  std::vector<Index> coord_cols;
  for (std::size_t c = 0; c < pt.columns.size(); ++c)
    if (pt.columns[c] != "id" && pt.columns[c] != "weight") coord_cols.push_back(static_cast<Index>(c));
  Mat coords(n, coord_cols.size());
  Vec w = pt.has("weight") ? Vec(pt.rows.col(pt.column("weight"))) : Vec::Constant(n, 1.0 / n);
  std::vector<Index> row_of(n, -1);
  for (Index r = 0; r < n; ++r) {
    Index id = pt.has("id") ? as_index(pt.rows(r, pt.column("id")), points_path) : r;
    if (id >= n || row_of[id] >= 0) throw InputError(points_path + ": ids must be a permutation of 0..n-1");
    row_of[id] = r;
  }
  Mat sorted(n, coord_cols.size());
  Vec ws(n);
  for (Index id = 0; id < n; ++id) {
    for (std::size_t c = 0; c < coord_cols.size(); ++c) sorted(id, c) = pt.rows(row_of[id], coord_cols[c]);
    ws(id) = w(row_of[id]);
  }
  const Index ci = et.column("i"), cj = et.column("j"), cl = et.column("length");
  std::vector<std::tuple<Index, Index, double>> edges;
  for (Index r = 0; r < et.rows.rows(); ++r) {
    Index a = as_index(et.rows(r, ci), edges_path), b = as_index(et.rows(r, cj), edges_path);
    double len = et.rows(r, cl);
    if (a >= n || b >= n) throw InputError(edges_path + ": edge endpoint out of range");
    if (!(len > 0.0) || !std::isfinite(len)) throw InputError(edges_path + ": edge lengths must be positive");
    edges.emplace_back(a, b, len);
  }
  std::string kind = pt.meta.value("kind", std::string("file"));
  int dim = pt.meta.value("dim", static_cast<int>(coord_cols.size()));
  auto s = make_space_from_edges(kind, dim, sorted, ws, edges);
  s->manifest = Json{{"points", points_path}, {"edges", edges_path}};
  return s;
}

void write_space(const std::string& points_path, const std::string& edges_path, const GeodesicSpace& s) {
  Table pt;
  pt.meta = Json{{"format", "weakcalc-points"}, {"kind", s.kind}, {"dim", s.dim}};
  pt.columns.push_back("id");
  for (Index c = 0; c < s.coords.cols(); ++c) pt.columns.push_back("x" + std::to_string(c + 1));
  pt.columns.push_back("weight");
  pt.rows.resize(s.size(), pt.columns.size());
  for (Index i = 0; i < s.size(); ++i) {
    pt.rows(i, 0) = static_cast<double>(i);
    pt.rows.row(i).segment(1, s.coords.cols()) = s.coords.row(i);
    pt.rows(i, s.coords.cols() + 1) = s.weights(i);
  }
  write_table(points_path, pt);
  Table et;
  et.meta = Json{{"format", "weakcalc-edges"}};
  et.columns = {"i", "j", "length"};
  std::vector<std::array<double, 3>> rows;
  for (Index a = 0; a < s.size(); ++a)
    for (Index e = s.offsets[a]; e < s.offsets[a + 1]; ++e)
      if (a < s.targets[e]) rows.push_back({double(a), double(s.targets[e]), s.lengths[e] * s.calibration});
  et.rows.resize(rows.size(), 3);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (int c = 0; c < 3; ++c) et.rows(r, c) = rows[r][c];
  write_table(edges_path, et);
}

// ---- JSON -------------------------------------------------------------------

Json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw InputError(path + ": " + e.what());
  }
}

GraphParams graph_from_json(const Json& j, GraphParams g) {
  check_keys(j, {"k", "radius", "radius_spacings", "calibrate"}, "graph");
  g.k = j.value("k", g.k);
  g.radius = j.value("radius", g.radius);
  g.radius_spacings = j.value("radius_spacings", g.radius_spacings);
  g.calibrate = j.value("calibrate", g.calibrate);
  if (g.k < 1) throw InputError("graph: k must be positive");
  return g;
}

SpacePtr space_from_json(const Json& spec, const std::string& base_dir, std::uint64_t seed_override) {
  check_keys(spec, {"generator", "points", "edges"}, "space");
  if (spec.contains("generator")) {
    const Json& g = spec["generator"];
    check_keys(g, {"kind", "n", "seed", "side", "axes", "graph"}, "space.generator");
    GeneratorSpec gs;
    gs.kind = g.value("kind", gs.kind);
    gs.n = g.value("n", gs.n);
    gs.seed = g.value("seed", gs.seed);
    if (seed_override) gs.seed = seed_override;
    gs.side = g.value("side", gs.side);
    if (g.contains("axes")) {
      auto ax = g["axes"].get<std::vector<double>>();
      gs.axes = Eigen::Map<Vec>(ax.data(), ax.size());
    }
    gs.graph = GraphParams{8, 0.0, 7.0, true};
    if (g.contains("graph")) gs.graph = graph_from_json(g["graph"], gs.graph);
    if (gs.n < 16) throw InputError("space.generator: n must be at least 16");
    return generate_space(gs);
  }
  if (!spec.contains("points") || !spec.contains("edges"))
    throw InputError("space: give a generator or both points and edges files");
  return read_space(resolve(base_dir, spec["points"].get<std::string>()),
                    resolve(base_dir, spec["edges"].get<std::string>()));
}

Atlas read_atlas(const std::string& manifest_path, std::uint64_t seed_override) {
  Json m = read_json(manifest_path);
  const std::string base = fs::path(manifest_path).parent_path().string();
  try {
    check_keys(m, {"space", "charts", "overlaps", "thresholds"}, manifest_path);
    if (!m.contains("space") || !m.contains("charts")) throw InputError(manifest_path + ": needs space and charts");
    SpacePtr space = space_from_json(m["space"], base.empty() ? "." : base, seed_override);
    std::vector<AtlasChart> charts;
    for (const Json& c : m["charts"]) {
      check_keys(c, {"id", "dim", "file", "columns"}, "chart");
      AtlasChart ac;
      ac.id = c.at("id").get<std::string>();
      std::vector<std::string> cols = c.value("columns", std::vector<std::string>{});
      ChartFile cf = read_chart(resolve(base.empty() ? "." : base, c.at("file").get<std::string>()), cols);
      if (cf.ids.empty()) throw InputError("chart " + ac.id + ": the chart file needs an id column");
      if (c.contains("dim") && c["dim"].get<int>() != cf.chart->dim())
        throw DimensionMismatch("chart " + ac.id + ": manifest dim " + c["dim"].dump() + " but the file has " +
                                std::to_string(cf.chart->dim()) + " coordinates");
      ac.ids = std::move(cf.ids);
      ac.chart = cf.chart;
      charts.push_back(std::move(ac));
    }
    AtlasThresholds th;
    if (m.contains("thresholds")) {
      const Json& t = m["thresholds"];
      check_keys(t, {"delta", "ahlfors_c", "delta_meas", "tol_alpha", "overlap_tol", "min_overlap"}, "thresholds");
      th.delta = t.value("delta", th.delta);
      th.ahlfors_c = t.value("ahlfors_c", th.ahlfors_c);
      th.delta_meas = t.value("delta_meas", th.delta_meas);
      th.tol_alpha = t.value("tol_alpha", th.tol_alpha);
      th.overlap_tol = t.value("overlap_tol", th.overlap_tol);
      th.min_overlap = t.value("min_overlap", th.min_overlap);
    }
    Atlas atlas = assemble_atlas(space, std::move(charts), th);
    if (m.contains("overlaps")) {
      std::map<std::string, std::size_t> index;
      for (std::size_t c = 0; c < atlas.charts.size(); ++c) index[atlas.charts[c].id] = c;
      for (const Json& o : m["overlaps"]) {
        check_keys(o, {"charts", "ids"}, "overlap");
        auto names = o.at("charts").get<std::vector<std::string>>();
        if (names.size() != 2 || !index.count(names[0]) || !index.count(names[1]))
          throw InputError("overlap: charts must name two charts of the manifest");
        std::size_t i = index[names[0]], j = index[names[1]];
        if (i > j) std::swap(i, j);
        auto ids = o.at("ids").get<std::vector<Index>>();
        std::sort(ids.begin(), ids.end());
        const Overlap* found = nullptr;
        for (const auto& ov : atlas.overlaps)
          if (ov.i == i && ov.j == j) found = &ov;
        if (!found ? !ids.empty() : found->ids != ids)
          throw InputError("overlap " + names[0] + "/" + names[1] +
                           ": listed ids differ from the points the two charts share");
      }
    }
    return atlas;
  } catch (const Json::exception& e) {
    throw InputError(manifest_path + ": " + e.what());
  }
}

std::string write_atlas(const std::string& dir, const Atlas& atlas, const std::string& name) {
  fs::create_directories(dir);
  const fs::path d(dir);
  write_space((d / "points.txt").string(), (d / "edges.txt").string(), *atlas.space);
  Json m{{"space", {{"points", "points.txt"}, {"edges", "edges.txt"}}}, {"charts", Json::array()}};
  for (std::size_t k = 0; k < atlas.charts.size(); ++k) {
    const AtlasChart& ch = atlas.charts[k];
    const std::string file = "chart" + std::to_string(k) + ".txt";
    write_chart((d / file).string(), *ch.chart, ch.ids);
    m["charts"].push_back({{"id", ch.id}, {"dim", ch.dim()}, {"file", file}});
  }
  m["overlaps"] = Json::array();
  for (const Overlap& ov : atlas.overlaps)
    m["overlaps"].push_back({{"charts", {atlas.charts[ov.i].id, atlas.charts[ov.j].id}}, {"ids", ov.ids}});
  const AtlasThresholds& t = atlas.thresholds;
  m["thresholds"] = {{"delta", t.delta},
                     {"ahlfors_c", t.ahlfors_c},
                     {"delta_meas", t.delta_meas},
                     {"tol_alpha", t.tol_alpha},
                     {"overlap_tol", atlas.overlap_tol()},
                     {"min_overlap", t.min_overlap}};
  const std::string path = (d / (name + ".json")).string();
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out << m.dump(2) << "\n";
  return path;
}

}  // namespace weakcalc
