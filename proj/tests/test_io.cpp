#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "weakcalc/io.hpp"

using namespace weakcalc;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path d = fs::temp_directory_path() / "weakcalc-io-test" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

void write_text(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

}  // namespace

TEST_CASE("tables round-trip and report bad input") {
  fs::path d = scratch("table");
  Table t;
  t.meta = Json{{"format", "test"}, {"k", 2}};
  t.columns = {"a", "b"};
  t.rows = Mat{{0.1, -2.5e-17}, {1.0 / 3.0, 1e300}};
  write_table((d / "t.txt").string(), t);
  Table back = read_table((d / "t.txt").string());
  CHECK(back.meta == t.meta);
  CHECK(back.columns == t.columns);
  CHECK(back.rows == t.rows);
  CHECK(back.column("b") == 1);
  CHECK_THROWS_AS(back.column("c"), InputError);

  write_text(d / "bad.txt", "a b\n1 2\n3 x\n");
  CHECK_THROWS_WITH_AS(read_table((d / "bad.txt").string()), doctest::Contains("bad.txt:3"), InputError);
  write_text(d / "short.txt", "a b\n1 2\n3\n");
  CHECK_THROWS_AS(read_table((d / "short.txt").string()), InputError);
  CHECK_THROWS_AS(read_table((d / "missing.txt").string()), InputError);
}

TEST_CASE("charts and fields round-trip") {
  fs::path d = scratch("chart");
  ChartPtr chart = make_square_grid(2, 0.0, 1.0, 0.1);
  write_chart((d / "c.txt").string(), *chart);
  ChartFile back = read_chart((d / "c.txt").string());
  CHECK(back.ids.empty());
  CHECK(back.chart->bandwidth() == chart->bandwidth());
  CHECK(chart_hash(*back.chart) == chart_hash(*chart));

  ScalarField f = sample_scalar(chart, [](const Vec& x) { return std::sin(3.0 * x(0)) + x(1); });
  f.valid[0] = 0;
  write_field((d / "f.txt").string(), f, "scalar");
  FieldBase g = read_field((d / "f.txt").string(), back.chart, 1);
  CHECK(g.values == f.values);
  CHECK(g.valid[0] == 0);
  CHECK(g.valid[1] == 1);
  CHECK_THROWS_AS(read_field((d / "f.txt").string(), back.chart, 2), InputError);

  ChartPtr other = make_square_grid(2, 0.0, 1.0, 0.11);
  CHECK_THROWS_AS(read_field((d / "f.txt").string(), other, 1), InputError);
}

TEST_CASE("metric files must be SPD") {
  fs::path d = scratch("metric");
  ChartPtr chart = make_square_grid(2, 0.0, 1.0, 0.1);
  MetricField g = sample_metric(chart, [](const Vec& x) { return Mat(Mat{{1.0 + x(0), 0.2}, {0.2, 2.0}}); });
  write_field((d / "g.txt").string(), g, "metric");
  MetricField back = read_metric((d / "g.txt").string(), chart);
  CHECK((back.values - g.values).cwiseAbs().maxCoeff() == 0.0);

  FieldBase bad = g;
  bad.values.row(7) << 1.0, 2.0, 2.0, 1.0;  // eigenvalues 3, -1
  write_field((d / "bad.txt").string(), bad, "metric");
  CHECK_THROWS_WITH_AS(read_metric((d / "bad.txt").string(), chart), doctest::Contains("row 8"), MetricNotSPD);
  bad.values.row(7) << 1.0, 0.5, 0.0, 1.0;
  write_field((d / "asym.txt").string(), bad, "metric");
  CHECK_THROWS_AS(read_metric((d / "asym.txt").string(), chart), MetricNotSPD);
}

TEST_CASE("spaces round-trip through point and edge tables") {
  fs::path d = scratch("space");
  GeneratorSpec gs;
  gs.n = 512;
  gs.seed = 4;
  SpacePtr s = generate_space(gs);
  write_space((d / "p.txt").string(), (d / "e.txt").string(), *s);
  SpacePtr back = read_space((d / "p.txt").string(), (d / "e.txt").string());
  CHECK(back->kind == s->kind);
  CHECK(back->size() == s->size());
  CHECK((back->coords - s->coords).norm() == 0.0);
  const Index a = 3, b = 400;
  CHECK(shortest_paths(*back, a).dist[b] == doctest::Approx(shortest_paths(*s, a).dist[b]).epsilon(1e-12));

  write_text(d / "e_bad.txt", "i j length\n0 1 0.1\n0 999 0.1\n");
  CHECK_THROWS_AS(read_space((d / "p.txt").string(), (d / "e_bad.txt").string()), InputError);
}

TEST_CASE("space specs in JSON") {
  Json spec = Json::parse(R"({"generator": {"kind": "unit_sphere", "n": 600, "seed": 2, "graph": {"k": 10}}})");
  SpacePtr s = space_from_json(spec);
  CHECK(s->kind == "unit_sphere");
  CHECK(s->size() == 600);
  CHECK_THROWS_AS(space_from_json(Json::parse(R"({"generator": {"knd": "flat_square"}})")), InputError);
  CHECK_THROWS_AS(space_from_json(Json::parse(R"({"points": "p.txt"})")), InputError);
  CHECK_THROWS_AS(graph_from_json(Json::parse(R"({"k": 0})")), InputError);
}

TEST_CASE("atlas manifests round-trip") {
  fs::path d = scratch("atlas");
  PresetOptions o;
  o.n = 1024;
  o.bandwidth = 0.2;
  Atlas a = flat_two_chart_atlas(o);
  const std::string manifest = write_atlas(d.string(), a, "two");
  Atlas back = read_atlas(manifest);
  REQUIRE(back.charts.size() == 2);
  CHECK(back.charts[1].id == "right");
  REQUIRE(back.overlaps.size() == 1);
  CHECK(back.overlaps[0].ids == a.overlaps[0].ids);
  CHECK(chart_hash(*back.charts[0].chart) == chart_hash(*a.charts[0].chart));
  CHECK(back.overlap_tol() == doctest::Approx(a.overlap_tol()));

  Json m = read_json(manifest);
  m["overlaps"][0]["ids"].erase(0);
  write_text(d / "wrong_overlap.json", m.dump());
  CHECK_THROWS_WITH_AS(read_atlas((d / "wrong_overlap.json").string()), doctest::Contains("left/right"), InputError);

  m = read_json(manifest);
  m["charts"][0]["dim"] = 3;
  write_text(d / "wrong_dim.json", m.dump());
  CHECK_THROWS_AS(read_atlas((d / "wrong_dim.json").string()), DimensionMismatch);

  m = read_json(manifest);
  m["extra"] = 1;
  write_text(d / "unknown.json", m.dump());
  CHECK_THROWS_AS(read_atlas((d / "unknown.json").string()), InputError);
  write_text(d / "broken.json", "{\"space\": ");
  CHECK_THROWS_AS(read_atlas((d / "broken.json").string()), InputError);
}
