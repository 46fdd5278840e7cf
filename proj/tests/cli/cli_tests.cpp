// Runs the weakcalc executable and checks exit codes and reports.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/wait.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

const fs::path kData = WEAKCALC_CLI_DATA;
const fs::path kWork = WEAKCALC_CLI_WORK;

int run(const std::string& args, const std::string& log = "log.txt") {
  fs::create_directories(kWork);
  const std::string cmd = std::string(WEAKCALC_CLI) + " " + args + " > " + (kWork / log).string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path out(const std::string& name) {
  fs::path d = kWork / name;
  fs::remove_all(d);
  return d;
}

fs::path config(const std::string& name, const Json& j) {
  fs::create_directories(kWork);
  fs::path p = kWork / name;
  std::ofstream(p) << j.dump(2);
  return p;
}

struct CsvRow {
  int configuration;
  std::string method;
  double value;
  std::string confidence;
};

std::vector<CsvRow> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::vector<CsvRow> rows;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      CHECK(line == "configuration,method,value,alpha,residual,confidence");
      header = true;
      continue;
    }
    std::stringstream ss(line);
    std::string f[6];
    for (auto& s : f) std::getline(ss, s, ',');
    rows.push_back({std::stoi(f[0]), f[1], std::stod(f[2]), f[5]});
  }
  return rows;
}

}  // namespace

TEST_CASE("verify-calculus passes with defaults") {
  fs::path o = out("calc");
  CHECK(run("verify-calculus --out " + o.string()) == 0);
  Json r = Json::parse(slurp(o / "verify-calculus.json"));
  CHECK(r["passed"] == true);
  CHECK(r["config_hash"].get<std::string>().size() == 16);
  CHECK(r["tolerances"]["h"] == 0.05);
  CHECK(r["suites"].size() == 6);
}

TEST_CASE("verify-calculus fails at a coarse bandwidth") {
  fs::path c = config("coarse.json", {{"tolerances", {{"h", 0.8}}}});
  fs::path o = out("coarse");
  CHECK(run("verify-calculus --config " + c.string() + " --out " + o.string(), "coarse.txt") == 1);
  CHECK(slurp(kWork / "coarse.txt").find("FAIL") != std::string::npos);
  Json r = Json::parse(slurp(o / "verify-calculus.json"));
  CHECK(r["passed"] == false);
  CHECK_FALSE(r["first_failure"].is_null());
}

TEST_CASE("input errors exit with 2") {
  CHECK(run("verify-calculus --config " + (kData / "bad_metric.json").string(), "bad.txt") == 2);
  CHECK(slurp(kWork / "bad.txt").find("row 13") != std::string::npos);
  CHECK(run("verify-calculus --config " + (kData / "good_metric.json").string() + " --out " + out("good").string()) ==
        0);
  CHECK(run("verify-calculus --config " + config("unknown.json", {{"bogus", 1}}).string()) == 2);
  CHECK(run("verify-calculus --config " + config("type.json", {{"seed", "one"}}).string()) == 2);
  CHECK(run("verify-calculus --config " + config("neg.json", {{"tolerances", {{"tol_eq", -1.0}}}}).string()) == 2);
  CHECK(run("angles --preset no_such_space") == 2);
  CHECK(run("atlas --preset no_such_atlas") == 2);
  CHECK(run("no-such-command") == 2);
  CHECK(run("verify-calculus --preset sphere_caps") == 2);
}

TEST_CASE("angles: perpendicular flat triple and a degenerate one") {
  fs::path c = config("flat_angles.json",
                      {{"angles", {{"triples", Json::array({Json::array({{0.5, 0.5}, {0.1, 0.5}, {0.5, 0.1}}),
                                                            Json::array({{0.5, 0.5}, {0.5, 0.5}, {0.5, 0.1}})})}}}});
  fs::path o = out("flat_angles");
  REQUIRE(run("angles --config " + c.string() + " --out " + o.string()) == 0);
  auto rows = read_csv(o / "angles.csv");
  REQUIRE(rows.size() == 4);
  for (int k = 0; k < 2; ++k) {
    CHECK(rows[k].configuration == 0);
    CHECK(std::abs(rows[k].value - std::numbers::pi / 2) <= 0.05);
    CHECK(rows[k].confidence == "high");
  }
  CHECK(std::abs(rows[0].value - rows[1].value) <= 0.05);
  for (int k = 2; k < 4; ++k) {
    CHECK(std::isnan(rows[k].value));
    CHECK(rows[k].confidence == "invalid");
  }
  Json j = Json::parse(slurp(o / "angles.json"));
  CHECK(j["rows"][1]["oracle"].is_null());
}

TEST_CASE("angles: sphere meridian sweep") {
  const double pi = std::numbers::pi;
  fs::path c = config("sweep.json", {{"angles",
                                      {{"space", {{"generator", {{"kind", "unit_sphere"}, {"n", 16384}}}}},
                                       {"meridian_sweep", {pi / 6, pi / 3, pi / 2}}}}});
  fs::path o = out("sweep");
  REQUIRE(run("angles --config " + c.string() + " --out " + o.string()) == 0);
  auto rows = read_csv(o / "angles.csv");
  REQUIRE(rows.size() == 6);
  const double lambda[] = {pi / 6, pi / 3, pi / 2};
  for (const auto& r : rows) CHECK(std::abs(r.value - lambda[r.configuration]) <= 0.05);
}

TEST_CASE("angles reports are reproducible across thread counts") {
  fs::path c = config("repro.json", {{"angles", {{"random", 3}}}});
  fs::path a = out("repro_a"), b = out("repro_b");
  REQUIRE(run("angles --config " + c.string() + " --threads 1 --out " + a.string()) == 0);
  REQUIRE(run("angles --config " + c.string() + " --threads 3 --out " + b.string()) == 0);
  CHECK(slurp(a / "angles.csv") == slurp(b / "angles.csv"));
  CHECK(slurp(a / "angles.json") == slurp(b / "angles.json"));
  fs::path s = out("repro_seed");
  REQUIRE(run("angles --config " + c.string() + " --seed 9 --out " + s.string()) == 0);
  CHECK(slurp(a / "angles.csv") != slurp(s / "angles.csv"));
}

TEST_CASE("atlas presets") {
  fs::path o = out("sphere");
  CHECK(run("atlas --preset sphere_caps --out " + o.string()) == 0);
  Json r = Json::parse(slurp(o / "atlas.json"));
  CHECK(r["passed"] == true);
  CHECK(r["suites"][0]["details"]["certificate"]["pass"] == true);

  CHECK(run("atlas --preset flat_single --out " + out("single").string()) == 0);

  fs::path b = out("broken");
  CHECK(run("atlas --preset broken_transition --out " + b.string(), "broken.txt") == 1);
  CHECK(slurp(kWork / "broken.txt").find("left/right") != std::string::npos);
  Json br = Json::parse(slurp(b / "atlas.json"));
  CHECK(br["first_failure"] == "atlas/certificate");
}

TEST_CASE("generated atlas files load as a manifest") {
  fs::path g = out("generated");
  Json small = {{"atlas", {{"n", 2048}, {"bandwidth", 0.2}}}};
  fs::path c = config("small_atlas.json", small);
  REQUIRE(run("generate --preset flat_two_chart --config " + c.string() + " --out " + g.string()) == 0);
  REQUIRE(fs::exists(g / "flat_two_chart.json"));
  small["atlas"]["manifest"] = (g / "flat_two_chart.json").string();
  fs::path m = config("manifest.json", small);
  CHECK(run("atlas --config " + m.string() + " --out " + out("from_manifest").string()) == 0);
}
