// weakcalc command-line driver.
//
// Settings resolve as command-line flags > config file > built-in defaults.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>

#include "CLI11.hpp"
#include "weakcalc/corpus.hpp"
#include "weakcalc/geodesic.hpp"
#include "weakcalc/io.hpp"
#include "weakcalc/parallel.hpp"
#include "weakcalc/suites.hpp"

namespace fs = std::filesystem;
using namespace weakcalc;

namespace {

constexpr int kPass = 0;
constexpr int kFail = 1;
constexpr int kInput = 2;

Json defaults() {
  return Json::parse(R"({
    "seed": 1,
    "out": "",
    "threads": 0,
    "tolerances": {"h": 0.05, "tol_eq": 1e-6, "delta_meas": 0.05, "tol_alpha": 0.1,
                   "eps_excess": 0.0, "lambda_min": 1e-8},
    "calculus": {"seeds": 3, "metrics": []},
    "geometry": {"n": 16384, "configurations": 20, "tau": 0.1, "tol_angle": 0.05},
    "angles": {"space": {"generator": {"kind": "flat_square", "n": 16384}},
               "triples": [], "random": 0, "meridian_sweep": [], "sweep_radius": 0.8, "tau": 0.1},
    "atlas": {"preset": "sphere_caps", "manifest": "", "n": 16384, "delta": 0.1,
              "bandwidth": 0.15, "smoothing": 1.0, "cap_degrees": 50.0}
  })");
}

// Keys whose values are taken whole rather than merged key by key.
bool free_form(const std::string& path) { return path == "/angles/space"; }

void merge(Json& base, const Json& over, const std::string& path) {
  if (!over.is_object()) throw InputError("config" + path + ": expected an object");
  for (auto it = over.begin(); it != over.end(); ++it) {
    const std::string key = path + "/" + it.key();
    if (!base.contains(it.key())) throw InputError("config: unknown key '" + key + "'");
    Json& slot = base[it.key()];
    const Json& v = it.value();
    if (free_form(key)) {
      slot = v;
    } else if (slot.is_object()) {
      merge(slot, v, key);
    } else if (slot.is_number() ? !v.is_number() : slot.type() != v.type()) {
      throw InputError("config: '" + key + "' has the wrong type");
    } else {
      slot = v;
    }
  }
}

struct Run {
  std::string command;
  Json cfg;
  std::string base_dir = ".";
  bool seed_given = false;
};

double positive(const Json& j, const char* key) {
  double v = j.at(key).get<double>();
  if (!(v > 0.0)) throw InputError(std::string("tolerance ") + key + " must be positive");
  return v;
}

// Where reports go does not change them.
std::string config_hash(Json cfg) {
  cfg.erase("out");
  return hex64(fnv1a(cfg.dump()));
}

Json envelope(const Run& run) {
  return Json{{"command", run.command},
              {"config_hash", config_hash(run.cfg)},
              {"seed", run.cfg["seed"]},
              {"tolerances", run.cfg["tolerances"]}};
}

void emit(const Run& run, const std::string& file, const std::string& text) {
  const std::string out = run.cfg["out"].get<std::string>();
  if (out.empty()) {
    std::cout << text;
    return;
  }
  fs::create_directories(out);
  std::ofstream f(fs::path(out) / file);
  if (!f) throw InputError("cannot write " + (fs::path(out) / file).string());
  f << text;
}

std::string describe(const SuiteReport& s, const Check& c) {
  std::string m = s.name + "/" + c.test;
  if (!c.metric.empty()) m += " [" + c.metric + "]";
  m += ": " + format_number(c.value, 6) + " " + (c.relation == ">=" ? "<" : ">") + " " + format_number(c.threshold, 6);
  if (!c.note.empty()) m += " (" + c.note + ")";
  return m;
}

int finish_suites(const Run& run, const std::vector<SuiteReport>& suites) {
  Json doc = envelope(run);
  doc["suites"] = Json::array();
  const SuiteReport* bad = nullptr;
  const Check* first = nullptr;
  for (const auto& s : suites) {
    doc["suites"].push_back(s.to_json());
    const Check* c = s.first_failure();
    if (c && !bad) bad = &s, first = c;
  }
  doc["passed"] = bad == nullptr;
  doc["first_failure"] = bad ? Json(bad->name + "/" + first->test) : Json(nullptr);
  emit(run, run.command + ".json", doc.dump(2) + "\n");
  if (bad) {
    std::cerr << "FAIL " << describe(*bad, *first) << "\n";
    return kFail;
  }
  std::cerr << "PASS " << run.command << "\n";
  return kPass;
}

// ---- verify-calculus --------------------------------------------------------

int verify_calculus_cmd(const Run& run) {
  const Json& t = run.cfg["tolerances"];
  CalculusConfig c;
  c.h = positive(t, "h");
  c.tol_eq = positive(t, "tol_eq");
  c.delta_meas = positive(t, "delta_meas");
  c.lambda_min = positive(t, "lambda_min");
  c.seeds = run.cfg["calculus"]["seeds"].get<int>();
  if (c.seeds < 1) throw InputError("calculus.seeds must be at least 1");
  if (c.h >= 1.0) throw InputError("tolerances.h must be below the unit square's side");
  for (const Json& m : run.cfg["calculus"]["metrics"]) {
    if (!m.is_object() || !m.contains("chart") || !m.contains("file"))
      throw InputError("calculus.metrics entries need chart and file");
    for (auto it = m.begin(); it != m.end(); ++it)
      if (it.key() != "name" && it.key() != "chart" && it.key() != "file")
        throw InputError("calculus.metrics: unknown key '" + it.key() + "'");
    auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? p : (fs::path(run.base_dir) / p).string(); };
    ChartFile cf = read_chart(resolve(m["chart"].get<std::string>()));
    NamedMetric nm;
    nm.name = m.value("name", m["file"].get<std::string>());
    nm.metric = read_metric(resolve(m["file"].get<std::string>()), cf.chart);
    c.extra_metrics.push_back(std::move(nm));
  }
  return finish_suites(run, verify_calculus(c));
}

// ---- verify-geometry --------------------------------------------------------

int verify_geometry_cmd(const Run& run) {
  const Json& g = run.cfg["geometry"];
  GeometryConfig c;
  c.seed = run.cfg["seed"].get<std::uint64_t>();
  c.n = g["n"].get<Index>();
  c.configurations = g["configurations"].get<int>();
  c.tau = positive(g, "tau");
  c.tol_angle = positive(g, "tol_angle");
  c.eps_excess = run.cfg["tolerances"]["eps_excess"].get<double>();
  if (c.n < 256 || c.configurations < 1) throw InputError("geometry: n must be at least 256 and configurations positive");
  return finish_suites(run, verify_geometry(c));
}

// ---- angles -----------------------------------------------------------------

Index locate(const GeodesicSpace& s, const Json& v, const char* role) {
  if (v.is_number_integer()) {
    Index id = v.get<Index>();
    if (id < 0 || id >= s.size()) throw InputError(std::string("angles: ") + role + " id out of range");
    return id;
  }
  if (v.is_array()) {
    auto c = v.get<std::vector<double>>();
    if (static_cast<Index>(c.size()) != s.coords.cols())
      throw InputError(std::string("angles: ") + role + " needs " + std::to_string(s.coords.cols()) + " coordinates");
    Vec y = Eigen::Map<Vec>(c.data(), c.size());
    return s.ambient_index().nearest(y, 1, -1).front().second;
  }
  throw InputError(std::string("angles: ") + role + " must be a sample id or a coordinate list");
}

struct Triple {
  Index x, p, q;
};

std::vector<Triple> angle_triples(const Run& run, const GeodesicSpace& s, double tau) {
  const Json& a = run.cfg["angles"];
  std::vector<Triple> out;
  for (const Json& t : a["triples"]) {
    if (!t.is_array() || t.size() != 3) throw InputError("angles.triples entries are [x, p, q]");
    out.push_back({locate(s, t[0], "x"), locate(s, t[1], "p"), locate(s, t[2], "q")});
  }
  if (!a["meridian_sweep"].empty()) {
    if (s.coords.cols() != 3) throw InputError("angles.meridian_sweep needs a space in R^3");
    const double r = a["sweep_radius"].get<double>();
    const Index x = locate(s, Json::array({0.0, 0.0, 1.0}), "x");
    const Index p = locate(s, Json::array({std::sin(r), 0.0, std::cos(r)}), "p");
    for (const Json& l : a["meridian_sweep"]) {
      const double lam = l.get<double>();
      out.push_back({x, p, locate(s, Json::array({std::sin(r) * std::cos(lam), std::sin(r) * std::sin(lam), std::cos(r)}), "q")});
    }
  }
  const int random = a["random"].get<int>();
  if (random > 0) {
    SeededStream rng(run.cfg["seed"].get<std::uint64_t>() + 4);
    const auto pick = [&] { return std::min<Index>(s.size() - 1, static_cast<Index>(rng.uniform() * s.size())); };
    int found = 0;
    for (int attempt = 0; attempt < 200 * random && found < random; ++attempt) {
      Triple t{pick(), pick(), pick()};
      if (t.x == t.p || t.x == t.q || t.p == t.q) continue;
      if (!reachability_set(s, t.p, tau).contains(t.x) || !reachability_set(s, t.q, tau).contains(t.x)) continue;
      out.push_back(t);
      ++found;
    }
    if (found < random) throw InputError("angles.random: found only " + std::to_string(found) + " admissible triples");
  }
  if (out.empty()) throw InputError("angles: no triples configured (triples, meridian_sweep or random)");
  return out;
}

int angles_cmd(const Run& run) {
  const Json& a = run.cfg["angles"];
  const double tau = positive(a, "tau");
  const std::uint64_t seed = run.seed_given ? run.cfg["seed"].get<std::uint64_t>() : 0;
  SpacePtr space = space_from_json(a["space"], run.base_dir, seed);
  const GeodesicSpace& s = *space;
  AngleOptions o;
  const double eps = run.cfg["tolerances"]["eps_excess"].get<double>();
  std::vector<Triple> triples = angle_triples(run, s, tau);

  std::string csv = "# weakcalc angles config_hash=" + config_hash(run.cfg) +
                    " tolerances=" + run.cfg["tolerances"].dump() + "\n";
  csv += "configuration,method,value,alpha,residual,confidence\n";
  Json rows = Json::array();
  for (std::size_t k = 0; k < triples.size(); ++k) {
    const Triple& t = triples[k];
    Json row{{"configuration", k}, {"x", t.x}, {"p", t.p}, {"q", t.q}};
    const bool degenerate = t.x == t.p || t.x == t.q;
    const bool reach = !degenerate && reachability_set(s, t.p, tau, eps).contains(t.x) &&
                       reachability_set(s, t.q, tau, eps).contains(t.x);
    double oracle = degenerate ? std::numeric_limits<double>::quiet_NaN() : oracle_angle(s, t.x, t.p, t.q);
    row["oracle"] = std::isfinite(oracle) ? Json(oracle) : Json(nullptr);
    row["in_reach"] = reach;
    for (const char* method : {"limit", "average"}) {
      AngleEstimate e;
      std::string confidence;
      std::string note;
      if (degenerate) {
        confidence = "invalid";
        note = "x coincides with p or q";
      } else {
        try {
          e = std::string(method) == "limit" ? angle_limit(s, t.x, t.p, t.q, o) : angle_average(s, t.x, t.p, t.q, o);
          confidence = e.confident && reach ? "high" : "low";
          note = e.note;
          if (!reach) note += std::string(note.empty() ? "" : "; ") + "x outside a reachability set";
        } catch (const Error& err) {
          confidence = "invalid";
          note = err.what();
          e = AngleEstimate{};
        }
      }
      const bool ok = confidence != "invalid";
      const auto num = [&](double v) { return ok && std::isfinite(v) ? format_number(v, 9) : std::string("nan"); };
      csv += std::to_string(k) + "," + method + "," + num(e.value) + "," + num(e.fit.alpha) + "," +
             num(e.fit.residual) + "," + confidence + "\n";
      row[method] = Json{{"value", ok && std::isfinite(e.value) ? Json(e.value) : Json(nullptr)},
                         {"alpha", ok ? Json(e.fit.alpha) : Json(nullptr)},
                         {"residual", ok ? Json(e.fit.residual) : Json(nullptr)},
                         {"confidence", confidence},
                         {"note", note}};
    }
    rows.push_back(row);
  }
  emit(run, "angles.csv", csv);
  if (!run.cfg["out"].get<std::string>().empty()) {
    Json doc = envelope(run);
    doc["space"] = s.manifest;
    doc["rows"] = rows;
    emit(run, "angles.json", doc.dump(2) + "\n");
  }
  return kPass;
}

// ---- atlas ------------------------------------------------------------------

AtlasConfig atlas_config(const Run& run) {
  const Json& a = run.cfg["atlas"];
  AtlasConfig c;
  c.preset = a["preset"].get<std::string>();
  c.options.n = a["n"].get<Index>();
  c.options.seed = run.cfg["seed"].get<std::uint64_t>();
  c.options.bandwidth = positive(a, "bandwidth");
  c.options.cap_degrees = positive(a, "cap_degrees");
  c.delta = positive(a, "delta");
  c.canonical.smoothing = a["smoothing"].get<double>();
  if (c.canonical.smoothing < 0.0) throw InputError("atlas.smoothing must be non-negative");
  if (c.options.n < 256) throw InputError("atlas.n must be at least 256");
  return c;
}

Atlas load_atlas(const Run& run, AtlasConfig& c) {
  const std::string manifest = run.cfg["atlas"]["manifest"].get<std::string>();
  Atlas atlas;
  if (!manifest.empty()) {
    const std::string path = fs::path(manifest).is_absolute() ? manifest : (fs::path(run.base_dir) / manifest).string();
    atlas = read_atlas(path, run.seed_given ? c.options.seed : 0);
    c.preset = fs::path(manifest).stem().string();
  } else {
    atlas = preset_atlas(c.preset, c.options);
  }
  atlas.thresholds.delta_meas = positive(run.cfg["tolerances"], "delta_meas");
  atlas.thresholds.tol_alpha = positive(run.cfg["tolerances"], "tol_alpha");
  return atlas;
}

int atlas_cmd(const Run& run) {
  AtlasConfig c = atlas_config(run);
  Atlas atlas = load_atlas(run, c);
  return finish_suites(run, {atlas_suite(atlas, c)});
}

// Writes a preset atlas as space files, chart files and a manifest.
int generate_cmd(const Run& run) {
  const std::string out = run.cfg["out"].get<std::string>();
  if (out.empty()) throw InputError("generate needs --out");
  AtlasConfig c = atlas_config(run);
  Atlas atlas = preset_atlas(c.preset, c.options);
  const std::string path = write_atlas(out, atlas, c.preset);
  std::cerr << "wrote " << path << "\n";
  return kPass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Calculus on sampled charts and angles on sampled geodesic spaces"};
  app.require_subcommand(1);
  std::string config_path, out, preset;
  std::uint64_t seed = 0;
  int threads = 0;
  app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "random seed");
  app.add_option("--out", out, "output directory (default: report on stdout)");
  app.add_option("--preset", preset, "atlas preset, or generator kind for angles");
  app.add_option("--threads", threads, "worker threads (default: WEAKCALC_THREADS, else all cores)")
      ->check(CLI::PositiveNumber);
  const std::vector<std::pair<std::string, std::string>> commands{
      {"verify-calculus", "identity suites on flat and curved charts"},
      {"verify-geometry", "angle, oscillation, variation, embedding and stability suites"},
      {"angles", "both angle estimators over configured triples (CSV)"},
      {"atlas", "certificate, canonical metric and overlap consistency"},
      {"generate", "write a preset atlas as space, chart and manifest files"}};
  for (const auto& [name, help] : commands) app.add_subcommand(name, help)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kPass : kInput;
  }

  Run run;
  run.command = app.get_subcommands().front()->get_name();
  try {
    run.cfg = defaults();
    if (!config_path.empty()) {
      merge(run.cfg, read_json(config_path), "");
      run.base_dir = fs::path(config_path).parent_path().string();
      if (run.base_dir.empty()) run.base_dir = ".";
      run.seed_given = read_json(config_path).contains("seed");
    }
    if (app.count("--seed")) run.cfg["seed"] = seed, run.seed_given = true;
    if (app.count("--out")) run.cfg["out"] = out;
    if (app.count("--threads")) run.cfg["threads"] = threads;
    if (app.count("--preset")) {
      if (run.command == "atlas" || run.command == "generate") {
        run.cfg["atlas"]["preset"] = preset;
        run.cfg["atlas"]["manifest"] = "";
      } else if (run.command == "angles") {
        run.cfg["angles"]["space"] = {{"generator", {{"kind", preset}, {"n", 16384}}}};
      } else {
        throw InputError("--preset is not used by " + run.command);
      }
    }
    if (run.cfg["threads"].get<int>() > 0) set_thread_count(run.cfg["threads"].get<int>());
    run.cfg.erase("threads");

    if (run.command == "verify-calculus") return verify_calculus_cmd(run);
    if (run.command == "verify-geometry") return verify_geometry_cmd(run);
    if (run.command == "angles") return angles_cmd(run);
    if (run.command == "atlas") return atlas_cmd(run);
    return generate_cmd(run);
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kInput;
  } catch (const DimensionMismatch& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kInput;
  } catch (const InsufficientOverlapSamples& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kInput;
  } catch (const DisconnectedGraph& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kInput;
  } catch (const Json::exception& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kInput;
  } catch (const std::exception& e) {
    std::cerr << "FAIL " << run.command << ": " << e.what() << "\n";
    return kFail;
  }
}
