// Acceptance run: one line per criterion, exit 0 iff all pass.
#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "weakcalc/parallel.hpp"
#include "weakcalc/suites.hpp"

using namespace weakcalc;

namespace {

struct Criterion {
  int id;
  std::string title;
  std::function<SuiteReport()> run;
  double budget_s;  ///< 0: no runtime bound
};

struct Outcome {
  SuiteReport report;
  double seconds = 0.0;
};

Outcome timed(const Criterion& c) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o{c.run(), 0.0};
  o.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return o;
}

std::string summary(const SuiteReport& r) {
  if (const Check* f = r.first_failure()) {
    std::string s = "first failure " + f->test;
    if (!f->metric.empty()) s += " [" + f->metric + "]";
    s += ": " + format_number(f->value, 5) + " vs " + f->relation + " " + format_number(f->threshold, 5);
    if (!f->note.empty()) s += " (" + f->note + ")";
    return s;
  }
  int gating = 0;
  for (const auto& c : r.checks) gating += c.gating;
  return std::to_string(gating) + " checks within bounds";
}

}  // namespace

int main() {
  const CalculusConfig calc;
  const GeometryConfig geo;
  const AtlasConfig atlas;
  const std::vector<Criterion> criteria{
      {1, "d(df) = 0", [&] { return dd_suite(calc); }, 30.0},
      {2, "connection axioms", [&] { return connection_suite(calc); }, 60.0},
      {3, "Hessian symmetry", [&] { return hessian_suite(calc); }, 0.0},
      {4, "naturality under chart change", [&] { return naturality_suite(calc); }, 0.0},
      {5, "product rules", [&] { return product_rule_suite(calc); }, 0.0},
      {6, "mollifier", [&] { return mollifier_suite(calc); }, 0.0},
      {7, "angle equivalence", [&] { return angle_suite(geo); }, 300.0},
      {8, "Holder oscillation", [&] { return oscillation_suite(geo); }, 0.0},
      {9, "first variation", [&] { return variation_suite(geo); }, 0.0},
      {10, "bi-Lipschitz embedding", [&] { return embedding_suite(geo); }, 0.0},
      {11, "canonical metric", [&] { return canonical_suite(atlas); }, 0.0},
      {12, "perturbation stability", [&] { return stability_suite(geo); }, 0.0},
  };

  bool all = true;
  std::vector<std::string> first_dump;
  for (const auto& c : criteria) {
    Outcome o = timed(c);
    const bool in_time = c.budget_s <= 0.0 || o.seconds < c.budget_s;
    const bool pass = o.report.passed() && in_time;
    all = all && pass;
    std::string line = summary(o.report) + ", " + format_number(o.seconds, 1) + " s";
    if (c.budget_s > 0.0) line += " (budget " + format_number(c.budget_s, 0) + " s)";
    std::printf("criterion %2d %s  %s: %s\n", c.id, pass ? "PASS" : "FAIL", c.title.c_str(), line.c_str());
    std::fflush(stdout);
    first_dump.push_back(o.report.to_json().dump());
  }

  // Rerun every suite with a different worker count and compare dumps.
  set_thread_count(thread_count() == 3 ? 2 : 3);
  std::string differing;
  for (std::size_t k = 0; k < criteria.size(); ++k)
    if (criteria[k].run().to_json().dump() != first_dump[k])
      differing += (differing.empty() ? "" : ", ") + criteria[k].title;
  const bool same = differing.empty();
  all = all && same;
  std::printf("criterion 13 %s  determinism: %s\n", same ? "PASS" : "FAIL",
              same ? "all 12 suite reports byte-identical on rerun" : ("reports differ: " + differing).c_str());
  std::printf("%s\n", all ? "ALL CRITERIA PASS" : "SOME CRITERIA FAIL");
  return all ? 0 : 1;
}
