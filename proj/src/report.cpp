#include "weakcalc/report.hpp"

#include <cmath>
#include <cstdio>

namespace weakcalc {

bool Check::pass() const {
  if (!std::isfinite(value)) return false;
  return relation == ">=" ? value >= threshold : value <= threshold;
}

bool SuiteReport::passed() const { return first_failure() == nullptr; }

const Check* SuiteReport::first_failure() const {
  for (const Check& c : checks)
    if (c.gating && !c.pass()) return &c;
  return nullptr;
}

Json SuiteReport::to_json() const {
  Json rows = Json::array();
  for (const Check& c : checks) {
    Json r;
    r["test"] = c.test;
    if (!c.metric.empty()) r["metric"] = c.metric;
    if (c.field_seed >= 0) r["field_seed"] = c.field_seed;
    if (c.h > 0.0) r["h"] = c.h;
    r["residual"] = std::isfinite(c.value) ? Json(c.value) : Json(nullptr);
    r["measure"] = c.measure;
    r["threshold"] = c.threshold;
    r["relation"] = c.relation;
    r["pass"] = c.pass();
    if (!c.gating) r["informational"] = true;
    if (!c.note.empty()) r["note"] = c.note;
    rows.push_back(std::move(r));
  }
  Json out;
  out["suite"] = name;
  out["pass"] = passed();
  if (const Check* f = first_failure()) out["first_failure"] = f->test;
  out["records"] = std::move(rows);
  if (!extra.empty()) out["details"] = extra;
  return out;
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string format_number(double v, int digits) {
  if (!std::isfinite(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace weakcalc
