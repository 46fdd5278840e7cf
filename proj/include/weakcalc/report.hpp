#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace weakcalc {

using Json = nlohmann::ordered_json;

/// One measured quantity against its threshold.
struct Check {
  std::string test;
  std::string metric;         ///< metric / space name, may be empty
  std::int64_t field_seed = -1;
  double h = 0.0;
  double value = 0.0;
  double threshold = 0.0;
  std::string relation = "<=";  ///< "<=" or ">="
  std::string measure;          ///< abs, rel, order, ...
  bool gating = true;           ///< informational checks never fail a suite
  std::string note;

  bool pass() const;
};

struct SuiteReport {
  std::string name;
  std::vector<Check> checks;
  Json extra = Json::object();

  void add(Check c) { checks.push_back(std::move(c)); }
  bool passed() const;
  const Check* first_failure() const;
  Json to_json() const;
};

std::uint64_t fnv1a(const std::string& bytes);
std::string hex64(std::uint64_t v);

/// Fixed-precision decimal rendering used in CSV output.
std::string format_number(double v, int digits = 9);

}  // namespace weakcalc
