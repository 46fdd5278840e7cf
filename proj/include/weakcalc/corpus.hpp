#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "weakcalc/riemann.hpp"

namespace weakcalc {

/// Deterministic uniform draws in [0, 1) from a splitmix64 stream; the same
/// seed gives the same values on every platform.
class SeededStream {
 public:
  explicit SeededStream(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

 private:
  std::uint64_t state_;
};

/// Sum of c_e x^e over exponent vectors with |e| <= degree.
struct Polynomial {
  std::vector<std::vector<int>> exponents;
  std::vector<double> coeffs;

  double operator()(const Vec& x) const;
  Vec gradient(const Vec& x) const;
  Mat hessian(const Vec& x) const;
};

/// All monomials of degree <= `degree` in k variables with coefficients
/// drawn uniformly from [-1, 1].
Polynomial corpus_polynomial(int k, int degree, std::uint64_t seed);

ScalarField sample_polynomial(ChartPtr chart, const Polynomial& p);
/// Vector field with independent polynomial components (seeds seed*31 + c).
VectorField corpus_vector(ChartPtr chart, int degree, std::uint64_t seed);
std::vector<Polynomial> corpus_vector_components(int k, int degree, std::uint64_t seed);

struct TestMetric {
  std::string name;
  std::function<Mat(const Vec&)> g;
};

/// flat, diag(1, x1^2) and e^{2 x1} I on the plane.
std::vector<TestMetric> metric_corpus();

/// The C^2 chart change (x1, x2 + x1^2) and its Jacobian.
Vec shear_map(const Vec& x);
Mat shear_jacobian(const Vec& x);

}  // namespace weakcalc
