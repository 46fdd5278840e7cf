#include "weakcalc/corpus.hpp"

#include <cmath>

namespace weakcalc {

std::uint64_t SeededStream::next() {
  std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

double monomial(const Vec& x, const std::vector<int>& e, int skip_a = -1, int skip_b = -1) {
  double v = 1.0;
  for (int a = 0; a < x.size(); ++a) {
    int p = e[a] - (a == skip_a) - (a == skip_b);
    v *= std::pow(x(a), p);
  }
  return v;
}

void exponents_rec(int k, int left, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
  if (static_cast<int>(cur.size()) == k) {
    out.push_back(cur);
    return;
  }
  for (int p = 0; p <= left; ++p) {
    cur.push_back(p);
    exponents_rec(k, left - p, cur, out);
    cur.pop_back();
  }
}

}  // namespace

double Polynomial::operator()(const Vec& x) const {
  double v = 0.0;
  for (std::size_t t = 0; t < coeffs.size(); ++t) v += coeffs[t] * monomial(x, exponents[t]);
  return v;
}

Vec Polynomial::gradient(const Vec& x) const {
  Vec g = Vec::Zero(x.size());
  for (std::size_t t = 0; t < coeffs.size(); ++t)
    for (int a = 0; a < x.size(); ++a)
      if (exponents[t][a] > 0) g(a) += coeffs[t] * exponents[t][a] * monomial(x, exponents[t], a);
  return g;
}

Mat Polynomial::hessian(const Vec& x) const {
  const int k = static_cast<int>(x.size());
  Mat h = Mat::Zero(k, k);
  for (std::size_t t = 0; t < coeffs.size(); ++t) {
    const auto& e = exponents[t];
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b) {
        double f = a == b ? e[a] * (e[a] - 1) : e[a] * e[b];
        if (f != 0.0) h(a, b) += coeffs[t] * f * monomial(x, e, a, b);
      }
  }
  return h;
}

Polynomial corpus_polynomial(int k, int degree, std::uint64_t seed) {
  Polynomial p;
  std::vector<int> cur;
  exponents_rec(k, degree, cur, p.exponents);
  SeededStream rng(seed);
  for (std::size_t t = 0; t < p.exponents.size(); ++t) p.coeffs.push_back(rng.uniform(-1.0, 1.0));
  return p;
}

ScalarField sample_polynomial(ChartPtr chart, const Polynomial& p) {
  return sample_scalar(std::move(chart), [&p](const Vec& x) { return p(x); });
}

std::vector<Polynomial> corpus_vector_components(int k, int degree, std::uint64_t seed) {
  std::vector<Polynomial> comps;
  for (int c = 0; c < k; ++c) comps.push_back(corpus_polynomial(k, degree, seed * 31 + c));
  return comps;
}

VectorField corpus_vector(ChartPtr chart, int degree, std::uint64_t seed) {
  auto comps = corpus_vector_components(chart->dim(), degree, seed);
  return sample_vector(std::move(chart), [&comps](const Vec& x) {
    Vec v(comps.size());
    for (std::size_t c = 0; c < comps.size(); ++c) v(c) = comps[c](x);
    return v;
  });
}

std::vector<TestMetric> metric_corpus() {
  return {
      {"flat", [](const Vec&) { return Mat(Mat::Identity(2, 2)); }},
      {"polar", [](const Vec& x) { return Mat(Mat{{1.0, 0.0}, {0.0, x(0) * x(0)}}); }},
      {"conformal", [](const Vec& x) { return Mat(std::exp(2.0 * x(0)) * Mat::Identity(2, 2)); }},
  };
}

Vec shear_map(const Vec& x) { return Vec(Vec{{x(0), x(1) + x(0) * x(0)}}); }

Mat shear_jacobian(const Vec& x) { return Mat(Mat{{1.0, 0.0}, {2.0 * x(0), 1.0}}); }

}  // namespace weakcalc
