#include "weakcalc/fitting.hpp"

#include <cmath>
#include <limits>

#include "weakcalc/types.hpp"

namespace weakcalc {

PowerFit fit_power_law(const std::vector<double>& t, const std::vector<double>& c,
                       const std::vector<double>& weights, double alpha_lo, double alpha_hi, int steps) {
  if (t.size() != c.size() || t.size() != weights.size() || t.size() < 2)
    throw InputError("fit_power_law needs matching samples (at least two)");
  PowerFit best;
  best.residual = std::numeric_limits<double>::infinity();
  double wsum = 0.0;
  for (double w : weights) wsum += w;
  for (int s = 0; s < steps; ++s) {
    double alpha = steps == 1 ? alpha_lo : alpha_lo + (alpha_hi - alpha_lo) * s / (steps - 1);
    // Weighted normal equations for (a, b) with regressor u = t^alpha.
    double sw = 0, su = 0, suu = 0, sc = 0, suc = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      double u = std::pow(t[i], alpha), w = weights[i];
      sw += w;
      su += w * u;
      suu += w * u * u;
      sc += w * c[i];
      suc += w * u * c[i];
    }
    double det = sw * suu - su * su;
    if (std::abs(det) <= 1e-300) continue;
    double a = (suu * sc - su * suc) / det;
    double b = (sw * suc - su * sc) / det;
    double rss = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      double e = c[i] - a - b * std::pow(t[i], alpha);
      rss += weights[i] * e * e;
    }
    double rms = std::sqrt(rss / wsum);
    if (rms < best.residual - 1e-15) best = {a, b, alpha, rms};
  }
  if (!std::isfinite(best.residual)) throw InputError("fit_power_law: degenerate abscissae");
  return best;
}

LogLogFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
  double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size() && i < y.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) continue;
    double lx = std::log(x[i]), ly = std::log(y[i]);
    n += 1;
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  LogLogFit fit;
  fit.used = static_cast<int>(n);
  double det = n * sxx - sx * sx;
  if (n < 2 || std::abs(det) <= 1e-300) return fit;
  fit.slope = (n * sxy - sx * sy) / det;
  fit.intercept = (sy - fit.slope * sx) / n;
  return fit;
}

double observed_order(double h1, double r1, double h2, double r2) {
  return std::log(r2 / r1) / std::log(h2 / h1);
}

}  // namespace weakcalc
