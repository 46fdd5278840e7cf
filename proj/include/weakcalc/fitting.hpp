#pragma once

#include <vector>

namespace weakcalc {

/// c(t) ~ a + b t^alpha, alpha searched on a grid, (a, b) by weighted least
/// squares for each alpha.
struct PowerFit {
  double a = 0.0;
  double b = 0.0;
  double alpha = 1.0;
  double residual = 0.0;  ///< weighted RMS residual
};

PowerFit fit_power_law(const std::vector<double>& t, const std::vector<double>& c,
                       const std::vector<double>& weights, double alpha_lo = 0.2, double alpha_hi = 1.0,
                       int steps = 81);

/// Ordinary least squares log y = intercept + slope log x over positive pairs.
struct LogLogFit {
  double slope = 0.0;
  double intercept = 0.0;
  int used = 0;
};

LogLogFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y);

/// Order p with r2 / r1 = (h2 / h1)^p.
double observed_order(double h1, double r1, double h2, double r2);

}  // namespace weakcalc
