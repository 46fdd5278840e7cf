#pragma once

#include <limits>
#include <string>
#include <vector>

#include "weakcalc/fitting.hpp"
#include "weakcalc/space.hpp"

namespace weakcalc {

/// Points z with a witness w: d(z, w) >= tau and excess
/// d(p, z) + d(z, w) - d(p, w) <= eps.
struct ReachabilitySet {
  Index base = -1;
  double tau = 0.0;
  double eps_excess = 0.0;
  Mask member;
  std::vector<Index> witness;  ///< -1 for non-members
  bool contains(Index z) const { return member[z] != 0; }
};

/// eps_excess <= 0 selects 3 * mean edge length.
ReachabilitySet reachability_set(const GeodesicSpace& s, Index p, double tau, double eps_excess = 0.0);

struct AngleOptions {
  /// Smallest scale. 0: 3 * mean edge (limit), 3 * spacing (ball average).
  double t_min = 0.0;
  /// Largest scale. 0: 0.8 (limit) or a quarter (ball average) of min(d(x,p), d(x,q)).
  double t_max = 0.0;
  int scales = 8;
  int targets = 40;  ///< samples nearest p (and q) whose geodesics from x form the limit estimator's clouds
  double tangent_radius = 0.0;  ///< PCA / gradient ball, 0: 5 * spacing
  int min_ball = 10;
  double fit_threshold = 0.05;  ///< weighted RMS fit residual above which the fit is low confidence
};

struct AngleEstimate {
  double value = std::numeric_limits<double>::quiet_NaN();
  std::string method;
  std::vector<double> radii;    ///< strictly decreasing
  std::vector<double> samples;  ///< c(t) or ball averages at each radius
  std::vector<double> counts;   ///< ball sizes (ball_average only)
  PowerFit fit;
  bool confident = true;
  bool clamped = false;
  std::string note;
};

AngleEstimate angle_limit(const GeodesicSpace& s, Index x, Index p, Index q, const AngleOptions& o = {});
AngleEstimate angle_average(const GeodesicSpace& s, Index x, Index p, Index q, const AngleOptions& o = {});

/// Unit gradient of a distance field at z in a PCA tangent plane, expressed
/// in that plane's basis (basis columns are ambient vectors).
struct TangentGradient {
  bool ok = false;
  Mat basis;
  Vec grad;
};
TangentGradient tangent_gradient(const GeodesicSpace& s, const DistanceField& r, Index z, double radius);

/// <dr_p, dr_q>(z) for each z in `points`; NaN where the tangent fit fails.
std::vector<double> direction_pairing(const GeodesicSpace& s, Index p, Index q, const std::vector<Index>& points,
                                      double radius);

struct OscillationTable {
  std::vector<double> radii;
  std::vector<double> oscillation;
  std::vector<double> average;
  std::vector<Index> counts;
  LogLogFit fit;  ///< slope is the fitted exponent
  bool in_reach = true;
  std::string note;
};

/// Mean |<dr_p, dr_q> - ball average| over B_r(x) for each r.
OscillationTable holder_oscillation(const GeodesicSpace& s, Index x, Index p, Index q, const std::vector<double>& radii,
                                    double beta, double tau, const AngleOptions& o = {});

struct VariationTable {
  std::vector<double> deltas;
  std::vector<double> residual_over_delta;
  double cos_angle = 0.0;
};

/// |d(q, gamma(delta)) - d(q, x) - delta cos(angle pxq)| / delta along the
/// extension gamma of the geodesic from p through x. A NaN cos_angle means
/// the angle is estimated with angle_average.
VariationTable first_variation_residual(const GeodesicSpace& s, Index x, Index p, Index q,
                                        const std::vector<double>& deltas,
                                        double cos_angle = std::numeric_limits<double>::quiet_NaN(),
                                        const AngleOptions& o = {});

struct EmbeddingReport {
  std::vector<Index> points;  ///< samples of B_t(x) that were mapped
  Mat values;                 ///< phi at those samples
  Mat gram;                   ///< cos angle p_i x p_j
  double min_ratio = 0.0, max_ratio = 0.0;
  double distortion = 0.0;  ///< max(max_ratio, 1 / min_ratio)
  Index pairs = 0;
};

/// phi_t = (r_p1, ..., r_pk) * Gram^{-1/2} on B_t(x); whiten = false uses
/// the raw distance coordinates. Pairs closer than t/2 are skipped.
EmbeddingReport bilip_embed(const GeodesicSpace& s, Index x, const std::vector<Index>& anchors, double t,
                            bool whiten = true, const AngleOptions& o = {});

/// |angle_average on edge-perturbed copy - angle_average on s|.
double perturbation_stability(const GeodesicSpace& s, Index x, Index p, Index q, double delta, std::uint64_t seed,
                              const AngleOptions& o = {});

struct AngleField {
  std::vector<double> cos_angle;  ///< NaN outside `valid`
  Mask valid;                     ///< in both reachability sets with a confident estimate
};

/// cos angle pzq at every z in `points` (all points if empty), from the
/// pointwise direction pairing.
AngleField angle_field(const GeodesicSpace& s, Index p, Index q, double tau, const std::vector<Index>& points = {},
                       const AngleOptions& o = {});

/// Closed-form angle at x for spaces with a known geometry (flat and
/// round sphere); NaN otherwise.
double oracle_angle(const GeodesicSpace& s, Index x, Index p, Index q);

}  // namespace weakcalc
