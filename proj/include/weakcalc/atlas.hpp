#pragma once

#include <string>
#include <vector>

#include "weakcalc/report.hpp"
#include "weakcalc/riemann.hpp"
#include "weakcalc/space.hpp"

namespace weakcalc {

/// One chart: samples of phi at the listed abstract points.
struct AtlasChart {
  std::string id;
  std::vector<Index> ids;  ///< abstract point behind each chart sample
  ChartPtr chart;
  int dim() const { return chart->dim(); }
};

/// Shared abstract points of charts i < j and the transition Phi_ij between
/// the two overlap sub-charts (Jacobian estimated from the samples).
struct Overlap {
  std::size_t i = 0, j = 0;
  std::vector<Index> ids;
  std::vector<Index> rows_i, rows_j;
  ChartPtr sub_i, sub_j;
  ChartMap map;      ///< Phi_ij : sub_i -> sub_j
  ChartMap inverse;  ///< Phi_ji
};

struct AtlasThresholds {
  double delta = 0.1;         ///< bi-Lipschitz certificate
  double ahlfors_c = 1.3;     ///< ratios must lie in [1 / C, C]
  double delta_meas = 0.05;   ///< tolerated uncovered / invalid mass fraction
  double tol_alpha = 0.1;
  double overlap_tol = 0.0;   ///< overlap residual bound, 0: 2 * max bandwidth
  Index min_overlap = 12;     ///< fewer shared samples than this is an error
  std::vector<double> ahlfors_radii{0.4, 0.2, 0.1, 0.05};
  Index ahlfors_min_count = 200;
  int ahlfors_centers = 32;
  int distortion_pairs = 4000;
};

/// Charts over a sampled space with the overlaps found by shared ids.
/// Immutable after assembly.
class Atlas {
 public:
  SpacePtr space;
  std::vector<AtlasChart> charts;
  std::vector<Overlap> overlaps;
  AtlasThresholds thresholds;

  /// Per abstract point, the number of charts containing it.
  std::vector<int> multiplicity() const;
  double uncovered_mass() const;
  double overlap_tol() const;
  /// Row of abstract point id in chart c, or -1.
  Index row(std::size_t c, Index id) const;

 private:
  friend Atlas assemble_atlas(SpacePtr, std::vector<AtlasChart>, AtlasThresholds);
  std::vector<std::vector<Index>> rows_;
};

/// Throws InsufficientOverlapSamples for overlaps with fewer than
/// min_overlap shared points and DimensionMismatch when charts sharing
/// points differ in dimension.
Atlas assemble_atlas(SpacePtr space, std::vector<AtlasChart> charts, AtlasThresholds thresholds = {});

struct ChartCertificate {
  std::string chart;
  double distortion = 0.0;  ///< (max - min) / (max + min) of |phi x - phi y| / d(x, y)
  double scale = 0.0;       ///< (max + min) / 2
  Index pairs = 0;
  std::vector<double> radii;
  std::vector<double> ahlfors_lo, ahlfors_hi;  ///< mass(B_t) / (omega_l t^l) over centres
  double ahlfors_c = 0.0;                     ///< max(hi, 1 / lo) over radii
  Index centers = 0;
  bool pass = false;
};

/// Transition Phi_ij of two (1 +- delta) charts has lip_hi / lip_lo at most
/// ((1 + delta) / (1 - delta))^2.
struct TransitionCertificate {
  std::string name;  ///< "<chart i>/<chart j>"
  double lip_lo = 0.0, lip_hi = 0.0;
  double ratio = 0.0;
  bool pass = false;
};

struct RectifiabilityReport {
  std::vector<ChartCertificate> charts;
  std::vector<TransitionCertificate> transitions;
  double uncovered_mass = 0.0;
  double delta = 0.0;
  bool pass = false;
  Json to_json() const;
};

RectifiabilityReport certify_rectifiable(const Atlas& atlas, double delta);

/// Per-chart fields of one kind, in chart order.
template <class F>
struct Global {
  std::vector<F> local;
};
using GlobalScalar = Global<ScalarField>;
using GlobalVector = Global<VectorField>;
using GlobalForm = Global<PForm>;
using GlobalTensor = Global<TensorField>;

struct GlobalMetric : Global<MetricField> {
  double spd_fraction = 1.0;  ///< mass fraction of chart samples with an SPD estimate
};

/// Restriction of a function on the abstract points to every chart.
GlobalScalar chart_scalars(const Atlas& atlas, const Vec& f, const Mask& valid = {});

struct OverlapResidual {
  std::size_t i = 0, j = 0;
  double value = 0.0;
  Index points = 0;
};

struct Regularity {
  std::string kind;  ///< "weakly Lipschitz", "weakly Holder" or "Borel"
  double alpha = 0.0;
  double constant = 0.0;
  std::string chart;  ///< worst chart
};

struct CompatibilityReport {
  double max_residual = 0.0;
  std::vector<OverlapResidual> overlaps;
  bool compatible = true;
  Regularity regularity;
  Json to_json() const;
};

/// max over overlaps of |Phi_ij^* omega_j - omega_i|.
CompatibilityReport check_global_form(const Atlas& atlas, const GlobalForm& form);
/// Same for a metric with the tensor pullback J^T g_j J.
CompatibilityReport check_global_metric(const Atlas& atlas, const GlobalMetric& g);

/// Holder fit of a chart field over clean samples: max |f(x) - f(y)| in
/// dyadic distance buckets from h / 4 to a quarter of the chart diameter,
/// log-log least squares over buckets holding at least 30 pairs. A field
/// varying by less than 5% of its magnitude is Lipschitz with K ~ 0.
Regularity fit_holder(const FieldBase& f);

struct CanonicalOptions {
  /// Mollifier radius for the coefficients in chart bandwidths; 0 keeps the
  /// pointwise estimate.
  double smoothing = 1.0;
};

/// g^{st} = <d phi_s, d phi_t> from pointwise Lipschitz constants on the
/// space's graph, <df, dg> = (Lip(f + g)^2 - Lip(f - g)^2) / 4; the metric
/// is its inverse. Points with a non-positive Gram are invalid.
GlobalMetric canonical_metric(const Atlas& atlas, const CanonicalOptions& o = {});

Regularity classify_metric_regularity(const GlobalMetric& g, double tol_alpha = 0.1);

struct GlobalVectorResult {
  GlobalVector field;
  CompatibilityReport consistency;
};

/// nabla_X Y chartwise. Throws MetricNotLipschitz unless g classifies as
/// weakly Lipschitz. `gammas` (one per chart, null entries allowed)
/// replace the Levi-Civita symbols.
GlobalVectorResult global_levi_civita(const Atlas& atlas, const GlobalMetric& g, const GlobalVector& x,
                                      const GlobalVector& y, const std::vector<const Christoffel*>& gammas = {});

struct GlobalSecondOrder {
  GlobalTensor hessian;
  GlobalScalar laplacian;
  CompatibilityReport hessian_consistency;
  CompatibilityReport laplacian_consistency;
};

GlobalSecondOrder global_hessian_laplacian(const Atlas& atlas, const GlobalMetric& g, const GlobalScalar& f);

struct HolderPiece {
  std::vector<Index> ids;
  double mass = 0.0;
  double constant = 0.0;  ///< empirical Holder constant at the requested exponent
};

struct HolderPartition {
  double alpha = 0.0;
  double k_max = 0.0;
  std::vector<HolderPiece> pieces;  ///< largest first
  double covered_fraction = 0.0;    ///< mass in pieces of at least 1% of the valid mass
  double fitted_alpha = 0.0;        ///< fit_holder exponent, worst piece
  Json to_json() const;
};

/// Greedy region growing over chart neighbours: y joins the piece of z
/// when |f(y) - f(z)| <= k_max |y - z|^alpha.
HolderPartition classify_weak_holder(const Atlas& atlas, const Vec& f, const Mask& valid, double alpha,
                                     double k_max);

/// max over triple overlaps of |J_jk J_ij - J_ik| / |J_ik|.
double cocycle_residual(const Atlas& atlas);

// ---- presets ------------------------------------------------------------

struct PresetOptions {
  Index n = 16384;
  std::uint64_t seed = 1;
  GraphParams graph{8, 0.0, 7.0, true};
  double bandwidth = 0.15;
  int fit_order = 2;
  double cap_degrees = 50.0;
};

/// Stereographic caps of half-angle cap_degrees around +-e_1, +-e_2, +-e_3
/// of the unit sphere, in that order ("+x", "-x", ...). The cap around c = +-e_a
/// has coordinates (y.e, y.(c x e)) / (1 + y.c) with e = e_{a+1 mod 3}; chart
/// weights carry the conformal factor of the coordinates.
Atlas sphere_caps_atlas(const PresetOptions& o = {});
/// The unit square with its identity chart.
Atlas flat_single_atlas(const PresetOptions& o = {});
/// The unit square covered by [0, 0.7] x [0, 1] and [0.3, 1] x [0, 1], the
/// second chart translated by -0.3 in x_1.
Atlas flat_two_chart_atlas(const PresetOptions& o = {});
/// flat_two_chart_atlas with the second chart stretched by 2 in x_1.
Atlas broken_transition_atlas(const PresetOptions& o = {});

/// sphere_caps, flat_single, flat_two_chart, broken_transition.
Atlas preset_atlas(const std::string& name, const PresetOptions& o = {});

}  // namespace weakcalc
