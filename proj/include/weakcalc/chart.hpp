#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "weakcalc/spatial_index.hpp"
#include "weakcalc/types.hpp"

namespace weakcalc {

struct ChartOptions {
  double bandwidth = 0.1;  ///< neighborhood radius h
  /// 1: local linear least squares; 2: local quadratic least squares (the
  /// gradient is read off the linear coefficients).
  int fit_order = 1;
  /// A point is "boundary" when its neighbor centroid is offset by more than
  /// this fraction of h.
  double boundary_offset = 0.25;
  double max_condition = 1e8;
};

/// Linear map from neighbor differences f(y) - f(x) to the gradient at x.
struct DerivativeStencil {
  std::vector<Index> neighbors;
  Mat coeffs;  ///< k x neighbors.size()
  bool ok = false;
};

/// A finite weighted sample of a Borel subset of R^k with its B_h
/// neighborhoods and precomputed least-squares derivative stencils.
/// Immutable after construction.
class SampledChart {
 public:
  SampledChart(Mat points, Vec weights, ChartOptions options);

  int dim() const { return static_cast<int>(points_.cols()); }
  Index size() const { return points_.rows(); }
  double bandwidth() const { return options_.bandwidth; }
  const ChartOptions& options() const { return options_; }

  const Mat& points() const { return points_; }
  Vec point(Index i) const { return points_.row(i).transpose(); }
  const Vec& weights() const { return weights_; }
  double total_mass() const { return weights_.sum(); }

  const std::vector<Index>& neighbors(Index i) const { return stencils_[i].neighbors; }
  const DerivativeStencil& stencil(Index i) const { return stencils_[i]; }

  bool degenerate(Index i) const { return degenerate_[i] != 0; }
  bool boundary(Index i) const { return boundary_[i] != 0; }
  bool interior(Index i) const { return !degenerate(i) && !boundary(i); }
  Mask interior_mask() const;

  const PointGrid& grid() const { return *grid_; }

  /// Gradient stencil recomputed over a subset of neighbors (those with
  /// usable[j] set). Used when some neighbor values are invalid.
  DerivativeStencil restricted_stencil(Index i, const Mask& usable) const;

  /// FNV-1a hash of dimension, bandwidth, coordinates and weights.
  std::uint64_t content_hash() const;

 private:
  DerivativeStencil build_stencil(Index i, const std::vector<Index>& nbrs) const;

  Mat points_;
  Vec weights_;
  ChartOptions options_;
  std::unique_ptr<PointGrid> grid_;
  std::vector<DerivativeStencil> stencils_;
  Mask degenerate_;
  Mask boundary_;
};

using ChartPtr = std::shared_ptr<const SampledChart>;

ChartPtr make_chart(Mat points, Vec weights, ChartOptions options);

/// Uniform grid over the box [lo, hi] with spacing `spacing`; weights are the
/// cell volume so the total mass approximates the box volume.
ChartPtr make_grid_chart(const Vec& lo, const Vec& hi, double spacing, ChartOptions options);

/// Grid chart whose spacing is h / 2, the layout used by the identity suites.
ChartPtr make_square_grid(int dim, double lo, double hi, double h, int fit_order = 1);

/// Weight of the smooth compact kernel used in least-squares fits, r = |y-x|/h.
inline double fit_kernel(double r) {
  if (r >= 1.0) return 0.0;
  double s = 1.0 - r * r;
  return s * s;
}

}  // namespace weakcalc
