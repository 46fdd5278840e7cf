#include "weakcalc/chart.hpp"

#include <cmath>
#include <cstring>

#include "weakcalc/parallel.hpp"

namespace weakcalc {

namespace {

// Weighted LS solve of sum_y w_y (f_y - f_x - c . b(y))^2 for the basis
// b(y) (rows of `basis`); returns M^{-1} B^T W, or an empty matrix when the
// normal matrix is too ill-conditioned.
Mat ls_operator(const Mat& basis, const Vec& w, double max_condition) {
  const Index m = basis.cols();
  Mat bw = basis.transpose() * w.asDiagonal();  // m x n
  Mat normal = bw * basis;
  Eigen::SelfAdjointEigenSolver<Mat> eig(normal, Eigen::EigenvaluesOnly);
  double lmax = eig.eigenvalues().maxCoeff();
  double lmin = eig.eigenvalues().minCoeff();
  if (!(lmax > 0.0) || lmin <= lmax / max_condition) return Mat();
  // Accepted but poorly conditioned systems get a small Tikhonov term.
  if (lmin <= lmax * 1e-6) normal += 1e-10 * normal.trace() * Mat::Identity(m, m);
  return normal.ldlt().solve(bw);
}

}  // namespace

SampledChart::SampledChart(Mat points, Vec weights, ChartOptions options)
    : points_(std::move(points)), weights_(std::move(weights)), options_(options) {
  const Index n = points_.rows();
  if (n == 0) throw InputError("chart has no points");
  if (weights_.size() != n) throw InputError("chart weights size mismatch");
  if (!(options_.bandwidth > 0.0)) throw InputError("chart bandwidth must be positive");
  if ((weights_.array() < 0.0).any() || !(weights_.maxCoeff() > 0.0))
    throw InputError("chart weights must be nonnegative with one positive");
  grid_ = std::make_unique<PointGrid>(points_, options_.bandwidth);
  stencils_.resize(static_cast<std::size_t>(n));
  degenerate_.assign(static_cast<std::size_t>(n), 0);
  boundary_.assign(static_cast<std::size_t>(n), 0);
  const double h = options_.bandwidth;
  // Strict open ball, shrunk slightly so that grid points exactly at radius
  // h are excluded consistently on every side.
  const double radius = h * (1.0 - 1e-9);
  std::vector<int> duplicate(static_cast<std::size_t>(n), 0);
  parallel_for(n, [&](Index i) {
    Vec x = point(i);
    auto nbrs = grid_->within(x, radius, i);
    for (Index j : nbrs)
      if ((points_.row(j) - points_.row(i)).squaredNorm() == 0.0) duplicate[i] = 1;
    Vec centroid = Vec::Zero(dim());
    for (Index j : nbrs) centroid += point(j) - x;
    if (!nbrs.empty()) centroid /= static_cast<double>(nbrs.size());
    boundary_[i] = centroid.norm() > options_.boundary_offset * h ? 1 : 0;
    stencils_[i] = build_stencil(i, nbrs);
    degenerate_[i] = stencils_[i].ok ? 0 : 1;
  });
  for (int d : duplicate)
    if (d) throw InputError("chart points must be distinct");
}

DerivativeStencil SampledChart::build_stencil(Index i, const std::vector<Index>& nbrs) const {
  DerivativeStencil s;
  s.neighbors = nbrs;
  const int k = dim();
  const Index nn = static_cast<Index>(nbrs.size());
  if (nn < k + 1) return s;
  const double h = options_.bandwidth;
  Mat delta(nn, k);
  Vec w(nn);
  for (Index a = 0; a < nn; ++a) {
    delta.row(a) = (points_.row(nbrs[a]) - points_.row(i)) / h;
    w(a) = fit_kernel(delta.row(a).norm()) * weights_(nbrs[a]);
  }
  if (options_.fit_order >= 2) {
    const int nq = k * (k + 1) / 2;
    if (nn >= k + nq + 1) {
      Mat basis(nn, k + nq);
      basis.leftCols(k) = delta;
      int c = k;
      for (int a = 0; a < k; ++a)
        for (int b = a; b < k; ++b, ++c) basis.col(c) = delta.col(a).cwiseProduct(delta.col(b));
      Mat op = ls_operator(basis, w, options_.max_condition);
      if (op.size() > 0) {
        s.coeffs = op.topRows(k) / h;
        s.ok = true;
        return s;
      }
    }
  }
  Mat op = ls_operator(delta, w, options_.max_condition);
  if (op.size() == 0) return s;
  s.coeffs = op / h;
  s.ok = true;
  return s;
}

DerivativeStencil SampledChart::restricted_stencil(Index i, const Mask& usable) const {
  std::vector<Index> keep;
  for (Index j : stencils_[i].neighbors)
    if (usable[j]) keep.push_back(j);
  return build_stencil(i, keep);
}

Mask SampledChart::interior_mask() const {
  Mask m(static_cast<std::size_t>(size()));
  for (Index i = 0; i < size(); ++i) m[i] = interior(i) ? 1 : 0;
  return m;
}

std::uint64_t SampledChart::content_hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&](const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t a = 0; a < len; ++a) {
      h ^= p[a];
      h *= 1099511628211ULL;
    }
  };
  int k = dim();
  mix(&k, sizeof k);
  double bw = options_.bandwidth;
  mix(&bw, sizeof bw);
  for (Index i = 0; i < size(); ++i) {
    for (int a = 0; a < k; ++a) {
      double v = points_(i, a);
      mix(&v, sizeof v);
    }
    double w = weights_(i);
    mix(&w, sizeof w);
  }
  return h;
}

ChartPtr make_chart(Mat points, Vec weights, ChartOptions options) {
  return std::make_shared<const SampledChart>(std::move(points), std::move(weights), options);
}

ChartPtr make_grid_chart(const Vec& lo, const Vec& hi, double spacing, ChartOptions options) {
  const int k = static_cast<int>(lo.size());
  std::vector<Index> counts(k);
  Index n = 1;
  for (int a = 0; a < k; ++a) {
    counts[a] = static_cast<Index>(std::llround((hi(a) - lo(a)) / spacing)) + 1;
    n *= counts[a];
  }
  Mat pts(n, k);
  for (Index i = 0; i < n; ++i) {
    Index rem = i;
    for (int a = k - 1; a >= 0; --a) {
      pts(i, a) = lo(a) + spacing * static_cast<double>(rem % counts[a]);
      rem /= counts[a];
    }
  }
  Vec w = Vec::Constant(n, std::pow(spacing, k));
  return make_chart(std::move(pts), std::move(w), options);
}

ChartPtr make_square_grid(int dim, double lo, double hi, double h, int fit_order) {
  ChartOptions opts;
  opts.bandwidth = h;
  opts.fit_order = fit_order;
  return make_grid_chart(Vec::Constant(dim, lo), Vec::Constant(dim, hi), h / 2.0, opts);
}

}  // namespace weakcalc
