#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <unordered_map>
#include <utility>
#include <vector>

#include "weakcalc/types.hpp"

namespace weakcalc {

/// Uniform-cell hash over points in R^d (d <= 4). Rows of `points` are the
/// points; the index keeps a reference, so the matrix must outlive it.
class PointGrid {
 public:
  PointGrid(const Mat& points, double cell) : points_(&points), cell_(cell) {
    dim_ = static_cast<int>(points.cols());
    if (dim_ > 4) throw DimensionMismatch("PointGrid supports dimension <= 4");
    lo_ = points.colwise().minCoeff().transpose();
    for (Index i = 0; i < points.rows(); ++i) cells_[key(coords(points.row(i).transpose()))].push_back(i);
  }

  /// Indices with |p - y| < r, excluding `skip`.
  std::vector<Index> within(const Vec& y, double r, Index skip = -1) const {
    std::vector<Index> out;
    const double r2 = r * r;
    int span = static_cast<int>(std::ceil(r / cell_));
    visit(coords(y), span, [&](Index j) {
      if (j == skip) return;
      if ((points_->row(j).transpose() - y).squaredNorm() < r2) out.push_back(j);
    });
    std::sort(out.begin(), out.end());
    return out;
  }

  /// The m nearest points to y (excluding `skip`), sorted by distance, ties by index.
  std::vector<std::pair<double, Index>> nearest(const Vec& y, int m, Index skip = -1) const {
    std::vector<std::pair<double, Index>> found;
    const auto base = coords(y);
    const Index total = points_->rows() - (skip >= 0 ? 1 : 0);
    const int want = static_cast<int>(std::min<Index>(m, total));
    if (want <= 0) return found;
    for (int span = 1;; ++span) {
      found.clear();
      visit(base, span, [&](Index j) {
        if (j == skip) return;
        found.emplace_back((points_->row(j).transpose() - y).norm(), j);
      });
      std::sort(found.begin(), found.end());
      // Anything within (span - 1) cells of y is guaranteed to have been seen.
      double safe = (span - 1) * cell_;
      if (static_cast<int>(found.size()) >= want && found[want - 1].first <= safe) break;
      if (span > max_span_) break;
    }
    if (static_cast<int>(found.size()) > want) found.resize(want);
    return found;
  }

 private:
  using Cell = std::array<long, 4>;

  Cell coords(const Vec& y) const {
    Cell c{0, 0, 0, 0};
    for (int a = 0; a < dim_; ++a) c[a] = static_cast<long>(std::floor((y(a) - lo_(a)) / cell_));
    return c;
  }

  static long long key(const Cell& c) {
    long long h = 0;
    for (long v : c) h = h * 1000003LL + (v + 500000);
    return h;
  }

  template <class F>
  void visit(const Cell& base, int span, F&& f) const {
    Cell c = base;
    visit_rec(base, c, 0, span, f);
  }

  template <class F>
  void visit_rec(const Cell& base, Cell& c, int axis, int span, F& f) const {
    if (axis == dim_) {
      auto it = cells_.find(key(c));
      if (it != cells_.end())
        for (Index j : it->second) f(j);
      return;
    }
    for (long d = -span; d <= span; ++d) {
      c[axis] = base[axis] + d;
      visit_rec(base, c, axis + 1, span, f);
    }
  }

  const Mat* points_;
  double cell_;
  int dim_ = 0;
  int max_span_ = 32;
  Vec lo_;
  std::unordered_map<long long, std::vector<Index>> cells_;
};

}  // namespace weakcalc
