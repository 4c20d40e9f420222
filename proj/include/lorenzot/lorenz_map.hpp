#pragma once

#include <functional>
#include <span>
#include <vector>

#include "lorenzot/ot_solver.hpp"

namespace lorenzot {

// Anything mapping a rank r in [0,1]^2 to cumulative shares (L1, L2).
using LorenzMap = std::function<Vec2(Vec2)>;

// Empirical Lorenz map of a fitted diagram:
//   L(r) = sum_i X_i * area(W_i ∩ [0,r1]x[0,r2]).
// Cells are classified per evaluation by bounding box: fully covered cells
// contribute precomputed totals, cells crossing the rectangle boundary are
// clipped exactly.
class EmpiricalLorenz {
 public:
  explicit EmpiricalLorenz(const TransportFit& fit) {
    const std::size_t n = fit.diagram.cells.size();
    cells_.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      const ConvexPolygon& poly = fit.diagram.cells[i];
      if (poly.empty()) continue;
      Cell c;
      c.vertices = poly.vertices;
      c.site = fit.diagram.sites[i];
      c.bb_min = {poly.vertices[0].x, poly.vertices[0].y};
      c.bb_max = c.bb_min;
      for (const Vec2& v : poly.vertices) {
        c.bb_min.x = std::min(c.bb_min.x, v.x);
        c.bb_min.y = std::min(c.bb_min.y, v.y);
        c.bb_max.x = std::max(c.bb_max.x, v.x);
        c.bb_max.y = std::max(c.bb_max.y, v.y);
      }
      c.full = c.site * polygon_area(poly);
      cells_.push_back(std::move(c));
    }
  }

  Vec2 operator()(Vec2 r) const {
    if (!(r.x >= -kGeomEps && r.x <= 1.0 + kGeomEps && r.y >= -kGeomEps &&
          r.y <= 1.0 + kGeomEps))
      throw UsageError("lorenz_map: rank outside the unit square");
    const double rx = std::clamp(r.x, 0.0, 1.0);
    const double ry = std::clamp(r.y, 0.0, 1.0);
    Vec2 acc{0.0, 0.0};
    for (const Cell& c : cells_) {
      if (c.bb_min.x >= rx || c.bb_min.y >= ry) continue;
      if (c.bb_max.x <= rx && c.bb_max.y <= ry) {
        acc = acc + c.full;
      } else {
        const double a = detail::clipped_area_rect(c.vertices, rx, ry);
        if (a > 0.0) acc = acc + c.site * a;
      }
    }
    return acc;
  }

 private:
  struct Cell {
    std::vector<Vec2> vertices;
    Vec2 site, bb_min, bb_max, full;
  };
  std::vector<Cell> cells_;
};

inline Vec2 lorenz_map(const TransportFit& fit, Vec2 r) { return EmpiricalLorenz(fit)(r); }

// ---------------------------------------------------------------------------
// Gini indices.

// Cell weights 4 * integral of (1-u1)(1-u2) over W_i. They sum to one and
// equal four times the average over rank rectangles [0,r] of the cell mass
// inside the rectangle.
inline std::vector<double> gini_weights(const TransportFit& fit) {
  std::vector<double> w(fit.diagram.cells.size());
  for (std::size_t i = 0; i < w.size(); ++i)
    w[i] = 4.0 * polygon_moment(fit.diagram.cells[i], PolyMoment::rect_overlap);
  return w;
}

// Gini index: 1 - (1/2) sum_i (X_i1 + X_i2) * gini_weight_i.
inline double gini(const TransportFit& fit) {
  const std::vector<double> w = gini_weights(fit);
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i)
    acc += (fit.diagram.sites[i].x + fit.diagram.sites[i].y) * w[i];
  return 1.0 - 0.5 * acc;
}

// Same index written as a rank-weighted sum of outcomes,
//   2 * sum_i (X_i1 + X_i2) * integral of (u1+u2-u1u2) over W_i  -  3.
// Agrees with gini() up to floating-point noise; kept as a cross-check.
inline double gini_social_form(const TransportFit& fit) {
  double acc = 0.0;
  for (std::size_t i = 0; i < fit.diagram.cells.size(); ++i) {
    const double m =
        polygon_moment(fit.diagram.cells[i], PolyMoment::rect_overlap_complement);
    acc += (fit.diagram.sites[i].x + fit.diagram.sites[i].y) * m;
  }
  return 2.0 * acc - 3.0;
}

// Alternative index E[U . grad psi(U)] - 1, computed exactly from first cell
// moments. Zero for the identical allocation; maximal at independence for
// fixed marginals.
inline double alt_gini(const TransportFit& fit) {
  double acc = 0.0;
  for (std::size_t i = 0; i < fit.diagram.cells.size(); ++i) {
    const PolygonMoments m = polygon_moments(fit.diagram.cells[i]);
    acc += fit.diagram.sites[i].x * m.mx + fit.diagram.sites[i].y * m.my;
  }
  return acc - 1.0;
}

// Boundary form of the alternative index:
//   integral over p of [p - L1(p,1)] + [p - L2(1,p)].
// Must agree with alt_gini up to quadrature error.
inline double alt_gini_boundary(const LorenzMap& map, int intervals = 512) {
  const double i1 = simpson([&](double p) { return p - map({p, 1.0}).x; }, 0.0, 1.0, intervals);
  const double i2 = simpson([&](double p) { return p - map({1.0, p}).y; }, 0.0, 1.0, intervals);
  return i1 + i2;
}

// Classical weighted scalar Gini of a univariate sample.
inline double scalar_gini(std::span<const double> values, std::span<const double> weights) {
  const std::size_t n = values.size();
  if (n == 0 || weights.size() != n) throw UsageError("scalar_gini: bad input sizes");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  double wsum = 0.0, mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    wsum += weights[i];
    mean += weights[i] * values[i];
  }
  if (!(wsum > 0.0)) throw UsageError("scalar_gini: nonpositive total weight");
  mean /= wsum;
  if (!(mean > 0.0)) throw UsageError("scalar_gini: mean must be positive");
  // sum_{i,j} w_i w_j |x_i - x_j| accumulated over the sorted order.
  double below_w = 0.0, below_wx = 0.0, acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double w = weights[idx[k]] / wsum;
    const double x = values[idx[k]];
    acc += w * (x * below_w - below_wx);
    below_w += w;
    below_wx += w * x;
  }
  return acc / mean;
}

}  // namespace lorenzot
