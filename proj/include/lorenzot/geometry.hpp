#pragma once

#include <array>
#include <cmath>
#include <numeric>
#include <vector>

#include "lorenzot/common.hpp"

namespace lorenzot {

// Tolerance for orientation/containment predicates; collinear or coincident
// clip vertices closer than this are merged.
inline constexpr double kGeomEps = 1e-12;

// Convex polygon in [0,1]^2 with counterclockwise vertex order. Fewer than
// three vertices means the empty polygon (area zero).
struct ConvexPolygon {
  std::vector<Vec2> vertices;
  bool empty() const { return vertices.size() < 3; }
};

inline ConvexPolygon unit_square_polygon() {
  return ConvexPolygon{{{0.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}, {0.0, 1.0}}};
}

struct PolygonMoments {
  double area = 0.0;  // integral of 1
  double mx = 0.0;    // integral of u1
  double my = 0.0;    // integral of u2
  double mxy = 0.0;   // integral of u1*u2
};

// Exact polynomial moments over the polygon via Green's theorem edge sums.
inline PolygonMoments polygon_moments(const ConvexPolygon& poly) {
  PolygonMoments m;
  const auto& v = poly.vertices;
  const std::size_t n = v.size();
  if (n < 3) return m;
  for (std::size_t k = 0; k < n; ++k) {
    const Vec2 a = v[k];
    const Vec2 b = v[(k + 1) % n];
    const double c = cross(a, b);
    m.area += c;
    m.mx += (a.x + b.x) * c;
    m.my += (a.y + b.y) * c;
    m.mxy += (a.x * b.y + 2.0 * a.x * a.y + 2.0 * b.x * b.y + b.x * a.y) * c;
  }
  m.area *= 0.5;
  m.mx /= 6.0;
  m.my /= 6.0;
  m.mxy /= 24.0;
  if (m.area < 0.0 && m.area > -kGeomEps) m.area = 0.0;
  return m;
}

inline double polygon_area(const ConvexPolygon& poly) {
  const double a = polygon_moments(poly).area;
  return a > 0.0 ? a : 0.0;
}

enum class PolyMoment {
  one,
  u1,
  u2,
  u1u2,
  // (1-u1)(1-u2): the measure of rank rectangles [0,r1]x[0,r2] containing u,
  // integrated over r in the unit square.
  rect_overlap,
  // u1+u2-u1u2 = 1 - (1-u1)(1-u2).
  rect_overlap_complement,
};

inline double polygon_moment(const ConvexPolygon& poly, PolyMoment kind) {
  const PolygonMoments m = polygon_moments(poly);
  switch (kind) {
    case PolyMoment::one:
      return m.area;
    case PolyMoment::u1:
      return m.mx;
    case PolyMoment::u2:
      return m.my;
    case PolyMoment::u1u2:
      return m.mxy;
    case PolyMoment::rect_overlap:
      return m.area - m.mx - m.my + m.mxy;
    case PolyMoment::rect_overlap_complement:
      return m.mx + m.my - m.mxy;
  }
  throw UsageError("polygon_moment: unknown moment kind");
}

namespace detail {

// Sutherland-Hodgman clip of a convex polygon against the half-plane
// dot(a, u) + b >= 0. Vertices within kGeomEps of the line are kept.
inline void clip_half_plane_into(const std::vector<Vec2>& in, Vec2 a, double b,
                                 std::vector<Vec2>& out) {
  out.clear();
  const std::size_t n = in.size();
  if (n == 0) return;
  double dprev = dot(a, in[n - 1]) + b;
  Vec2 prev = in[n - 1];
  for (std::size_t k = 0; k < n; ++k) {
    const Vec2 cur = in[k];
    const double dcur = dot(a, cur) + b;
    const bool cur_in = dcur >= -kGeomEps;
    const bool prev_in = dprev >= -kGeomEps;
    if (cur_in != prev_in) {
      const double t = dprev / (dprev - dcur);
      out.push_back(prev + t * (cur - prev));
    }
    if (cur_in) out.push_back(cur);
    prev = cur;
    dprev = dcur;
  }
  // Merge coincident consecutive vertices (keep first occurrence).
  if (out.size() > 1) {
    std::size_t w = 1;
    for (std::size_t k = 1; k < out.size(); ++k) {
      if (std::fabs(out[k].x - out[w - 1].x) > kGeomEps ||
          std::fabs(out[k].y - out[w - 1].y) > kGeomEps)
        out[w++] = out[k];
    }
    out.resize(w);
    while (out.size() > 1 && std::fabs(out.front().x - out.back().x) <= kGeomEps &&
           std::fabs(out.front().y - out.back().y) <= kGeomEps)
      out.pop_back();
  }
  if (out.size() < 3) out.clear();
}

// Area of poly clipped to [0,rx] x [0,ry], allocation-free (hot path for
// Lorenz map evaluation). Convex cells stay small, so fixed buffers suffice.
inline double clipped_area_rect(const std::vector<Vec2>& v, double rx, double ry) {
  constexpr std::size_t kCap = 96;
  std::array<Vec2, kCap> buf_a, buf_b;
  std::size_t na = 0;
  for (const Vec2& p : v) {
    if (na == kCap) break;
    buf_a[na++] = p;
  }
  auto clip = [](const std::array<Vec2, kCap>& in, std::size_t n, std::array<Vec2, kCap>& out,
                 bool along_x, double limit) -> std::size_t {
    std::size_t m = 0;
    if (n == 0) return 0;
    Vec2 prev = in[n - 1];
    double dprev = limit - (along_x ? prev.x : prev.y);
    for (std::size_t k = 0; k < n; ++k) {
      const Vec2 cur = in[k];
      const double dcur = limit - (along_x ? cur.x : cur.y);
      const bool cin = dcur >= -kGeomEps;
      const bool pin = dprev >= -kGeomEps;
      if (cin != pin && m + 2 <= kCap) {
        const double t = dprev / (dprev - dcur);
        out[m++] = prev + t * (cur - prev);
      }
      if (cin && m < kCap) out[m++] = cur;
      prev = cur;
      dprev = dcur;
    }
    return m;
  };
  std::size_t nb = clip(buf_a, na, buf_b, true, rx);
  na = clip(buf_b, nb, buf_a, false, ry);
  if (na < 3) return 0.0;
  double acc = 0.0;
  for (std::size_t k = 0; k < na; ++k) acc += cross(buf_a[k], buf_a[(k + 1) % na]);
  return acc > 0.0 ? 0.5 * acc : 0.0;
}

// Polygon with per-edge labels: label[k] belongs to the edge from vertex k to
// vertex k+1. Used during power-diagram construction to track which neighbor
// contributed each cell edge.
struct LabeledPolygon {
  std::vector<Vec2> v;
  std::vector<int> label;
};

inline void clip_half_plane_labeled(const LabeledPolygon& in, Vec2 a, double b, int clip_label,
                                    LabeledPolygon& out) {
  out.v.clear();
  out.label.clear();
  const std::size_t n = in.v.size();
  if (n == 0) return;
  std::vector<double> d(n);
  for (std::size_t k = 0; k < n; ++k) d[k] = dot(a, in.v[k]) + b;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t k1 = (k + 1) % n;
    const bool cur_in = d[k] >= -kGeomEps;
    const bool nxt_in = d[k1] >= -kGeomEps;
    if (cur_in) {
      out.v.push_back(in.v[k]);
      if (nxt_in) {
        out.label.push_back(in.label[k]);
      } else {
        out.label.push_back(in.label[k]);
        const double t = d[k] / (d[k] - d[k1]);
        out.v.push_back(in.v[k] + t * (in.v[k1] - in.v[k]));
        out.label.push_back(clip_label);
      }
    } else if (nxt_in) {
      const double t = d[k] / (d[k] - d[k1]);
      out.v.push_back(in.v[k] + t * (in.v[k1] - in.v[k]));
      out.label.push_back(in.label[k]);
    }
  }
  // Merge coincident consecutive vertices, keeping the outgoing label of the
  // later vertex.
  const std::size_t m = out.v.size();
  if (m > 1) {
    std::vector<Vec2> vv;
    std::vector<int> ll;
    vv.reserve(m);
    ll.reserve(m);
    for (std::size_t k = 0; k < m; ++k) {
      const Vec2 p = out.v[k];
      if (!vv.empty() && std::fabs(vv.back().x - p.x) <= kGeomEps &&
          std::fabs(vv.back().y - p.y) <= kGeomEps) {
        ll.back() = out.label[k];
        continue;
      }
      vv.push_back(p);
      ll.push_back(out.label[k]);
    }
    // Wrap-around duplicate: drop the trailing vertex together with its
    // degenerate outgoing edge.
    while (vv.size() > 1 && std::fabs(vv.front().x - vv.back().x) <= kGeomEps &&
           std::fabs(vv.front().y - vv.back().y) <= kGeomEps) {
      vv.pop_back();
      ll.pop_back();
    }
    out.v = std::move(vv);
    out.label = std::move(ll);
  }
  if (out.v.size() < 3) {
    out.v.clear();
    out.label.clear();
  }
}

inline LabeledPolygon labeled_unit_square() {
  LabeledPolygon p;
  p.v = {{0.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}, {0.0, 1.0}};
  p.label = {-1, -2, -3, -4};
  return p;
}

}  // namespace detail

inline ConvexPolygon clip_half_plane(const ConvexPolygon& poly, Vec2 a, double b) {
  ConvexPolygon out;
  detail::clip_half_plane_into(poly.vertices, a, b, out.vertices);
  return out;
}

// poly intersected with [0, r.x] x [0, r.y].
inline ConvexPolygon clip_to_rectangle(const ConvexPolygon& poly, Vec2 r) {
  ConvexPolygon tmp = clip_half_plane(poly, {-1.0, 0.0}, r.x);
  return clip_half_plane(tmp, {0.0, -1.0}, r.y);
}

// Power diagram of the unit square: cell i collects the points u where
// dot(u, sites[i]) + h[i] attains the maximum over all sites.
struct PowerDiagram {
  std::vector<Vec2> sites;
  std::vector<double> dual_weights;  // gauge-fixed to sum zero
  std::vector<ConvexPolygon> cells;

  struct CellEdge {
    int neighbor;
    double length;
  };
  // Interior edges of each cell, keyed by the neighboring site index.
  std::vector<std::vector<CellEdge>> adjacency;
};

namespace detail {

inline void require_distinct_sites(const std::vector<Vec2>& sites) {
  std::vector<std::size_t> idx(sites.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (sites[a].x != sites[b].x) return sites[a].x < sites[b].x;
    return sites[a].y < sites[b].y;
  });
  for (std::size_t k = 0; k + 1 < idx.size(); ++k) {
    if (sites[idx[k]] == sites[idx[k + 1]])
      throw DataError("duplicate sites at indices " + std::to_string(idx[k]) + " and " +
                      std::to_string(idx[k + 1]) +
                      "; separate duplicates (jitter) or merge their weights before building "
                      "a power diagram");
  }
}

}  // namespace detail

inline PowerDiagram build_power_diagram(const std::vector<Vec2>& sites,
                                        const std::vector<double>& dual_weights,
                                        unsigned threads = 0) {
  const std::size_t n = sites.size();
  if (n == 0) throw UsageError("build_power_diagram: no sites");
  if (dual_weights.size() != n)
    throw UsageError("build_power_diagram: sites/dual_weights size mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(sites[i].x) || !std::isfinite(sites[i].y) ||
        !std::isfinite(dual_weights[i]))
      throw DataError("build_power_diagram: non-finite site or weight at index " +
                      std::to_string(i));
  }
  detail::require_distinct_sites(sites);

  PowerDiagram pd;
  pd.sites = sites;
  pd.dual_weights = dual_weights;
  const double mean_h =
      std::accumulate(dual_weights.begin(), dual_weights.end(), 0.0) / static_cast<double>(n);
  for (double& h : pd.dual_weights) h -= mean_h;
  pd.cells.resize(n);
  pd.adjacency.resize(n);

  const auto& h = pd.dual_weights;
  parallel_for(
      n,
      [&](std::size_t lo, std::size_t hi) {
        detail::LabeledPolygon cell, scratch;
        for (std::size_t i = lo; i < hi; ++i) {
          cell = detail::labeled_unit_square();
          // Clip in ascending site index; ties at degenerate junctions are
          // thereby resolved lexicographically.
          for (std::size_t j = 0; j < n && !cell.v.empty(); ++j) {
            if (j == i) continue;
            const Vec2 a = sites[i] - sites[j];
            const double b = h[i] - h[j];
            detail::clip_half_plane_labeled(cell, a, b, static_cast<int>(j), scratch);
            std::swap(cell, scratch);
          }
          pd.cells[i].vertices = cell.v;
          auto& adj = pd.adjacency[i];
          for (std::size_t k = 0; k < cell.v.size(); ++k) {
            const int lab = cell.label[k];
            if (lab < 0) continue;
            const double len = norm(cell.v[(k + 1) % cell.v.size()] - cell.v[k]);
            if (len <= kGeomEps) continue;
            bool merged = false;
            for (auto& e : adj) {
              if (e.neighbor == lab) {
                e.length += len;
                merged = true;
                break;
              }
            }
            if (!merged) adj.push_back({lab, len});
          }
        }
      },
      threads);
  return pd;
}

// Index of the cell containing u (argmax of the affine forms, lowest index on
// ties).
inline int locate_cell(const PowerDiagram& pd, Vec2 u) {
  int best = 0;
  double best_v = dot(u, pd.sites[0]) + pd.dual_weights[0];
  for (std::size_t i = 1; i < pd.sites.size(); ++i) {
    const double v = dot(u, pd.sites[i]) + pd.dual_weights[i];
    if (v > best_v) {
      best_v = v;
      best = static_cast<int>(i);
    }
  }
  return best;
}

}  // namespace lorenzot
