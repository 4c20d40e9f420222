#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "lorenzot/closed_forms.hpp"
#include "lorenzot/ilf.hpp"

namespace lorenzot {

// Potential values and derivatives on a regular m x m grid over [0,1]^2.
// Derivatives are central differences at interior nodes and one-sided at the
// boundary unless supplied analytically. Grids may also hold differences of
// potentials (see is_mmps), so convexity is a checkable property rather than
// a construction invariant.
struct PotentialGrid {
  int resolution = 0;
  std::vector<double> psi, d1, d2, d11, d22, d12;

  double spacing() const { return 1.0 / (resolution - 1); }
  std::size_t idx(int i, int j) const { return static_cast<std::size_t>(j) * resolution + i; }

  static PotentialGrid from_values(int resolution, std::vector<double> values) {
    if (resolution < 3) throw UsageError("PotentialGrid: resolution must be at least 3");
    if (values.size() != static_cast<std::size_t>(resolution) * resolution)
      throw UsageError("PotentialGrid: value count does not match resolution");
    PotentialGrid g;
    g.resolution = resolution;
    g.psi = std::move(values);
    g.compute_derivatives();
    return g;
  }

  static PotentialGrid from_function(int resolution, const std::function<double(double, double)>& f) {
    std::vector<double> v(static_cast<std::size_t>(resolution) * resolution);
    const double h = 1.0 / (resolution - 1);
    for (int j = 0; j < resolution; ++j)
      for (int i = 0; i < resolution; ++i)
        v[static_cast<std::size_t>(j) * resolution + i] = f(i * h, j * h);
    return from_values(resolution, std::move(v));
  }

  // Analytic supply of the Hessian (first derivatives still from values).
  static PotentialGrid from_functions(int resolution,
                                      const std::function<double(double, double)>& f,
                                      const std::function<double(double, double)>& fxx,
                                      const std::function<double(double, double)>& fyy,
                                      const std::function<double(double, double)>& fxy) {
    PotentialGrid g = from_function(resolution, f);
    const double h = g.spacing();
    for (int j = 0; j < resolution; ++j)
      for (int i = 0; i < resolution; ++i) {
        g.d11[g.idx(i, j)] = fxx(i * h, j * h);
        g.d22[g.idx(i, j)] = fyy(i * h, j * h);
        g.d12[g.idx(i, j)] = fxy(i * h, j * h);
      }
    return g;
  }

  static PotentialGrid from_fit(const TransportFit& fit, int resolution) {
    return from_function(resolution,
                         [&fit](double x, double y) { return fit_potential(fit, {x, y}); });
  }

  double interp(const std::vector<double>& field, Vec2 u) const {
    const double h = spacing();
    const double fx = std::clamp(u.x, 0.0, 1.0) / h;
    const double fy = std::clamp(u.y, 0.0, 1.0) / h;
    const int i = std::min(resolution - 2, static_cast<int>(fx));
    const int j = std::min(resolution - 2, static_cast<int>(fy));
    const double sx = fx - i, sy = fy - j;
    return field[idx(i, j)] * (1 - sx) * (1 - sy) + field[idx(i + 1, j)] * sx * (1 - sy) +
           field[idx(i, j + 1)] * (1 - sx) * sy + field[idx(i + 1, j + 1)] * sx * sy;
  }

  // Discrete-Hessian positive semidefiniteness at interior nodes; returns the
  // worst of the three PSD indicators (d11, d22, determinant).
  double convexity_margin() const {
    double worst = std::numeric_limits<double>::infinity();
    for (int j = 1; j + 1 < resolution; ++j)
      for (int i = 1; i + 1 < resolution; ++i) {
        const double a = d11[idx(i, j)], b = d22[idx(i, j)], c = d12[idx(i, j)];
        worst = std::min({worst, a, b, a * b - c * c});
      }
    return worst;
  }
  bool is_convex(double tolerance) const { return convexity_margin() >= -tolerance; }

 private:
  void compute_derivatives() {
    const int m = resolution;
    const double h = spacing();
    d1.assign(psi.size(), 0.0);
    d2.assign(psi.size(), 0.0);
    d11.assign(psi.size(), 0.0);
    d22.assign(psi.size(), 0.0);
    d12.assign(psi.size(), 0.0);
    auto at = [&](int i, int j) { return psi[idx(i, j)]; };
    for (int j = 0; j < m; ++j)
      for (int i = 0; i < m; ++i) {
        if (i == 0)
          d1[idx(i, j)] = (at(1, j) - at(0, j)) / h;
        else if (i == m - 1)
          d1[idx(i, j)] = (at(m - 1, j) - at(m - 2, j)) / h;
        else
          d1[idx(i, j)] = (at(i + 1, j) - at(i - 1, j)) / (2 * h);
        if (j == 0)
          d2[idx(i, j)] = (at(i, 1) - at(i, 0)) / h;
        else if (j == m - 1)
          d2[idx(i, j)] = (at(i, m - 1) - at(i, m - 2)) / h;
        else
          d2[idx(i, j)] = (at(i, j + 1) - at(i, j - 1)) / (2 * h);
      }
    for (int j = 0; j < m; ++j)
      for (int i = 0; i < m; ++i) {
        const int ii = std::clamp(i, 1, m - 2);
        const int jj = std::clamp(j, 1, m - 2);
        d11[idx(i, j)] = (at(ii + 1, j) - 2 * at(ii, j) + at(ii - 1, j)) / (h * h);
        d22[idx(i, j)] = (at(i, jj + 1) - 2 * at(i, jj) + at(i, jj - 1)) / (h * h);
        d12[idx(i, j)] = (at(ii + 1, jj + 1) - at(ii + 1, jj - 1) - at(ii - 1, jj + 1) +
                          at(ii - 1, jj - 1)) /
                         (4 * h * h);
      }
  }
};

// ---------------------------------------------------------------------------
// Order verdicts.

enum class Relation { dominates, dominated, equal, incomparable };

inline const char* to_string(Relation r) {
  switch (r) {
    case Relation::dominates: return "dominates";
    case Relation::dominated: return "dominated";
    case Relation::equal: return "equal";
    case Relation::incomparable: return "incomparable";
  }
  return "?";
}

// Comparison outcome. "dominates" always means: the first argument is the
// (weakly) less unequal allocation. For Lorenz maps that is pointwise
// greater-or-equal shares; for ILFs it is pointwise smaller-or-equal values.
// For an incomparable pair, witness is the grid point where the less-violated
// direction still fails, and max_violation is that failure amount.
struct OrderingVerdict {
  Relation relation = Relation::equal;
  std::optional<Vec2> witness;
  double max_violation = 0.0;
  double slack = 0.0;
};

namespace detail {

struct DirectedViolation {
  double amount = -std::numeric_limits<double>::infinity();
  Vec2 where{0.0, 0.0};
  void update(double v, Vec2 at) {
    if (v > amount) {
      amount = v;
      where = at;
    }
  }
};

inline OrderingVerdict assemble_verdict(const DirectedViolation& fail_dom,
                                        const DirectedViolation& fail_sub, double slack) {
  OrderingVerdict v;
  v.slack = slack;
  const bool dom_ok = fail_dom.amount <= slack;
  const bool sub_ok = fail_sub.amount <= slack;
  if (dom_ok && sub_ok) {
    v.relation = Relation::equal;
    v.max_violation = std::max(fail_dom.amount, fail_sub.amount);
  } else if (dom_ok) {
    v.relation = Relation::dominates;
    v.max_violation = fail_dom.amount;
  } else if (sub_ok) {
    v.relation = Relation::dominated;
    v.max_violation = fail_sub.amount;
  } else {
    v.relation = Relation::incomparable;
    if (fail_dom.amount <= fail_sub.amount) {
      v.max_violation = fail_dom.amount;
      v.witness = fail_dom.where;
    } else {
      v.max_violation = fail_sub.amount;
      v.witness = fail_sub.where;
    }
  }
  return v;
}

}  // namespace detail

// Pointwise comparison of two Lorenz maps on a grid with tolerance slack.
inline OrderingVerdict lorenz_compare(const LorenzMap& a, const LorenzMap& b,
                                      int grid_resolution, double slack) {
  if (grid_resolution < 2) throw UsageError("lorenz_compare: grid resolution must be >= 2");
  detail::DirectedViolation fail_dom, fail_sub;
  const double h = 1.0 / (grid_resolution - 1);
  for (int j = 0; j < grid_resolution; ++j)
    for (int i = 0; i < grid_resolution; ++i) {
      const Vec2 r{i * h, j * h};
      const Vec2 va = a(r), vb = b(r);
      fail_dom.update(std::max(vb.x - va.x, vb.y - va.y), r);
      fail_sub.update(std::max(va.x - vb.x, va.y - vb.y), r);
    }
  return detail::assemble_verdict(fail_dom, fail_sub, slack);
}

// Pointwise comparison of two ILF grids (same resolution required).
inline OrderingVerdict weak_lorenz_compare(const IlfGrid& a, const IlfGrid& b, double slack) {
  if (a.resolution != b.resolution)
    throw UsageError("weak_lorenz_compare: ILF grid resolutions differ");
  detail::DirectedViolation fail_dom, fail_sub;
  for (int j = 0; j < a.resolution; ++j)
    for (int i = 0; i < a.resolution; ++i) {
      const Vec2 z{a.node(i), a.node(j)};
      const double va = a.at(i, j), vb = b.at(i, j);
      fail_dom.update(va - vb, z);  // first argument less unequal: l_a <= l_b
      fail_sub.update(vb - va, z);
    }
  return detail::assemble_verdict(fail_dom, fail_sub, slack);
}

// ---------------------------------------------------------------------------
// Dispersion checks.

struct UltramodularReport {
  bool ultramodular = false;
  double worst_violation = 0.0;  // most negative of d12, d11, d22 over interior nodes
};

// Supermodular and separately convex on the grid interior.
inline UltramodularReport is_ultramodular(const PotentialGrid& g, double tolerance) {
  if (g.resolution < 17) throw UsageError("is_ultramodular: grid resolution must be >= 17");
  double worst = std::numeric_limits<double>::infinity();
  for (int j = 1; j + 1 < g.resolution; ++j)
    for (int i = 1; i + 1 < g.resolution; ++i)
      worst = std::min({worst, g.d12[g.idx(i, j)], g.d11[g.idx(i, j)], g.d22[g.idx(i, j)]});
  UltramodularReport rep;
  rep.worst_violation = std::min(worst, 0.0) * -1.0;
  rep.ultramodular = worst >= -tolerance;
  return rep;
}

// Whether B's quantile is A's plus the gradient of an ultramodular,
// mean-preserving function: ultramodularity of psi_B - psi_A plus a zero
// grid mean of the gradient difference.
inline bool is_mmps(const PotentialGrid& a, const PotentialGrid& b, double tolerance) {
  if (a.resolution != b.resolution) throw UsageError("is_mmps: grid resolutions differ");
  const int m = a.resolution;
  double worst = std::numeric_limits<double>::infinity();
  for (int j = 1; j + 1 < m; ++j)
    for (int i = 1; i + 1 < m; ++i) {
      const std::size_t k = a.idx(i, j);
      worst = std::min({worst, b.d12[k] - a.d12[k], b.d11[k] - a.d11[k], b.d22[k] - a.d22[k]});
    }
  if (worst < -tolerance) return false;
  // Trapezoid-weighted grid mean of the gradient difference.
  double m1 = 0.0, m2 = 0.0, wsum = 0.0;
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < m; ++i) {
      const double w = ((i == 0 || i == m - 1) ? 0.5 : 1.0) * ((j == 0 || j == m - 1) ? 0.5 : 1.0);
      const std::size_t k = a.idx(i, j);
      m1 += w * (b.d1[k] - a.d1[k]);
      m2 += w * (b.d2[k] - a.d2[k]);
      wsum += w;
    }
  return std::fabs(m1 / wsum) <= tolerance && std::fabs(m2 / wsum) <= tolerance;
}

// Positive regression dependence between each resource and the other's rank:
// the row means of d1 must be nondecreasing in u2, and column means of d2
// nondecreasing in u1 (weak monotonicity passes).
inline bool check_positive_regdep(const PotentialGrid& g, double tolerance) {
  if (g.resolution < 33) throw UsageError("check_positive_regdep: grid resolution must be >= 33");
  const int m = g.resolution;
  auto trapezoid_row = [&](const std::vector<double>& f, int j) {
    double acc = 0.5 * (f[g.idx(0, j)] + f[g.idx(m - 1, j)]);
    for (int i = 1; i + 1 < m; ++i) acc += f[g.idx(i, j)];
    return acc * g.spacing();
  };
  auto trapezoid_col = [&](const std::vector<double>& f, int i) {
    double acc = 0.5 * (f[g.idx(i, 0)] + f[g.idx(i, m - 1)]);
    for (int j = 1; j + 1 < m; ++j) acc += f[g.idx(i, j)];
    return acc * g.spacing();
  };
  for (int j = 0; j + 1 < m; ++j)
    if (trapezoid_row(g.d1, j + 1) - trapezoid_row(g.d1, j) < -tolerance) return false;
  for (int i = 0; i + 1 < m; ++i)
    if (trapezoid_col(g.d2, i + 1) - trapezoid_col(g.d2, i) < -tolerance) return false;
  return true;
}

struct AssumptionReport {
  bool holds = false;
  double worst_margin = 0.0;  // min over z of (rhs infimum - lhs supremum)
};

namespace detail {

// Samples min{d11/p^2, d22} and -d12/p along the line p*u1 - u2 = z inside
// the square, clamped one node away from the boundary.
template <class Fn>
void sample_line(const PotentialGrid& g, double p, double z, int samples, Fn&& visit) {
  const double lo = std::max(0.0, z / p);
  const double hi = std::min(1.0, (z + 1.0) / p);
  if (hi < lo) return;
  const double h = g.spacing();
  for (int k = 0; k < samples; ++k) {
    const double u1 =
        samples == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * static_cast<double>(k) / (samples - 1);
    const double u2 = p * u1 - z;
    Vec2 u{std::clamp(u1, h, 1.0 - h), std::clamp(u2, h, 1.0 - h)};
    visit(u);
  }
}

}  // namespace detail

// Egalitarian-dominance condition: for every level z of p*u1 - u2,
//   sup { -d12 / p }  <=  inf min { d11 / p^2, d22 }
// along the line, both sampled on the grid.
inline AssumptionReport check_egalitarian_assumption(const PotentialGrid& g, double p,
                                                     int z_samples = 257, int line_samples = 257) {
  if (!(p > 0.0)) throw UsageError("check_egalitarian_assumption: p must be positive");
  if (g.resolution < 33)
    throw UsageError("check_egalitarian_assumption: grid resolution must be >= 33");
  double worst = std::numeric_limits<double>::infinity();
  double scale = 1.0;
  for (std::size_t k = 0; k < g.psi.size(); ++k)
    scale = std::max({scale, std::fabs(g.d11[k]), std::fabs(g.d22[k]), std::fabs(g.d12[k])});
  for (int kz = 0; kz < z_samples; ++kz) {
    const double z = -1.0 + (p + 1.0) * static_cast<double>(kz) / (z_samples - 1);
    double lhs = -std::numeric_limits<double>::infinity();
    double rhs = std::numeric_limits<double>::infinity();
    detail::sample_line(g, p, z, line_samples, [&](Vec2 u) {
      lhs = std::max(lhs, -g.interp(g.d12, u) / p);
      rhs = std::min(rhs, std::min(g.interp(g.d11, u) / (p * p), g.interp(g.d22, u)));
    });
    if (std::isfinite(lhs)) worst = std::min(worst, rhs - lhs);
  }
  AssumptionReport rep;
  rep.worst_margin = worst;
  rep.holds = worst >= -1e-7 * scale;
  return rep;
}

// The price p equalizing the worst-case curvatures:
//   p^2 = inf d11 / inf d22 over the grid interior.
inline double optimal_p(const PotentialGrid& g) {
  double i1 = std::numeric_limits<double>::infinity();
  double i2 = std::numeric_limits<double>::infinity();
  for (int j = 1; j + 1 < g.resolution; ++j)
    for (int i = 1; i + 1 < g.resolution; ++i) {
      i1 = std::min(i1, g.d11[g.idx(i, j)]);
      i2 = std::min(i2, g.d22[g.idx(i, j)]);
    }
  if (!(i1 > 0.0) || !(i2 > 0.0))
    throw UsageError("optimal_p: potential has a nonpositive curvature infimum");
  return std::sqrt(i1 / i2);
}

// Constructs the egalitarian allocation dominating the given potential:
//   v''(z) = inf over the line p*u1-u2=z of min{ d11/p^2, d22 },
// integrated twice with the slope recentered so the allocation has unit
// means. Requires the egalitarian-dominance condition for this p.
inline EgalitarianSpec dominating_egalitarian(const PotentialGrid& g, double p,
                                              int grid_size = 4097, int line_samples = 257) {
  const AssumptionReport rep = check_egalitarian_assumption(g, p);
  if (!rep.holds)
    throw UsageError("dominating_egalitarian: egalitarian-dominance condition fails for this p "
                     "(worst margin " +
                     std::to_string(rep.worst_margin) + ")");
  const std::vector<double> z = detail::egal_grid(p, grid_size);
  std::vector<double> vpp(z.size(), 0.0);
  for (std::size_t k = 0; k < z.size(); ++k) {
    double inf = std::numeric_limits<double>::infinity();
    detail::sample_line(g, p, z[k], line_samples, [&](Vec2 u) {
      inf = std::min(inf, std::min(g.interp(g.d11, u) / (p * p), g.interp(g.d22, u)));
    });
    vpp[k] = std::isfinite(inf) ? inf : 0.0;
  }
  Pchip curvature(z, vpp);
  std::vector<double> vp(z.size());
  for (std::size_t k = 0; k < z.size(); ++k) vp[k] = curvature.antiderivative(z[k]);
  return detail::spec_from_slope_table(p, z, std::move(vp), /*recenter_slope=*/true);
}

}  // namespace lorenzot
