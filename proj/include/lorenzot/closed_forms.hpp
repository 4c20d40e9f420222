#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "lorenzot/lorenz_map.hpp"

namespace lorenzot {

// Scalar Lorenz curve contract: q in [0,1] -> cumulative share in [0,1].
using ScalarLorenz = std::function<double(double)>;

// Lorenz curve of a lognormal allocation with log-scale sigma (unit mean):
// L(q) = Phi(Phi^{-1}(q) - sigma).
inline double scalar_lorenz_lognormal(double q, double sigma) {
  if (!(q >= 0.0 && q <= 1.0)) throw UsageError("scalar_lorenz_lognormal: q outside [0,1]");
  if (sigma < 0.0) throw UsageError("scalar_lorenz_lognormal: sigma must be nonnegative");
  if (q == 0.0) return 0.0;
  if (q == 1.0) return 1.0;
  if (sigma == 0.0) return q;
  return normal_cdf(normal_quantile(q) - sigma);
}

inline ScalarLorenz lognormal_lorenz_curve(double sigma) {
  return [sigma](double q) { return scalar_lorenz_lognormal(q, sigma); };
}

// Quantile of the unit-mean lognormal with log-scale sigma.
inline double lognormal_quantile_unit_mean(double u, double sigma) {
  return std::exp(sigma * normal_quantile(u) - 0.5 * sigma * sigma);
}

// --- Identical allocation: every individual holds (1, 1). -----------------

inline Vec2 identical_lorenz(Vec2 r) { return {r.x * r.y, r.x * r.y}; }

inline double identical_ilf(Vec2 z) {
  const double m = std::min(z.x, z.y);
  if (m <= 0.0) return 0.0;
  if (m >= 1.0) return 1.0;
  return m * (1.0 - std::log(m));
}

// --- Independent marginals. ------------------------------------------------

inline Vec2 independent_lorenz(const ScalarLorenz& L1, const ScalarLorenz& L2, Vec2 r) {
  return {r.y * L1(r.x), r.x * L2(r.y)};
}

// ILF of independent marginals by one-dimensional quadrature,
//   l(z) = integral over u of min{1, z1 / L1(u), L2^{-1}(z2 / u)}.
// Assumes strictly increasing marginal quantiles (so the Lorenz curves are
// strictly increasing and invertible on (0, 1]).
inline double independent_ilf(const ScalarLorenz& L1, const ScalarLorenz& L2, Vec2 z,
                              int intervals = 512) {
  if (std::min(z.x, z.y) <= 0.0) return 0.0;
  auto inverse = [](const ScalarLorenz& L, double y) {
    if (y >= 1.0) return 1.0;
    if (y <= 0.0) return 0.0;
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      (L(mid) < y ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  };
  auto integrand = [&](double u) {
    double a = 1.0;
    if (u > 0.0) {
      const double l1 = L1(u);
      if (l1 > 0.0) a = std::min(a, z.x / l1);
      a = std::min(a, inverse(L2, z.y / u));
    }
    return std::max(0.0, a);
  };
  return simpson(integrand, 0.0, 1.0, intervals);
}

// --- Comonotone allocation with uniform [0, 2] marginals. -------------------

inline Vec2 comonotone_uniform_lorenz(Vec2 r) {
  const double r1 = r.x, r2 = r.y;
  double L;
  if (r1 + r2 <= 1.0) {
    L = r1 * r1 * r1 * r2 / 3.0 + r1 * r2 * r2 * r2 / 3.0 + r1 * r1 * r2 * r2 / 2.0;
  } else {
    const double s = r1 + r2;
    L = (2.0 / 3.0) * s * s * s - s * s * s * s / 12.0 - s * s -
        r1 * r1 * r1 * r1 / 12.0 - r2 * r2 * r2 * r2 / 12.0 + (2.0 / 3.0) * s - 1.0 / 6.0;
  }
  return {L, L};
}

// --- Two-point allocations on atoms of mass 1/2. ----------------------------

enum class TwoPointKind {
  // Atoms (2,0) and (0,2): each half of the population holds all of one
  // resource. Rank cells split along u1 = u2.
  crossed,
  // Atoms (2,2) and (0,0): one half holds everything. Cells split along
  // u1 + u2 = 1.
  aligned,
};

inline Vec2 two_point_lorenz(TwoPointKind kind, Vec2 r) {
  const double r1 = r.x, r2 = r.y;
  switch (kind) {
    case TwoPointKind::crossed: {
      const double m = std::min(r1, r2);
      return {m * m + 2.0 * r2 * std::max(0.0, r1 - r2),
              m * m + 2.0 * r1 * std::max(0.0, r2 - r1)};
    }
    case TwoPointKind::aligned: {
      const double s = std::max(0.0, r1 + r2 - 1.0);
      return {s * s, s * s};
    }
  }
  throw UsageError("two_point_lorenz: unknown kind");
}

// Atom positions and weights for the two-point allocations.
inline std::pair<std::vector<Vec2>, std::vector<double>> two_point_atoms(TwoPointKind kind) {
  if (kind == TwoPointKind::crossed)
    return {{{2.0, 0.0}, {0.0, 2.0}}, {0.5, 0.5}};
  return {{{2.0, 2.0}, {0.0, 0.0}}, {0.5, 0.5}};
}

// --- Budget-balanced quadratic example: psi(u) = (u1-u2)^2/2 + u1 + u2. ----

inline Vec2 quadratic_potential_lorenz(Vec2 r) {
  const double base = r.x * r.y;
  const double d = r.x * r.y * (r.x - r.y) / 2.0;
  return {base + d, base - d};
}

// --- Distribution of Z = p*U1 - U2 for independent uniforms. ----------------

inline double h_p_cdf(double z, double p) {
  if (!(p > 0.0)) throw UsageError("h_p_cdf: p must be positive");
  if (z <= -1.0) return 0.0;
  if (z > p) return 1.0;
  const double lo = std::min(p - 1.0, 0.0);
  const double hi = std::max(p - 1.0, 0.0);
  if (z > hi) return 1.0 - p / 2.0 + z - z * z / (2.0 * p);
  if (z > 0.0) return (1.0 + 2.0 * z) / (2.0 * p);
  if (z > lo) return 1.0 - p / 2.0 + z;
  return (0.5 + z + z * z / 2.0) / p;
}

inline double h_p_density(double z, double p) {
  if (!(p > 0.0)) throw UsageError("h_p_density: p must be positive");
  if (z <= -1.0 || z >= p) return 0.0;
  const double lo = std::min(p - 1.0, 0.0);
  const double hi = std::max(p - 1.0, 0.0);
  if (z > hi) return 1.0 - z / p;
  if (z > 0.0) return 1.0 / p;
  if (z > lo) return 1.0;
  return (1.0 + z) / p;
}

// --- Egalitarian allocations: X1 + p*X2 = 1 + p almost surely. --------------
//
// Determined by a relative price p and a convex function v on [-1, p]; the
// potential is u1 + u2 + v(p*u1 - u2) and the allocation is
// (1 + p*v'(Z), 1 - v'(Z)) with Z = p*U1 - U2. Unit means require the slope
// to integrate to zero against the distribution of Z, equivalently
//   integral over [0,1] of v(p - z) dz  =  integral over [0,1] of v(-z) dz.
struct EgalitarianSpec {
  double p = 1.0;
  Pchip v;        // tabulated on a uniform grid over [-1, p]
  Pchip v_prime;  // nondecreasing (convexity)

  double eval_v(double z) const { return v(std::clamp(z, -1.0, p)); }
  double eval_v_prime(double z) const { return v_prime(std::clamp(z, -1.0, p)); }

  // Residual of the unit-mean normalization identity (zero in exact
  // arithmetic for a valid spec).
  double normalization_gap() const {
    return std::fabs((v.integral(p - 1.0, p)) - (v.integral(-1.0, 0.0)));
  }

  // Worst decrease of v' over the tabulation grid (nonpositive slope change
  // would contradict convexity).
  double convexity_margin(int probes = 2048) const {
    double worst = std::numeric_limits<double>::infinity();
    double prev = v_prime(-1.0);
    for (int k = 1; k <= probes; ++k) {
      const double z = -1.0 + (p + 1.0) * k / probes;
      const double cur = v_prime(z);
      worst = std::min(worst, cur - prev);
      prev = cur;
    }
    return worst;
  }
};

namespace detail {

inline std::vector<double> egal_grid(double p, int grid_size) {
  std::vector<double> z(grid_size);
  for (int k = 0; k < grid_size; ++k)
    z[k] = -1.0 + (p + 1.0) * static_cast<double>(k) / (grid_size - 1);
  z.back() = p;
  return z;
}

// Mean of a tabulated slope against the density of Z = p*U1 - U2, split at
// the density breakpoints.
inline double mean_slope_against_hp(const Pchip& vp, double p) {
  std::vector<double> cuts{-1.0, std::min(p - 1.0, 0.0), 0.0, std::max(p - 1.0, 0.0), p};
  std::sort(cuts.begin(), cuts.end());
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    if (cuts[k + 1] - cuts[k] < 1e-15) continue;
    acc += simpson([&](double z) { return vp(z) * h_p_density(z, p); }, cuts[k], cuts[k + 1],
                   512);
  }
  return acc;
}

inline EgalitarianSpec spec_from_slope_table(double p, const std::vector<double>& z,
                                             std::vector<double> vp_values,
                                             bool recenter_slope) {
  if (recenter_slope) {
    Pchip raw(z, vp_values);
    const double a = mean_slope_against_hp(raw, p);
    for (double& s : vp_values) s -= a;
  }
  EgalitarianSpec spec;
  spec.p = p;
  spec.v_prime = Pchip(z, vp_values);
  std::vector<double> v_values(z.size());
  for (std::size_t k = 0; k < z.size(); ++k) v_values[k] = spec.v_prime.antiderivative(z[k]);
  spec.v = Pchip(z, v_values);
  return spec;
}

}  // namespace detail

inline EgalitarianSpec egalitarian_spec_from_functions(double p,
                                                       const std::function<double(double)>& v,
                                                       int grid_size = 4097) {
  if (!(p > 0.0)) throw UsageError("egalitarian spec: p must be positive");
  const std::vector<double> z = detail::egal_grid(p, grid_size);
  std::vector<double> vv(z.size()), vp(z.size());
  const double h = (p + 1.0) / (grid_size - 1);
  for (std::size_t k = 0; k < z.size(); ++k) {
    vv[k] = v(z[k]);
    const double a = std::max(-1.0, z[k] - 0.5 * h);
    const double b = std::min(p, z[k] + 0.5 * h);
    vp[k] = (v(b) - v(a)) / (b - a);
  }
  EgalitarianSpec spec;
  spec.p = p;
  spec.v = Pchip(z, vv);
  spec.v_prime = Pchip(z, vp);
  return spec;
}

// Builds the egalitarian allocation with a prescribed first marginal:
//   v'(z) = (F1^{-1}(H_p(z)) - 1) / p.
inline EgalitarianSpec egalitarian_from_marginal(const std::function<double(double)>& quantile,
                                                 double p, int grid_size = 4097) {
  if (!(p > 0.0)) throw UsageError("egalitarian_from_marginal: p must be positive");
  double prev = -std::numeric_limits<double>::infinity();
  for (int k = 1; k < 1024; ++k) {
    const double q = static_cast<double>(k) / 1024.0;
    const double cur = quantile(q);
    if (cur < prev - 1e-12)
      throw UsageError("egalitarian_from_marginal: quantile function is not nondecreasing");
    prev = cur;
  }
  const std::vector<double> z = detail::egal_grid(p, grid_size);
  std::vector<double> vp(z.size());
  for (std::size_t k = 0; k < z.size(); ++k)
    vp[k] = (quantile(h_p_cdf(z[k], p)) - 1.0) / p;
  Pchip probe(z, vp);
  const double mean_gap = p * detail::mean_slope_against_hp(probe, p);
  if (std::fabs(mean_gap) > 1e-6)
    throw DataError("egalitarian_from_marginal: marginal mean deviates from 1 by " +
                    std::to_string(mean_gap));
  return detail::spec_from_slope_table(p, z, std::move(vp), /*recenter_slope=*/true);
}

// Lorenz map of an egalitarian allocation,
//   L1(r) = r1 r2 + I(r),  L2(r) = r1 r2 - I(r) / p,
//   I(r)  = integral over u2 in [0, r2] of v(p r1 - u2) - v(-u2),
// computed exactly from the piecewise-cubic antiderivative of v.
inline Vec2 egalitarian_lorenz(const EgalitarianSpec& spec, Vec2 r) {
  const double p = spec.p;
  const double a = spec.v.integral(p * r.x - r.y, p * r.x);
  const double b = spec.v.integral(-r.y, 0.0);
  const double I = a - b;
  return {r.x * r.y + I, r.x * r.y - I / p};
}

inline LorenzMap egalitarian_lorenz_map(EgalitarianSpec spec) {
  return [spec = std::move(spec)](Vec2 r) { return egalitarian_lorenz(spec, r); };
}

// --- Evaluators driven by an analytic potential gradient. -------------------

// Lorenz map from gradient components of a convex potential, by tensorized
// composite Simpson over [0,r1] x [0,r2] (exact for polynomial gradients).
inline LorenzMap lorenz_from_gradient(std::function<double(double, double)> g1,
                                      std::function<double(double, double)> g2,
                                      int intervals = 48) {
  return [g1 = std::move(g1), g2 = std::move(g2), intervals](Vec2 r) -> Vec2 {
    if (r.x <= 0.0 || r.y <= 0.0) return {0.0, 0.0};
    auto inner = [&](const std::function<double(double, double)>& g, double u2) {
      return simpson([&](double u1) { return g(u1, u2); }, 0.0, r.x, intervals);
    };
    const double L1 = simpson([&](double u2) { return inner(g1, u2); }, 0.0, r.y, intervals);
    const double L2 = simpson([&](double u2) { return inner(g2, u2); }, 0.0, r.y, intervals);
    return {L1, L2};
  };
}

// Gini index from an analytic potential gradient via the rank-weighted form
//   2 * E[(U1 + U2 - U1 U2)(g1(U) + g2(U))] - 3.
inline double gini_from_gradient(const std::function<double(double, double)>& g1,
                                 const std::function<double(double, double)>& g2,
                                 int intervals = 128) {
  auto inner = [&](double u2) {
    return simpson(
        [&](double u1) {
          return (u1 + u2 - u1 * u2) * (g1(u1, u2) + g2(u1, u2));
        },
        0.0, 1.0, intervals);
  };
  return 2.0 * simpson(inner, 0.0, 1.0, intervals) - 3.0;
}

}  // namespace lorenzot
