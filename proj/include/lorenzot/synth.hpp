#pragma once

#include <cstdint>
#include <memory>

#include "lorenzot/closed_forms.hpp"
#include "lorenzot/ingestion.hpp"

namespace lorenzot {

enum class SynthFamily {
  identical,
  two_point_crossed,
  two_point_aligned,
  comonotone_uniform,
  lognormal_plackett,
  egalitarian,
};

// Parameters for the synthetic allocation samplers. sigma1/sigma2 are
// lognormal log-scales, kappa is the Plackett odds ratio (kappa = 1 is the
// product copula). Atom families are stratified; continuous families draw
// point i from substreams mix64(seed, 2i) and mix64(seed, 2i+1), so samples
// are reproducible byte for byte.
struct SynthSpec {
  SynthFamily family = SynthFamily::identical;
  double sigma1 = 1.0;
  double sigma2 = 1.0;
  double kappa = 1.0;
  long n = 0;
  std::uint64_t seed = 0;
  std::shared_ptr<const EgalitarianSpec> egalitarian;
};

// Solves the Plackett conditional cdf C(u2 | u1) = t for u2 (closed-form
// quadratic root).
inline double plackett_conditional(double u1, double t, double kappa) {
  if (!(kappa > 0.0)) throw UsageError("plackett_conditional: kappa must be positive");
  if (kappa == 1.0) return t;
  const double a = t * (1.0 - t);
  const double b = kappa + a * (kappa - 1.0) * (kappa - 1.0);
  const double c = kappa + 2.0 * a * (kappa - 1.0) * ((kappa + 1.0) * u1 - 1.0);
  const double d =
      std::sqrt(kappa * (kappa + 4.0 * a * u1 * (1.0 - u1) * (kappa - 1.0) * (kappa - 1.0)));
  const double v = (c - (1.0 - 2.0 * t) * d) / (2.0 * b);
  return std::clamp(v, 0.0, 1.0);
}

inline Allocation sample(const SynthSpec& spec) {
  if (spec.n < 1) throw UsageError("sample: n must be at least 1");
  const std::size_t n = static_cast<std::size_t>(spec.n);
  Allocation a;
  a.points.reserve(n);
  a.weights.assign(n, 1.0 / static_cast<double>(spec.n));
  switch (spec.family) {
    case SynthFamily::identical:
      a.points.assign(n, Vec2{1.0, 1.0});
      break;
    case SynthFamily::two_point_crossed:
    case SynthFamily::two_point_aligned: {
      const auto [atoms, unused] = two_point_atoms(spec.family == SynthFamily::two_point_crossed
                                                       ? TwoPointKind::crossed
                                                       : TwoPointKind::aligned);
      (void)unused;
      const std::size_t first = (n + 1) / 2;
      for (std::size_t i = 0; i < n; ++i) a.points.push_back(atoms[i < first ? 0 : 1]);
      break;
    }
    case SynthFamily::comonotone_uniform:
      // Stratified quantile midpoints of the uniform [0, 2] marginal.
      for (std::size_t i = 0; i < n; ++i) {
        const double y = 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(spec.n);
        a.points.push_back({y, y});
      }
      break;
    case SynthFamily::lognormal_plackett: {
      if (spec.sigma1 < 0.0 || spec.sigma2 < 0.0)
        throw UsageError("sample: sigma must be nonnegative");
      if (!(spec.kappa > 0.0)) throw UsageError("sample: kappa must be positive");
      for (std::size_t i = 0; i < n; ++i) {
        const double u1 = u64_to_unit(mix64(spec.seed, 2 * i));
        const double t = u64_to_unit(mix64(spec.seed, 2 * i + 1));
        const double u2 = plackett_conditional(u1, t, spec.kappa);
        a.points.push_back({lognormal_quantile_unit_mean(u1, spec.sigma1),
                            lognormal_quantile_unit_mean(u2, spec.sigma2)});
      }
      break;
    }
    case SynthFamily::egalitarian: {
      if (!spec.egalitarian) throw UsageError("sample: egalitarian spec missing");
      const EgalitarianSpec& e = *spec.egalitarian;
      for (std::size_t i = 0; i < n; ++i) {
        const double u1 = u64_to_unit(mix64(spec.seed, 2 * i));
        const double u2 = u64_to_unit(mix64(spec.seed, 2 * i + 1));
        const double s = e.eval_v_prime(e.p * u1 - u2);
        a.points.push_back({1.0 + e.p * s, 1.0 - s});
      }
      break;
    }
    default:
      throw UsageError("sample: unknown family");
  }
  return a;
}

// Weighted Kendall rank correlation of the two coordinates.
inline double kendall_tau(const Allocation& a) {
  const std::size_t n = a.points.size();
  if (n < 2) throw UsageError("kendall_tau: need at least two points");
  bool x_varies = false, y_varies = false;
  for (std::size_t i = 1; i < n && !(x_varies && y_varies); ++i) {
    x_varies = x_varies || a.points[i].x != a.points[0].x;
    y_varies = y_varies || a.points[i].y != a.points[0].y;
  }
  if (!x_varies || !y_varies)
    throw UsageError("kendall_tau: undefined for a degenerate marginal");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double w = a.weights[i] * a.weights[j];
      const double dx = a.points[i].x - a.points[j].x;
      const double dy = a.points[i].y - a.points[j].y;
      const double sx = dx > 0.0 ? 1.0 : (dx < 0.0 ? -1.0 : 0.0);
      const double sy = dy > 0.0 ? 1.0 : (dy < 0.0 ? -1.0 : 0.0);
      num += w * sx * sy;
      den += w;
    }
  }
  return num / den;
}

}  // namespace lorenzot
