#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <cmath>
#include <numeric>
#include <vector>

#include "lorenzot/geometry.hpp"

namespace lorenzot {

struct SolverConfig {
  // Convergence requires max_i |area(W_i) - w_i| <= tolerance * min_i w_i.
  double tolerance = 1e-7;
  int max_iterations = 100;
  double damping_floor = 0x1.0p-20;
  unsigned threads = 0;
};

// Result of matching uniform mass on the unit square to a weighted point
// cloud: the diagram whose cell areas equal the target weights.
struct TransportFit {
  PowerDiagram diagram;
  std::vector<double> target_weights;
  double residual = 0.0;
  int iterations = 0;
  // Dual objective after each accepted Newton step (diagnostics).
  std::vector<double> objective_trace;
};

struct DualEval {
  double value = 0.0;
  std::vector<double> gradient;
};

namespace detail {

inline void validate_transport_inputs(const std::vector<Vec2>& sites,
                                      const std::vector<double>& w) {
  if (sites.empty()) throw UsageError("transport: no sites");
  if (w.size() != sites.size()) throw UsageError("transport: sites/weights size mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!(w[i] > 0.0) || !std::isfinite(w[i]))
      throw DataError("transport: target weight " + std::to_string(i) + " must be positive");
    if (sites[i].x < 0.0 || sites[i].y < 0.0)
      throw DataError("transport: site " + std::to_string(i) + " has a negative coordinate");
    sum += w[i];
  }
  if (std::fabs(sum - 1.0) > 1e-12)
    throw DataError("transport: target weights sum to " + std::to_string(sum) +
                    ", expected 1 within 1e-12");
}

struct DiagramStats {
  std::vector<double> areas;
  double min_area = 0.0;
  double residual = 0.0;   // max_i |area_i - w_i|
  double objective = 0.0;  // integral of max-affine potential minus sum w_i h_i
};

inline DiagramStats diagram_stats(const PowerDiagram& pd, const std::vector<double>& w) {
  const std::size_t n = pd.cells.size();
  DiagramStats s;
  s.areas.resize(n);
  s.min_area = std::numeric_limits<double>::infinity();
  double value = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const PolygonMoments m = polygon_moments(pd.cells[i]);
    s.areas[i] = m.area;
    s.min_area = std::min(s.min_area, m.area);
    s.residual = std::max(s.residual, std::fabs(m.area - w[i]));
    value += pd.sites[i].x * m.mx + pd.sites[i].y * m.my +
             pd.dual_weights[i] * (m.area - w[i]);
  }
  s.objective = value;
  return s;
}

}  // namespace detail

// Value and gradient of the convex dual objective
//   F(h) = integral of max_i(dot(u, X_i) + h_i) over the unit square
//          - sum_i w_i h_i,
// whose minimizer yields cell areas equal to the target weights. The
// gradient component i is area(W_i(h)) - w_i.
inline DualEval dual_value_and_gradient(const std::vector<Vec2>& sites,
                                        const std::vector<double>& target_weights,
                                        const std::vector<double>& h, unsigned threads = 0) {
  detail::validate_transport_inputs(sites, target_weights);
  if (h.size() != sites.size()) throw UsageError("transport: h size mismatch");
  const PowerDiagram pd = build_power_diagram(sites, h, threads);
  const detail::DiagramStats s = detail::diagram_stats(pd, target_weights);
  DualEval out;
  out.value = s.objective;
  out.gradient.resize(sites.size());
  for (std::size_t i = 0; i < sites.size(); ++i)
    out.gradient[i] = s.areas[i] - target_weights[i];
  return out;
}

namespace detail {

// Hessian of the dual objective: a weighted graph Laplacian over the cell
// adjacency, with off-diagonal -|shared edge| / |X_i - X_j|. Assembled
// symmetrized (half from each incident cell).
inline Eigen::SparseMatrix<double> dual_hessian(const PowerDiagram& pd) {
  const int n = static_cast<int>(pd.sites.size());
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(n) * 8);
  for (int i = 0; i < n; ++i) {
    for (const auto& e : pd.adjacency[i]) {
      const int j = e.neighbor;
      const double dist = norm(pd.sites[i] - pd.sites[j]);
      if (dist <= kGeomEps) continue;
      const double w = 0.5 * e.length / dist;
      trip.emplace_back(i, j, -w);
      trip.emplace_back(j, i, -w);
      trip.emplace_back(i, i, w);
      trip.emplace_back(j, j, w);
    }
  }
  Eigen::SparseMatrix<double> H(n, n);
  H.setFromTriplets(trip.begin(), trip.end());
  return H;
}

inline void recenter(std::vector<double>& h) {
  const double mean =
      std::accumulate(h.begin(), h.end(), 0.0) / static_cast<double>(h.size());
  for (double& v : h) v -= mean;
}

// Newton step for the reduced system (last coordinate pinned to zero to
// remove the constant-shift null space).
inline std::vector<double> newton_step(const Eigen::SparseMatrix<double>& H,
                                       const std::vector<double>& grad) {
  const int n = static_cast<int>(grad.size());
  const int m = n - 1;
  Eigen::SparseMatrix<double> Hr = H.topLeftCorner(m, m);
  Eigen::VectorXd g(m);
  for (int i = 0; i < m; ++i) g[i] = grad[i];
  double ridge = 0.0;
  for (int attempt = 0; attempt < 4; ++attempt) {
    Eigen::SparseMatrix<double> M = Hr;
    if (ridge > 0.0) {
      Eigen::SparseMatrix<double> I(m, m);
      I.setIdentity();
      M = Hr + ridge * I;
    }
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(M);
    if (ldlt.info() == Eigen::Success) {
      Eigen::VectorXd d = ldlt.solve(-g);
      if (ldlt.info() == Eigen::Success && d.allFinite()) {
        std::vector<double> step(n, 0.0);
        for (int i = 0; i < m; ++i) step[i] = d[i];
        return step;
      }
    }
    ridge = (ridge == 0.0) ? 1e-12 : ridge * 1e3;
  }
  throw NumericalError("transport: Hessian factorization failed");
}

}  // namespace detail

// Damped Newton solve for the dual weights. Deterministic for fixed inputs.
inline TransportFit solve(const std::vector<Vec2>& sites,
                          const std::vector<double>& target_weights,
                          const SolverConfig& config = {}) {
  detail::validate_transport_inputs(sites, target_weights);
  if (!(config.tolerance > 0.0)) throw UsageError("transport: tolerance must be positive");
  if (config.max_iterations < 1) throw UsageError("transport: max_iterations must be >= 1");
  const std::size_t n = sites.size();

  TransportFit fit;
  fit.target_weights = target_weights;

  if (n == 1) {
    fit.diagram = build_power_diagram(sites, {0.0}, config.threads);
    fit.residual = std::fabs(polygon_area(fit.diagram.cells[0]) - target_weights[0]);
    return fit;
  }

  const double min_w = *std::min_element(target_weights.begin(), target_weights.end());
  const double tol_abs = config.tolerance * min_w;

  // Start from the Voronoi diagram of the sites (h_i = -|X_i|^2 / 2): every
  // site whose Voronoi cell meets the square starts nonempty, which is far
  // more robust than h = 0 for collinear or strongly scaled data.
  std::vector<double> h(n);
  for (std::size_t i = 0; i < n; ++i) h[i] = -0.5 * dot(sites[i], sites[i]);
  detail::recenter(h);

  PowerDiagram pd = build_power_diagram(sites, h, config.threads);
  detail::DiagramStats stats = detail::diagram_stats(pd, target_weights);

  // Fallback for empty starting cells: grow them with fixed small dual
  // increments until every cell has positive area.
  double scale = 0.0;
  for (const Vec2& s : sites) scale = std::max(scale, norm(s));
  const double grow = 0.02 * (1.0 + scale);
  for (int pass = 0; pass < 500 && stats.min_area <= 0.0; ++pass) {
    for (std::size_t i = 0; i < n; ++i)
      if (polygon_area(pd.cells[i]) <= 0.0) h[i] += grow;
    detail::recenter(h);
    pd = build_power_diagram(sites, h, config.threads);
    stats = detail::diagram_stats(pd, target_weights);
  }
  if (stats.min_area <= 0.0)
    throw NumericalError("transport: could not obtain a starting diagram without empty cells",
                         stats.residual, 0);

  const double eps0 = 0.5 * std::min(min_w, stats.min_area);
  fit.objective_trace.push_back(stats.objective);

  int iter = 0;
  while (stats.residual > tol_abs) {
    if (iter >= config.max_iterations)
      throw NumericalError("transport: no convergence after " +
                               std::to_string(config.max_iterations) +
                               " iterations (residual " + std::to_string(stats.residual) + ")",
                           stats.residual, iter);
    ++iter;

    std::vector<double> grad(n);
    for (std::size_t i = 0; i < n; ++i) grad[i] = stats.areas[i] - target_weights[i];
    const Eigen::SparseMatrix<double> H = detail::dual_hessian(pd);
    const std::vector<double> step = detail::newton_step(H, grad);

    // Damping: accept only if every cell keeps area >= eps0, the residual
    // decreases and the dual objective does not increase; otherwise halve.
    bool accepted = false;
    double t = 1.0;
    while (t >= config.damping_floor) {
      std::vector<double> h_try(n);
      for (std::size_t i = 0; i < n; ++i) h_try[i] = h[i] + t * step[i];
      detail::recenter(h_try);
      PowerDiagram pd_try = build_power_diagram(sites, h_try, config.threads);
      detail::DiagramStats s_try = detail::diagram_stats(pd_try, target_weights);
      if (s_try.min_area >= eps0 && s_try.residual < stats.residual &&
          s_try.objective <= stats.objective + 1e-12 * (1.0 + std::fabs(stats.objective))) {
        h = std::move(h_try);
        pd = std::move(pd_try);
        stats = std::move(s_try);
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted)
      throw NumericalError("transport: damping floor reached (residual " +
                               std::to_string(stats.residual) + ")",
                           stats.residual, iter);
    fit.objective_trace.push_back(stats.objective);
  }

  fit.diagram = std::move(pd);
  fit.residual = stats.residual;
  fit.iterations = iter;
  return fit;
}

// Gradient of the fitted max-affine potential at u: the site of the cell
// containing u.
inline Vec2 fit_quantile(const TransportFit& fit, Vec2 u) {
  return fit.diagram.sites[static_cast<std::size_t>(locate_cell(fit.diagram, u))];
}

// The fitted potential itself, max_i(dot(u, X_i) + h_i).
inline double fit_potential(const TransportFit& fit, Vec2 u) {
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < fit.diagram.sites.size(); ++i)
    best = std::max(best, dot(u, fit.diagram.sites[i]) + fit.diagram.dual_weights[i]);
  return best;
}

}  // namespace lorenzot
