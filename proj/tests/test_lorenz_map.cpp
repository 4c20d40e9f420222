#include <catch2/catch_amalgamated.hpp>

#include "lorenzot/artifact.hpp"
#include "lorenzot/closed_forms.hpp"
#include "lorenzot/lorenz_map.hpp"
#include "lorenzot/synth.hpp"
#include "support/oracles.hpp"

using namespace lorenzot;
using Catch::Approx;

namespace {

TransportFit fit_two_point(TwoPointKind kind) {
  const auto [atoms, weights] = two_point_atoms(kind);
  SolverConfig cfg;
  cfg.tolerance = 1e-12;
  return solve(atoms, weights, cfg);
}

TransportFit fit_sample(const SynthSpec& spec, double tol = 1e-7) {
  const Allocation a = merge_duplicates(normalize_unit_mean(sample(spec)));
  SolverConfig cfg;
  cfg.tolerance = tol;
  return solve(a.points, a.weights, cfg);
}

}  // namespace

TEST_CASE("empirical Lorenz map matches the two-point closed forms") {
  const TransportFit crossed = fit_two_point(TwoPointKind::crossed);
  const TransportFit aligned = fit_two_point(TwoPointKind::aligned);
  const EmpiricalLorenz lc(crossed), la(aligned);

  CHECK(lc({1.0, 1.0}).x == Approx(1.0).margin(1e-9));
  CHECK(lc({1.0, 1.0}).y == Approx(1.0).margin(1e-9));
  CHECK(la({0.5, 0.5}).x == Approx(0.0).margin(1e-9));
  CHECK(la({0.5, 0.5}).y == Approx(0.0).margin(1e-9));
  CHECK(lc({0.5, 0.5}).x == Approx(0.25).margin(1e-9));
  CHECK(lc({0.5, 0.5}).y == Approx(0.25).margin(1e-9));

  for (int j = 0; j <= 20; ++j)
    for (int i = 0; i <= 20; ++i) {
      const Vec2 r{i / 20.0, j / 20.0};
      const Vec2 want_c = two_point_lorenz(TwoPointKind::crossed, r);
      const Vec2 want_a = two_point_lorenz(TwoPointKind::aligned, r);
      const Vec2 got_c = lc(r), got_a = la(r);
      CHECK(got_c.x == Approx(want_c.x).margin(1e-9));
      CHECK(got_c.y == Approx(want_c.y).margin(1e-9));
      CHECK(got_a.x == Approx(want_a.x).margin(1e-9));
      CHECK(got_a.y == Approx(want_a.y).margin(1e-9));
    }
}

TEST_CASE("fast evaluator equals direct cell clipping") {
  SynthSpec spec;
  spec.family = SynthFamily::lognormal_plackett;
  spec.kappa = 2.0;
  spec.n = 50;
  spec.seed = 21;
  const TransportFit fit = fit_sample(spec);
  const EmpiricalLorenz fast(fit);
  Rng rng(3);
  for (int t = 0; t < 100; ++t) {
    const Vec2 r{rng.uniform(), rng.uniform()};
    Vec2 want{0.0, 0.0};
    for (std::size_t i = 0; i < fit.diagram.cells.size(); ++i) {
      const double a = polygon_area(clip_to_rectangle(fit.diagram.cells[i], r));
      want = want + fit.diagram.sites[i] * a;
    }
    const Vec2 got = fast(r);
    CHECK(got.x == Approx(want.x).margin(1e-12));
    CHECK(got.y == Approx(want.y).margin(1e-12));
  }
  CHECK_THROWS_AS(fast({1.2, 0.5}), UsageError);
  CHECK_THROWS_AS(fast({0.5, -0.2}), UsageError);
}

TEST_CASE("gini weights") {
  SECTION("single site") {
    const TransportFit fit = solve({{1.0, 1.0}}, {1.0});
    const std::vector<double> w = gini_weights(fit);
    REQUIRE(w.size() == 1);
    CHECK(w[0] == Approx(1.0).margin(1e-12));
  }
  SECTION("aligned atoms: 5/6 for the empty-handed half") {
    const TransportFit fit = fit_two_point(TwoPointKind::aligned);
    const std::vector<double> w = gini_weights(fit);
    // Site order is (2,2) then (0,0); the (0,0) cell is the lower triangle.
    CHECK(w[1] == Approx(5.0 / 6.0).margin(1e-9));
    CHECK(w[0] == Approx(1.0 / 6.0).margin(1e-9));
    CHECK(w[0] + w[1] == Approx(1.0).margin(1e-9));
  }
  SECTION("crossed atoms split evenly by symmetry") {
    const TransportFit fit = fit_two_point(TwoPointKind::crossed);
    const std::vector<double> w = gini_weights(fit);
    CHECK(w[0] == Approx(0.5).margin(1e-9));
    CHECK(w[1] == Approx(0.5).margin(1e-9));
  }
}

TEST_CASE("gini values on reference allocations") {
  SECTION("identical allocation") {
    const TransportFit fit = solve({{1.0, 1.0}}, {1.0});
    CHECK(gini(fit) == Approx(0.0).margin(1e-12));
    CHECK(alt_gini(fit) == Approx(0.0).margin(1e-12));
  }
  SECTION("aligned two-point allocation") {
    const TransportFit fit = fit_two_point(TwoPointKind::aligned);
    CHECK(gini(fit) == Approx(2.0 / 3.0).margin(1e-9));
  }
  SECTION("crossed two-point allocation is budget egalitarian") {
    const TransportFit fit = fit_two_point(TwoPointKind::crossed);
    CHECK(gini(fit) == Approx(0.0).margin(1e-9));
  }
}

TEST_CASE("both Gini forms agree on arbitrary fits") {
  for (const std::uint64_t seed : {1ull, 2ull, 3ull}) {
    SynthSpec spec;
    spec.family = SynthFamily::lognormal_plackett;
    spec.sigma1 = 1.0;
    spec.sigma2 = 0.6;
    spec.kappa = 2.0 + 3.0 * static_cast<double>(seed);
    spec.n = 120;
    spec.seed = seed;
    const TransportFit fit = fit_sample(spec);
    CHECK(gini(fit) == Approx(gini_social_form(fit)).margin(1e-9));
  }
}

TEST_CASE("alternative Gini") {
  SECTION("aligned atoms: exact value, Monte Carlo oracle and boundary form") {
    const TransportFit fit = fit_two_point(TwoPointKind::aligned);
    const double g = alt_gini(fit);
    CHECK(g == Approx(1.0 / 3.0).margin(1e-9));

    // Monte Carlo of E[U . grad psi(U)] - 1.
    Rng rng(17);
    const int draws = 1000000;
    double acc = 0.0, acc2 = 0.0;
    for (int k = 0; k < draws; ++k) {
      const Vec2 u{rng.uniform(), rng.uniform()};
      const double v = dot(u, fit_quantile(fit, u));
      acc += v;
      acc2 += v * v;
    }
    const double mean = acc / draws;
    const double se = std::sqrt((acc2 / draws - mean * mean) / draws);
    CHECK(std::fabs((mean - 1.0) - g) <= 3.0 * se);

    const EmpiricalLorenz map(fit);
    CHECK(alt_gini_boundary([&map](Vec2 r) { return map(r); }) == Approx(g).margin(1e-6));
  }
  SECTION("independence: alternative index equals the scalar-Gini average") {
    SynthSpec spec;
    spec.family = SynthFamily::lognormal_plackett;
    spec.kappa = 1.0;
    spec.n = 1500;
    spec.seed = 8;
    const Allocation a = normalize_unit_mean(sample(spec));
    const TransportFit fit = fit_sample(spec);
    std::vector<double> x1, x2;
    for (const Vec2& p : a.points) {
      x1.push_back(p.x);
      x2.push_back(p.y);
    }
    const double bound = 0.5 * (scalar_gini(x1, a.weights) + scalar_gini(x2, a.weights));
    const double g = alt_gini(fit);
    CHECK(g <= bound + 1e-6);
    CHECK(g == Approx(bound).margin(0.02));
  }
}

TEST_CASE("scalar Gini") {
  SECTION("two-point population") {
    const std::vector<double> x{0.0, 2.0};
    const std::vector<double> w{0.5, 0.5};
    CHECK(scalar_gini(x, w) == Approx(0.5));
  }
  SECTION("weight splitting leaves the index unchanged") {
    const std::vector<double> x{0.4, 1.3, 2.1};
    const std::vector<double> w{0.5, 0.3, 0.2};
    const std::vector<double> xs{0.4, 0.4, 1.3, 2.1};
    const std::vector<double> ws{0.25, 0.25, 0.3, 0.2};
    CHECK(scalar_gini(x, w) == Approx(scalar_gini(xs, ws)).margin(1e-12));
  }
  SECTION("lognormal sample matches the closed form") {
    const double sigma = 1.0;
    const int n = 4000;
    std::vector<double> x(n), w(n, 1.0 / n);
    for (int i = 0; i < n; ++i)
      x[i] = lognormal_quantile_unit_mean(u64_to_unit(mix64(99, i)), sigma);
    const double want = 2.0 * normal_cdf(sigma / std::sqrt(2.0)) - 1.0;
    CHECK(scalar_gini(x, w) == Approx(want).margin(0.05));
  }
}

TEST_CASE("boundary slice reproduces the univariate Lorenz curve") {
  // Second resource constant: cells are vertical strips, so L1(r1, 1) is the
  // weighted scalar Lorenz curve of the first coordinate.
  const int n = 500;
  std::vector<Vec2> pts(n);
  std::vector<double> w(n, 1.0 / n);
  Rng rng(31);
  for (int i = 0; i < n; ++i) pts[i] = {lognormal_quantile_unit_mean(rng.uniform(), 0.8), 1.0};
  Allocation a;
  a.points = pts;
  a.weights = w;
  const Allocation an = normalize_unit_mean(a);
  SolverConfig cfg;
  cfg.tolerance = 1e-9;
  const TransportFit fit = solve(an.points, an.weights, cfg);
  const EmpiricalLorenz map(fit);
  std::vector<double> x1;
  for (const Vec2& p : an.points) x1.push_back(p.x);
  for (int d = 1; d <= 9; ++d) {
    const double q = d / 10.0;
    const double want = oracles::empirical_scalar_lorenz(x1, an.weights, q);
    CHECK(map({q, 1.0}).x == Approx(want).margin(1e-3));
  }
}

TEST_CASE("two samples from one distribution share the Lorenz map") {
  auto fitted = [](std::uint64_t seed) {
    SynthSpec spec;
    spec.family = SynthFamily::lognormal_plackett;
    spec.kappa = 2.0;
    spec.n = 2000;
    spec.seed = seed;
    return fit_sample(spec);
  };
  const TransportFit fa = fitted(1001), fb = fitted(2002);
  const EmpiricalLorenz ma(fa), mb(fb);
  for (int j = 0; j <= 10; ++j)
    for (int i = 0; i <= 10; ++i) {
      const Vec2 r{i / 10.0, j / 10.0};
      const Vec2 a = ma(r), b = mb(r);
      CHECK(std::fabs(a.x - b.x) <= 0.03);
      CHECK(std::fabs(a.y - b.y) <= 0.03);
    }
}
