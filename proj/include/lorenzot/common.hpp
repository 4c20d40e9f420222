#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace lorenzot {

// Error taxonomy used across the library. The CLI maps these onto exit
// codes: UsageError -> 2, DataError -> 3, NumericalError -> 4.
struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
  double residual = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
  NumericalError(const std::string& msg, double resid, int iters)
      : std::runtime_error(msg), residual(resid), iterations(iters) {}
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline Vec2 operator*(Vec2 a, double s) { return {s * a.x, s * a.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline bool operator==(Vec2 a, Vec2 b) { return a.x == b.x && a.y == b.y; }

// ---------------------------------------------------------------------------
// Deterministic random streams.
//
// All randomness in the library derives from splitmix64. Substream k of a
// seed s starts from mix64(s, k), so draws can be generated independently
// (and in parallel) for any index without sharing state. Results are
// therefore identical for any thread count.

inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::uint64_t mix64(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t s = seed + 0x632be59bd9b4e019ull * (stream + 1);
  std::uint64_t z = splitmix64_next(s);
  return z;
}

// Maps a 64-bit word to the open interval (0, 1).
inline double u64_to_unit(std::uint64_t v) {
  return (static_cast<double>(v >> 11) + 0.5) * 0x1.0p-53;
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next_u64() { return splitmix64_next(state_); }
  double uniform() { return u64_to_unit(next_u64()); }

 private:
  std::uint64_t state_;
};

// ---------------------------------------------------------------------------
// Normal distribution helpers.

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Wichura's AS 241 (PPND16) inverse normal cdf, accurate to ~1e-16.
inline double normal_quantile(double p) {
  if (p <= 0.0 || p >= 1.0) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    throw UsageError("normal_quantile: probability outside [0, 1]");
  }
  static const double a[8] = {
      3.3871328727963666080e0,  1.3314166789178437745e2, 1.9715909503065514427e3,
      1.3731693765509461125e4,  4.5921953931549871457e4, 6.7265770927008700853e4,
      3.3430575583588128105e4,  2.5090809287301226727e3};
  static const double b[8] = {
      1.0,                      4.2313330701600911252e1, 6.8718700749205790830e2,
      5.3941960214247511077e3,  2.1213794301586595867e4, 3.9307895800092710610e4,
      2.8729085735721942674e4,  5.2264952788528545610e3};
  static const double c[8] = {
      1.42343711074968357734e0, 4.63033784615654529590e0, 5.76949722146069140550e0,
      3.64784832476320460504e0, 1.27045825245236838258e0, 2.41780725177450611770e-1,
      2.27238449892691845833e-2, 7.74545014278341407640e-4};
  static const double d[8] = {
      1.0,                      2.05319162663775882187e0, 1.67638483018380384940e0,
      6.89767334985100004550e-1, 1.48103976427480074590e-1, 1.51986665636164571966e-2,
      5.47593808499534494600e-4, 1.05075007164441684324e-9};
  static const double e[8] = {
      6.65790464350110377720e0, 5.46378491116411436990e0, 1.78482653991729133580e0,
      2.96560571828504891230e-1, 2.65321895265761230930e-2, 1.24266094738807843860e-3,
      2.71155556874348757815e-5, 2.01033439929228813265e-7};
  static const double f[8] = {
      1.0,                      5.99832206555887937690e-1, 1.36929880922735805310e-1,
      1.48753612908506148525e-2, 7.86869131145613259100e-4, 1.84631831751005468180e-5,
      1.42151175831644588870e-7, 2.04426310338993978564e-15};
  auto horner = [](const double* k, double r) {
    double v = k[7];
    for (int i = 6; i >= 0; --i) v = v * r + k[i];
    return v;
  };
  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q * horner(a, r) / horner(b, r);
  }
  double r = (q < 0.0) ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = horner(c, r) / horner(d, r);
  } else {
    r -= 5.0;
    val = horner(e, r) / horner(f, r);
  }
  return (q < 0.0) ? -val : val;
}

// ---------------------------------------------------------------------------
// Quadrature.

// Composite Simpson with n (even) intervals.
template <class F>
double simpson(F&& fn, double a, double b, int intervals) {
  if (intervals < 2) intervals = 2;
  if (intervals % 2) ++intervals;
  const double h = (b - a) / intervals;
  double acc = fn(a) + fn(b);
  for (int i = 1; i < intervals; ++i) acc += fn(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

// ---------------------------------------------------------------------------
// Monotone (Fritsch-Carlson) cubic Hermite interpolation with an exact
// piecewise-cubic antiderivative.

class Pchip {
 public:
  Pchip() = default;
  Pchip(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
    const std::size_t n = x_.size();
    if (n < 2 || y_.size() != n) throw UsageError("Pchip: need at least two nodes");
    d_.assign(n, 0.0);
    std::vector<double> h(n - 1), delta(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      h[i] = x_[i + 1] - x_[i];
      if (!(h[i] > 0.0)) throw UsageError("Pchip: abscissae must be strictly increasing");
      delta[i] = (y_[i + 1] - y_[i]) / h[i];
    }
    if (n == 2) {
      d_[0] = d_[1] = delta[0];
    } else {
      for (std::size_t i = 1; i + 1 < n; ++i) {
        if (delta[i - 1] * delta[i] <= 0.0) {
          d_[i] = 0.0;
        } else {
          const double w1 = 2.0 * h[i] + h[i - 1];
          const double w2 = h[i] + 2.0 * h[i - 1];
          d_[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
        }
      }
      d_[0] = edge_slope(h[0], h[1], delta[0], delta[1]);
      d_[n - 1] = edge_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    }
    cum_.assign(n, 0.0);
    for (std::size_t i = 0; i + 1 < n; ++i)
      cum_[i + 1] = cum_[i] + h[i] * 0.5 * (y_[i] + y_[i + 1]) +
                    h[i] * h[i] / 12.0 * (d_[i] - d_[i + 1]);
  }

  double operator()(double t) const {
    const std::size_t i = interval(t);
    const double h = x_[i + 1] - x_[i];
    const double s = (t - x_[i]) / h;
    const double s2 = s * s, s3 = s2 * s;
    return y_[i] * (2 * s3 - 3 * s2 + 1) + h * d_[i] * (s3 - 2 * s2 + s) +
           y_[i + 1] * (-2 * s3 + 3 * s2) + h * d_[i + 1] * (s3 - s2);
  }

  // Integral of the interpolant from the first node to t.
  double antiderivative(double t) const {
    const std::size_t i = interval(t);
    const double h = x_[i + 1] - x_[i];
    const double s = (t - x_[i]) / h;
    const double s2 = s * s, s3 = s2 * s, s4 = s3 * s;
    const double i00 = 0.5 * s4 - s3 + s;
    const double i10 = 0.25 * s4 - (2.0 / 3.0) * s3 + 0.5 * s2;
    const double i01 = -0.5 * s4 + s3;
    const double i11 = 0.25 * s4 - s3 / 3.0;
    return cum_[i] + h * (y_[i] * i00 + y_[i + 1] * i01) + h * h * (d_[i] * i10 + d_[i + 1] * i11);
  }

  double integral(double a, double b) const { return antiderivative(b) - antiderivative(a); }

  double front() const { return x_.front(); }
  double back() const { return x_.back(); }

 private:
  static double edge_slope(double h0, double h1, double del0, double del1) {
    double d = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    if (d * del0 <= 0.0) return 0.0;
    if (del0 * del1 < 0.0 && std::fabs(d) > 3.0 * std::fabs(del0)) return 3.0 * del0;
    return d;
  }

  std::size_t interval(double t) const {
    if (t <= x_.front()) return 0;
    if (t >= x_.back()) return x_.size() - 2;
    const auto it = std::upper_bound(x_.begin(), x_.end(), t);
    return static_cast<std::size_t>(it - x_.begin()) - 1;
  }

  std::vector<double> x_, y_, d_, cum_;
};

// ---------------------------------------------------------------------------
// Minimal deterministic parallel loop. Work is split into contiguous index
// ranges; callers write to disjoint slots, so results do not depend on the
// thread count.

inline std::atomic<unsigned>& default_thread_limit() {
  static std::atomic<unsigned> limit{0};  // 0 = hardware concurrency
  return limit;
}

inline unsigned effective_threads(unsigned requested) {
  unsigned n = requested ? requested : default_thread_limit().load();
  if (n == 0) n = std::thread::hardware_concurrency();
  return std::max(1u, n);
}

template <class Body>
void parallel_for(std::size_t count, Body&& body, unsigned threads = 0) {
  const unsigned t = std::min<std::size_t>(effective_threads(threads), count ? count : 1);
  if (t <= 1 || count < 2) {
    body(std::size_t{0}, count);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(t);
  const std::size_t chunk = (count + t - 1) / t;
  for (unsigned k = 0; k < t; ++k) {
    const std::size_t lo = std::min(count, k * chunk);
    const std::size_t hi = std::min(count, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&body, lo, hi] { body(lo, hi); });
  }
  for (auto& th : pool) th.join();
}

}  // namespace lorenzot
