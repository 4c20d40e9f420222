#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "lorenzot/lorenz_map.hpp"

namespace lorenzot {

// Inverse Lorenz Function sampled on a regular grid over [0,1]^2. Entry
// (i, j) estimates the probability that L(U) <= (i, j) / (resolution - 1)
// componentwise, for U uniform on the unit square. A bivariate cdf:
// nondecreasing along both axes with value 1 at (1,1).
struct IlfGrid {
  int resolution = 0;
  std::vector<double> values;  // row-major, index j * resolution + i
  long long mc_samples = 0;
  std::uint64_t seed = 0;

  double at(int i, int j) const { return values[static_cast<std::size_t>(j) * resolution + i]; }
  double node(int i) const { return static_cast<double>(i) / (resolution - 1); }
};

// Monte Carlo ILF estimate from a pseudo-sample of Lorenz map values.
// Draw j uses substreams mix64(seed, 2j) and mix64(seed, 2j+1), so the
// result is independent of the thread count.
template <class MapFn>
IlfGrid ilf(const MapFn& map, int resolution, long long mc_samples, std::uint64_t seed,
            unsigned threads = 0) {
  if (resolution < 2) throw UsageError("ilf: resolution must be at least 2");
  if (mc_samples < 1000) throw UsageError("ilf: need at least 1000 pseudo-samples");

  const int res = resolution;
  const unsigned t = effective_threads(threads);
  std::vector<std::vector<std::int64_t>> partial(
      t, std::vector<std::int64_t>(static_cast<std::size_t>(res) * res, 0));

  const std::size_t total = static_cast<std::size_t>(mc_samples);
  const std::size_t chunk = (total + t - 1) / t;
  parallel_for(
      t,
      [&](std::size_t klo, std::size_t khi) {
        for (std::size_t k = klo; k < khi; ++k) {
          auto& counts = partial[k];
          const std::size_t lo = std::min(total, k * chunk);
          const std::size_t hi = std::min(total, lo + chunk);
          for (std::size_t j = lo; j < hi; ++j) {
            const Vec2 u{u64_to_unit(mix64(seed, 2 * j)), u64_to_unit(mix64(seed, 2 * j + 1))};
            const Vec2 L = map(u);
            // A sample counts at every node z >= L; bin it at the smallest
            // dominating node and prefix-sum afterwards.
            auto bin = [res](double v) {
              int b = static_cast<int>(std::ceil(v * (res - 1) - 1e-12));
              return std::clamp(b, 0, res - 1);
            };
            counts[static_cast<std::size_t>(bin(L.y)) * res + bin(L.x)] += 1;
          }
        }
      },
      t);

  std::vector<std::int64_t> counts(static_cast<std::size_t>(res) * res, 0);
  for (const auto& p : partial)
    for (std::size_t k = 0; k < counts.size(); ++k) counts[k] += p[k];

  // 2-D inclusive prefix sums turn bin counts into dominance counts.
  for (int j = 0; j < res; ++j)
    for (int i = 1; i < res; ++i)
      counts[static_cast<std::size_t>(j) * res + i] +=
          counts[static_cast<std::size_t>(j) * res + i - 1];
  for (int j = 1; j < res; ++j)
    for (int i = 0; i < res; ++i)
      counts[static_cast<std::size_t>(j) * res + i] +=
          counts[static_cast<std::size_t>(j - 1) * res + i];

  IlfGrid grid;
  grid.resolution = res;
  grid.mc_samples = mc_samples;
  grid.seed = seed;
  grid.values.resize(counts.size());
  const double inv = 1.0 / static_cast<double>(mc_samples);
  for (std::size_t k = 0; k < counts.size(); ++k)
    grid.values[k] = static_cast<double>(counts[k]) * inv;
  return grid;
}

// A level set of the ILF: one or more downward-sloping polylines, each
// ordered by increasing first coordinate.
struct AlphaCurve {
  double alpha = 0.0;
  std::vector<std::vector<Vec2>> polylines;
};

namespace detail {

// Marching squares at a single level with linear interpolation on grid
// edges. Returns stitched polylines.
inline std::vector<std::vector<Vec2>> contour_polylines(const IlfGrid& g, double level) {
  struct Key {
    std::int64_t x, y;
    bool operator<(const Key& o) const { return x != o.x ? x < o.x : y < o.y; }
  };
  auto key_of = [](Vec2 p) {
    return Key{static_cast<std::int64_t>(std::llround(p.x * 1e9)),
               static_cast<std::int64_t>(std::llround(p.y * 1e9))};
  };

  std::vector<std::pair<Vec2, Vec2>> segments;
  const int res = g.resolution;
  const double h = 1.0 / (res - 1);
  auto interp = [&](double za, double va, double zb, double vb) {
    const double t = (level - va) / (vb - va);
    return za + t * (zb - za);
  };
  for (int j = 0; j + 1 < res; ++j) {
    for (int i = 0; i + 1 < res; ++i) {
      const double v00 = g.at(i, j), v10 = g.at(i + 1, j);
      const double v01 = g.at(i, j + 1), v11 = g.at(i + 1, j + 1);
      int mask = 0;
      if (v00 >= level) mask |= 1;
      if (v10 >= level) mask |= 2;
      if (v11 >= level) mask |= 4;
      if (v01 >= level) mask |= 8;
      if (mask == 0 || mask == 15) continue;
      const double x0 = i * h, x1 = (i + 1) * h, y0 = j * h, y1 = (j + 1) * h;
      // Edge crossing points (valid only when the edge straddles the level).
      const Vec2 bottom{interp(x0, v00, x1, v10), y0};
      const Vec2 top{interp(x0, v01, x1, v11), y1};
      const Vec2 left{x0, interp(y0, v00, y1, v01)};
      const Vec2 right{x1, interp(y0, v10, y1, v11)};
      auto add = [&](Vec2 a, Vec2 b) {
        if (std::fabs(a.x - b.x) > 1e-12 || std::fabs(a.y - b.y) > 1e-12)
          segments.emplace_back(a, b);
      };
      switch (mask) {
        case 1: case 14: add(left, bottom); break;
        case 2: case 13: add(bottom, right); break;
        case 3: case 12: add(left, right); break;
        case 4: case 11: add(right, top); break;
        case 6: case 9:  add(bottom, top); break;
        case 7: case 8:  add(top, left); break;
        case 5: case 10: {
          // Saddle: split by the cell-center value.
          const double center = 0.25 * (v00 + v10 + v01 + v11);
          const bool center_in = center >= level;
          if ((mask == 5) == center_in) {
            add(left, bottom);
            add(right, top);
          } else {
            add(left, top);
            add(right, bottom);
          }
          break;
        }
        default: break;
      }
    }
  }

  // Stitch segments into chains via shared endpoints.
  std::map<Key, std::vector<std::size_t>> at_point;
  for (std::size_t s = 0; s < segments.size(); ++s) {
    at_point[key_of(segments[s].first)].push_back(s);
    at_point[key_of(segments[s].second)].push_back(s);
  }
  std::vector<bool> used(segments.size(), false);
  std::vector<std::vector<Vec2>> chains;
  for (std::size_t s0 = 0; s0 < segments.size(); ++s0) {
    if (used[s0]) continue;
    std::vector<Vec2> chain{segments[s0].first, segments[s0].second};
    used[s0] = true;
    for (int dir = 0; dir < 2; ++dir) {
      while (true) {
        const Vec2 tip = dir == 0 ? chain.back() : chain.front();
        const auto it = at_point.find(key_of(tip));
        std::size_t next = segments.size();
        if (it != at_point.end())
          for (std::size_t s : it->second)
            if (!used[s]) {
              next = s;
              break;
            }
        if (next == segments.size()) break;
        used[next] = true;
        const Key tip_key = key_of(tip);
        const Vec2 other = (key_of(segments[next].first).x == tip_key.x &&
                            key_of(segments[next].first).y == tip_key.y)
                               ? segments[next].second
                               : segments[next].first;
        if (dir == 0)
          chain.push_back(other);
        else
          chain.insert(chain.begin(), other);
      }
    }
    if (chain.front().x > chain.back().x) std::reverse(chain.begin(), chain.end());
    chains.push_back(std::move(chain));
  }
  std::sort(chains.begin(), chains.end(), [](const auto& a, const auto& b) {
    if (a.front().x != b.front().x) return a.front().x < b.front().x;
    return a.front().y < b.front().y;
  });
  return chains;
}

}  // namespace detail

inline std::vector<AlphaCurve> alpha_curves(const IlfGrid& grid,
                                            const std::vector<double>& alphas) {
  if (grid.resolution < 2) throw UsageError("alpha_curves: invalid grid");
  std::vector<AlphaCurve> out;
  out.reserve(alphas.size());
  for (double a : alphas) {
    if (!(a > 0.0 && a < 1.0))
      throw UsageError("alpha_curves: level must lie strictly inside (0, 1)");
    AlphaCurve c;
    c.alpha = a;
    c.polylines = detail::contour_polylines(grid, a);
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace lorenzot
