#pragma once

#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lorenzot/ilf.hpp"

namespace lorenzot {

// Weighted bivariate sample. Weights sum to one; points live in the closed
// positive quadrant. pre_normalization_means records the weighted means the
// data had before unit-mean normalization ((1,1) for raw or already
// normalized data).
struct Allocation {
  std::vector<Vec2> points;
  std::vector<double> weights;
  Vec2 pre_normalization_means{1.0, 1.0};
  int implicate = 1;
};

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(trim(std::string_view(line).substr(start)));
      break;
    }
    out.push_back(trim(std::string_view(line).substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

inline double parse_number(const std::string& cell, std::size_t line_no, const char* column) {
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  const auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc{} || res.ptr != last)
    throw DataError("csv line " + std::to_string(line_no) + ": cannot parse " + column +
                    " value '" + cell + "'");
  return value;
}

}  // namespace detail

// Loads weighted bivariate microdata. Header must name columns x1, x2 and
// weight; an optional implicate column splits the file into one allocation
// per implicate (rows with a missing or empty implicate default to 1).
// Weights are renormalized to sum one within each implicate.
inline std::vector<Allocation> load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError("'" + path + "' is empty");
  const std::vector<std::string> header = detail::split_csv_line(line);
  int col_x1 = -1, col_x2 = -1, col_w = -1, col_imp = -1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == "x1") col_x1 = static_cast<int>(c);
    else if (header[c] == "x2") col_x2 = static_cast<int>(c);
    else if (header[c] == "weight") col_w = static_cast<int>(c);
    else if (header[c] == "implicate") col_imp = static_cast<int>(c);
  }
  if (col_x1 < 0 || col_x2 < 0 || col_w < 0)
    throw DataError("'" + path + "': header must contain columns x1,x2,weight");

  std::map<int, Allocation> groups;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const std::vector<std::string> cells = detail::split_csv_line(line);
    const std::size_t needed = static_cast<std::size_t>(std::max({col_x1, col_x2, col_w})) + 1;
    if (cells.size() < needed)
      throw DataError("csv line " + std::to_string(line_no) + ": expected at least " +
                      std::to_string(needed) + " fields");
    const double x1 = detail::parse_number(cells[col_x1], line_no, "x1");
    const double x2 = detail::parse_number(cells[col_x2], line_no, "x2");
    const double w = detail::parse_number(cells[col_w], line_no, "weight");
    if (!(w > 0.0))
      throw DataError("csv line " + std::to_string(line_no) + ": weight must be positive");
    if (x1 < 0.0 || x2 < 0.0)
      throw DataError("csv line " + std::to_string(line_no) +
                      ": coordinates must be nonnegative");
    int imp = 1;
    if (col_imp >= 0 && static_cast<std::size_t>(col_imp) < cells.size() &&
        !cells[col_imp].empty()) {
      const double v = detail::parse_number(cells[col_imp], line_no, "implicate");
      imp = static_cast<int>(v);
      if (imp != v || imp < 1)
        throw DataError("csv line " + std::to_string(line_no) +
                        ": implicate must be a positive integer");
    }
    Allocation& g = groups[imp];
    g.implicate = imp;
    g.points.push_back({x1, x2});
    g.weights.push_back(w);
  }
  if (groups.empty()) throw DataError("'" + path + "' has no data rows");

  std::vector<Allocation> out;
  out.reserve(groups.size());
  for (auto& [imp, g] : groups) {
    double sum = 0.0;
    for (double w : g.weights) sum += w;
    for (double& w : g.weights) w /= sum;
    out.push_back(std::move(g));
  }
  return out;
}

// Rescales both coordinates to weighted mean one, composing the recorded
// pre-normalization means so that normalization is idempotent.
inline Allocation normalize_unit_mean(const Allocation& a) {
  if (a.points.empty()) throw UsageError("normalize_unit_mean: empty allocation");
  double m1 = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    m1 += a.weights[i] * a.points[i].x;
    m2 += a.weights[i] * a.points[i].y;
  }
  if (!(m1 > 0.0) || !(m2 > 0.0))
    throw DataError("normalize_unit_mean: weighted means must be positive (got " +
                    std::to_string(m1) + ", " + std::to_string(m2) + ")");
  Allocation out = a;
  for (Vec2& p : out.points) {
    p.x /= m1;
    p.y /= m2;
  }
  out.pre_normalization_means = {a.pre_normalization_means.x * m1,
                                 a.pre_normalization_means.y * m2};
  return out;
}

namespace detail {

struct PointKey {
  double x, y;
  bool operator==(const PointKey&) const = default;
};
struct PointKeyHash {
  std::size_t operator()(const PointKey& k) const {
    std::uint64_t a, b;
    static_assert(sizeof(double) == sizeof(std::uint64_t));
    std::memcpy(&a, &k.x, 8);
    std::memcpy(&b, &k.y, 8);
    return std::hash<std::uint64_t>{}(a * 0x9e3779b97f4a7c15ull ^ b);
  }
};

}  // namespace detail

// Merges exactly coincident points, summing their weights. Order of first
// occurrences is preserved. Exact duplicates carry no information for the
// transport problem, so this is a lossless alternative to jittering.
inline Allocation merge_duplicates(const Allocation& a) {
  Allocation out;
  out.pre_normalization_means = a.pre_normalization_means;
  out.implicate = a.implicate;
  std::unordered_map<detail::PointKey, std::size_t, detail::PointKeyHash> seen;
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    const detail::PointKey key{a.points[i].x, a.points[i].y};
    const auto it = seen.find(key);
    if (it == seen.end()) {
      seen.emplace(key, out.points.size());
      out.points.push_back(a.points[i]);
      out.weights.push_back(a.weights[i]);
    } else {
      out.weights[it->second] += a.weights[i];
    }
  }
  return out;
}

// Separates duplicated points by adding one-sided uniform noise of relative
// magnitude scale (times the coordinate range), deterministically per seed.
// Weighted means are restored by a final rescale; weights never change.
inline Allocation jitter_duplicates(const Allocation& a, double scale, std::uint64_t seed) {
  if (scale < 0.0) throw UsageError("jitter_duplicates: scale must be nonnegative");
  const std::size_t n = a.points.size();
  if (n == 0) throw UsageError("jitter_duplicates: empty allocation");

  auto count_distinct = [](const std::vector<Vec2>& pts) {
    std::unordered_map<detail::PointKey, int, detail::PointKeyHash> seen;
    for (const Vec2& p : pts) ++seen[detail::PointKey{p.x, p.y}];
    return seen;
  };
  auto groups = count_distinct(a.points);
  if (groups.size() == n) return a;  // already distinct
  if (scale == 0.0) throw DataError("jitter_duplicates: duplicates present but scale is zero");

  double min_x = a.points[0].x, max_x = min_x, min_y = a.points[0].y, max_y = min_y, max_abs = 0.0;
  for (const Vec2& p : a.points) {
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
    max_abs = std::max({max_abs, std::fabs(p.x), std::fabs(p.y)});
  }
  const double range = std::max(max_x - min_x, max_y - min_y);
  const double cscale = range > 0.0 ? range : std::max(1.0, max_abs);
  const double amplitude = scale * cscale;

  double target_m1 = 0.0, target_m2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    target_m1 += a.weights[i] * a.points[i].x;
    target_m2 += a.weights[i] * a.points[i].y;
  }

  Allocation out = a;
  // Mark all but the first occurrence of each value for perturbation.
  std::vector<bool> perturb(n, false);
  {
    std::unordered_map<detail::PointKey, bool, detail::PointKeyHash> seen;
    for (std::size_t i = 0; i < n; ++i) {
      const detail::PointKey key{a.points[i].x, a.points[i].y};
      if (seen.count(key))
        perturb[i] = true;
      else
        seen.emplace(key, true);
    }
  }
  std::vector<Rng> streams;
  streams.reserve(n);
  for (std::size_t i = 0; i < n; ++i) streams.emplace_back(mix64(seed, i));

  bool distinct = false;
  for (int round = 0; round < 64 && !distinct; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!perturb[i]) continue;
      out.points[i] = {a.points[i].x + amplitude * streams[i].uniform(),
                       a.points[i].y + amplitude * streams[i].uniform()};
    }
    auto again = count_distinct(out.points);
    if (again.size() == n) {
      distinct = true;
    } else {
      // Keep separated points where they landed; re-draw only collisions.
      for (std::size_t i = 0; i < n; ++i)
        perturb[i] = perturb[i] && again[detail::PointKey{out.points[i].x, out.points[i].y}] > 1;
    }
  }
  if (!distinct)
    throw DataError("jitter_duplicates: could not separate duplicates within retry budget");

  double m1 = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    m1 += out.weights[i] * out.points[i].x;
    m2 += out.weights[i] * out.points[i].y;
  }
  if (m1 > 0.0 && m2 > 0.0 && target_m1 > 0.0 && target_m2 > 0.0) {
    const double s1 = target_m1 / m1, s2 = target_m2 / m2;
    for (Vec2& p : out.points) {
      p.x *= s1;
      p.y *= s2;
    }
  }
  return out;
}

// Repeated-imputation averaging across implicates.
inline IlfGrid rii_average(const std::vector<IlfGrid>& grids) {
  if (grids.empty()) throw UsageError("rii_average: no grids");
  IlfGrid out = grids.front();
  for (std::size_t k = 1; k < grids.size(); ++k) {
    if (grids[k].resolution != out.resolution)
      throw UsageError("rii_average: grid resolution mismatch");
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += grids[k].values[i];
  }
  const double inv = 1.0 / static_cast<double>(grids.size());
  for (double& v : out.values) v *= inv;
  return out;
}

inline double rii_average(const std::vector<double>& values) {
  if (values.empty()) throw UsageError("rii_average: no values");
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

}  // namespace lorenzot
