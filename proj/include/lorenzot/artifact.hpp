#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lorenzot/ingestion.hpp"
#include "lorenzot/lorenz_map.hpp"
#include "lorenzot/synth.hpp"

namespace lorenzot {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kFitFormat = "lorenzot-fit/1";

// One fitted implicate: the transport fit plus ingestion provenance.
struct FitRecord {
  int implicate = 1;
  Vec2 pre_normalization_means{1.0, 1.0};
  TransportFit fit;
};

struct FitArtifact {
  std::vector<FitRecord> records;
  double solver_tolerance = 1e-7;
  int solver_max_iterations = 100;
  double jitter_scale = 0.0;  // 0 = exact duplicates merged instead
  std::uint64_t seed = 0;
};

// End-to-end fit of one allocation: normalize to unit means, resolve
// duplicates (merge exactly, or jitter when a positive scale is given),
// then solve for the dual weights.
inline FitRecord fit_allocation(const Allocation& raw, const SolverConfig& config,
                                double jitter_scale = 0.0, std::uint64_t seed = 0) {
  Allocation a = raw;
  if (jitter_scale > 0.0) a = jitter_duplicates(a, jitter_scale, seed);
  a = normalize_unit_mean(a);
  a = merge_duplicates(a);
  FitRecord rec;
  rec.implicate = a.implicate;
  rec.pre_normalization_means = a.pre_normalization_means;
  rec.fit = solve(a.points, a.weights, config);
  return rec;
}

inline FitArtifact fit_all(const std::vector<Allocation>& groups, const SolverConfig& config,
                           double jitter_scale = 0.0, std::uint64_t seed = 0) {
  FitArtifact art;
  art.solver_tolerance = config.tolerance;
  art.solver_max_iterations = config.max_iterations;
  art.jitter_scale = jitter_scale;
  art.seed = seed;
  for (const Allocation& g : groups)
    art.records.push_back(fit_allocation(g, config, jitter_scale, seed));
  return art;
}

// ---------------------------------------------------------------------------
// JSON serialization. nlohmann serializes doubles with a shortest
// round-trip representation, so saved artifacts reload bit-exactly.

namespace detail {

inline nlohmann::json to_json(const Vec2& v) { return nlohmann::json::array({v.x, v.y}); }

inline Vec2 vec2_from(const nlohmann::json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>()};
}

}  // namespace detail

inline nlohmann::json fit_artifact_to_json(const FitArtifact& art) {
  nlohmann::json j;
  j["format"] = kFitFormat;
  j["tool_version"] = kToolVersion;
  j["solver"] = {{"tolerance", art.solver_tolerance},
                 {"max_iterations", art.solver_max_iterations}};
  j["jitter_scale"] = art.jitter_scale;
  j["seed"] = art.seed;
  nlohmann::json recs = nlohmann::json::array();
  for (const FitRecord& r : art.records) {
    nlohmann::json rj;
    rj["implicate"] = r.implicate;
    rj["pre_normalization_means"] = detail::to_json(r.pre_normalization_means);
    rj["residual"] = r.fit.residual;
    rj["iterations"] = r.fit.iterations;
    nlohmann::json sites = nlohmann::json::array();
    for (const Vec2& s : r.fit.diagram.sites) sites.push_back(detail::to_json(s));
    rj["sites"] = std::move(sites);
    rj["target_weights"] = r.fit.target_weights;
    rj["dual_weights"] = r.fit.diagram.dual_weights;
    nlohmann::json cells = nlohmann::json::array();
    for (const ConvexPolygon& c : r.fit.diagram.cells) {
      nlohmann::json poly = nlohmann::json::array();
      for (const Vec2& v : c.vertices) poly.push_back(detail::to_json(v));
      cells.push_back(std::move(poly));
    }
    rj["cells"] = std::move(cells);
    recs.push_back(std::move(rj));
  }
  j["fits"] = std::move(recs);
  return j;
}

inline FitArtifact fit_artifact_from_json(const nlohmann::json& j) {
  if (!j.contains("format") || j.at("format").get<std::string>() != kFitFormat)
    throw DataError("fit artifact: unrecognized format");
  FitArtifact art;
  art.solver_tolerance = j.at("solver").at("tolerance").get<double>();
  art.solver_max_iterations = j.at("solver").at("max_iterations").get<int>();
  art.jitter_scale = j.value("jitter_scale", 0.0);
  art.seed = j.value("seed", std::uint64_t{0});
  for (const auto& rj : j.at("fits")) {
    FitRecord r;
    r.implicate = rj.at("implicate").get<int>();
    r.pre_normalization_means = detail::vec2_from(rj.at("pre_normalization_means"));
    r.fit.residual = rj.at("residual").get<double>();
    r.fit.iterations = rj.at("iterations").get<int>();
    for (const auto& sj : rj.at("sites")) r.fit.diagram.sites.push_back(detail::vec2_from(sj));
    r.fit.target_weights = rj.at("target_weights").get<std::vector<double>>();
    r.fit.diagram.dual_weights = rj.at("dual_weights").get<std::vector<double>>();
    for (const auto& cj : rj.at("cells")) {
      ConvexPolygon poly;
      for (const auto& vj : cj) poly.vertices.push_back(detail::vec2_from(vj));
      r.fit.diagram.cells.push_back(std::move(poly));
    }
    if (r.fit.diagram.sites.size() != r.fit.diagram.cells.size() ||
        r.fit.diagram.sites.size() != r.fit.target_weights.size() ||
        r.fit.diagram.sites.size() != r.fit.diagram.dual_weights.size())
      throw DataError("fit artifact: inconsistent array sizes");
    // Cell adjacency is not persisted; it is only needed while solving.
    r.fit.diagram.adjacency.resize(r.fit.diagram.sites.size());
    art.records.push_back(std::move(r));
  }
  if (art.records.empty()) throw DataError("fit artifact: no fits");
  return art;
}

inline void save_fit_artifact(const FitArtifact& art, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << fit_artifact_to_json(art).dump(1, '\t') << '\n';
}

inline FitArtifact load_fit_artifact(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("cannot parse '" + path + "': " + e.what());
  }
  return fit_artifact_from_json(j);
}

}  // namespace lorenzot
