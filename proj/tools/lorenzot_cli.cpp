// Command-line driver: fits semi-discrete transport to weighted bivariate
// samples and evaluates Lorenz maps, inverse Lorenz functions, level curves,
// Gini indices and inequality-order comparisons. Grids and curves are
// written as CSV, scalars and verdicts as JSON; every run also writes a
// manifest that reproduces it byte for byte.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lorenzot/artifact.hpp"
#include "lorenzot/closed_forms.hpp"
#include "lorenzot/ordering.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace lorenzot;

namespace {

std::string fmt(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << text;
}

struct Manifest {
  std::string subcommand;
  std::vector<std::string> inputs;
  json options = json::object();
  std::vector<std::string> outputs;
};

void write_manifest(const fs::path& out_dir, const Manifest& m) {
  json j;
  j["tool"] = "lorenzot";
  j["version"] = kToolVersion;
  j["subcommand"] = m.subcommand;
  j["inputs"] = m.inputs;
  j["options"] = m.options;
  j["outputs"] = m.outputs;
  write_text(out_dir / "manifest.json", j.dump(1, '\t') + "\n");
}

fs::path prepare_out_dir(const std::string& out) {
  fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory '" + out + "'");
  return dir;
}

// Averaged empirical Lorenz map across the implicates of an artifact.
struct ArtifactLorenz {
  std::vector<EmpiricalLorenz> maps;
  explicit ArtifactLorenz(const FitArtifact& art) {
    for (const FitRecord& r : art.records) maps.emplace_back(r.fit);
  }
  Vec2 operator()(Vec2 r) const {
    Vec2 acc{0.0, 0.0};
    for (const auto& m : maps) acc = acc + m(r);
    return (1.0 / static_cast<double>(maps.size())) * acc;
  }
};

void require_rii(const FitArtifact& art, bool rii, const char* what) {
  if (art.records.size() > 1 && !rii)
    throw UsageError(std::string(what) +
                     ": artifact holds multiple implicates; pass --rii to average them");
}

IlfGrid artifact_ilf(const FitArtifact& art, int grid, long long mc, std::uint64_t seed) {
  std::vector<IlfGrid> grids;
  grids.reserve(art.records.size());
  for (std::size_t k = 0; k < art.records.size(); ++k) {
    const EmpiricalLorenz map(art.records[k].fit);
    // Independent pseudo-samples per implicate, split off the base seed.
    const std::uint64_t s = art.records.size() == 1 ? seed : mix64(seed, k + 1);
    grids.push_back(ilf(map, grid, mc, s));
  }
  return grids.size() == 1 ? grids.front() : rii_average(grids);
}

const char* verdict_string(Relation r) {
  switch (r) {
    case Relation::dominates: return "B_more_unequal";
    case Relation::dominated: return "A_more_unequal";
    case Relation::equal: return "equal";
    case Relation::incomparable: return "incomparable";
  }
  return "?";
}

json verdict_json(const OrderingVerdict& v) {
  json j;
  j["verdict"] = verdict_string(v.relation);
  j["max_violation"] = v.max_violation;
  j["slack"] = v.slack;
  if (v.witness) j["witness"] = {v.witness->x, v.witness->y};
  return j;
}

// --- synth ------------------------------------------------------------------

int cmd_synth(const std::string& family, long n, std::uint64_t seed, double sigma1,
              double sigma2, double kappa, double price, int implicates,
              const std::string& out) {
  SynthSpec spec;
  if (family == "identical") spec.family = SynthFamily::identical;
  else if (family == "two-point-crossed") spec.family = SynthFamily::two_point_crossed;
  else if (family == "two-point-aligned") spec.family = SynthFamily::two_point_aligned;
  else if (family == "comonotone-uniform") spec.family = SynthFamily::comonotone_uniform;
  else if (family == "lognormal-plackett") spec.family = SynthFamily::lognormal_plackett;
  else if (family == "egalitarian") spec.family = SynthFamily::egalitarian;
  else throw UsageError("unknown family '" + family + "'");
  if (implicates < 1) throw UsageError("--implicates must be at least 1");
  spec.sigma1 = sigma1;
  spec.sigma2 = sigma2;
  spec.kappa = kappa;
  spec.n = n;
  if (spec.family == SynthFamily::egalitarian) {
    // Quadratic budget-sharing family at relative price p, scaled so the
    // allocation stays in the positive quadrant.
    if (!(price > 0.0)) throw UsageError("--p must be positive");
    const double beta = price == 1.0 ? 1.0 : 2.0 / ((price + 1.0) * std::max(1.0, price));
    const double slope_shift = -(price - 1.0) / 2.0;
    spec.egalitarian = std::make_shared<EgalitarianSpec>(egalitarian_spec_from_functions(
        price, [beta, slope_shift](double z) { return beta * (0.5 * z * z + slope_shift * z); }));
  }

  const fs::path dir = prepare_out_dir(out);
  std::string csv = implicates > 1 ? "x1,x2,weight,implicate\n" : "x1,x2,weight\n";
  for (int imp = 1; imp <= implicates; ++imp) {
    spec.seed = implicates == 1 ? seed : mix64(seed, static_cast<std::uint64_t>(imp));
    const Allocation a = sample(spec);
    for (std::size_t i = 0; i < a.points.size(); ++i) {
      csv += fmt(a.points[i].x) + "," + fmt(a.points[i].y) + "," + fmt(a.weights[i]);
      if (implicates > 1) csv += "," + std::to_string(imp);
      csv += "\n";
    }
  }
  write_text(dir / "sample.csv", csv);

  Manifest m;
  m.subcommand = "synth";
  m.options = {{"family", family}, {"n", n},         {"seed", seed},
               {"sigma1", sigma1}, {"sigma2", sigma2}, {"kappa", kappa},
               {"p", price},       {"implicates", implicates}, {"out", out}};
  m.outputs = {"sample.csv"};
  write_manifest(dir, m);
  std::cout << "wrote " << (dir / "sample.csv").string() << "\n";
  return 0;
}

// --- fit --------------------------------------------------------------------

int cmd_fit(const std::string& input, double tol, int max_iter, double jitter,
            std::uint64_t seed, unsigned threads, const std::string& out) {
  SolverConfig config;
  config.tolerance = tol;
  config.max_iterations = max_iter;
  config.threads = threads;
  const std::vector<Allocation> groups = load_csv(input);
  const FitArtifact art = fit_all(groups, config, jitter, seed);
  const fs::path dir = prepare_out_dir(out);
  save_fit_artifact(art, (dir / "fit.json").string());
  for (const FitRecord& r : art.records)
    std::cout << "implicate " << r.implicate << ": n=" << r.fit.diagram.sites.size()
              << " residual=" << r.fit.residual << " iterations=" << r.fit.iterations << "\n";

  Manifest m;
  m.subcommand = "fit";
  m.inputs = {input};
  m.options = {{"tol", tol},   {"max_iter", max_iter}, {"jitter", jitter},
               {"seed", seed}, {"threads", threads},   {"out", out}};
  m.outputs = {"fit.json"};
  write_manifest(dir, m);
  return 0;
}

// --- lorenz -----------------------------------------------------------------

int cmd_lorenz(const std::string& fit_path, int grid, bool rii, const std::string& out) {
  if (grid < 2) throw UsageError("--grid must be at least 2");
  const FitArtifact art = load_fit_artifact(fit_path);
  require_rii(art, rii, "lorenz");
  const ArtifactLorenz map(art);
  const fs::path dir = prepare_out_dir(out);
  std::string csv = "r1,r2,L1,L2\n";
  const double h = 1.0 / (grid - 1);
  for (int j = 0; j < grid; ++j)
    for (int i = 0; i < grid; ++i) {
      const Vec2 r{i * h, j * h};
      const Vec2 L = map(r);
      csv += fmt(r.x) + "," + fmt(r.y) + "," + fmt(L.x) + "," + fmt(L.y) + "\n";
    }
  write_text(dir / "lorenz.csv", csv);

  Manifest m;
  m.subcommand = "lorenz";
  m.inputs = {fit_path};
  m.options = {{"grid", grid}, {"rii", rii}, {"out", out}};
  m.outputs = {"lorenz.csv"};
  write_manifest(dir, m);
  std::cout << "wrote " << (dir / "lorenz.csv").string() << "\n";
  return 0;
}

// --- ilf --------------------------------------------------------------------

int cmd_ilf(const std::string& fit_path, int grid, long long mc, std::uint64_t seed, bool rii,
            const std::string& out) {
  const FitArtifact art = load_fit_artifact(fit_path);
  require_rii(art, rii, "ilf");
  const IlfGrid g = artifact_ilf(art, grid, mc, seed);
  const fs::path dir = prepare_out_dir(out);
  std::string csv = "z1,z2,l\n";
  for (int j = 0; j < g.resolution; ++j)
    for (int i = 0; i < g.resolution; ++i)
      csv += fmt(g.node(i)) + "," + fmt(g.node(j)) + "," + fmt(g.at(i, j)) + "\n";
  write_text(dir / "ilf.csv", csv);

  Manifest m;
  m.subcommand = "ilf";
  m.inputs = {fit_path};
  m.options = {{"grid", grid}, {"mc", mc}, {"seed", seed}, {"rii", rii}, {"out", out}};
  m.outputs = {"ilf.csv"};
  write_manifest(dir, m);
  std::cout << "wrote " << (dir / "ilf.csv").string() << "\n";
  return 0;
}

// --- curves -----------------------------------------------------------------

int cmd_curves(const std::string& fit_path, std::vector<double> alphas, int grid, long long mc,
               std::uint64_t seed, bool rii, const std::string& out) {
  if (alphas.empty()) throw UsageError("curves: provide at least one --alpha level");
  const FitArtifact art = load_fit_artifact(fit_path);
  require_rii(art, rii, "curves");
  const IlfGrid g = artifact_ilf(art, grid, mc, seed);
  const std::vector<AlphaCurve> curves = alpha_curves(g, alphas);
  const fs::path dir = prepare_out_dir(out);
  std::string csv = "alpha,segment_id,z1,z2\n";
  for (const AlphaCurve& c : curves) {
    int segment = 0;
    for (const auto& poly : c.polylines) {
      for (const Vec2& p : poly)
        csv += fmt(c.alpha) + "," + std::to_string(segment) + "," + fmt(p.x) + "," + fmt(p.y) +
               "\n";
      ++segment;
    }
  }
  write_text(dir / "curves.csv", csv);

  Manifest m;
  m.subcommand = "curves";
  m.inputs = {fit_path};
  m.options = {{"alpha", alphas}, {"grid", grid}, {"mc", mc},
               {"seed", seed},    {"rii", rii},   {"out", out}};
  m.outputs = {"curves.csv"};
  write_manifest(dir, m);
  std::cout << "wrote " << (dir / "curves.csv").string() << "\n";
  return 0;
}

// --- gini -------------------------------------------------------------------

int cmd_gini(const std::string& fit_path, bool rii, const std::string& out) {
  const FitArtifact art = load_fit_artifact(fit_path);
  require_rii(art, rii, "gini");
  std::vector<double> ginis, alt_ginis, checksums;
  for (const FitRecord& r : art.records) {
    ginis.push_back(gini(r.fit));
    alt_ginis.push_back(alt_gini(r.fit));
    const std::vector<double> w = gini_weights(r.fit);
    double sum = 0.0;
    for (double v : w) sum += v;
    checksums.push_back(sum);
  }
  json j;
  j["gini"] = rii_average(ginis);
  j["alt_gini"] = rii_average(alt_ginis);
  j["gini_weights_checksum"] = rii_average(checksums);
  if (art.records.size() > 1) {
    j["per_implicate"] = json::array();
    for (std::size_t k = 0; k < ginis.size(); ++k)
      j["per_implicate"].push_back({{"implicate", art.records[k].implicate},
                                    {"gini", ginis[k]},
                                    {"alt_gini", alt_ginis[k]}});
  }
  const fs::path dir = prepare_out_dir(out);
  write_text(dir / "gini.json", j.dump(1, '\t') + "\n");

  Manifest m;
  m.subcommand = "gini";
  m.inputs = {fit_path};
  m.options = {{"rii", rii}, {"out", out}};
  m.outputs = {"gini.json"};
  write_manifest(dir, m);
  std::cout << j.dump() << "\n";
  return 0;
}

// --- compare ----------------------------------------------------------------

int cmd_compare(const std::string& fit_a, const std::string& fit_b, int grid, long long mc,
                std::uint64_t seed, double slack, const std::string& out) {
  const FitArtifact art_a = load_fit_artifact(fit_a);
  const FitArtifact art_b = load_fit_artifact(fit_b);
  const ArtifactLorenz map_a(art_a), map_b(art_b);

  const double slack_lorenz = slack > 0.0 ? slack : 1e-6;
  const double slack_weak = slack > 0.0 ? slack : 3.0 * 0.5 / std::sqrt(static_cast<double>(mc));

  const OrderingVerdict lv = lorenz_compare(
      [&map_a](Vec2 r) { return map_a(r); }, [&map_b](Vec2 r) { return map_b(r); }, grid,
      slack_lorenz);
  // Shared pseudo-sample seed: common random numbers sharpen the comparison.
  const IlfGrid ga = artifact_ilf(art_a, grid, mc, seed);
  const IlfGrid gb = artifact_ilf(art_b, grid, mc, seed);
  const OrderingVerdict wv = weak_lorenz_compare(ga, gb, slack_weak);

  json j;
  j["lorenz"] = verdict_json(lv);
  j["weak"] = verdict_json(wv);
  const fs::path dir = prepare_out_dir(out);
  write_text(dir / "compare.json", j.dump(1, '\t') + "\n");

  Manifest m;
  m.subcommand = "compare";
  m.inputs = {fit_a, fit_b};
  m.options = {{"grid", grid}, {"mc", mc}, {"seed", seed}, {"slack", slack}, {"out", out}};
  m.outputs = {"compare.json"};
  write_manifest(dir, m);
  std::cout << j.dump() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multivariate Lorenz curves and Gini indices via semi-discrete optimal transport"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic sample CSV");
  std::string family = "identical", out;
  long n = 0;
  std::uint64_t seed = 0;
  double sigma1 = 1.0, sigma2 = 1.0, kappa = 1.0, price = 1.0;
  int implicates = 1;
  synth->add_option("--family", family, "identical|two-point-crossed|two-point-aligned|comonotone-uniform|lognormal-plackett|egalitarian")->required();
  synth->add_option("--n", n, "sample size")->required();
  synth->add_option("--seed", seed, "random seed");
  synth->add_option("--sigma1", sigma1, "lognormal log-scale, first coordinate");
  synth->add_option("--sigma2", sigma2, "lognormal log-scale, second coordinate");
  synth->add_option("--kappa", kappa, "Plackett odds ratio (1 = independence)");
  synth->add_option("--p", price, "relative price for the egalitarian family");
  synth->add_option("--implicates", implicates, "emit this many implicate groups");
  synth->add_option("--out", out, "output directory")->required();

  // fit
  auto* fit = app.add_subcommand("fit", "fit the transport problem to a CSV sample");
  std::string fit_input;
  double tol = 1e-7, jitter = 0.0;
  int max_iter = 100;
  unsigned threads = 0;
  fit->add_option("input", fit_input, "CSV with columns x1,x2,weight[,implicate]")->required();
  fit->add_option("--tol", tol, "residual tolerance relative to the smallest weight");
  fit->add_option("--max-iter", max_iter, "Newton iteration budget");
  fit->add_option("--jitter", jitter, "jitter scale for duplicates (0 merges them exactly)");
  fit->add_option("--seed", seed, "jitter seed");
  fit->add_option("--threads", threads, "worker threads (0 = auto)");
  fit->add_option("--out", out, "output directory")->required();

  // shared evaluation options
  std::string fit_path, fit_path_b;
  int grid = 201;
  long long mc = 100000;
  bool rii = false;
  std::vector<double> alphas;
  double slack = 0.0;

  auto* lorenz_cmd = app.add_subcommand("lorenz", "tabulate the Lorenz map on a rank grid");
  lorenz_cmd->add_option("fit", fit_path, "fit artifact (fit.json)")->required();
  lorenz_cmd->add_option("--grid", grid, "grid resolution");
  lorenz_cmd->add_flag("--rii", rii, "average across implicates");
  lorenz_cmd->add_option("--out", out, "output directory")->required();

  auto* ilf_cmd = app.add_subcommand("ilf", "estimate the inverse Lorenz function");
  ilf_cmd->add_option("fit", fit_path, "fit artifact")->required();
  ilf_cmd->add_option("--grid", grid, "grid resolution");
  ilf_cmd->add_option("--mc", mc, "pseudo-sample size");
  ilf_cmd->add_option("--seed", seed, "pseudo-sample seed");
  ilf_cmd->add_flag("--rii", rii, "average across implicates");
  ilf_cmd->add_option("--out", out, "output directory")->required();

  auto* curves_cmd = app.add_subcommand("curves", "extract level curves of the ILF");
  curves_cmd->add_option("fit", fit_path, "fit artifact")->required();
  curves_cmd->add_option("--alpha", alphas, "levels in (0,1)")->required()->delimiter(',');
  curves_cmd->add_option("--grid", grid, "grid resolution");
  curves_cmd->add_option("--mc", mc, "pseudo-sample size");
  curves_cmd->add_option("--seed", seed, "pseudo-sample seed");
  curves_cmd->add_flag("--rii", rii, "average across implicates");
  curves_cmd->add_option("--out", out, "output directory")->required();

  auto* gini_cmd = app.add_subcommand("gini", "Gini indices of a fit");
  gini_cmd->add_option("fit", fit_path, "fit artifact")->required();
  gini_cmd->add_flag("--rii", rii, "average across implicates");
  gini_cmd->add_option("--out", out, "output directory")->required();

  auto* compare_cmd = app.add_subcommand("compare", "order two fits (Lorenz and weak orders)");
  compare_cmd->add_option("fit_a", fit_path, "first fit artifact")->required();
  compare_cmd->add_option("fit_b", fit_path_b, "second fit artifact")->required();
  compare_cmd->add_option("--grid", grid, "comparison grid resolution");
  compare_cmd->add_option("--mc", mc, "pseudo-sample size for the ILFs");
  compare_cmd->add_option("--seed", seed, "pseudo-sample seed");
  compare_cmd->add_option("--slack", slack, "override comparison slack");
  compare_cmd->add_option("--out", out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (synth->parsed())
      return cmd_synth(family, n, seed, sigma1, sigma2, kappa, price, implicates, out);
    if (fit->parsed()) return cmd_fit(fit_input, tol, max_iter, jitter, seed, threads, out);
    if (lorenz_cmd->parsed()) return cmd_lorenz(fit_path, grid, rii, out);
    if (ilf_cmd->parsed()) return cmd_ilf(fit_path, grid, mc, seed, rii, out);
    if (curves_cmd->parsed()) return cmd_curves(fit_path, alphas, grid, mc, seed, rii, out);
    if (gini_cmd->parsed()) return cmd_gini(fit_path, rii, out);
    if (compare_cmd->parsed())
      return cmd_compare(fit_path, fit_path_b, grid, mc, seed, slack, out);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
