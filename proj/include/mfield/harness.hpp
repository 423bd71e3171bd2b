#pragma once

// Declarative scenario harness.
//
// A scenario is a JSON document naming a mesh, a mass (or mass sweep), a
// seed and a list of checks.  run_scenario executes the checks and returns
// a report plus CSV tables; nothing touches the filesystem until
// write_outcome, so a malformed scenario fails before any output exists.
// Reports are pure functions of the scenario document: reruns produce byte
// identical output except for the timestamp field, and the report
// fingerprint covers everything except the timestamp and itself.
//
// Check types:
//   projection    support projection identity and the three-way splitting
//   markov        conditional expectations onto complement vs boundary
//   reflection    reflection Gram matrices stay positive semidefinite
//   zero-mass     the m -> 0 Gram limit: positivity and convergence
//   sewing        boundary amplitudes compose across glued pieces
//   interacting   the Markov comparison under a Wick vertex potential

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <future>

#include "mfield/interacting.hpp"
#include "mfield/mesh_io.hpp"
#include "mfield/positivity.hpp"
#include "mfield/sewing.hpp"

namespace mfield {

using nlohmann::json;

namespace detail {

inline std::string csv_num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

class CsvTable {
 public:
  explicit CsvTable(const std::vector<std::string>& header) {
    append_row(header);
    cols_ = header.size();
  }

  void row(const std::vector<std::string>& cells) {
    if (cells.size() != cols_) throw Error("CsvTable: column count mismatch");
    append_row(cells);
  }

  const std::string& str() const { return out_; }

 private:
  void append_row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ += ',';
      out_ += cells[i];
    }
    out_ += '\n';
  }

  std::string out_;
  std::size_t cols_ = 0;
};

// --- strict JSON access with path-carrying errors

inline void check_known_keys(const json& j, const std::vector<std::string>& keys,
                             const std::string& ctx) {
  for (const auto& [k, v] : j.items()) {
    if (std::find(keys.begin(), keys.end(), k) == keys.end())
      throw InvalidInput(ctx + ": unknown key '" + k + "'");
  }
}

inline const json& jreq(const json& j, const std::string& key, const std::string& ctx) {
  const auto it = j.find(key);
  if (it == j.end()) throw InvalidInput(ctx + ": missing required key '" + key + "'");
  return *it;
}

template <class T>
inline T jas(const json& j, const std::string& ctx) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw InvalidInput(ctx + ": wrong type");
  }
}

template <class T>
inline T jget(const json& j, const std::string& key, const std::string& ctx, T fallback) {
  const auto it = j.find(key);
  if (it == j.end()) return fallback;
  return jas<T>(*it, ctx + "." + key);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Seeded randomization for scenario inputs

// All scenario-level randomness (test vectors, regions, families) comes from
// the dedicated stream of one counter generator, so every derived object is
// a pure function of the scenario seed.
class ScenarioRandom {
 public:
  explicit ScenarioRandom(std::uint64_t seed) : rng_(seed, rng_stream::kScenario) {}

  double uniform() { return rng_.uniform(idx_++); }
  double normal() { return rng_.normal(idx_++); }

  int pick(int n) {
    if (n <= 0) throw Error("ScenarioRandom::pick: empty range");
    return std::min(n - 1, static_cast<int>(uniform() * n));
  }

  std::vector<int> pick_distinct(int n, int k) {
    k = std::min(k, n);
    std::vector<int> out;
    while (static_cast<int>(out.size()) < k) {
      const int v = pick(n);
      if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
    }
    return out;
  }

  // Sparse distribution with `support` nonzero entries inside the carrier.
  // zero_mean subtracts the average over the chosen entries, which keeps the
  // support and makes the total exactly representable (small sums).
  Vec distribution(int dim, const VertexSet& carrier, int support, bool zero_mean = false) {
    if (carrier.empty()) throw Error("ScenarioRandom::distribution: empty carrier");
    if (zero_mean) support = std::max(support, 2);
    const auto picks = pick_distinct(static_cast<int>(carrier.size()), support);
    Vec f = Vec::Zero(dim);
    std::vector<double> vals;
    for (std::size_t i = 0; i < picks.size(); ++i) vals.push_back(normal());
    if (zero_mean) {
      double mean = 0.0;
      for (double v : vals) mean += v;
      mean /= vals.size();
      for (double& v : vals) v -= mean;
    }
    for (std::size_t i = 0; i < picks.size(); ++i) f[carrier[picks[i]]] = vals[i];
    return f;
  }

  // A graph ball that leaves a nonempty exterior; shrinks the radius if the
  // ball swallows too much of the mesh.
  RegionPartition ball_partition(const Mesh& mesh, int radius) {
    const int center = pick(mesh.vertex_count);
    for (int r = radius; r >= 0; --r) {
      VertexSet omega = support_of(graph_bump(mesh, center, r));
      if (static_cast<int>(omega.size()) == mesh.vertex_count) continue;
      RegionPartition p = make_partition(mesh, omega);
      if (!p.exterior.empty()) return p;
    }
    throw Error("ball_partition: no admissible radius on this mesh");
  }

  WickPolynomial wick_poly_of_degrees(const FieldOperatorPtr& fop, const VertexSet& carrier,
                                      const std::vector<int>& degrees) {
    WickPolynomial p(fop);
    for (int deg : degrees) {
      std::vector<Vec> factors;
      for (int d = 0; d < deg; ++d)
        factors.push_back(distribution(fop->size(), carrier, 1 + pick(3)));
      p.add_term(normal(), std::move(factors));
    }
    return p;
  }

  WickPolynomial wick_poly(const FieldOperatorPtr& fop, const VertexSet& carrier, int max_degree,
                           int terms) {
    std::vector<int> degrees;
    for (int t = 0; t < terms; ++t) degrees.push_back(1 + pick(max_degree));
    return wick_poly_of_degrees(fop, carrier, degrees);
  }

  PlainPolynomial plain_poly(int dim, const VertexSet& carrier, int max_degree, int terms,
                             bool zero_mean = false) {
    PlainPolynomial p;
    for (int t = 0; t < terms; ++t) {
      const int deg = 1 + pick(max_degree);
      std::vector<Vec> factors;
      for (int d = 0; d < deg; ++d)
        factors.push_back(distribution(dim, carrier, 1 + pick(3), zero_mean));
      p.add_term(normal(), std::move(factors));
    }
    return p;
  }

 private:
  CounterRng rng_;
  std::uint64_t idx_ = 0;
};

// ---------------------------------------------------------------------------
// Scenario document

struct Scenario {
  std::string name;
  std::uint64_t seed = 1;
  MeshSpec spec;
  std::string mesh_file;  // overrides spec when nonempty
  double mass = 1.0;
  std::vector<double> masses;  // optional sweep for the projection check
  json checks = json::array();
  json raw;  // the parsed document, fingerprinted into the report
};

inline Scenario parse_scenario(const json& j, const std::filesystem::path& base_dir = {}) {
  if (!j.is_object()) throw InvalidInput("scenario: document must be a JSON object");
  detail::check_known_keys(j, {"name", "seed", "mesh", "mass", "masses", "checks"}, "scenario");
  Scenario sc;
  sc.raw = j;
  sc.name = detail::jas<std::string>(detail::jreq(j, "name", "scenario"), "scenario.name");
  if (sc.name.empty() || sc.name.find('/') != std::string::npos)
    throw InvalidInput("scenario.name: must be a nonempty name without '/'");
  sc.seed = detail::jget<std::uint64_t>(j, "seed", "scenario", 1);
  sc.mass = detail::jget<double>(j, "mass", "scenario", 1.0);
  if (sc.mass < 0.0) throw InvalidInput("scenario.mass: must be >= 0");
  sc.masses = detail::jget<std::vector<double>>(j, "masses", "scenario", {});

  const json& mesh = detail::jreq(j, "mesh", "scenario");
  if (!mesh.is_object()) throw InvalidInput("scenario.mesh: must be an object");
  const std::string kind =
      detail::jas<std::string>(detail::jreq(mesh, "kind", "scenario.mesh"), "scenario.mesh.kind");
  if (kind == "torus") {
    detail::check_known_keys(mesh, {"kind", "nx", "ny", "spacing"}, "scenario.mesh");
    sc.spec.kind = MeshKind::torus_lattice;
    sc.spec.nx = detail::jget<int>(mesh, "nx", "scenario.mesh", 8);
    sc.spec.ny = detail::jget<int>(mesh, "ny", "scenario.mesh", 8);
    sc.spec.spacing = detail::jget<double>(mesh, "spacing", "scenario.mesh", 1.0);
  } else if (kind == "icosphere") {
    detail::check_known_keys(mesh, {"kind", "subdivisions", "radius"}, "scenario.mesh");
    sc.spec.kind = MeshKind::icosphere;
    sc.spec.subdivisions = detail::jget<int>(mesh, "subdivisions", "scenario.mesh", 1);
    sc.spec.radius = detail::jget<double>(mesh, "radius", "scenario.mesh", 1.0);
  } else if (kind == "cylinder") {
    detail::check_known_keys(mesh, {"kind", "n_around", "rows", "spacing"}, "scenario.mesh");
    sc.spec.kind = MeshKind::cylinder_collar;
    sc.spec.nx = detail::jget<int>(mesh, "n_around", "scenario.mesh", 6);
    sc.spec.ny = detail::jget<int>(mesh, "rows", "scenario.mesh", 4);
    sc.spec.spacing = detail::jget<double>(mesh, "spacing", "scenario.mesh", 1.0);
  } else if (kind == "file") {
    detail::check_known_keys(mesh, {"kind", "path"}, "scenario.mesh");
    const std::string p = detail::jas<std::string>(detail::jreq(mesh, "path", "scenario.mesh"),
                                                   "scenario.mesh.path");
    sc.mesh_file = (base_dir / p).string();
  } else {
    throw InvalidInput("scenario.mesh.kind: unknown kind '" + kind + "'");
  }

  const json& checks = detail::jreq(j, "checks", "scenario");
  if (!checks.is_array() || checks.empty())
    throw InvalidInput("scenario.checks: must be a nonempty array");
  static const std::vector<std::string> known = {"projection", "markov",      "reflection",
                                                 "zero-mass",  "sewing",      "interacting"};
  for (std::size_t i = 0; i < checks.size(); ++i) {
    const std::string ctx = "scenario.checks[" + std::to_string(i) + "]";
    if (!checks[i].is_object()) throw InvalidInput(ctx + ": must be an object");
    const std::string type =
        detail::jas<std::string>(detail::jreq(checks[i], "type", ctx), ctx + ".type");
    if (std::find(known.begin(), known.end(), type) == known.end())
      throw InvalidInput(ctx + ".type: unknown check '" + type + "'");
  }
  sc.checks = checks;
  return sc;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open scenario file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InvalidInput("scenario " + path + ": " + e.what());
  }
  return parse_scenario(j, std::filesystem::path(path).parent_path());
}

// ---------------------------------------------------------------------------
// Check execution

struct CheckContext {
  std::shared_ptr<const Mesh> mesh;
  MeshSpec spec;
  bool from_file = false;
  double mass = 1.0;
  std::vector<double> masses;
  std::uint64_t seed = 1;
};

struct CheckResult {
  std::string name;
  bool passed = false;
  std::vector<std::pair<std::string, double>> metrics;
  std::vector<std::string> notes;
  std::vector<std::pair<std::string, std::string>> tables;  // stem -> csv content

  void metric(const std::string& key, double value) { metrics.emplace_back(key, value); }
};

namespace detail {

struct ReflectionSetup {
  Involution inv;
  RegionPartition part;
};

// The reflection geometry of a mesh: the involution, the open half, the
// fixed hyperplane as boundary.  Lattice reflections need an even extent so
// both fixed lines are vertex lines.
inline ReflectionSetup reflection_setup(const CheckContext& ctx) {
  ReflectionSetup r;
  if (ctx.from_file)
    throw InvalidInput("reflection checks need a generated torus or icosphere mesh");
  if (ctx.spec.kind == MeshKind::torus_lattice) {
    const int nx = ctx.spec.nx, ny = ctx.spec.ny;
    if (nx % 2 != 0 || nx < 4)
      throw InvalidInput("reflection checks on a torus need even nx >= 4");
    r.inv.perm = lattice_reflection(nx, ny, 0);
    r.part.omega = lattice_lines(nx, ny, 0, 1, nx / 2 - 1);
    r.part.boundary =
        set_union(lattice_lines(nx, ny, 0, 0, 0), lattice_lines(nx, ny, 0, nx / 2, nx / 2));
    r.part.exterior = lattice_lines(nx, ny, 0, nx / 2 + 1, nx - 1);
  } else if (ctx.spec.kind == MeshKind::icosphere) {
    r.inv.perm = mirror_involution(*ctx.mesh, 0);
    VertexSet omega, boundary, exterior;
    for (int v = 0; v < ctx.mesh->vertex_count; ++v) {
      const double x = ctx.mesh->positions[v].x();
      if (x > 0.0) omega.push_back(v);
      else if (x < 0.0) exterior.push_back(v);
      else boundary.push_back(v);
    }
    r.part.omega = make_vertex_set(std::move(omega));
    r.part.boundary = make_vertex_set(std::move(boundary));
    r.part.exterior = make_vertex_set(std::move(exterior));
  } else {
    throw InvalidInput("reflection checks need a torus or icosphere mesh");
  }
  const auto chk = validate_involution(*ctx.mesh, r.inv.perm, r.part);
  if (!chk.valid) throw Error("reflection setup: " + chk.message);
  return r;
}

inline std::vector<double> mass_list(const CheckContext& ctx) {
  if (!ctx.masses.empty()) return ctx.masses;
  return {ctx.mass};
}

// --- projection: e_{A^c} e_{closure} = e_{boundary} and the three-way split

inline CheckResult check_projection(const CheckContext& ctx, const json& params) {
  check_known_keys(params, {"type", "partitions", "pairs", "radius", "tol_norm", "tol_sum"},
                   "projection");
  const int n_part = jget<int>(params, "partitions", "projection", 4);
  const int pairs = jget<int>(params, "pairs", "projection", 10);
  const int radius = jget<int>(params, "radius", "projection", 2);
  const double tol_norm = jget<double>(params, "tol_norm", "projection", 1e-10);
  const double tol_sum = jget<double>(params, "tol_sum", "projection", 1e-13);

  CheckResult res;
  ScenarioRandom rand(ctx.seed);
  CsvTable tab_part({"mass", "partition", "interior", "boundary", "projection_residual"});
  CsvTable tab_dec({"mass", "partition", "sample", "sum_residual", "support_exact"});
  double worst_norm = 0.0, worst_sum = 0.0;
  bool supports_ok = true;
  const int n = ctx.mesh->vertex_count;
  VertexSet all(n);
  for (int i = 0; i < n; ++i) all[i] = i;

  for (double m : mass_list(ctx)) {
    if (!(m > 0.0)) throw InvalidInput("projection check needs m > 0");
    const FieldOperatorPtr fop = assemble_operator(ctx.mesh, m);
    for (int p = 0; p < n_part; ++p) {
      const RegionPartition part = rand.ball_partition(*ctx.mesh, radius);
      const double resid = premarkov_residual(fop, part);
      worst_norm = std::max(worst_norm, resid);
      tab_part.row({csv_num(m), std::to_string(p), std::to_string(part.omega.size()),
                    std::to_string(part.boundary.size()), csv_num(resid)});
      for (int s = 0; s < pairs; ++s) {
        const Vec f = rand.distribution(n, all, 4);
        const TripleDecomposition dec = triple_decompose(fop, part, f);
        const bool sup = supported_in(dec.interior, part.closure()) &&
                         supported_in(dec.exterior, part.omega_complement()) &&
                         supported_in(dec.boundary, part.boundary);
        supports_ok = supports_ok && sup;
        const double sum_res = (f - dec.interior - dec.exterior - dec.boundary).cwiseAbs().maxCoeff() /
                               std::max(1.0, f.cwiseAbs().maxCoeff());
        worst_sum = std::max(worst_sum, sum_res);
        tab_dec.row({csv_num(m), std::to_string(p), std::to_string(s), csv_num(sum_res),
                     sup ? "1" : "0"});
      }
    }
  }
  res.metric("max_projection_residual", worst_norm);
  res.metric("max_sum_residual", worst_sum);
  res.metric("supports_exact", supports_ok ? 1.0 : 0.0);
  res.passed = supports_ok && worst_norm <= tol_norm && worst_sum <= tol_sum;
  res.tables.emplace_back("partitions", tab_part.str());
  res.tables.emplace_back("decompositions", tab_dec.str());
  return res;
}

// --- markov: E_{omega^c} F = E_{boundary} F for F supported in the closure

inline CheckResult check_markov(const CheckContext& ctx, const json& params) {
  check_known_keys(params,
                   {"type", "partitions", "families", "degree", "terms", "radius", "tol", "mc_n",
                    "mc_sigma"},
                   "markov");
  const int n_part = jget<int>(params, "partitions", "markov", 3);
  const int families = jget<int>(params, "families", "markov", 5);
  const int degree = jget<int>(params, "degree", "markov", 3);
  const int terms = jget<int>(params, "terms", "markov", 2);
  const int radius = jget<int>(params, "radius", "markov", 2);
  const double tol = jget<double>(params, "tol", "markov", 1e-9);
  const int mc_n = jget<int>(params, "mc_n", "markov", 0);
  const double mc_sigma = jget<double>(params, "mc_sigma", "markov", 4.0);

  if (!(ctx.mass > 0.0)) throw InvalidInput("markov check needs m > 0");
  CheckResult res;
  ScenarioRandom rand(ctx.seed);
  const FieldOperatorPtr fop = assemble_operator(ctx.mesh, ctx.mass);
  CsvTable tab({"partition", "family", "degree", "distance", "scale"});
  double worst = 0.0;
  bool mc_ok = true;
  double worst_mc_z = 0.0;

  for (int p = 0; p < n_part; ++p) {
    const RegionPartition part = rand.ball_partition(*ctx.mesh, radius);
    const VertexSet closure = part.closure();
    const VertexSet comp = part.omega_complement();
    for (int k = 0; k < families; ++k) {
      const WickPolynomial f = rand.wick_poly(fop, closure, degree, terms);
      const WickPolynomial via_comp = conditional_expectation(comp, f);
      const WickPolynomial via_bdry = conditional_expectation(part.boundary, f);
      const double scale = std::max(1.0, max_abs_coefficient(via_bdry));
      const double dist = coefficientwise_distance(via_comp, via_bdry) / scale;
      worst = std::max(worst, dist);
      tab.row({std::to_string(p), std::to_string(k), std::to_string(f.degree()), csv_num(dist),
               csv_num(scale)});
    }
    if (mc_n > 0) {
      // Spot check against the sampling side: condition one polynomial on
      // the complement and compare the closed form with Monte Carlo.
      const WickPolynomial f = rand.wick_poly(fop, closure, std::min(degree, 2), terms);
      const PlainPolynomial plain = to_plain(f);
      const Vec phi = sample_field(fop, mix64(ctx.seed ^ (0xABCDull + p)), 1)[0].values;
      const double exact = to_plain(conditional_expectation(comp, f)).evaluate(phi);
      const Estimate mc =
          mc_conditional_oracle(fop, comp, plain, phi, mix64(ctx.seed + 17 * p), mc_n);
      const double z = mc.stderr_ > 0.0 ? (mc.value - exact) / mc.stderr_ : 0.0;
      worst_mc_z = std::max(worst_mc_z, std::abs(z));
      mc_ok = mc_ok && std::abs(z) <= mc_sigma;
    }
  }
  res.metric("max_distance", worst);
  if (mc_n > 0) res.metric("max_mc_z", worst_mc_z);
  res.passed = worst <= tol && mc_ok;
  res.tables.emplace_back("families", tab.str());
  return res;
}

// --- reflection: Gram positivity for families in the closed half

inline CheckResult check_reflection(const CheckContext& ctx, const json& params) {
  check_known_keys(params,
                   {"type", "families", "size", "degree", "terms", "tol", "negative_control",
                    "control_tries"},
                   "reflection");
  const int families = jget<int>(params, "families", "reflection", 20);
  const int size = jget<int>(params, "size", "reflection", 4);
  const int degree = jget<int>(params, "degree", "reflection", 3);
  const int terms = jget<int>(params, "terms", "reflection", 2);
  const double tol = jget<double>(params, "tol", "reflection", 1e-9);
  const bool control = jget<bool>(params, "negative_control", "reflection", true);
  const int control_tries = jget<int>(params, "control_tries", "reflection", 50);

  if (!(ctx.mass > 0.0))
    throw InvalidInput("reflection check needs m > 0; use zero-mass for the limit");
  const ReflectionSetup refl = reflection_setup(ctx);
  const FieldOperatorPtr fop = assemble_operator(ctx.mesh, ctx.mass);
  const VertexSet closed_half = refl.part.closure();

  CheckResult res;
  ScenarioRandom rand(ctx.seed);
  CsvTable tab({"family", "size", "min_eigenvalue", "scale", "positive"});
  double worst_rel = 0.0;  // most negative min eigenvalue, relative
  bool all_positive = true;
  for (int k = 0; k < families; ++k) {
    std::vector<WickPolynomial> fam;
    for (int i = 0; i < size; ++i) fam.push_back(rand.wick_poly(fop, closed_half, degree, terms));
    const GramReport rep = rp_gram(refl.inv, refl.part, fam, tol);
    all_positive = all_positive && rep.positive;
    worst_rel = std::min(worst_rel, rep.min_eigenvalue / std::max(rep.scale, 1.0));
    tab.row({std::to_string(k), std::to_string(size), csv_num(rep.min_eigenvalue),
             csv_num(rep.scale), rep.positive ? "1" : "0"});
  }
  res.metric("families_checked", families);
  res.metric("min_relative_eigenvalue", worst_rel);
  res.metric("all_positive", all_positive ? 1.0 : 0.0);

  bool control_ok = true;
  if (control) {
    // Families allowed to straddle the reflection plane must be able to
    // break positivity; find one indefinite Gram to show the support
    // condition is doing real work.
    const int n = ctx.mesh->vertex_count;
    VertexSet all(n);
    for (int i = 0; i < n; ++i) all[i] = i;
    double found = 0.0;
    int tries = 0;
    for (; tries < control_tries; ++tries) {
      std::vector<WickPolynomial> fam;
      for (int i = 0; i < size; ++i) fam.push_back(rand.wick_poly(fop, all, degree, terms));
      const GramReport rep = rp_gram(refl.inv, refl.part, fam, tol, false);
      if (!rep.positive) {
        found = rep.min_eigenvalue / std::max(rep.scale, 1.0);
        break;
      }
    }
    control_ok = tries < control_tries;
    res.metric("control_found_indefinite", control_ok ? 1.0 : 0.0);
    res.metric("control_min_relative_eigenvalue", found);
    if (!control_ok)
      res.notes.push_back("no indefinite crossing family found within the search budget");
  }
  res.passed = all_positive && control_ok;
  res.tables.emplace_back("grams", tab.str());
  return res;
}

// --- zero-mass: Gram positivity in the m -> 0 limit and convergence to it

inline CheckResult check_zero_mass(const CheckContext& ctx, const json& params) {
  check_known_keys(params, {"type", "masses", "families", "size", "degree", "terms", "tol"},
                   "zero-mass");
  std::vector<double> masses =
      jget<std::vector<double>>(params, "masses", "zero-mass", {1e-1, 1e-2, 1e-3});
  const int families = jget<int>(params, "families", "zero-mass", 5);
  const int size = jget<int>(params, "size", "zero-mass", 3);
  const int degree = jget<int>(params, "degree", "zero-mass", 2);
  const int terms = jget<int>(params, "terms", "zero-mass", 2);
  const double tol = jget<double>(params, "tol", "zero-mass", 1e-9);
  if (masses.size() < 2) throw InvalidInput("zero-mass.masses: need at least two masses");
  for (std::size_t i = 0; i + 1 < masses.size(); ++i) {
    if (!(masses[i] > masses[i + 1]) || !(masses[i + 1] > 0.0))
      throw InvalidInput("zero-mass.masses: must be strictly decreasing and positive");
  }

  const ReflectionSetup refl = reflection_setup(ctx);
  const VertexSet closed_half = refl.part.closure();
  const int n = ctx.mesh->vertex_count;

  CheckResult res;
  ScenarioRandom rand(ctx.seed);
  const FieldOperatorPtr fop0 = assemble_operator(ctx.mesh, 0.0);
  std::vector<FieldOperatorPtr> fops;
  for (double m : masses) fops.push_back(assemble_operator(ctx.mesh, m));

  CsvTable tab({"family", "mass", "min_eigenvalue", "scale", "distance_to_limit"});
  bool all_positive = true, all_decreasing = true;
  double worst_rel = 0.0;
  for (int k = 0; k < families; ++k) {
    // Mean-zero plain families: the same polynomials carry across the mass
    // sweep and stay inside the massless pairing's domain.
    std::vector<PlainPolynomial> fam;
    for (int i = 0; i < size; ++i)
      fam.push_back(rand.plain_poly(n, closed_half, degree, terms, true));
    const GramReport rep0 = rp_gram_plain(fop0, refl.inv, refl.part, fam, tol);
    all_positive = all_positive && rep0.positive;
    worst_rel = std::min(worst_rel, rep0.min_eigenvalue / std::max(rep0.scale, 1.0));
    tab.row({std::to_string(k), "0", csv_num(rep0.min_eigenvalue), csv_num(rep0.scale), "0"});
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t im = 0; im < masses.size(); ++im) {
      const GramReport rep = rp_gram_plain(fops[im], refl.inv, refl.part, fam, tol);
      const double dist = (rep.matrix - rep0.matrix).norm() / std::max(1.0, rep0.matrix.norm());
      all_positive = all_positive && rep.positive;
      worst_rel = std::min(worst_rel, rep.min_eigenvalue / std::max(rep.scale, 1.0));
      all_decreasing = all_decreasing && dist < prev;
      prev = dist;
      tab.row({std::to_string(k), csv_num(masses[im]), csv_num(rep.min_eigenvalue),
               csv_num(rep.scale), csv_num(dist)});
    }
  }
  res.metric("all_positive", all_positive ? 1.0 : 0.0);
  res.metric("min_relative_eigenvalue", worst_rel);
  res.metric("distances_decreasing", all_decreasing ? 1.0 : 0.0);
  res.passed = all_positive && all_decreasing;
  res.tables.emplace_back("grams", tab.str());
  return res;
}

// --- sewing: amplitudes compose across the seam, independent of the caps

inline CheckResult check_sewing(const CheckContext& ctx, const json& params) {
  check_known_keys(params, {"type", "setup", "pairs", "degree", "terms", "tol", "swap_tol"},
                   "sewing");
  const json setup_spec = params.contains("setup") ? params.at("setup") : json::object();
  if (!setup_spec.is_object()) throw InvalidInput("sewing.setup: must be an object");
  const std::string setup_kind = jget<std::string>(setup_spec, "kind", "sewing.setup",
                                                   std::string("cylinders"));
  const int pairs = jget<int>(params, "pairs", "sewing", 20);
  const int degree = jget<int>(params, "degree", "sewing", 3);
  const int terms = jget<int>(params, "terms", "sewing", 2);
  const double tol = jget<double>(params, "tol", "sewing", 1e-8);
  const double swap_tol = jget<double>(params, "swap_tol", "sewing", 1e-10);
  if (!(ctx.mass > 0.0)) throw InvalidInput("sewing check needs m > 0");

  auto build = [&](CapStyle c1, CapStyle c2) {
    CapParams p1, p2;
    p1.style = c1;
    p2.style = c2;
    if (setup_kind == "cylinders") {
      check_known_keys(setup_spec, {"kind", "n_around", "rows"}, "sewing.setup");
      const int n_around = jget<int>(setup_spec, "n_around", "sewing.setup", 6);
      const int rows = jget<int>(setup_spec, "rows", "sewing.setup", 4);
      return sew_cylinders_to_torus(n_around, rows, ctx.mass, p1, p2);
    }
    if (setup_kind == "hemispheres") {
      check_known_keys(setup_spec, {"kind", "subdivisions"}, "sewing.setup");
      const int sub = jget<int>(setup_spec, "subdivisions", "sewing.setup", 1);
      return sew_icosphere_halves(sub, ctx.mass, p1, p2);
    }
    throw InvalidInput("sewing.setup.kind: unknown kind '" + setup_kind + "'");
  };
  const SewSetup cone = build(CapStyle::cone, CapStyle::cone);
  const SewSetup ring = build(CapStyle::ring_cone, CapStyle::ring_cone);

  const int n1 = cone.capped1.original_count, n2 = cone.capped2.original_count;
  VertexSet piece1(n1), piece2(n2);
  for (int i = 0; i < n1; ++i) piece1[i] = i;
  for (int i = 0; i < n2; ++i) piece2[i] = i;

  CheckResult res;
  ScenarioRandom rand(ctx.seed);
  CsvTable tab({"sample", "cap", "lhs", "rhs", "residual"});
  double worst = 0.0, worst_swap = 0.0, largest = 0.0;
  for (int s = 0; s < pairs; ++s) {
    // The same term data instantiated against each capped operator, so the
    // two cap styles see literally identical polynomials on the pieces.
    // Factors live on the original piece vertices; only the padded length
    // differs between cap styles.
    auto recap = [](const WickPolynomial& p, const FieldOperatorPtr& fop, int orig) {
      WickPolynomial out(fop);
      for (const auto& [mono, coef] : p.terms()) {
        std::vector<Vec> fs;
        for (const Vec& v : mono) {
          Vec g = Vec::Zero(fop->size());
          g.head(orig) = v.head(orig);
          fs.push_back(std::move(g));
        }
        out.add_term(coef, std::move(fs));
      }
      return out;
    };
    // Shared degree list: mismatched degrees pair to exactly zero, which
    // would make the identity hold vacuously.
    std::vector<int> degrees;
    for (int t = 0; t < terms; ++t) degrees.push_back(1 + rand.pick(degree));
    const WickPolynomial f_cone = rand.wick_poly_of_degrees(cone.fop1, piece1, degrees);
    const WickPolynomial g_cone = rand.wick_poly_of_degrees(cone.fop2, piece2, degrees);
    const SewReport rc = sew_check(cone, f_cone, g_cone, tol);
    const SewReport rr = sew_check(ring, recap(f_cone, ring.fop1, n1),
                                   recap(g_cone, ring.fop2, n2), tol);
    const double swap = std::abs(rc.lhs - rr.lhs) / std::max(1.0, std::abs(rc.lhs));
    worst = std::max({worst, rc.residual, rr.residual});
    worst_swap = std::max(worst_swap, swap);
    largest = std::max({largest, std::abs(rc.lhs), std::abs(rc.rhs)});
    tab.row({std::to_string(s), "cone", csv_num(rc.lhs), csv_num(rc.rhs), csv_num(rc.residual)});
    tab.row({std::to_string(s), "ring", csv_num(rr.lhs), csv_num(rr.rhs), csv_num(rr.residual)});
  }
  res.metric("max_residual", worst);
  res.metric("max_cap_swap", worst_swap);
  res.metric("max_abs_value", largest);
  if (largest == 0.0) res.notes.push_back("all pairings vanished; the identity was not exercised");
  res.passed = worst <= tol && worst_swap <= swap_tol && largest > 0.0;
  res.tables.emplace_back("amplitudes", tab.str());
  return res;
}

// --- interacting: the Markov comparison under a Wick vertex potential

inline CheckResult check_interacting(const CheckContext& ctx, const json& params) {
  check_known_keys(params,
                   {"type", "coeffs", "region", "interior", "degree", "terms", "n_outer",
                    "n_inner", "pool", "z_pool_max", "z_each_max", "ks_min"},
                   "interacting");
  const std::vector<double> coeffs =
      jget<std::vector<double>>(params, "coeffs", "interacting", {0, 0, 0, 0, 0.1});
  const int degree = jget<int>(params, "degree", "interacting", 2);
  const int terms = jget<int>(params, "terms", "interacting", 2);
  NuMarkovParams mp;
  mp.seed = ctx.seed;
  mp.n_outer = jget<int>(params, "n_outer", "interacting", 12);
  mp.n_inner = jget<int>(params, "n_inner", "interacting", 4000);
  mp.outer_pool = jget<int>(params, "pool", "interacting", 0);
  const double z_pool_max = jget<double>(params, "z_pool_max", "interacting", 3.0);
  const double z_each_max = jget<double>(params, "z_each_max", "interacting", 4.5);
  const double ks_min = jget<double>(params, "ks_min", "interacting", 0.0);

  if (!(ctx.mass > 0.0)) throw InvalidInput("interacting check needs m > 0");
  const int n = ctx.mesh->vertex_count;
  const FieldOperatorPtr fop = assemble_operator(ctx.mesh, ctx.mass);

  VertexSet region;
  if (params.contains("region")) {
    region = make_vertex_set(jas<std::vector<int>>(params.at("region"), "interacting.region"));
  } else {
    region.resize(n);
    for (int i = 0; i < n; ++i) region[i] = i;
  }
  const Potential pot(fop, region, coeffs);

  ScenarioRandom rand(ctx.seed);
  RegionPartition part;
  if (params.contains("interior")) {
    part = make_partition(*ctx.mesh,
                          jas<std::vector<int>>(params.at("interior"), "interacting.interior"));
  } else {
    part = rand.ball_partition(*ctx.mesh, 1);
  }
  const PlainPolynomial f = rand.plain_poly(n, part.closure(), degree, terms);

  CheckResult res;
  const NuEstimate one = nu_moment(fop, pot, PlainPolynomial::constant(1.0),
                                   {mix64(ctx.seed ^ 0x0F00D), 256, 8});
  res.metric("unit_moment_error", std::abs(one.value - 1.0));

  const NuMarkovReport rep = nu_markov_report(fop, pot, part, f, mp);
  CsvTable tab({"config", "lhs", "rhs", "diff", "se", "z"});
  for (const auto& row : rep.rows) {
    tab.row({std::to_string(row.config), csv_num(row.lhs), csv_num(row.rhs), csv_num(row.diff),
             csv_num(row.se), csv_num(row.z)});
  }
  res.metric("pooled_z", rep.pooled_z);
  res.metric("max_abs_z", rep.max_abs_z);
  bool ks_ok = true;
  if (ks_min > 0.0 && rep.rows.size() >= 20) {
    std::vector<double> zs;
    for (const auto& row : rep.rows) zs.push_back(row.z);
    const double p = ks_normal_pvalue(zs);
    res.metric("ks_p", p);
    ks_ok = p >= ks_min;
  }
  res.passed = one.value == 1.0 && one.stderr_ == 0.0 && std::abs(rep.pooled_z) <= z_pool_max &&
               rep.max_abs_z <= z_each_max && ks_ok;
  res.tables.emplace_back("configs", tab.str());
  return res;
}

inline CheckResult run_check(const CheckContext& ctx, const std::string& type,
                             const json& params) {
  if (type == "projection") return check_projection(ctx, params);
  if (type == "markov") return check_markov(ctx, params);
  if (type == "reflection") return check_reflection(ctx, params);
  if (type == "zero-mass") return check_zero_mass(ctx, params);
  if (type == "sewing") return check_sewing(ctx, params);
  if (type == "interacting") return check_interacting(ctx, params);
  throw InvalidInput("unknown check type '" + type + "'");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Running scenarios

struct ScenarioOutcome {
  json report;
  std::vector<std::pair<std::string, std::string>> files;  // name -> content
  bool passed = false;
  std::string fingerprint;
};

namespace detail {

inline std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace detail

// Executes every check of the scenario and assembles the report in memory.
// Throws InvalidInput on any malformed input; a thrown scenario produces no
// output at all.  Numerical failures do not throw: they appear as failed
// checks in the report, and `passed` turns false.
inline ScenarioOutcome run_scenario(const Scenario& sc, bool parallel = false) {
  CheckContext base;
  base.spec = sc.spec;
  if (!sc.mesh_file.empty()) {
    base.mesh = std::make_shared<Mesh>(load_mesh(sc.mesh_file));
    base.from_file = true;
  } else {
    base.mesh = std::make_shared<Mesh>(build_mesh(sc.spec));
  }
  base.mass = sc.mass;
  base.masses = sc.masses;

  // Disambiguate repeated check types so table filenames stay unique.
  std::map<std::string, int> type_count, type_seen;
  for (const auto& c : sc.checks) type_count[c.at("type").get<std::string>()]++;
  std::vector<std::string> names;
  std::vector<CheckContext> ctxs;
  for (std::size_t k = 0; k < sc.checks.size(); ++k) {
    const std::string type = sc.checks[k].at("type").get<std::string>();
    const int seen = ++type_seen[type];
    names.push_back(type_count[type] > 1 ? type + "-" + std::to_string(seen) : type);
    CheckContext ctx = base;
    ctx.seed = mix64(sc.seed ^ (0x9E3779B97F4A7C15ull * (k + 1)));
    ctxs.push_back(ctx);
  }

  std::vector<CheckResult> results(sc.checks.size());
  auto run_one = [&](std::size_t k) {
    CheckResult r = detail::run_check(ctxs[k], sc.checks[k].at("type").get<std::string>(),
                                      sc.checks[k]);
    r.name = names[k];
    return r;
  };
  if (parallel && sc.checks.size() > 1) {
    std::vector<std::future<CheckResult>> futs;
    for (std::size_t k = 0; k < sc.checks.size(); ++k)
      futs.push_back(std::async(std::launch::async, run_one, k));
    for (std::size_t k = 0; k < sc.checks.size(); ++k) results[k] = futs[k].get();
  } else {
    for (std::size_t k = 0; k < sc.checks.size(); ++k) results[k] = run_one(k);
  }

  ScenarioOutcome out;
  json checks = json::array();
  bool all = true;
  for (const auto& r : results) {
    json jc;
    jc["name"] = r.name;
    jc["passed"] = r.passed;
    json metrics;
    for (const auto& [k, v] : r.metrics) metrics[k] = v;
    jc["metrics"] = metrics;
    jc["notes"] = r.notes;
    json tables;
    for (const auto& [stem, content] : r.tables) {
      const std::string fname = r.name + "-" + stem + ".csv";
      tables[stem] = fname;
      out.files.emplace_back(fname, content);
    }
    jc["tables"] = tables;
    checks.push_back(jc);
    all = all && r.passed;
  }

  json rep;
  rep["scenario"] = sc.name;
  rep["seed"] = sc.seed;
  rep["mass"] = sc.mass;
  if (!sc.masses.empty()) rep["masses"] = sc.masses;
  rep["config_fingerprint"] = hex64(fnv1a(sc.raw.dump()));
  rep["mesh_fingerprint"] = mesh_fingerprint(*base.mesh);
  rep["vertex_count"] = base.mesh->vertex_count;
  json env;
  env["compiler"] = __VERSION__;
  env["cpp_standard"] = static_cast<long>(__cplusplus);
  env["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                 "." + std::to_string(EIGEN_MINOR_VERSION);
#ifdef NDEBUG
  env["build"] = "release";
#else
  env["build"] = "debug";
#endif
  rep["environment"] = env;
  rep["checks"] = checks;
  json file_list = json::array();
  for (const auto& [name, content] : out.files) file_list.push_back(name);
  rep["files"] = file_list;
  rep["passed"] = all;

  std::uint64_t h = fnv1a(rep.dump());
  for (const auto& [name, content] : out.files) {
    h = fnv1a(name, h);
    h = fnv1a(content, h);
  }
  out.fingerprint = hex64(h);
  rep["report_fingerprint"] = out.fingerprint;
  rep["timestamp"] = detail::utc_timestamp();
  out.report = std::move(rep);
  out.passed = all;
  return out;
}

// Writes report.json and every CSV table under out_dir.
inline void write_outcome(const ScenarioOutcome& out, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  {
    std::ofstream f(out_dir / "report.json");
    if (!f) throw Error("cannot write " + (out_dir / "report.json").string());
    f << out.report.dump(2) << '\n';
  }
  for (const auto& [name, content] : out.files) {
    std::ofstream f(out_dir / name);
    if (!f) throw Error("cannot write " + (out_dir / name).string());
    f << content;
  }
}

}  // namespace mfield
