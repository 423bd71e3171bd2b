// Command line front end.
//
// Exit codes: 0 success, 1 numerical failure or runtime error, 2 invalid
// input (bad arguments, malformed scenario or mesh files).

#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "mfield/harness.hpp"

namespace {

using namespace mfield;

int cmd_run(const std::string& path, std::string out_dir, bool parallel) {
  const Scenario sc = load_scenario(path);
  if (out_dir.empty()) out_dir = "mfield-out/" + sc.name;
  const ScenarioOutcome out = run_scenario(sc, parallel);
  write_outcome(out, out_dir);
  for (const auto& c : out.report.at("checks")) {
    std::string detail;
    for (const auto& [k, v] : c.at("metrics").items())
      detail += "  " + k + "=" + detail::csv_num(v.get<double>());
    std::printf("[%s] %s%s\n", c.at("passed").get<bool>() ? "PASS" : "FAIL",
                c.at("name").get<std::string>().c_str(), detail.c_str());
  }
  std::printf("scenario %s: %s  report=%s/report.json  fingerprint=%s\n", sc.name.c_str(),
              out.passed ? "PASS" : "FAIL", out_dir.c_str(), out.fingerprint.c_str());
  return out.passed ? 0 : 1;
}

int cmd_mesh(const std::string& kind, const MeshSpec& base, const std::string& out_path) {
  MeshSpec spec = base;
  if (kind == "torus") spec.kind = MeshKind::torus_lattice;
  else if (kind == "icosphere") spec.kind = MeshKind::icosphere;
  else if (kind == "cylinder") spec.kind = MeshKind::cylinder_collar;
  else throw InvalidInput("mesh: unknown kind '" + kind + "'");
  const Mesh m = build_mesh(spec);
  if (!out_path.empty()) save_mesh(m, out_path);
  std::printf("vertices=%d edges=%d fingerprint=%s\n", m.vertex_count, m.edge_count(),
              mesh_fingerprint(m).c_str());
  if (!m.polygons.empty()) std::printf("faces=%zu euler=%d\n", m.polygons.size(), m.euler_characteristic());
  for (const auto& [name, cyc] : m.cycles) std::printf("cycle %s: %zu vertices\n", name.c_str(), cyc.size());
  return 0;
}

int cmd_verify(const std::string& dir) {
  const std::filesystem::path base(dir);
  std::ifstream in(base / "report.json");
  if (!in) throw InvalidInput("verify: cannot open " + (base / "report.json").string());
  json rep;
  try {
    in >> rep;
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("verify: malformed report: ") + e.what());
  }
  if (!rep.contains("report_fingerprint") || !rep.contains("files"))
    throw InvalidInput("verify: report has no fingerprint data");
  const std::string recorded = rep.at("report_fingerprint").get<std::string>();
  json stripped = rep;
  stripped.erase("report_fingerprint");
  stripped.erase("timestamp");
  std::uint64_t h = fnv1a(stripped.dump());
  for (const auto& fj : rep.at("files")) {
    const std::string fname = fj.get<std::string>();
    std::ifstream f(base / fname, std::ios::binary);
    if (!f) throw InvalidInput("verify: missing table file " + fname);
    std::string content((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    h = fnv1a(fname, h);
    h = fnv1a(content, h);
  }
  const std::string actual = hex64(h);
  if (actual != recorded) {
    std::printf("MISMATCH recorded=%s actual=%s\n", recorded.c_str(), actual.c_str());
    return 1;
  }
  std::printf("OK fingerprint=%s scenario=%s\n", recorded.c_str(),
              rep.value("scenario", std::string("?")).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaussian and interacting fields on discretized manifolds"};
  app.require_subcommand(1);

  std::string scenario_path, out_dir;
  bool parallel = false;
  auto* run = app.add_subcommand("run", "run a scenario file and write its report");
  run->add_option("scenario", scenario_path, "scenario JSON file")->required();
  run->add_option("--out", out_dir, "output directory (default mfield-out/<name>)");
  run->add_flag("--parallel", parallel, "run the scenario's checks concurrently");

  std::string mesh_kind, mesh_out;
  MeshSpec spec;
  auto* mesh = app.add_subcommand("mesh", "build a mesh, print its summary, optionally save it");
  mesh->add_option("kind", mesh_kind, "torus | icosphere | cylinder")->required();
  mesh->add_option("--nx", spec.nx, "lattice extent x / circumference");
  mesh->add_option("--ny", spec.ny, "lattice extent y / cylinder rows");
  mesh->add_option("--subdivisions", spec.subdivisions, "icosphere subdivision level");
  mesh->add_option("--spacing", spec.spacing, "lattice spacing");
  mesh->add_option("--radius", spec.radius, "sphere radius");
  mesh->add_option("--out", mesh_out, "write the mesh as JSON");

  std::string verify_dir;
  auto* verify = app.add_subcommand("verify", "recompute a report directory's fingerprint");
  verify->add_option("dir", verify_dir, "scenario output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (run->parsed()) return cmd_run(scenario_path, out_dir, parallel);
    if (mesh->parsed()) return cmd_mesh(mesh_kind, spec, mesh_out);
    if (verify->parsed()) return cmd_verify(verify_dir);
  } catch (const InvalidInput& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
