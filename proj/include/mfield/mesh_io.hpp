#pragma once

// Mesh serialization.  Format:
//
// {
//   "vertices": n,
//   "positions": [[x,y,z], ...] | null,
//   "triangles": [[a,b,c], ...] | null,     // when all faces are triangles
//   "polygons":  [[...], ...],              // present instead for quad faces
//   "stiffness": [[i,j,value], ...],        // upper triangle, diagonal included
//   "mass": [...],
//   "cycles": {"name": [...], ...}
// }
//
// Doubles round-trip bitwise (shortest round-trip decimal printing).

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mfield/mesh.hpp"

namespace mfield {

inline nlohmann::json mesh_to_json(const Mesh& m) {
  nlohmann::json j;
  j["vertices"] = m.vertex_count;
  if (m.positions.empty()) {
    j["positions"] = nullptr;
  } else {
    auto arr = nlohmann::json::array();
    for (const auto& p : m.positions) arr.push_back({p.x(), p.y(), p.z()});
    j["positions"] = std::move(arr);
  }
  const bool all_tri = !m.polygons.empty() &&
                       std::all_of(m.polygons.begin(), m.polygons.end(),
                                   [](const std::vector<int>& p) { return p.size() == 3; });
  if (m.polygons.empty()) {
    j["triangles"] = nullptr;
  } else if (all_tri) {
    j["triangles"] = m.polygons;
  } else {
    j["triangles"] = nullptr;
    j["polygons"] = m.polygons;
  }
  auto st = nlohmann::json::array();
  for (int c = 0; c < m.stiffness.outerSize(); ++c) {
    for (SpMat::InnerIterator it(m.stiffness, c); it; ++it) {
      const int r = static_cast<int>(it.row());
      if (r <= c && it.value() != 0.0) st.push_back({r, c, it.value()});
    }
  }
  j["stiffness"] = std::move(st);
  j["mass"] = std::vector<double>(m.mass.data(), m.mass.data() + m.mass.size());
  j["cycles"] = nlohmann::json::object();
  for (const auto& [name, cyc] : m.cycles) j["cycles"][name] = cyc;
  return j;
}

inline Mesh mesh_from_json(const nlohmann::json& j, MeshDiagnostics* diag = nullptr) {
  try {
    if (!j.is_object()) throw InvalidInput("mesh: expected an object");
    if (!j.contains("vertices") || !j["vertices"].is_number_integer())
      throw InvalidInput("mesh: missing integer field 'vertices'");
    const int n = j["vertices"].get<int>();
    if (!j.contains("stiffness") || !j["stiffness"].is_array())
      throw InvalidInput("mesh: missing array field 'stiffness'");
    std::vector<std::array<double, 3>> upper;
    for (const auto& t : j["stiffness"]) {
      if (!t.is_array() || t.size() != 3) throw InvalidInput("mesh: stiffness entries are [i,j,value]");
      upper.push_back({t[0].get<double>(), t[1].get<double>(), t[2].get<double>()});
    }
    if (!j.contains("mass") || !j["mass"].is_array()) throw InvalidInput("mesh: missing array field 'mass'");
    const auto mv = j["mass"].get<std::vector<double>>();
    Vec mass(static_cast<int>(mv.size()));
    for (std::size_t i = 0; i < mv.size(); ++i) mass[static_cast<int>(i)] = mv[i];

    std::vector<Eigen::Vector3d> positions;
    if (j.contains("positions") && !j["positions"].is_null()) {
      for (const auto& p : j["positions"]) {
        if (!p.is_array() || p.size() != 3) throw InvalidInput("mesh: positions entries are [x,y,z]");
        positions.emplace_back(p[0].get<double>(), p[1].get<double>(), p[2].get<double>());
      }
    }
    std::vector<std::vector<int>> polygons;
    if (j.contains("triangles") && !j["triangles"].is_null()) {
      for (const auto& t : j["triangles"]) polygons.push_back(t.get<std::vector<int>>());
    }
    if (j.contains("polygons")) {
      for (const auto& t : j["polygons"]) polygons.push_back(t.get<std::vector<int>>());
    }
    std::map<std::string, std::vector<int>> cycles;
    if (j.contains("cycles")) {
      for (auto it = j["cycles"].begin(); it != j["cycles"].end(); ++it)
        cycles[it.key()] = it.value().get<std::vector<int>>();
    }
    return mesh_from_data(n, upper, mass, std::move(positions), std::move(polygons),
                          std::move(cycles), diag);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("mesh: malformed JSON value: ") + e.what());
  }
}

inline void save_mesh(const Mesh& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("save_mesh: cannot open " + path);
  out << mesh_to_json(m).dump(2) << "\n";
}

inline Mesh load_mesh(const std::string& path, MeshDiagnostics* diag = nullptr) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("load_mesh: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput("load_mesh: " + path + ": " + e.what());
  }
  return mesh_from_json(j, diag);
}

// Stable content fingerprint of the field-theoretic data (L, W), used in
// reports to tie results to their inputs.
inline std::string mesh_fingerprint(const Mesh& m) {
  std::uint64_t h = fnv1a(&m.vertex_count, sizeof(m.vertex_count));
  for (int c = 0; c < m.stiffness.outerSize(); ++c) {
    for (SpMat::InnerIterator it(m.stiffness, c); it; ++it) {
      if (it.value() == 0.0) continue;
      const int r = static_cast<int>(it.row());
      const double v = it.value();
      h = fnv1a(&r, sizeof(r), h);
      h = fnv1a(&c, sizeof(c), h);
      h = fnv1a(&v, sizeof(v), h);
    }
  }
  h = fnv1a(m.mass.data(), sizeof(double) * m.mass.size(), h);
  return hex64(h);
}

}  // namespace mfield
