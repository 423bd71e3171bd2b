#pragma once

// Discretized manifolds: weighted graphs carrying a stiffness matrix L
// (graph Laplacian, row sums zero) and a positive lumped mass vector W.
// Builders produce flat tori, cylinder collars and geodesic icospheres;
// meshes can also be assembled from raw data.  Region partitions,
// reflection involutions and boundary-identifying glue live here too.
//
// Vertex orderings (stable, documented so external tools can address
// vertices):
//   torus_lattice(nx, ny):    v = y*nx + x,  x fastest
//   cylinder_collar(n, rows): v = r*n + i,   i around the circumference
//   icosphere(s):             construction order; cycle "equator" lists the
//                             fixed circle of the x -> -x reflection ordered
//                             by angle atan2(z, y)
//
// Exactness notes.  Diagonal entries of L and the mass vector are formed by
// sorted-order summation, so meshes with a bitwise mirror symmetry get
// bitwise symmetric L and W, and reflection involutions validate with zero
// tolerance.  Lattice assembly is plaquette-additive with dyadic weights,
// so gluing two half tori reproduces the full torus matrices exactly.

#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "mfield/common.hpp"

namespace mfield {

struct Mesh {
  int vertex_count = 0;
  std::vector<Eigen::Vector3d> positions;   // optional embedding, empty if absent
  std::vector<std::vector<int>> polygons;   // faces, empty if absent
  SpMat stiffness;                          // L, symmetric, zero row sums
  Vec mass;                                 // W, strictly positive
  std::map<std::string, std::vector<int>> cycles;

  std::vector<int> neighbors(int v) const {
    std::vector<int> out;
    for (SpMat::InnerIterator it(stiffness, v); it; ++it) {
      if (it.row() != v && it.value() != 0.0) out.push_back(static_cast<int>(it.row()));
    }
    return out;
  }

  bool adjacent(int u, int v) const { return u != v && stiffness.coeff(u, v) != 0.0; }

  int edge_count() const {
    int nz = 0;
    for (int c = 0; c < stiffness.outerSize(); ++c)
      for (SpMat::InnerIterator it(stiffness, c); it; ++it)
        if (it.row() != c && it.value() != 0.0) ++nz;
    return nz / 2;
  }

  // V - E + F; requires face data.
  int euler_characteristic() const {
    if (polygons.empty()) throw InvalidInput("euler_characteristic: mesh has no face data");
    return vertex_count - edge_count() + static_cast<int>(polygons.size());
  }

  double total_mass() const { return mass.sum(); }
};

struct MeshDiagnostics {
  std::vector<std::string> warnings;
};

namespace detail {

// Sum in ascending value order.  Equal multisets of doubles produce bitwise
// equal results regardless of how the values were collected.
inline double sorted_sum(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  double s = 0.0;
  for (double x : xs) s += x;
  return s;
}

// Accumulates edge weights and per-vertex mass contributions, then builds
// the final Mesh with sorted-sum diagonals and masses.
class MeshBuilder {
 public:
  explicit MeshBuilder(int n) : n_(n), mass_parts_(n) {}

  void add_edge_weight(int a, int b, double w) {
    if (a == b) throw Error("MeshBuilder: self edge");
    edge_parts_[ordered(a, b)].push_back(w);
  }

  void add_mass(int v, double dm) { mass_parts_[v].push_back(dm); }

  void add_polygon(std::vector<int> poly) { polygons_.push_back(std::move(poly)); }

  std::vector<std::vector<int>> polygons_;
  std::vector<Eigen::Vector3d> positions_;
  std::map<std::string, std::vector<int>> cycles_;

  Mesh finish(MeshDiagnostics* diag = nullptr) const {
    std::vector<std::vector<double>> row_offdiag(n_);
    std::vector<Triplet> trips;
    trips.reserve(4 * edge_parts_.size() + n_);
    for (const auto& [e, parts] : edge_parts_) {
      double w = parts.size() == 1 ? parts[0] : sorted_sum(parts);
      if (w == 0.0) continue;  // right angles cancel the edge; adjacency follows L
      if (w < 0.0 && diag) {
        diag->warnings.push_back("negative edge weight between vertices " +
                                 std::to_string(e.first) + " and " + std::to_string(e.second));
      }
      trips.emplace_back(e.first, e.second, -w);
      trips.emplace_back(e.second, e.first, -w);
      row_offdiag[e.first].push_back(-w);
      row_offdiag[e.second].push_back(-w);
    }
    for (int v = 0; v < n_; ++v) trips.emplace_back(v, v, -sorted_sum(row_offdiag[v]));

    Mesh m;
    m.vertex_count = n_;
    m.stiffness.resize(n_, n_);
    m.stiffness.setFromTriplets(trips.begin(), trips.end());
    m.stiffness.makeCompressed();
    m.mass.resize(n_);
    for (int v = 0; v < n_; ++v) {
      if (mass_parts_[v].empty()) throw Error("MeshBuilder: vertex " + std::to_string(v) + " has no mass");
      m.mass[v] = sorted_sum(mass_parts_[v]);
      if (!(m.mass[v] > 0.0)) throw Error("MeshBuilder: nonpositive mass at vertex " + std::to_string(v));
    }
    m.positions = positions_;
    m.polygons = polygons_;
    m.cycles = cycles_;
    return m;
  }

 private:
  static std::pair<int, int> ordered(int a, int b) { return {std::min(a, b), std::max(a, b)}; }
  int n_;
  std::map<std::pair<int, int>, std::vector<double>> edge_parts_;
  std::vector<std::vector<double>> mass_parts_;
};

inline Eigen::Vector3d normalize_to(const Eigen::Vector3d& p, double radius) {
  return p * (radius / p.norm());
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Builders

// Flat torus, nx * ny vertices at spacing a.  Assembly is per plaquette:
// each of the four edges gains weight 1/2 and each corner a^2/4 of mass,
// so every interior quantity is dyadic and exact.
inline Mesh build_torus_lattice(int nx, int ny, double spacing = 1.0) {
  if (nx < 3 || ny < 3) throw InvalidInput("torus_lattice: each periodic direction needs >= 3 sites");
  if (!(spacing > 0.0)) throw InvalidInput("torus_lattice: spacing must be positive");
  const int n = nx * ny;
  detail::MeshBuilder mb(n);
  const double dm = 0.25 * spacing * spacing;
  auto vid = [nx, ny](int x, int y) { return ((y % ny + ny) % ny) * nx + ((x % nx + nx) % nx); };
  for (int y = 0; y < ny; ++y) {
    for (int x = 0; x < nx; ++x) {
      const int c[4] = {vid(x, y), vid(x + 1, y), vid(x + 1, y + 1), vid(x, y + 1)};
      for (int k = 0; k < 4; ++k) {
        mb.add_edge_weight(c[k], c[(k + 1) % 4], 0.5);
        mb.add_mass(c[k], dm);
      }
      mb.add_polygon({c[0], c[1], c[2], c[3]});
    }
  }
  mb.positions_.reserve(n);
  for (int y = 0; y < ny; ++y)
    for (int x = 0; x < nx; ++x)
      mb.positions_.push_back({spacing * x, spacing * y, 0.0});
  return mb.finish();
}

// Cylinder: periodic in the first direction (n_around >= 3), open in the
// second (n_rows >= 2).  Rim vertices carry half mass and rim circumferential
// edges half weight, exactly the values a torus plaquette assembly would
// leave on a cut row.  Cycles "bottom" (row 0) and "top" (row n_rows-1).
inline Mesh build_cylinder_collar(int n_around, int n_rows, double spacing = 1.0) {
  if (n_around < 3) throw InvalidInput("cylinder_collar: circumference needs >= 3 sites");
  if (n_rows < 2) throw InvalidInput("cylinder_collar: need >= 2 rows");
  if (!(spacing > 0.0)) throw InvalidInput("cylinder_collar: spacing must be positive");
  const int n = n_around * n_rows;
  detail::MeshBuilder mb(n);
  const double dm = 0.25 * spacing * spacing;
  auto vid = [n_around](int i, int r) { return r * n_around + ((i % n_around + n_around) % n_around); };
  for (int r = 0; r + 1 < n_rows; ++r) {
    for (int i = 0; i < n_around; ++i) {
      const int c[4] = {vid(i, r), vid(i + 1, r), vid(i + 1, r + 1), vid(i, r + 1)};
      for (int k = 0; k < 4; ++k) {
        mb.add_edge_weight(c[k], c[(k + 1) % 4], 0.5);
        mb.add_mass(c[k], dm);
      }
      mb.add_polygon({c[0], c[1], c[2], c[3]});
    }
  }
  mb.positions_.reserve(n);
  for (int r = 0; r < n_rows; ++r) {
    for (int i = 0; i < n_around; ++i) {
      const double a = 2.0 * M_PI * i / n_around;
      mb.positions_.push_back({std::cos(a), std::sin(a), spacing * r});
    }
  }
  std::vector<int> bottom(n_around), top(n_around);
  for (int i = 0; i < n_around; ++i) {
    bottom[i] = vid(i, 0);
    top[i] = vid(i, n_rows - 1);
  }
  mb.cycles_["bottom"] = bottom;
  mb.cycles_["top"] = top;
  return mb.finish();
}

namespace detail {

struct TriangleSoup {
  std::vector<Eigen::Vector3d> verts;
  std::vector<std::array<int, 3>> faces;
};

// Icosahedron with the x -> -x mirror symmetry acting vertex-wise.
inline TriangleSoup base_icosahedron() {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  TriangleSoup s;
  s.verts = {{-1, t, 0}, {1, t, 0},  {-1, -t, 0}, {1, -t, 0}, {0, -1, t},  {0, 1, t},
             {0, -1, -t}, {0, 1, -t}, {t, 0, -1},  {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
  s.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9},  {5, 11, 4},
             {11, 10, 2}, {10, 7, 6}, {7, 1, 8},   {3, 9, 4},  {3, 4, 2},   {3, 2, 6},  {3, 6, 8},
             {3, 8, 9},   {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  return s;
}

// Splits every face that the mirror maps to itself along the median through
// the midpoint of its crossing edge.  Afterwards no face is mirror invariant
// and the fixed point set of the reflection is a vertex cycle; plain midpoint
// subdivision preserves both properties.
inline void split_mirror_invariant_faces(TriangleSoup& s, const std::vector<int>& mirror,
                                         double radius) {
  std::map<std::pair<int, int>, int> midpoint;
  std::vector<std::array<int, 3>> out;
  for (const auto& f : s.faces) {
    std::array<int, 3> mf{mirror[f[0]], mirror[f[1]], mirror[f[2]]};
    std::set<int> a(f.begin(), f.end()), b(mf.begin(), mf.end());
    if (a != b) {
      out.push_back(f);
      continue;
    }
    int apex = -1, p = -1, q = -1;
    for (int k = 0; k < 3; ++k) {
      if (mirror[f[k]] == f[k]) apex = k;
    }
    if (apex < 0) throw Error("icosphere: invariant face without fixed vertex");
    p = f[(apex + 1) % 3];
    q = f[(apex + 2) % 3];
    auto key = std::minmax(p, q);
    auto it = midpoint.find(key);
    int m;
    if (it == midpoint.end()) {
      m = static_cast<int>(s.verts.size());
      s.verts.push_back(normalize_to(s.verts[p] + s.verts[q], radius));
      midpoint.emplace(key, m);
    } else {
      m = it->second;
    }
    out.push_back({f[apex], p, m});
    out.push_back({f[apex], m, q});
  }
  s.faces = std::move(out);
}

inline void subdivide_project(TriangleSoup& s, double radius) {
  std::map<std::pair<int, int>, int> midpoint;
  auto mid = [&](int a, int b) {
    auto key = std::minmax(a, b);
    auto it = midpoint.find(key);
    if (it != midpoint.end()) return it->second;
    const int m = static_cast<int>(s.verts.size());
    s.verts.push_back(normalize_to(s.verts[a] + s.verts[b], radius));
    midpoint.emplace(key, m);
    return m;
  };
  std::vector<std::array<int, 3>> out;
  out.reserve(4 * s.faces.size());
  for (const auto& f : s.faces) {
    const int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
    out.push_back({f[0], ab, ca});
    out.push_back({f[1], bc, ab});
    out.push_back({f[2], ca, bc});
    out.push_back({ab, bc, ca});
  }
  s.faces = std::move(out);
}

// Cotangent stiffness with barycentric lumped mass.
inline Mesh assemble_triangle_mesh(const TriangleSoup& s,
                                   std::map<std::string, std::vector<int>> cycles,
                                   MeshDiagnostics* diag = nullptr) {
  const int n = static_cast<int>(s.verts.size());
  MeshBuilder mb(n);
  for (const auto& f : s.faces) {
    const Eigen::Vector3d& pa = s.verts[f[0]];
    const Eigen::Vector3d& pb = s.verts[f[1]];
    const Eigen::Vector3d& pc = s.verts[f[2]];
    // Area from a mirror-invariant vertex order: mirrored faces then produce
    // bitwise equal areas, so lumped masses stay exactly mirror symmetric.
    std::array<Eigen::Vector3d, 3> q{pa, pb, pc};
    std::sort(q.begin(), q.end(), [](const Eigen::Vector3d& u, const Eigen::Vector3d& v) {
      return std::make_tuple(u.y(), u.z(), std::abs(u.x())) <
             std::make_tuple(v.y(), v.z(), std::abs(v.x()));
    });
    const double area2 = (q[1] - q[0]).cross(q[2] - q[0]).norm();
    if (!(area2 > 1e-14)) throw InvalidInput("assemble_triangle_mesh: degenerate triangle");
    const double third = area2 / 6.0;  // area/3
    for (int k = 0; k < 3; ++k) {
      const int i = f[k], j = f[(k + 1) % 3], o = f[(k + 2) % 3];
      const Eigen::Vector3d u = s.verts[i] - s.verts[o];
      const Eigen::Vector3d v = s.verts[j] - s.verts[o];
      const double cot = u.dot(v) / u.cross(v).norm();
      mb.add_edge_weight(i, j, 0.5 * cot);
      mb.add_mass(f[k], third);
    }
    mb.add_polygon({f[0], f[1], f[2]});
  }
  mb.positions_ = s.verts;
  mb.cycles_ = std::move(cycles);
  return mb.finish(diag);
}

}  // namespace detail

// Geodesic sphere adapted to the x -> -x reflection: faces the reflection
// maps to themselves are pre-split along the symmetry plane, after which the
// fixed point set is a genuine vertex cycle ("equator", 6 * 2^s vertices at
// subdivision s) and every face lies in one closed half space.  Mirror pairs
// of vertices have bitwise mirrored coordinates, so the reflection preserves
// L and W exactly and equator membership is the exact test x == 0.
inline Mesh build_icosphere(int subdivisions, double radius = 1.0,
                            MeshDiagnostics* diag = nullptr) {
  if (subdivisions < 0 || subdivisions > 6) throw InvalidInput("icosphere: subdivisions in [0, 6]");
  if (!(radius > 0.0)) throw InvalidInput("icosphere: radius must be positive");
  auto s = detail::base_icosahedron();
  for (auto& p : s.verts) p = detail::normalize_to(p, radius);
  const std::vector<int> base_mirror = {1, 0, 3, 2, 4, 5, 6, 7, 10, 11, 8, 9};
  detail::split_mirror_invariant_faces(s, base_mirror, radius);
  for (int k = 0; k < subdivisions; ++k) detail::subdivide_project(s, radius);

  std::vector<int> equator;
  for (int v = 0; v < static_cast<int>(s.verts.size()); ++v) {
    if (s.verts[v].x() == 0.0) equator.push_back(v);
  }
  std::sort(equator.begin(), equator.end(), [&](int a, int b) {
    return std::atan2(s.verts[a].z(), s.verts[a].y()) < std::atan2(s.verts[b].z(), s.verts[b].y());
  });

  Mesh m = detail::assemble_triangle_mesh(s, {{"equator", equator}}, diag);
  const int ne = static_cast<int>(equator.size());
  for (int i = 0; i < ne; ++i) {
    if (!m.adjacent(equator[i], equator[(i + 1) % ne]))
      throw Error("icosphere: equator is not a cycle");
  }
  return m;
}

enum class MeshKind { torus_lattice, icosphere, cylinder_collar };

struct MeshSpec {
  MeshKind kind = MeshKind::torus_lattice;
  int nx = 8, ny = 8;          // torus / cylinder (n_around = nx, n_rows = ny)
  int subdivisions = 1;        // icosphere
  double spacing = 1.0;
  double radius = 1.0;
};

inline Mesh build_mesh(const MeshSpec& spec) {
  switch (spec.kind) {
    case MeshKind::torus_lattice: return build_torus_lattice(spec.nx, spec.ny, spec.spacing);
    case MeshKind::icosphere: return build_icosphere(spec.subdivisions, spec.radius);
    case MeshKind::cylinder_collar: return build_cylinder_collar(spec.nx, spec.ny, spec.spacing);
  }
  throw InvalidInput("build_mesh: unknown kind");
}

// Arbitrary weighted-graph mesh from raw data.  Stiffness is given as
// upper-triangle triplets (diagonal included); the full matrix is mirrored,
// then validated: symmetric by construction, row sums ~ 0, masses positive.
inline Mesh mesh_from_data(int n, const std::vector<std::array<double, 3>>& stiffness_upper,
                           const Vec& mass,
                           std::vector<Eigen::Vector3d> positions = {},
                           std::vector<std::vector<int>> polygons = {},
                           std::map<std::string, std::vector<int>> cycles = {},
                           MeshDiagnostics* diag = nullptr) {
  if (n <= 0) throw InvalidInput("mesh_from_data: vertex count must be positive");
  if (mass.size() != n) throw InvalidInput("mesh_from_data: mass length mismatch");
  for (int i = 0; i < n; ++i) {
    if (!(mass[i] > 0.0)) throw InvalidInput("mesh_from_data: nonpositive mass at vertex " + std::to_string(i));
  }
  std::vector<Triplet> trips;
  double max_abs = 0.0;
  for (const auto& t : stiffness_upper) {
    const int i = static_cast<int>(t[0]), j = static_cast<int>(t[1]);
    if (i < 0 || j < 0 || i >= n || j >= n) throw InvalidInput("mesh_from_data: stiffness index out of range");
    if (i > j) throw InvalidInput("mesh_from_data: stiffness triplets must have i <= j");
    if (t[2] == 0.0) continue;
    max_abs = std::max(max_abs, std::abs(t[2]));
    trips.emplace_back(i, j, t[2]);
    if (i != j) {
      trips.emplace_back(j, i, t[2]);
      if (t[2] > 0.0 && diag) {
        diag->warnings.push_back("negative edge weight between vertices " + std::to_string(i) +
                                 " and " + std::to_string(j));
      }
    }
  }
  Mesh m;
  m.vertex_count = n;
  m.stiffness.resize(n, n);
  m.stiffness.setFromTriplets(trips.begin(), trips.end());
  m.stiffness.makeCompressed();
  const Vec rowsum = m.stiffness * Vec::Ones(n);
  const double tol = 1e-12 * std::max(1.0, max_abs);
  for (int i = 0; i < n; ++i) {
    if (std::abs(rowsum[i]) > tol)
      throw InvalidInput("mesh_from_data: stiffness row " + std::to_string(i) +
                         " does not sum to zero");
  }
  m.mass = mass;
  if (!positions.empty() && static_cast<int>(positions.size()) != n)
    throw InvalidInput("mesh_from_data: positions length mismatch");
  m.positions = std::move(positions);
  for (const auto& p : polygons) {
    for (int v : p)
      if (v < 0 || v >= n) throw InvalidInput("mesh_from_data: polygon index out of range");
  }
  m.polygons = std::move(polygons);
  for (const auto& [name, cyc] : cycles) {
    for (int v : cyc)
      if (v < 0 || v >= n) throw InvalidInput("mesh_from_data: cycle '" + name + "' index out of range");
  }
  m.cycles = std::move(cycles);
  return m;
}

// Path graph with unit edge weights and unit masses; handy for small
// interacting-field studies and hand-checkable tests.
inline Mesh make_path_mesh(int n) {
  if (n < 2) throw InvalidInput("make_path_mesh: need >= 2 vertices");
  std::vector<std::array<double, 3>> upper;
  for (int i = 0; i + 1 < n; ++i) upper.push_back({double(i), double(i + 1), -1.0});
  for (int i = 0; i < n; ++i) {
    const double deg = (i == 0 || i == n - 1) ? 1.0 : 2.0;
    upper.push_back({double(i), double(i), deg});
  }
  return mesh_from_data(n, upper, Vec::Ones(n));
}

// ---------------------------------------------------------------------------
// Region partitions

// Disjoint cover omega / boundary / exterior, where the boundary is the set
// of vertices outside omega with an edge into omega.  By construction no
// edge joins omega to the exterior.
struct RegionPartition {
  VertexSet omega, boundary, exterior;

  VertexSet closure() const { return set_union(omega, boundary); }
  VertexSet omega_complement() const { return set_union(boundary, exterior); }
};

inline RegionPartition make_partition(const Mesh& mesh, VertexSet omega) {
  const int n = mesh.vertex_count;
  for (int v : omega)
    if (v < 0 || v >= n) throw InvalidInput("make_partition: omega index out of range");
  omega = make_vertex_set(std::move(omega));
  if (omega.empty()) throw InvalidInput("make_partition: omega must be nonempty");
  if (static_cast<int>(omega.size()) == n) throw InvalidInput("make_partition: omega must be proper");
  std::vector<int> bset;
  for (int v : omega) {
    for (int u : mesh.neighbors(v)) {
      if (!set_contains(omega, u)) bset.push_back(u);
    }
  }
  RegionPartition p;
  p.omega = std::move(omega);
  p.boundary = make_vertex_set(std::move(bset));
  p.exterior = set_difference(set_complement(p.omega, n), p.boundary);
  return p;
}

// Vertex set of lattice lines {v : coord(v, axis) in [from, to]} on an
// nx * ny lattice (torus or cylinder with n_around = nx).
inline VertexSet lattice_lines(int nx, int ny, int axis, int from, int to) {
  if (axis != 0 && axis != 1) throw InvalidInput("lattice_lines: axis must be 0 or 1");
  VertexSet out;
  for (int y = 0; y < ny; ++y)
    for (int x = 0; x < nx; ++x) {
      const int c = axis == 0 ? x : y;
      if (c >= from && c <= to) out.push_back(y * nx + x);
    }
  return make_vertex_set(std::move(out));
}

// ---------------------------------------------------------------------------
// Involutions

struct Involution {
  std::vector<int> perm;

  int operator()(int v) const { return perm[v]; }

  // Pushforward on coefficient vectors: (theta f)[theta(i)] = f[i].
  Vec apply(const Vec& f) const {
    Vec out(f.size());
    for (int i = 0; i < f.size(); ++i) out[perm[i]] = f[i];
    return out;
  }

  VertexSet image(const VertexSet& s) const {
    VertexSet out;
    out.reserve(s.size());
    for (int v : s) out.push_back(perm[v]);
    return make_vertex_set(std::move(out));
  }
};

enum class InvolutionFailure {
  ok,
  bad_permutation,
  not_involutive,
  stiffness_not_preserved,
  mass_not_preserved,
  regions_not_swapped,
  boundary_not_fixed,
};

struct InvolutionCheck {
  bool valid = false;
  InvolutionFailure failure = InvolutionFailure::ok;
  std::string message;
  Involution involution;
};

// Checks that perm is a measure-preserving reflection for the partition:
// an involution preserving L and W entrywise, swapping omega with the
// exterior and fixing the boundary pointwise.  Builtin generators produce
// bitwise symmetric meshes, so the default tolerance is exact.
inline InvolutionCheck validate_involution(const Mesh& mesh, const std::vector<int>& perm,
                                           const RegionPartition& part, double tol = 0.0) {
  InvolutionCheck res;
  const int n = mesh.vertex_count;
  auto fail = [&](InvolutionFailure f, std::string msg) {
    res.valid = false;
    res.failure = f;
    res.message = std::move(msg);
    return res;
  };
  if (static_cast<int>(perm.size()) != n)
    return fail(InvolutionFailure::bad_permutation, "permutation length mismatch");
  std::vector<char> seen(n, 0);
  for (int v : perm) {
    if (v < 0 || v >= n || seen[v]) return fail(InvolutionFailure::bad_permutation, "not a bijection");
    seen[v] = 1;
  }
  for (int v = 0; v < n; ++v) {
    if (perm[perm[v]] != v)
      return fail(InvolutionFailure::not_involutive,
                  "perm^2 moves vertex " + std::to_string(v));
  }
  for (int v = 0; v < n; ++v) {
    if (std::abs(mesh.mass[perm[v]] - mesh.mass[v]) > tol)
      return fail(InvolutionFailure::mass_not_preserved,
                  "mass differs at vertex " + std::to_string(v));
  }
  for (int c = 0; c < mesh.stiffness.outerSize(); ++c) {
    for (SpMat::InnerIterator it(mesh.stiffness, c); it; ++it) {
      const double mirrored = mesh.stiffness.coeff(perm[it.row()], perm[c]);
      if (std::abs(mirrored - it.value()) > tol)
        return fail(InvolutionFailure::stiffness_not_preserved,
                    "stiffness entry (" + std::to_string(it.row()) + "," + std::to_string(c) +
                        ") not preserved");
    }
  }
  Involution inv{perm};
  if (inv.image(part.omega) != part.exterior)
    return fail(InvolutionFailure::regions_not_swapped, "omega does not map onto the exterior");
  for (int v : part.boundary) {
    if (perm[v] != v)
      return fail(InvolutionFailure::boundary_not_fixed,
                  "boundary vertex " + std::to_string(v) + " moves");
  }
  res.valid = true;
  res.involution = std::move(inv);
  return res;
}

// r -> -r (mod extent) in one lattice coordinate; fixed lines r = 0 and
// r = extent/2 (extent must be even for the latter to exist).
inline std::vector<int> lattice_reflection(int nx, int ny, int axis) {
  if (axis != 0 && axis != 1) throw InvalidInput("lattice_reflection: axis must be 0 or 1");
  std::vector<int> perm(nx * ny);
  for (int y = 0; y < ny; ++y)
    for (int x = 0; x < nx; ++x) {
      const int xr = axis == 0 ? (nx - x) % nx : x;
      const int yr = axis == 1 ? (ny - y) % ny : y;
      perm[y * nx + x] = yr * nx + xr;
    }
  return perm;
}

// Coordinate mirror p -> p with coordinate `axis` negated, matched exactly
// against stored positions (builtin spheres are bitwise mirror symmetric).
inline std::vector<int> mirror_involution(const Mesh& mesh, int axis = 0) {
  if (mesh.positions.empty()) throw InvalidInput("mirror_involution: mesh has no positions");
  if (axis < 0 || axis > 2) throw InvalidInput("mirror_involution: axis must be 0, 1 or 2");
  auto key = [](const Eigen::Vector3d& p) {
    std::array<double, 3> k{p.x() + 0.0, p.y() + 0.0, p.z() + 0.0};  // normalize -0
    return k;
  };
  std::map<std::array<double, 3>, int> index;
  for (int v = 0; v < mesh.vertex_count; ++v) {
    if (!index.emplace(key(mesh.positions[v]), v).second)
      throw InvalidInput("mirror_involution: duplicate vertex positions");
  }
  std::vector<int> perm(mesh.vertex_count);
  for (int v = 0; v < mesh.vertex_count; ++v) {
    Eigen::Vector3d q = mesh.positions[v];
    q[axis] = -q[axis];
    auto it = index.find(key(q));
    if (it == index.end())
      throw InvalidInput("mirror_involution: vertex " + std::to_string(v) + " has no mirror image");
    perm[v] = it->second;
  }
  return perm;
}

// ---------------------------------------------------------------------------
// Gluing

struct GluedMesh {
  Mesh mesh;
  std::vector<int> map_a, map_b;           // source vertex -> glued vertex
  std::vector<std::vector<int>> seams;     // glued-index seam cycles
};

namespace detail {

inline void check_cycle_edges(const Mesh& m, const std::vector<int>& cyc, const char* what) {
  const int k = static_cast<int>(cyc.size());
  if (k < 3) throw InvalidInput(std::string(what) + ": cycle needs >= 3 vertices");
  std::set<int> uniq(cyc.begin(), cyc.end());
  if (static_cast<int>(uniq.size()) != k) throw InvalidInput(std::string(what) + ": cycle repeats a vertex");
  for (int v : cyc)
    if (v < 0 || v >= m.vertex_count) throw InvalidInput(std::string(what) + ": cycle index out of range");
  for (int i = 0; i < k; ++i) {
    if (!m.adjacent(cyc[i], cyc[(i + 1) % k]))
      throw InvalidInput(std::string(what) + ": consecutive cycle vertices " +
                         std::to_string(cyc[i]) + "," + std::to_string(cyc[(i + 1) % k]) +
                         " are not adjacent");
  }
}

inline std::vector<double> offdiag_multiset_excluding(const Mesh& m, int v,
                                                      const std::set<int>& excluded) {
  std::vector<double> vals;
  for (SpMat::InnerIterator it(m.stiffness, v); it; ++it) {
    if (it.row() == v) continue;
    if (excluded.count(static_cast<int>(it.row()))) continue;
    if (it.value() != 0.0) vals.push_back(it.value());
  }
  std::sort(vals.begin(), vals.end());
  return vals;
}

}  // namespace detail

// Identifies matched boundary cycles of two meshes (cycles_a[s][i] with
// cycles_b[s][i]) and adds the stiffness and mass data, so the seam collar
// carries the merged values.  Requires identical collars on both sides:
// matched masses, matched seam-internal stiffness entries (diagonal
// included) and matched multisets of off-seam incident weights, to relative
// tolerance rtol.  Vertices of `a` keep their indices; non-seam vertices of
// `b` are appended in order.
inline GluedMesh glue_meshes(const Mesh& a, const std::vector<std::vector<int>>& cycles_a,
                             const Mesh& b, const std::vector<std::vector<int>>& cycles_b,
                             double rtol = 1e-12) {
  if (cycles_a.size() != cycles_b.size() || cycles_a.empty())
    throw InvalidInput("glue_meshes: need matching nonempty cycle lists");
  std::set<int> seam_a, seam_b;
  for (std::size_t s = 0; s < cycles_a.size(); ++s) {
    if (cycles_a[s].size() != cycles_b[s].size())
      throw InvalidInput("glue_meshes: seam " + std::to_string(s) + " length mismatch");
    detail::check_cycle_edges(a, cycles_a[s], "glue_meshes(a)");
    detail::check_cycle_edges(b, cycles_b[s], "glue_meshes(b)");
    for (int v : cycles_a[s])
      if (!seam_a.insert(v).second) throw InvalidInput("glue_meshes: seam cycles of a overlap");
    for (int v : cycles_b[s])
      if (!seam_b.insert(v).second) throw InvalidInput("glue_meshes: seam cycles of b overlap");
  }

  auto rel_close = [rtol](double x, double y) {
    return std::abs(x - y) <= rtol * std::max({std::abs(x), std::abs(y), 1.0});
  };
  // Collar identity checks.
  for (std::size_t s = 0; s < cycles_a.size(); ++s) {
    const auto& ca = cycles_a[s];
    const auto& cb = cycles_b[s];
    for (std::size_t i = 0; i < ca.size(); ++i) {
      if (!rel_close(a.mass[ca[i]], b.mass[cb[i]]))
        throw InvalidInput("glue_meshes: seam mass mismatch at seam " + std::to_string(s) +
                           " index " + std::to_string(i));
      const auto ma = detail::offdiag_multiset_excluding(a, ca[i], seam_a);
      const auto mb = detail::offdiag_multiset_excluding(b, cb[i], seam_b);
      if (ma.size() != mb.size())
        throw InvalidInput("glue_meshes: off-seam degree mismatch at seam " + std::to_string(s) +
                           " index " + std::to_string(i));
      for (std::size_t k = 0; k < ma.size(); ++k) {
        if (!rel_close(ma[k], mb[k]))
          throw InvalidInput("glue_meshes: off-seam weight mismatch at seam " + std::to_string(s) +
                             " index " + std::to_string(i));
      }
    }
    for (std::size_t i = 0; i < ca.size(); ++i) {
      for (std::size_t j = 0; j < ca.size(); ++j) {
        const double wa = a.stiffness.coeff(ca[i], ca[j]);
        const double wb = b.stiffness.coeff(cb[i], cb[j]);
        if (!rel_close(wa, wb))
          throw InvalidInput("glue_meshes: seam-internal stiffness mismatch at seam " +
                             std::to_string(s) + " (" + std::to_string(i) + "," +
                             std::to_string(j) + ")");
      }
    }
  }

  GluedMesh g;
  g.map_a.resize(a.vertex_count);
  for (int v = 0; v < a.vertex_count; ++v) g.map_a[v] = v;
  g.map_b.assign(b.vertex_count, -1);
  for (std::size_t s = 0; s < cycles_a.size(); ++s)
    for (std::size_t i = 0; i < cycles_a[s].size(); ++i) g.map_b[cycles_b[s][i]] = cycles_a[s][i];
  int next = a.vertex_count;
  for (int v = 0; v < b.vertex_count; ++v)
    if (g.map_b[v] < 0) g.map_b[v] = next++;
  const int n = next;

  std::vector<Triplet> trips;
  auto push_offdiag = [&trips](const Mesh& m, const std::vector<int>& map) {
    for (int c = 0; c < m.stiffness.outerSize(); ++c)
      for (SpMat::InnerIterator it(m.stiffness, c); it; ++it)
        if (it.row() != c) trips.emplace_back(map[it.row()], map[c], it.value());
  };
  push_offdiag(a, g.map_a);
  push_offdiag(b, g.map_b);
  SpMat off(n, n);
  off.setFromTriplets(trips.begin(), trips.end());
  off.makeCompressed();
  // Diagonal from merged off-diagonal rows keeps row sums exactly zero.
  std::vector<std::vector<double>> rows(n);
  for (int c = 0; c < off.outerSize(); ++c)
    for (SpMat::InnerIterator it(off, c); it; ++it)
      if (it.value() != 0.0) rows[it.row()].push_back(it.value());
  std::vector<Triplet> all;
  for (int c = 0; c < off.outerSize(); ++c)
    for (SpMat::InnerIterator it(off, c); it; ++it)
      if (it.value() != 0.0) all.emplace_back(it.row(), c, it.value());
  for (int v = 0; v < n; ++v) all.emplace_back(v, v, -detail::sorted_sum(rows[v]));

  g.mesh.vertex_count = n;
  g.mesh.stiffness.resize(n, n);
  g.mesh.stiffness.setFromTriplets(all.begin(), all.end());
  g.mesh.stiffness.makeCompressed();
  g.mesh.mass.resize(n);
  for (int v = 0; v < a.vertex_count; ++v) g.mesh.mass[v] = a.mass[v];
  for (int v = a.vertex_count; v < n; ++v) g.mesh.mass[v] = 0.0;
  for (int v = 0; v < b.vertex_count; ++v) {
    if (g.map_b[v] >= a.vertex_count) g.mesh.mass[g.map_b[v]] = b.mass[v];
  }
  for (std::size_t s = 0; s < cycles_a.size(); ++s)
    for (std::size_t i = 0; i < cycles_a[s].size(); ++i) {
      const int ga = cycles_a[s][i];
      g.mesh.mass[ga] = a.mass[ga] + b.mass[cycles_b[s][i]];
    }

  const bool has_pos = !a.positions.empty() && !b.positions.empty();
  if (has_pos) {
    g.mesh.positions.resize(n);
    for (int v = 0; v < a.vertex_count; ++v) g.mesh.positions[v] = a.positions[v];
    for (int v = 0; v < b.vertex_count; ++v)
      if (g.map_b[v] >= a.vertex_count) g.mesh.positions[g.map_b[v]] = b.positions[v];
  }
  for (const auto& p : a.polygons) g.mesh.polygons.push_back(p);
  for (const auto& p : b.polygons) {
    std::vector<int> q;
    q.reserve(p.size());
    for (int v : p) q.push_back(g.map_b[v]);
    g.mesh.polygons.push_back(std::move(q));
  }
  for (std::size_t s = 0; s < cycles_a.size(); ++s) {
    g.seams.push_back(cycles_a[s]);
    g.mesh.cycles["seam" + std::to_string(s)] = cycles_a[s];
  }
  return g;
}

inline GluedMesh glue_meshes(const Mesh& a, const std::vector<int>& cycle_a, const Mesh& b,
                             const std::vector<int>& cycle_b, double rtol = 1e-12) {
  return glue_meshes(a, std::vector<std::vector<int>>{cycle_a}, b,
                     std::vector<std::vector<int>>{cycle_b}, rtol);
}

// ---------------------------------------------------------------------------
// Submeshes

struct Submesh {
  Mesh mesh;
  std::vector<int> vertex_map;  // original -> sub index, -1 if absent
  std::vector<int> vertices;    // sub index -> original
};

// One closed hemisphere of a builtin icosphere, reassembled from its faces.
// sign > 0 selects x >= 0.  The boundary circle is recorded as cycle
// "boundary" in the same angular order as the sphere's equator.
inline Submesh icosphere_half(const Mesh& sphere, int sign) {
  if (sphere.positions.empty() || sphere.polygons.empty())
    throw InvalidInput("icosphere_half: need positions and faces");
  auto eq_it = sphere.cycles.find("equator");
  if (eq_it == sphere.cycles.end()) throw InvalidInput("icosphere_half: mesh has no equator cycle");

  std::vector<char> keep_vertex(sphere.vertex_count, 0);
  std::vector<std::array<int, 3>> faces;
  for (const auto& poly : sphere.polygons) {
    if (poly.size() != 3) throw InvalidInput("icosphere_half: non-triangular face");
    double sx = 0.0;
    for (int v : poly) sx += sphere.positions[v].x();
    if ((sign > 0 && sx > 0.0) || (sign <= 0 && sx < 0.0)) {
      faces.push_back({poly[0], poly[1], poly[2]});
      for (int v : poly) keep_vertex[v] = 1;
    }
  }

  Submesh sub;
  sub.vertex_map.assign(sphere.vertex_count, -1);
  for (int v = 0; v < sphere.vertex_count; ++v) {
    if (keep_vertex[v]) {
      sub.vertex_map[v] = static_cast<int>(sub.vertices.size());
      sub.vertices.push_back(v);
    }
  }
  detail::TriangleSoup s;
  s.verts.reserve(sub.vertices.size());
  for (int v : sub.vertices) s.verts.push_back(sphere.positions[v]);
  for (const auto& f : faces)
    s.faces.push_back({sub.vertex_map[f[0]], sub.vertex_map[f[1]], sub.vertex_map[f[2]]});
  std::vector<int> boundary;
  for (int v : eq_it->second) {
    if (sub.vertex_map[v] < 0) throw Error("icosphere_half: equator vertex missing from half");
    boundary.push_back(sub.vertex_map[v]);
  }
  sub.mesh = detail::assemble_triangle_mesh(s, {{"boundary", boundary}});
  return sub;
}

// ---------------------------------------------------------------------------
// Small vector helpers

inline Vec delta_vector(int n, int i) {
  Vec d = Vec::Zero(n);
  d[i] = 1.0;
  return d;
}

// Graph-distance hat function around `center`, zero beyond `radius` hops.
// This is a function-space profile; pair it with as_distribution.
inline Vec graph_bump(const Mesh& mesh, int center, int radius) {
  std::vector<int> dist(mesh.vertex_count, -1);
  std::deque<int> q{center};
  dist[center] = 0;
  while (!q.empty()) {
    const int v = q.front();
    q.pop_front();
    if (dist[v] >= radius) continue;
    for (int u : mesh.neighbors(v)) {
      if (dist[u] < 0) {
        dist[u] = dist[v] + 1;
        q.push_back(u);
      }
    }
  }
  Vec out = Vec::Zero(mesh.vertex_count);
  for (int v = 0; v < mesh.vertex_count; ++v) {
    if (dist[v] >= 0 && dist[v] <= radius)
      out[v] = 1.0 - static_cast<double>(dist[v]) / (radius + 1.0);
  }
  return out;
}

// A continuum function u corresponds to the discrete distribution W u.
inline Vec as_distribution(const Mesh& mesh, const Vec& values) {
  if (values.size() != mesh.vertex_count) throw InvalidInput("as_distribution: length mismatch");
  return mesh.mass.cwiseProduct(values);
}

inline bool is_connected(const Mesh& mesh) {
  if (mesh.vertex_count == 0) return true;
  std::vector<char> seen(mesh.vertex_count, 0);
  std::deque<int> q{0};
  seen[0] = 1;
  int count = 1;
  while (!q.empty()) {
    const int v = q.front();
    q.pop_front();
    for (int u : mesh.neighbors(v)) {
      if (!seen[u]) {
        seen[u] = 1;
        ++count;
        q.push_back(u);
      }
    }
  }
  return count == mesh.vertex_count;
}

}  // namespace mfield
