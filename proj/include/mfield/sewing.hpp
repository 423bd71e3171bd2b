#pragma once

// Sewing two bounded pieces along their boundary circles.
//
// Each piece M_i is a mesh with distinguished boundary cycles.  Capping the
// cycles with small disks produces a closed mesh M~_i carrying a field
// operator; gluing the two pieces along matched cycles produces the closed
// mesh M.  With C the union of the seam circles, the boundary amplitude of a
// polynomial F supported in M_i is its conditional expectation onto C_i, and
// pushing forward along the vertex embeddings j_i : M_i -> M,
//
//     integral (J_1 E_C1 F)(J_2 E_C2 G) d mu_M
//       = integral (J_1 F)(J_2 G) d mu_M.
//
// Because assembly is face-additive, the stiffness rows over the interior of
// M_i agree between M~_i and M, which makes the identity hold to solver
// accuracy; in particular the left side does not depend on how the pieces
// were capped.  Amplitudes computed in differently capped M~_i agree, and
// tests exploit that as a cap-swap invariance.

#include "mfield/wick.hpp"

namespace mfield {

enum class CapStyle { cone, ring_cone };

struct CapParams {
  CapStyle style = CapStyle::cone;
  double spoke_weight = 1.0;
};

struct CappedMesh {
  std::shared_ptr<const Mesh> mesh;
  int original_count = 0;                      // vertices [0, original_count) are the piece
  std::vector<std::vector<int>> cap_vertices;  // per capped cycle
};

namespace detail {

// Every consecutive cycle edge must lie on exactly one face when face data
// is available: the cycle has to be a genuine boundary.
inline void check_boundary_cycle(const Mesh& m, const std::vector<int>& cyc) {
  check_cycle_edges(m, cyc, "cap_boundary");
  if (m.polygons.empty()) return;
  std::map<std::pair<int, int>, int> face_count;
  for (const auto& poly : m.polygons) {
    const std::size_t k = poly.size();
    for (std::size_t i = 0; i < k; ++i) {
      auto key = std::minmax(poly[i], poly[(i + 1) % k]);
      ++face_count[{key.first, key.second}];
    }
  }
  const int k = static_cast<int>(cyc.size());
  for (int i = 0; i < k; ++i) {
    auto key = std::minmax(cyc[i], cyc[(i + 1) % k]);
    const auto it = face_count.find({key.first, key.second});
    const int cnt = it == face_count.end() ? 0 : it->second;
    if (cnt != 1)
      throw InvalidInput("cap_boundary: cycle edge " + std::to_string(cyc[i]) + "," +
                         std::to_string(cyc[(i + 1) % k]) + " lies on " + std::to_string(cnt) +
                         " faces; not a boundary");
  }
}

}  // namespace detail

// Closes the given boundary cycles with disk caps.  Original vertices keep
// their indices; cap vertices are appended.  The cone cap adds one apex with
// spokes to every cycle vertex; the ring_cone cap adds an intermediate ring
// (circumferential weight 1/2, matching a lattice rim) before the apex.
// Cap vertex masses copy the collar scale: ring vertices take the matched
// cycle vertex's mass, apexes the cycle average.
inline CappedMesh cap_boundary(const Mesh& m, const std::vector<std::vector<int>>& cycles,
                               const CapParams& params = {}) {
  if (cycles.empty()) throw InvalidInput("cap_boundary: no cycles");
  if (!(params.spoke_weight > 0.0)) throw InvalidInput("cap_boundary: spoke weight must be positive");
  {
    std::set<int> seen;
    for (const auto& cyc : cycles) {
      detail::check_boundary_cycle(m, cyc);
      for (int v : cyc)
        if (!seen.insert(v).second) throw InvalidInput("cap_boundary: cycles overlap");
    }
  }

  int extra = 0;
  for (const auto& cyc : cycles)
    extra += params.style == CapStyle::cone ? 1 : static_cast<int>(cyc.size()) + 1;
  const int n0 = m.vertex_count;
  const int n = n0 + extra;

  struct EdgeAdd {
    int a, b;
    double w;
  };
  std::vector<EdgeAdd> new_edges;
  std::vector<double> new_mass(extra, 0.0);
  std::vector<std::vector<int>> new_faces;
  CappedMesh out;
  out.original_count = n0;

  int next = n0;
  for (const auto& cyc : cycles) {
    const int k = static_cast<int>(cyc.size());
    double mean_mass = 0.0;
    for (int v : cyc) mean_mass += m.mass[v];
    mean_mass /= k;
    std::vector<int> cap_verts;
    if (params.style == CapStyle::cone) {
      const int apex = next++;
      cap_verts.push_back(apex);
      new_mass[apex - n0] = mean_mass;
      for (int i = 0; i < k; ++i) {
        new_edges.push_back({apex, cyc[i], params.spoke_weight});
        new_faces.push_back({apex, cyc[i], cyc[(i + 1) % k]});
      }
    } else {
      std::vector<int> ring(k);
      for (int i = 0; i < k; ++i) {
        ring[i] = next++;
        new_mass[ring[i] - n0] = m.mass[cyc[i]];
      }
      const int apex = next++;
      new_mass[apex - n0] = mean_mass;
      for (int i = 0; i < k; ++i) {
        new_edges.push_back({cyc[i], ring[i], params.spoke_weight});
        new_edges.push_back({ring[i], ring[(i + 1) % k], 0.5});
        new_edges.push_back({ring[i], apex, params.spoke_weight});
        new_faces.push_back({cyc[i], cyc[(i + 1) % k], ring[(i + 1) % k], ring[i]});
        new_faces.push_back({apex, ring[i], ring[(i + 1) % k]});
      }
      cap_verts = ring;
      cap_verts.push_back(apex);
    }
    out.cap_vertices.push_back(std::move(cap_verts));
  }

  // Rebuild: original off-diagonals plus cap edges, diagonals from rows.
  std::vector<Triplet> off;
  for (int c = 0; c < m.stiffness.outerSize(); ++c)
    for (SpMat::InnerIterator it(m.stiffness, c); it; ++it)
      if (it.row() != c && it.value() != 0.0) off.emplace_back(it.row(), c, it.value());
  for (const auto& e : new_edges) {
    off.emplace_back(e.a, e.b, -e.w);
    off.emplace_back(e.b, e.a, -e.w);
  }
  std::vector<std::vector<double>> rows(n);
  for (const auto& t : off) rows[t.row()].push_back(t.value());
  std::vector<Triplet> all = off;
  for (int v = 0; v < n; ++v) all.emplace_back(v, v, -detail::sorted_sum(rows[v]));

  auto capped = std::make_shared<Mesh>();
  capped->vertex_count = n;
  capped->stiffness.resize(n, n);
  capped->stiffness.setFromTriplets(all.begin(), all.end());
  capped->stiffness.makeCompressed();
  capped->mass.resize(n);
  capped->mass.head(n0) = m.mass;
  for (int i = 0; i < extra; ++i) capped->mass[n0 + i] = new_mass[i];
  if (!m.positions.empty()) {
    capped->positions = m.positions;
    capped->positions.resize(n, Eigen::Vector3d::Zero());
    int cursor = 0;
    for (const auto& cyc : cycles) {
      Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
      for (int v : cyc) centroid += m.positions[v];
      centroid /= static_cast<double>(cyc.size());
      const auto& cap = out.cap_vertices[cursor++];
      for (std::size_t i = 0; i + 1 < cap.size(); ++i)
        capped->positions[cap[i]] = 0.5 * (m.positions[cycles[cursor - 1][i]] + centroid);
      capped->positions[cap.back()] = centroid;
    }
  }
  capped->polygons = m.polygons;
  for (auto& f : new_faces) capped->polygons.push_back(std::move(f));
  capped->cycles = m.cycles;
  out.mesh = std::move(capped);
  return out;
}

// ---------------------------------------------------------------------------
// Sew setups

struct SewSetup {
  std::shared_ptr<const Mesh> part1, part2;
  std::vector<std::vector<int>> cycles1, cycles2;  // boundary circles, piece indices
  CappedMesh capped1, capped2;
  GluedMesh glued;
  FieldOperatorPtr fop1, fop2, fop;  // capped pieces and the sewn mesh
  double mass = 0.0;
  std::vector<std::vector<int>> seam_circles;  // glued indices
};

inline SewSetup make_sew_setup(const Mesh& part1, std::vector<std::vector<int>> cycles1,
                               const Mesh& part2, std::vector<std::vector<int>> cycles2,
                               double mass, const CapParams& cap1 = {},
                               const CapParams& cap2 = {}) {
  if (!(mass > 0.0)) throw InvalidInput("make_sew_setup: mass must be positive");
  SewSetup s;
  s.part1 = std::make_shared<Mesh>(part1);
  s.part2 = std::make_shared<Mesh>(part2);
  s.cycles1 = std::move(cycles1);
  s.cycles2 = std::move(cycles2);
  s.mass = mass;
  s.capped1 = cap_boundary(*s.part1, s.cycles1, cap1);
  s.capped2 = cap_boundary(*s.part2, s.cycles2, cap2);
  s.glued = glue_meshes(*s.part1, s.cycles1, *s.part2, s.cycles2);
  s.fop1 = assemble_operator(s.capped1.mesh, mass);
  s.fop2 = assemble_operator(s.capped2.mesh, mass);
  s.fop = assemble_operator(std::make_shared<Mesh>(s.glued.mesh), mass);
  for (const auto& cyc : s.cycles1) s.seam_circles.push_back(cyc);  // map_a is the identity
  return s;
}

// Two open cylinders sewn along both rims into a torus of n x (2 rows - 2).
inline SewSetup sew_cylinders_to_torus(int n_around, int n_rows, double mass,
                                       const CapParams& cap1 = {}, const CapParams& cap2 = {}) {
  if (n_rows < 3) throw InvalidInput("sew_cylinders_to_torus: need >= 3 rows per piece");
  const Mesh cyl = build_cylinder_collar(n_around, n_rows);
  const auto& bottom = cyl.cycles.at("bottom");
  const auto& top = cyl.cycles.at("top");
  // Piece 1's top meets piece 2's bottom and vice versa.
  return make_sew_setup(cyl, {top, bottom}, cyl, {bottom, top}, mass, cap1, cap2);
}

// The two closed hemispheres of an icosphere sewn along the equator.
inline SewSetup sew_icosphere_halves(int subdivisions, double mass, const CapParams& cap1 = {},
                                     const CapParams& cap2 = {}) {
  const Mesh sphere = build_icosphere(subdivisions);
  const Submesh lower = icosphere_half(sphere, -1);
  const Submesh upper = icosphere_half(sphere, +1);
  return make_sew_setup(lower.mesh, {lower.mesh.cycles.at("boundary")}, upper.mesh,
                        {upper.mesh.cycles.at("boundary")}, mass, cap1, cap2);
}

// ---------------------------------------------------------------------------
// Amplitudes, embeddings and the sewing check

namespace detail {

inline const FieldOperatorPtr& side_fop(const SewSetup& s, int side) {
  if (side == 1) return s.fop1;
  if (side == 2) return s.fop2;
  throw InvalidInput("side must be 1 or 2");
}

inline VertexSet side_original(const SewSetup& s, int side) {
  const int n = side == 1 ? s.capped1.original_count : s.capped2.original_count;
  VertexSet out(n);
  for (int i = 0; i < n; ++i) out[i] = i;
  return out;
}

inline VertexSet side_circles(const SewSetup& s, int side) {
  std::vector<int> all;
  for (const auto& cyc : (side == 1 ? s.cycles1 : s.cycles2))
    all.insert(all.end(), cyc.begin(), cyc.end());
  return make_vertex_set(std::move(all));
}

}  // namespace detail

// E_{C_side} F in the capped piece: the polynomial's conditional expectation
// onto the union of that piece's boundary circles.  F must be supported in
// the piece (cap vertices excluded).
inline WickPolynomial boundary_amplitude(const SewSetup& s, int side, const WickPolynomial& f) {
  if (f.context().get() != detail::side_fop(s, side).get())
    throw InvalidInput("boundary_amplitude: polynomial context is not the side operator");
  if (!poly_supported_in(f, detail::side_original(s, side)))
    throw InvalidInput("boundary_amplitude: polynomial not supported in the piece");
  return conditional_expectation(detail::side_circles(s, side), f);
}

// Gamma of the vertex embedding j_side : piece -> sewn mesh.  Factors must
// vanish on cap vertices.  `override_map` (tests only) replaces the
// embedding on listed vertices, deliberately breaking it; negative controls
// pin such a broken embedding and assert the identity fails.
inline WickPolynomial j_map(const SewSetup& s, int side, const WickPolynomial& p,
                            const std::map<int, int>* override_map = nullptr) {
  if (p.context().get() != detail::side_fop(s, side).get())
    throw InvalidInput("j_map: polynomial context is not the side operator");
  const std::vector<int>& vmap = side == 1 ? s.glued.map_a : s.glued.map_b;
  const int orig = side == 1 ? s.capped1.original_count : s.capped2.original_count;
  const int target = s.glued.mesh.vertex_count;
  WickPolynomial out(s.fop);
  for (const auto& [mono, coef] : p.terms()) {
    std::vector<Vec> mapped;
    mapped.reserve(mono.size());
    for (const Vec& f : mono) {
      Vec g = Vec::Zero(target);
      for (int v = 0; v < f.size(); ++v) {
        if (f[v] == 0.0) continue;
        if (override_map && override_map->count(v)) {
          g[override_map->at(v)] += f[v];
        } else if (v < orig) {
          g[vmap[v]] += f[v];
        } else {
          throw InvalidInput("j_map: factor touches cap vertex " + std::to_string(v));
        }
      }
      mapped.push_back(std::move(g));
    }
    out.add_term(coef, std::move(mapped));
  }
  return out;
}

struct SewReport {
  double lhs = 0.0, rhs = 0.0;
  double residual = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

// Checks the sewing identity for one pair (F, G) of polynomials on the two
// pieces.  residual = |lhs - rhs| / max(|lhs|, |rhs|, 1).  The embedding
// override, when given, applies to every pushforward.
inline SewReport sew_check(const SewSetup& s, const WickPolynomial& f, const WickPolynomial& g,
                           double tol = 1e-8, const std::map<int, int>* override_map = nullptr) {
  const WickPolynomial amp1 = boundary_amplitude(s, 1, f);
  const WickPolynomial amp2 = boundary_amplitude(s, 2, g);
  SewReport r;
  r.lhs = wick_inner(j_map(s, 1, amp1, override_map), j_map(s, 2, amp2, override_map));
  r.rhs = wick_inner(j_map(s, 1, f, override_map), j_map(s, 2, g, override_map));
  r.residual = std::abs(r.lhs - r.rhs) / std::max({std::abs(r.lhs), std::abs(r.rhs), 1.0});
  r.tolerance = tol;
  r.pass = r.residual <= tol;
  return r;
}

}  // namespace mfield
