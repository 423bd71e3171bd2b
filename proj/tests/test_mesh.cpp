#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cstdio>
#include <filesystem>

#include "mfield/mesh.hpp"
#include "mfield/mesh_io.hpp"

using namespace mfield;
using Catch::Approx;

namespace {

Mat dense(const SpMat& s) { return Mat(s); }

std::vector<double> sorted_eigs(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> es(m);
  std::vector<double> out(es.eigenvalues().data(), es.eigenvalues().data() + m.rows());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST_CASE("torus lattice entries are the exact plaquette values") {
  const Mesh m = build_torus_lattice(6, 4);
  REQUIRE(m.vertex_count == 24);
  REQUIRE(m.edge_count() == 48);
  REQUIRE(m.polygons.size() == 24);
  REQUIRE(m.euler_characteristic() == 0);
  REQUIRE(is_connected(m));

  for (int v = 0; v < m.vertex_count; ++v) {
    REQUIRE(m.mass[v] == 1.0);
    REQUIRE(m.stiffness.coeff(v, v) == 4.0);
    const auto nb = m.neighbors(v);
    REQUIRE(nb.size() == 4);
    for (int u : nb) REQUIRE(m.stiffness.coeff(v, u) == -1.0);
  }
  const Vec rowsum = m.stiffness * Vec::Ones(m.vertex_count);
  for (int v = 0; v < m.vertex_count; ++v) REQUIRE(rowsum[v] == 0.0);

  // v = y*nx + x with x fastest
  REQUIRE((m.positions[1] - Eigen::Vector3d(1, 0, 0)).norm() == 0.0);
  REQUIRE((m.positions[6] - Eigen::Vector3d(0, 1, 0)).norm() == 0.0);
  REQUIRE(m.adjacent(0, 1));
  REQUIRE(m.adjacent(0, 5));   // periodic in x
  REQUIRE(m.adjacent(0, 18));  // periodic in y

  const Mesh fine = build_torus_lattice(6, 4, 0.5);
  for (int v = 0; v < fine.vertex_count; ++v) REQUIRE(fine.mass[v] == 0.25);
  REQUIRE(fine.stiffness.coeff(0, 1) == -1.0);  // weights are spacing free in 2d
}

TEST_CASE("torus stiffness spectrum matches the Fourier values") {
  const int nx = 6, ny = 4;
  const Mesh m = build_torus_lattice(nx, ny);
  std::vector<double> want;
  for (int p = 0; p < nx; ++p)
    for (int q = 0; q < ny; ++q)
      want.push_back(4.0 - 2.0 * std::cos(2.0 * M_PI * p / nx) - 2.0 * std::cos(2.0 * M_PI * q / ny));
  std::sort(want.begin(), want.end());
  const auto got = sorted_eigs(dense(m.stiffness));
  REQUIRE(got.size() == want.size());
  for (std::size_t k = 0; k < want.size(); ++k) REQUIRE(got[k] == Approx(want[k]).margin(1e-12));
}

TEST_CASE("cylinder collar carries half values on the rims") {
  const Mesh m = build_cylinder_collar(4, 3);
  REQUIRE(m.vertex_count == 12);
  REQUIRE(m.edge_count() == 20);
  REQUIRE(m.polygons.size() == 8);
  REQUIRE(m.euler_characteristic() == 0);

  for (int i = 0; i < 4; ++i) {
    REQUIRE(m.mass[i] == 0.5);             // bottom rim
    REQUIRE(m.mass[8 + i] == 0.5);         // top rim
    REQUIRE(m.mass[4 + i] == 1.0);         // interior row
    REQUIRE(m.stiffness.coeff(i, (i + 1) % 4) == -0.5);
    REQUIRE(m.stiffness.coeff(8 + i, 8 + (i + 1) % 4) == -0.5);
    REQUIRE(m.stiffness.coeff(4 + i, 4 + (i + 1) % 4) == -1.0);
    REQUIRE(m.stiffness.coeff(i, 4 + i) == -1.0);
  }
  const Vec rowsum = m.stiffness * Vec::Ones(m.vertex_count);
  for (int v = 0; v < m.vertex_count; ++v) REQUIRE(rowsum[v] == 0.0);

  REQUIRE(m.cycles.at("bottom") == std::vector<int>({0, 1, 2, 3}));
  REQUIRE(m.cycles.at("top") == std::vector<int>({8, 9, 10, 11}));

  CHECK_THROWS_AS(build_cylinder_collar(2, 3), InvalidInput);
  CHECK_THROWS_AS(build_cylinder_collar(4, 1), InvalidInput);
}

TEST_CASE("cotangent assembly reproduces closed forms on single triangles") {
  SECTION("equilateral") {
    detail::TriangleSoup s;
    s.verts = {{0, 0, 0}, {2, 0, 0}, {1, std::sqrt(3.0), 0}};
    s.faces = {{0, 1, 2}};
    const Mesh m = detail::assemble_triangle_mesh(s, {});
    const double w = 0.5 / std::sqrt(3.0);  // cot 60 / 2
    const double third = std::sqrt(3.0) / 3.0;
    for (int i = 0; i < 3; ++i) {
      REQUIRE(m.mass[i] == Approx(third).epsilon(1e-14));
      REQUIRE(m.stiffness.coeff(i, (i + 1) % 3) == Approx(-w).epsilon(1e-14));
    }
  }
  SECTION("right triangle drops the edge opposite the right angle") {
    detail::TriangleSoup s;
    s.verts = {{0, 0, 0}, {3, 0, 0}, {0, 4, 0}};
    s.faces = {{0, 1, 2}};
    const Mesh m = detail::assemble_triangle_mesh(s, {});
    REQUIRE(m.stiffness.coeff(0, 1) == Approx(-2.0 / 3.0).epsilon(1e-15));  // cot at C
    REQUIRE(m.stiffness.coeff(0, 2) == Approx(-0.375).epsilon(1e-15));      // cot at B
    REQUIRE_FALSE(m.adjacent(1, 2));  // cot 90 = 0
    for (int i = 0; i < 3; ++i) REQUIRE(m.mass[i] == 2.0);  // area 6, barycentric
  }
  SECTION("degenerate triangle is rejected") {
    detail::TriangleSoup s;
    s.verts = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
    s.faces = {{0, 1, 2}};
    CHECK_THROWS_AS(detail::assemble_triangle_mesh(s, {}), InvalidInput);
  }
}

TEST_CASE("icosphere counts, equator and exact mirror symmetry") {
  const int expect_verts[3] = {14, 50, 194};
  for (int s = 0; s <= 2; ++s) {
    const Mesh m = build_icosphere(s);
    INFO("subdivisions " << s);
    REQUIRE(m.vertex_count == expect_verts[s]);
    REQUIRE(m.euler_characteristic() == 2);
    REQUIRE(is_connected(m));

    const auto& eq = m.cycles.at("equator");
    REQUIRE(static_cast<int>(eq.size()) == 6 * (1 << s));
    for (std::size_t i = 0; i < eq.size(); ++i) {
      REQUIRE(m.positions[eq[i]].x() == 0.0);
      REQUIRE(m.adjacent(eq[i], eq[(i + 1) % eq.size()]));
    }

    VertexSet omega;
    for (int v = 0; v < m.vertex_count; ++v)
      if (m.positions[v].x() > 0.0) omega.push_back(v);
    const RegionPartition part = make_partition(m, omega);
    REQUIRE(part.boundary == make_vertex_set(VertexSet(eq.begin(), eq.end())));

    const auto check = validate_involution(m, mirror_involution(m, 0), part, 0.0);
    REQUIRE(check.valid);

    const Vec rowsum = m.stiffness * Vec::Ones(m.vertex_count);
    for (int v = 0; v < m.vertex_count; ++v) REQUIRE(std::abs(rowsum[v]) < 1e-13);
    const auto eigs = sorted_eigs(dense(m.stiffness));
    REQUIRE(eigs.front() > -1e-12 * eigs.back());  // cotangent Laplacian is PSD
  }

  const Mesh m2 = build_icosphere(2);
  CHECK(std::abs(m2.total_mass() / (4.0 * M_PI) - 1.0) < 0.05);

  const Mesh r1 = build_icosphere(1, 1.0), r2 = build_icosphere(1, 2.0);
  for (int v = 0; v < r1.vertex_count; ++v) REQUIRE(r2.mass[v] == 4.0 * r1.mass[v]);
  for (int c = 0; c < r1.stiffness.outerSize(); ++c)
    for (SpMat::InnerIterator it(r1.stiffness, c); it; ++it)
      REQUIRE(r2.stiffness.coeff(it.row(), c) == it.value());

  CHECK_THROWS_AS(build_icosphere(-1), InvalidInput);
  CHECK_THROWS_AS(build_icosphere(7), InvalidInput);
}

TEST_CASE("mesh_from_data validates its input") {
  const Vec ones = Vec::Ones(2);
  SECTION("row sums must vanish") {
    CHECK_THROWS_AS(mesh_from_data(2, {{0, 0, 1.0}, {0, 1, -0.5}, {1, 1, 1.0}}, ones), InvalidInput);
  }
  SECTION("masses must be positive") {
    Vec bad(2);
    bad << 1.0, 0.0;
    CHECK_THROWS_AS(mesh_from_data(2, {{0, 0, 1.0}, {0, 1, -1.0}, {1, 1, 1.0}}, bad), InvalidInput);
  }
  SECTION("lower triangle entries are rejected") {
    CHECK_THROWS_AS(mesh_from_data(2, {{1, 0, -1.0}, {0, 0, 1.0}, {1, 1, 1.0}}, ones), InvalidInput);
  }
  SECTION("positive off-diagonals only warn") {
    MeshDiagnostics diag;
    const Mesh m = mesh_from_data(
        3, {{0, 0, 1.0}, {0, 1, -2.0}, {0, 2, 1.0}, {1, 1, 2.0}, {1, 2, 0.0}, {2, 2, -1.0}},
        Vec::Ones(3), {}, {}, {}, &diag);
    REQUIRE(diag.warnings.size() == 1);
    REQUIRE(m.adjacent(0, 2));
  }
  SECTION("index range checks") {
    CHECK_THROWS_AS(mesh_from_data(2, {{0, 5, -1.0}}, ones), InvalidInput);
    CHECK_THROWS_AS(mesh_from_data(0, {}, Vec()), InvalidInput);
  }
}

TEST_CASE("path mesh is the unit tridiagonal Laplacian") {
  const Mesh m = make_path_mesh(4);
  Mat want(4, 4);
  want << 1, -1, 0, 0, -1, 2, -1, 0, 0, -1, 2, -1, 0, 0, -1, 1;
  REQUIRE((dense(m.stiffness) - want).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE((m.mass.array() == 1.0).all());
  CHECK_THROWS_AS(make_path_mesh(1), InvalidInput);
}

TEST_CASE("partitions separate omega from the exterior") {
  SECTION("path") {
    const Mesh m = make_path_mesh(5);
    const RegionPartition p = make_partition(m, {2});
    REQUIRE(p.omega == VertexSet({2}));
    REQUIRE(p.boundary == VertexSet({1, 3}));
    REQUIRE(p.exterior == VertexSet({0, 4}));
    REQUIRE(p.closure() == VertexSet({1, 2, 3}));
    REQUIRE(p.omega_complement() == VertexSet({0, 1, 3, 4}));
  }
  SECTION("no edge joins omega to the exterior") {
    const Mesh m = build_torus_lattice(8, 8);
    for (int center : {0, 27, 44}) {
      VertexSet ball;
      const Vec bump = graph_bump(m, center, 2);
      for (int v = 0; v < m.vertex_count; ++v)
        if (bump[v] > 0.0) ball.push_back(v);
      const RegionPartition p = make_partition(m, ball);
      for (int v : p.omega)
        for (int u : m.neighbors(v)) REQUIRE_FALSE(set_contains(p.exterior, u));
      REQUIRE(static_cast<int>(p.omega.size() + p.boundary.size() + p.exterior.size()) ==
              m.vertex_count);
    }
  }
  SECTION("degenerate regions are rejected") {
    const Mesh m = make_path_mesh(4);
    CHECK_THROWS_AS(make_partition(m, {}), InvalidInput);
    CHECK_THROWS_AS(make_partition(m, {0, 1, 2, 3}), InvalidInput);
    CHECK_THROWS_AS(make_partition(m, {7}), InvalidInput);
  }
}

TEST_CASE("lattice_lines selects coordinate bands") {
  const VertexSet s = lattice_lines(4, 3, 0, 1, 2);
  REQUIRE(s == VertexSet({1, 2, 5, 6, 9, 10}));
  const VertexSet r = lattice_lines(4, 3, 1, 2, 2);
  REQUIRE(r == VertexSet({8, 9, 10, 11}));
  CHECK_THROWS_AS(lattice_lines(4, 3, 2, 0, 0), InvalidInput);
}

TEST_CASE("graph_bump is the graph-distance hat") {
  const Mesh m = make_path_mesh(7);
  const Vec b = graph_bump(m, 3, 2);
  const double e[7] = {0, 1.0 / 3.0, 2.0 / 3.0, 1.0, 2.0 / 3.0, 1.0 / 3.0, 0};
  for (int v = 0; v < 7; ++v) REQUIRE(b[v] == Approx(e[v]).margin(1e-15));
}

TEST_CASE("as_distribution multiplies by the mass vector") {
  const Mesh m = build_torus_lattice(4, 4, 0.5);
  const Vec u = Vec::LinSpaced(16, -1.0, 1.0);
  const Vec d = as_distribution(m, u);
  for (int v = 0; v < 16; ++v) REQUIRE(d[v] == 0.25 * u[v]);
  CHECK_THROWS_AS(as_distribution(m, Vec::Zero(3)), InvalidInput);
}

TEST_CASE("involution validation failure taxonomy") {
  // C4 ring; the antipodal map swaps omega with the exterior but rotates the
  // two boundary vertices, the adjacent swap fixes nothing useful.
  auto ring = [](std::array<double, 4> w, Vec mass) {
    std::vector<std::array<double, 3>> up = {{0, 1, -w[0]}, {1, 2, -w[1]}, {2, 3, -w[2]},
                                             {0, 3, -w[3]}};
    up.push_back({0, 0, w[0] + w[3]});
    up.push_back({1, 1, w[0] + w[1]});
    up.push_back({2, 2, w[1] + w[2]});
    up.push_back({3, 3, w[2] + w[3]});
    return mesh_from_data(4, up, mass);
  };
  const Mesh c4 = ring({1, 1, 1, 1}, Vec::Ones(4));
  const RegionPartition part = make_partition(c4, {0});

  SECTION("valid antipodal map") {
    const auto r = validate_involution(c4, {2, 3, 0, 1}, part, 0.0);
    // regions swap but boundary vertices 1 and 3 trade places
    REQUIRE_FALSE(r.valid);
    REQUIRE(r.failure == InvolutionFailure::boundary_not_fixed);
  }
  SECTION("identity fails to swap regions") {
    const auto r = validate_involution(c4, {0, 1, 2, 3}, part);
    REQUIRE(r.failure == InvolutionFailure::regions_not_swapped);
  }
  SECTION("rotation is not involutive") {
    const auto r = validate_involution(c4, {1, 2, 3, 0}, part);
    REQUIRE(r.failure == InvolutionFailure::not_involutive);
  }
  SECTION("non-bijections are caught") {
    const auto r = validate_involution(c4, {0, 0, 1, 2}, part);
    REQUIRE(r.failure == InvolutionFailure::bad_permutation);
    const auto r2 = validate_involution(c4, {0, 1}, part);
    REQUIRE(r2.failure == InvolutionFailure::bad_permutation);
  }
  SECTION("asymmetric mass is caught") {
    Vec mass(4);
    mass << 1, 2, 1, 1;
    const Mesh m = ring({1, 1, 1, 1}, mass);
    const auto r = validate_involution(m, {2, 3, 0, 1}, make_partition(m, {0}));
    REQUIRE(r.failure == InvolutionFailure::mass_not_preserved);
  }
  SECTION("asymmetric stiffness is caught") {
    const Mesh m = ring({1, 2, 2, 2}, Vec::Ones(4));
    const auto r = validate_involution(m, {2, 3, 0, 1}, make_partition(m, {0}));
    REQUIRE(r.failure == InvolutionFailure::stiffness_not_preserved);
  }
}

TEST_CASE("lattice reflection fixes the two symmetry lines") {
  const int nx = 6, ny = 4;
  const auto perm = lattice_reflection(nx, ny, 0);
  const Mesh m = build_torus_lattice(nx, ny);
  const RegionPartition part{lattice_lines(nx, ny, 0, 1, 2),
                             set_union(lattice_lines(nx, ny, 0, 0, 0), lattice_lines(nx, ny, 0, 3, 3)),
                             set_union(lattice_lines(nx, ny, 0, 4, 4), lattice_lines(nx, ny, 0, 5, 5))};
  const auto r = validate_involution(m, perm, part, 0.0);
  REQUIRE(r.valid);
  for (int y = 0; y < ny; ++y) {
    REQUIRE(perm[y * nx + 0] == y * nx + 0);
    REQUIRE(perm[y * nx + 3] == y * nx + 3);
    REQUIRE(perm[y * nx + 1] == y * nx + 5);
  }

  // pushforward convention
  Involution inv{perm};
  const Vec f = delta_vector(nx * ny, 1);
  REQUIRE(inv.apply(f)[5] == 1.0);

  const auto wrong_region = validate_involution(m, perm, make_partition(m, lattice_lines(nx, ny, 0, 1, 1)));
  REQUIRE_FALSE(wrong_region.valid);
  REQUIRE(wrong_region.failure == InvolutionFailure::regions_not_swapped);
}

TEST_CASE("mirror involution needs honest positions") {
  const Mesh sphere = build_icosphere(1);
  const auto perm = mirror_involution(sphere, 0);
  for (int v = 0; v < sphere.vertex_count; ++v) {
    REQUIRE(perm[perm[v]] == v);
    REQUIRE(sphere.positions[perm[v]].x() == -sphere.positions[v].x());
    REQUIRE(sphere.positions[perm[v]].y() == sphere.positions[v].y());
  }
  const Mesh torus = build_torus_lattice(4, 4);
  CHECK_THROWS_AS(mirror_involution(torus, 0), InvalidInput);  // no negative-x partners
  Mesh nopos = make_path_mesh(3);
  CHECK_THROWS_AS(mirror_involution(nopos, 0), InvalidInput);
}

TEST_CASE("two collars glue back to the exact torus") {
  const int nx = 6, rows = 4;           // glued torus has 2*rows - 2 = 6 rows
  const Mesh a = build_cylinder_collar(nx, rows);
  const Mesh b = build_cylinder_collar(nx, rows);
  const GluedMesh g = glue_meshes(a, {a.cycles.at("top"), a.cycles.at("bottom")}, b,
                                  {b.cycles.at("bottom"), b.cycles.at("top")});
  const Mesh torus = build_torus_lattice(nx, 2 * rows - 2);

  REQUIRE(g.mesh.vertex_count == torus.vertex_count);
  // with this seam order the combined indexing is exactly the torus ordering
  for (int v = 0; v < torus.vertex_count; ++v) REQUIRE(g.mesh.mass[v] == torus.mass[v]);
  for (int c = 0; c < torus.stiffness.outerSize(); ++c)
    for (SpMat::InnerIterator it(torus.stiffness, c); it; ++it)
      REQUIRE(g.mesh.stiffness.coeff(it.row(), c) == it.value());
  REQUIRE(g.mesh.edge_count() == torus.edge_count());
  REQUIRE(g.seams.size() == 2);

  // piece-to-whole maps cover every vertex
  for (int v = 0; v < a.vertex_count; ++v) REQUIRE(g.map_a[v] == v);
  for (int v = 0; v < b.vertex_count; ++v) {
    REQUIRE(g.map_b[v] >= 0);
    REQUIRE(g.map_b[v] < g.mesh.vertex_count);
  }
}

TEST_CASE("gluing rejects mismatched collars") {
  const Mesh a = build_cylinder_collar(6, 4);
  SECTION("mass mismatch") {
    Mesh b = build_cylinder_collar(6, 4);
    b.mass[2] *= 1.001;
    CHECK_THROWS_AS(glue_meshes(a, a.cycles.at("bottom"), b, b.cycles.at("bottom")), InvalidInput);
  }
  SECTION("length mismatch") {
    const Mesh b = build_cylinder_collar(7, 4);
    CHECK_THROWS_AS(glue_meshes(a, a.cycles.at("bottom"), b, b.cycles.at("bottom")), InvalidInput);
  }
  SECTION("broken cycle") {
    const Mesh b = build_cylinder_collar(6, 4);
    std::vector<int> bad = b.cycles.at("bottom");
    bad[1] = 8;  // row-1 vertex, not adjacent to its cycle neighbors
    CHECK_THROWS_AS(glue_meshes(a, a.cycles.at("bottom"), b, bad), InvalidInput);
  }
}

TEST_CASE("hemispheres reassemble the sphere stiffness exactly") {
  const Mesh sphere = build_icosphere(1);
  const Submesh pos = icosphere_half(sphere, +1);
  const Submesh neg = icosphere_half(sphere, -1);
  const auto& eq = sphere.cycles.at("equator");
  REQUIRE(pos.mesh.vertex_count == 31);
  REQUIRE(neg.mesh.vertex_count == 31);
  REQUIRE(pos.mesh.polygons.size() + neg.mesh.polygons.size() == sphere.polygons.size());
  REQUIRE(pos.mesh.cycles.at("boundary").size() == eq.size());

  const GluedMesh g = glue_meshes(pos.mesh, pos.mesh.cycles.at("boundary"), neg.mesh,
                                  neg.mesh.cycles.at("boundary"));
  REQUIRE(g.mesh.vertex_count == sphere.vertex_count);

  std::vector<int> to_glued(sphere.vertex_count, -1);
  for (int v = 0; v < sphere.vertex_count; ++v) {
    if (pos.vertex_map[v] >= 0)
      to_glued[v] = g.map_a[pos.vertex_map[v]];
    else
      to_glued[v] = g.map_b[neg.vertex_map[v]];
  }
  std::set<int> equator(eq.begin(), eq.end());
  for (int c = 0; c < sphere.stiffness.outerSize(); ++c)
    for (SpMat::InnerIterator it(sphere.stiffness, c); it; ++it)
      REQUIRE(g.mesh.stiffness.coeff(to_glued[it.row()], to_glued[c]) == it.value());
  for (int v = 0; v < sphere.vertex_count; ++v) {
    if (equator.count(v))
      REQUIRE(g.mesh.mass[to_glued[v]] == Approx(sphere.mass[v]).epsilon(1e-13));
    else
      REQUIRE(g.mesh.mass[to_glued[v]] == sphere.mass[v]);
  }
}

TEST_CASE("mesh serialization round-trips bitwise") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "mfield-mesh-io-test";
  fs::create_directories(dir);
  const std::string path = (dir / "m.json").string();

  for (const Mesh& m : {build_icosphere(1), build_torus_lattice(5, 4, 0.5)}) {
    save_mesh(m, path);
    const Mesh r = load_mesh(path);
    REQUIRE(r.vertex_count == m.vertex_count);
    REQUIRE((r.mass.array() == m.mass.array()).all());
    REQUIRE((dense(r.stiffness) - dense(m.stiffness)).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(r.cycles == m.cycles);
    REQUIRE(r.polygons == m.polygons);
    REQUIRE(r.positions.size() == m.positions.size());
    for (std::size_t v = 0; v < m.positions.size(); ++v)
      REQUIRE((r.positions[v] - m.positions[v]).norm() == 0.0);
    REQUIRE(mesh_fingerprint(r) == mesh_fingerprint(m));
  }

  REQUIRE(mesh_fingerprint(build_torus_lattice(6, 6)) ==
          mesh_fingerprint(build_torus_lattice(6, 6)));
  REQUIRE(mesh_fingerprint(build_torus_lattice(6, 6)) !=
          mesh_fingerprint(build_torus_lattice(6, 7)));
  CHECK_THROWS_AS(load_mesh((dir / "missing.json").string()), InvalidInput);
  fs::remove_all(dir);
}

TEST_CASE("connectivity probe") {
  REQUIRE(is_connected(build_torus_lattice(3, 3)));
  const Mesh two = mesh_from_data(
      4, {{0, 0, 1.0}, {0, 1, -1.0}, {1, 1, 1.0}, {2, 2, 1.0}, {2, 3, -1.0}, {3, 3, 1.0}},
      Vec::Ones(4));
  REQUIRE_FALSE(is_connected(two));
}
