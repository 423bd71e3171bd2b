#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <map>

#include "mfield/rng.hpp"
#include "mfield/sewing.hpp"

using namespace mfield;
using Catch::Approx;

namespace {

struct Draw {
  CounterRng rng;
  std::uint64_t idx = 0;
  explicit Draw(std::uint64_t seed) : rng(seed, rng_stream::kTest) {}
  double u() { return rng.uniform(idx++); }
  int pick(int n) { return static_cast<int>(u() * n) % n; }
  double coef() { return (u() < 0.5 ? -1.0 : 1.0) * (0.3 + 1.2 * u()); }
};

// Random polynomial over the piece vertices of one side; cap vertices stay 0.
WickPolynomial random_piece_poly(const FieldOperatorPtr& fop, int piece_count, Draw& d) {
  WickPolynomial p(fop);
  const int n_terms = 1 + d.pick(2);
  for (int t = 0; t < n_terms; ++t) {
    const int degree = 1 + d.pick(3);
    std::vector<Vec> factors;
    for (int f = 0; f < degree; ++f) {
      Vec v = Vec::Zero(fop->size());
      const int entries = 1 + d.pick(2);
      for (int e = 0; e < entries; ++e) v[d.pick(piece_count)] += d.coef();
      factors.push_back(std::move(v));
    }
    p.add_term(d.coef(), std::move(factors));
  }
  return p;
}

int edge_count(const Mesh& m) {
  int off = 0;
  for (int c = 0; c < m.stiffness.outerSize(); ++c)
    for (SpMat::InnerIterator it(m.stiffness, c); it; ++it)
      if (it.row() != c && it.value() != 0.0) ++off;
  return off / 2;
}

int euler_characteristic(const Mesh& m) {
  return m.vertex_count - edge_count(m) + static_cast<int>(m.polygons.size());
}

Vec delta(int n, int v, double x = 1.0) {
  Vec d = Vec::Zero(n);
  d[v] = x;
  return d;
}

}  // namespace

TEST_CASE("capping both collar rims closes it to a topological sphere") {
  const Mesh cyl = build_cylinder_collar(6, 3);
  const auto& top = cyl.cycles.at("top");
  const auto& bottom = cyl.cycles.at("bottom");

  const CappedMesh cone = cap_boundary(cyl, {top, bottom});
  REQUIRE(cone.original_count == 18);
  REQUIRE(cone.mesh->vertex_count == 20);
  REQUIRE(cone.cap_vertices.size() == 2);
  REQUIRE(cone.cap_vertices[0] == std::vector<int>{18});
  REQUIRE(cone.cap_vertices[1] == std::vector<int>{19});
  REQUIRE(euler_characteristic(*cone.mesh) == 2);
  REQUIRE((cone.mesh->mass.head(18) - cyl.mass).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(cone.mesh->mass[18] == Approx(cyl.mass[top[0]]).margin(1e-15));
  const Vec rowsum = cone.mesh->stiffness * Vec::Ones(20);
  REQUIRE(rowsum.cwiseAbs().maxCoeff() < 1e-13);

  const CappedMesh ring = cap_boundary(cyl, {top, bottom}, {CapStyle::ring_cone});
  REQUIRE(ring.mesh->vertex_count == 18 + 2 * 7);
  REQUIRE(ring.cap_vertices[0].size() == 7);
  REQUIRE(euler_characteristic(*ring.mesh) == 2);
  for (int i = 0; i < 6; ++i)
    REQUIRE(ring.mesh->mass[ring.cap_vertices[0][i]] == cyl.mass[top[i]]);

  SECTION("only genuine boundary cycles can be capped") {
    std::vector<int> interior{6, 7, 8, 9, 10, 11};
    CHECK_THROWS_AS(cap_boundary(cyl, {interior}), InvalidInput);
    std::vector<int> not_a_cycle{0, 2, 4};
    CHECK_THROWS_AS(cap_boundary(cyl, {not_a_cycle}), InvalidInput);
    CHECK_THROWS_AS(cap_boundary(cyl, {top, top}), InvalidInput);
    CHECK_THROWS_AS(cap_boundary(cyl, {}), InvalidInput);
    CHECK_THROWS_AS(cap_boundary(cyl, {top}, {CapStyle::cone, 0.0}), InvalidInput);
  }
}

TEST_CASE("sewing two collars along both rims rebuilds the torus") {
  const SewSetup s = sew_cylinders_to_torus(6, 3, 0.8);
  const Mesh torus = build_torus_lattice(6, 4);
  REQUIRE(s.glued.mesh.vertex_count == torus.vertex_count);
  REQUIRE((Mat(s.glued.mesh.stiffness) - Mat(torus.stiffness)).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE((s.glued.mesh.mass - torus.mass).cwiseAbs().maxCoeff() == 0.0);
  for (int v = 0; v < 18; ++v) REQUIRE(s.glued.map_a[v] == v);
  REQUIRE(s.seam_circles == s.cycles1);
  REQUIRE(s.fop->mass() == 0.8);

  CHECK_THROWS_AS(sew_cylinders_to_torus(6, 2, 0.8), InvalidInput);
  const Mesh c = build_cylinder_collar(6, 3);
  CHECK_THROWS_AS(
      make_sew_setup(c, {c.cycles.at("top")}, c, {c.cycles.at("bottom")}, 0.0), InvalidInput);
}

TEST_CASE("boundary amplitudes live on the seam circles and fix circle polynomials") {
  const SewSetup s = sew_cylinders_to_torus(6, 3, 0.8);
  Draw d(3);
  const WickPolynomial f = random_piece_poly(s.fop1, s.capped1.original_count, d);
  const WickPolynomial amp = boundary_amplitude(s, 1, f);

  VertexSet circles;
  for (const auto& cyc : s.cycles1) circles.insert(circles.end(), cyc.begin(), cyc.end());
  circles = make_vertex_set(std::move(circles));
  REQUIRE(poly_supported_in(amp, circles));
  REQUIRE(amp.context().get() == s.fop1.get());

  WickPolynomial on_circle(s.fop1);
  on_circle.add_term(1.2, {delta(s.fop1->size(), s.cycles1[0][2])});
  on_circle.add_term(-0.4, {delta(s.fop1->size(), s.cycles1[1][0]),
                            delta(s.fop1->size(), s.cycles1[0][4])});
  const WickPolynomial fixed = boundary_amplitude(s, 1, on_circle);
  REQUIRE(coefficientwise_distance(fixed, on_circle) < 1e-12);

  SECTION("context and support violations are rejected") {
    WickPolynomial wrong_side(s.fop2);
    wrong_side.add_term(1.0, {delta(s.fop2->size(), 0)});
    CHECK_THROWS_AS(boundary_amplitude(s, 1, wrong_side), InvalidInput);

    WickPolynomial on_cap(s.fop1);
    on_cap.add_term(1.0, {delta(s.fop1->size(), s.capped1.cap_vertices[0][0])});
    CHECK_THROWS_AS(boundary_amplitude(s, 1, on_cap), InvalidInput);
    CHECK_THROWS_AS(j_map(s, 1, on_cap), InvalidInput);
    CHECK_THROWS_AS(boundary_amplitude(s, 3, f), InvalidInput);
  }
}

TEST_CASE("the sewing identity holds on collar pairs sewn to a torus") {
  const SewSetup s = sew_cylinders_to_torus(6, 3, 0.8);
  double max_abs = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Draw d(seed);
    const WickPolynomial f = random_piece_poly(s.fop1, s.capped1.original_count, d);
    const WickPolynomial g = random_piece_poly(s.fop2, s.capped2.original_count, d);
    const SewReport r = sew_check(s, f, g);
    INFO("seed " << seed << " residual " << r.residual);
    REQUIRE(r.pass);
    REQUIRE(r.tolerance == 1e-8);
    REQUIRE(r.residual < 1e-12);
    max_abs = std::max(max_abs, std::abs(r.lhs));
  }
  // The family of pairs is not vacuous: some amplitude pairings are O(1).
  REQUIRE(max_abs > 1e-3);
}

TEST_CASE("amplitudes do not depend on how the pieces were capped") {
  const SewSetup s = sew_cylinders_to_torus(6, 3, 0.8);
  const SewSetup s2 =
      sew_cylinders_to_torus(6, 3, 0.8, {CapStyle::ring_cone}, {CapStyle::cone});
  for (std::uint64_t seed = 4; seed <= 6; ++seed) {
    Draw da(seed), db(seed);
    const WickPolynomial f1 = random_piece_poly(s.fop1, s.capped1.original_count, da);
    const WickPolynomial f2 = random_piece_poly(s2.fop1, s2.capped1.original_count, db);
    Draw ea(seed + 50), eb(seed + 50);
    const WickPolynomial g1 = random_piece_poly(s.fop2, s.capped2.original_count, ea);
    const WickPolynomial g2 = random_piece_poly(s2.fop2, s2.capped2.original_count, eb);

    const double lhs1 =
        wick_inner(j_map(s, 1, boundary_amplitude(s, 1, f1)),
                   j_map(s, 2, boundary_amplitude(s, 2, g1)));
    const double lhs2 =
        wick_inner(j_map(s2, 1, boundary_amplitude(s2, 1, f2)),
                   j_map(s2, 2, boundary_amplitude(s2, 2, g2)));
    REQUIRE(std::abs(lhs1 - lhs2) <= 1e-12 * std::max(1.0, std::abs(lhs1)));
  }
}

TEST_CASE("the sewing identity holds on hemispheres sewn to a sphere") {
  const SewSetup s = sew_icosphere_halves(1, 1.0);
  REQUIRE(s.glued.mesh.vertex_count == build_icosphere(1).vertex_count);
  REQUIRE(s.capped1.original_count == 31);
  REQUIRE(s.seam_circles.size() == 1);
  REQUIRE(s.seam_circles[0].size() == 12);
  REQUIRE(is_connected(s.glued.mesh));
  const Vec rowsum = s.glued.mesh.stiffness * Vec::Ones(s.glued.mesh.vertex_count);
  REQUIRE(rowsum.cwiseAbs().maxCoeff() < 1e-12);

  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    Draw d(100 + seed);
    const WickPolynomial f = random_piece_poly(s.fop1, s.capped1.original_count, d);
    const WickPolynomial g = random_piece_poly(s.fop2, s.capped2.original_count, d);
    const SewReport r = sew_check(s, f, g);
    INFO("seed " << seed << " residual " << r.residual);
    REQUIRE(r.pass);
    REQUIRE(r.residual < 1e-12);
  }

  const SewSetup s2 = sew_icosphere_halves(1, 1.0, {CapStyle::ring_cone}, {CapStyle::ring_cone});
  Draw d(42);
  const WickPolynomial f = random_piece_poly(s2.fop1, s2.capped1.original_count, d);
  const WickPolynomial g = random_piece_poly(s2.fop2, s2.capped2.original_count, d);
  REQUIRE(sew_check(s2, f, g).pass);
}

TEST_CASE("a broken embedding fails the sewing identity") {
  const SewSetup s = sew_cylinders_to_torus(6, 3, 0.8);
  WickPolynomial f(s.fop1);
  f.add_term(1.0, {delta(s.fop1->size(), 8)});
  f.add_term(0.5, {delta(s.fop1->size(), 8), delta(s.fop1->size(), 7)});
  WickPolynomial g(s.fop2);
  g.add_term(1.0, {delta(s.fop2->size(), 9)});

  REQUIRE(sew_check(s, f, g).pass);

  // Redirect one interior piece-1 vertex to the wrong glued vertex.
  const std::map<int, int> bad{{8, (s.glued.map_a[8] + 5) % s.glued.mesh.vertex_count}};
  const SewReport r = sew_check(s, f, g, 1e-8, &bad);
  REQUIRE_FALSE(r.pass);
  REQUIRE(r.residual > 1e-4);
}

TEST_CASE("forgetting one of the two seams fails the sewing identity") {
  const SewSetup s = sew_cylinders_to_torus(6, 3, 0.8);
  WickPolynomial f(s.fop1);
  f.add_term(1.0, {delta(s.fop1->size(), 8)});
  f.add_term(0.5, {delta(s.fop1->size(), 8), delta(s.fop1->size(), 7)});
  WickPolynomial g(s.fop2);
  g.add_term(1.0, {delta(s.fop2->size(), 9)});

  // Condition on only the first seam circle of either side: the second seam
  // still couples the pieces, so the factorization must break down.
  const VertexSet c1 = make_vertex_set({s.cycles1[0].begin(), s.cycles1[0].end()});
  const VertexSet c2 = make_vertex_set({s.cycles2[0].begin(), s.cycles2[0].end()});
  const double lhs = wick_inner(j_map(s, 1, conditional_expectation(c1, f)),
                                j_map(s, 2, conditional_expectation(c2, g)));
  const double rhs = wick_inner(j_map(s, 1, f), j_map(s, 2, g));
  const double residual = std::abs(lhs - rhs) / std::max({std::abs(lhs), std::abs(rhs), 1.0});
  REQUIRE(residual > 1e-4);
}
