#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>

#include "mfield/rng.hpp"
#include "mfield/sobolev.hpp"

using namespace mfield;
using Catch::Approx;

namespace {

std::shared_ptr<const Mesh> shared_mesh(Mesh m) { return std::make_shared<Mesh>(std::move(m)); }

// L = [[1,-1],[-1,1]]; with m = 1 and unit masses S = [[2,-1],[-1,2]],
// S^{-1} = (1/3) [[2,1],[1,2]].
FieldOperatorPtr two_vertex_op() {
  Mesh m = mesh_from_data(2, {{0, 0, 1.0}, {0, 1, -1.0}, {1, 1, 1.0}}, Vec::Ones(2));
  return assemble_operator(std::move(m), 1.0);
}

Vec random_vec(const CounterRng& rng, std::uint64_t base, int n) {
  return rng.normal_vector(base * 1000, n);
}

}  // namespace

TEST_CASE("two-vertex operator matches the hand inverse") {
  const auto op = two_vertex_op();
  REQUIRE(op->size() == 2);
  REQUIRE(op->matrix().coeff(0, 0) == 2.0);
  REQUIRE(op->matrix().coeff(0, 1) == -1.0);

  const Vec d0 = delta_vector(2, 0), d1 = delta_vector(2, 1);
  const Vec s = op->solve(d0);
  REQUIRE(s[0] == Approx(2.0 / 3.0).epsilon(1e-14));
  REQUIRE(s[1] == Approx(1.0 / 3.0).epsilon(1e-14));

  CHECK(op->inner(-1, d0, d0) == Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(op->inner(-1, d0, d1) == Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(op->inner(+1, d0, d0) == 2.0);
  CHECK(op->inner(+1, d0, d1) == -1.0);
  CHECK(sobolev_inner(*op, -1, d1, d1) == Approx(2.0 / 3.0).epsilon(1e-14));

  CHECK_THROWS_AS(op->inner(0, d0, d1), InvalidInput);
  CHECK_THROWS_AS(op->solve(Vec::Zero(5)), InvalidInput);
  CHECK_THROWS_AS(op->apply(Vec::Zero(5)), InvalidInput);
}

TEST_CASE("solve inverts apply on both backends") {
  const auto mesh = shared_mesh(build_torus_lattice(6, 5));
  const auto chol = assemble_operator(mesh, 0.7);
  const auto spec = assemble_operator(mesh, 0.7, SolveBackend::spectral);
  REQUIRE_FALSE(chol->has_spectrum());
  REQUIRE(spec->has_spectrum());

  const CounterRng rng(314, rng_stream::kTest);
  for (int k = 0; k < 5; ++k) {
    const Vec u = random_vec(rng, k, chol->size());
    const Vec round = chol->solve(chol->apply(u));
    REQUIRE((round - u).cwiseAbs().maxCoeff() < 1e-12 * u.cwiseAbs().maxCoeff());
    const Vec a = chol->solve(u), b = spec->solve(u);
    REQUIRE((a - b).cwiseAbs().maxCoeff() < 1e-10 * a.cwiseAbs().maxCoeff());
  }

  // pairing symmetry
  const Vec f = random_vec(rng, 50, chol->size()), g = random_vec(rng, 51, chol->size());
  CHECK(chol->inner(-1, f, g) == Approx(chol->inner(-1, g, f)).epsilon(1e-12));
  CHECK(chol->inner(+1, f, g) == Approx(chol->inner(+1, g, f)).epsilon(1e-12));
}

TEST_CASE("massless operator is the deflated pseudo-inverse") {
  const auto op = assemble_operator(make_path_mesh(3), 0.0);
  REQUIRE(op->massless());
  REQUIRE(op->has_spectrum());

  // (1,0,-1) is the eigenvector of the path Laplacian with eigenvalue 1
  Vec f(3);
  f << 1.0, 0.0, -1.0;
  const Vec x = op->solve(f);
  REQUIRE((x - f).cwiseAbs().maxCoeff() < 1e-12);

  // mean-zero is required
  CHECK(op->is_mean_zero(f));
  CHECK_FALSE(op->is_mean_zero(delta_vector(3, 0)));
  CHECK_THROWS_AS(op->solve(delta_vector(3, 0)), InvalidInput);

  // the pseudo-inverse output is itself mean zero
  Vec g(3);
  g << 2.0, -1.0, -1.0;
  CHECK(std::abs(op->solve(g).sum()) < 1e-12);

  // zero mode normalization: psi0^T W psi0 = 1
  const Vec psi = op->zero_mode();
  REQUIRE(psi[0] == Approx(1.0 / std::sqrt(3.0)).epsilon(1e-15));
  REQUIRE(psi.dot(op->mesh().mass.cwiseProduct(psi)) == Approx(1.0).epsilon(1e-14));

  // small-mass operators converge to it on the mean-zero subspace
  const auto near0 = assemble_operator(make_path_mesh(3), 1e-4);
  REQUIRE((near0->solve(f) - x).cwiseAbs().maxCoeff() < 1e-6);

  const Mesh two = mesh_from_data(
      4, {{0, 0, 1.0}, {0, 1, -1.0}, {1, 1, 1.0}, {2, 2, 1.0}, {2, 3, -1.0}, {3, 3, 1.0}},
      Vec::Ones(4));
  CHECK_THROWS_AS(assemble_operator(two, 0.0), InvalidInput);
  CHECK_THROWS_AS(assemble_operator(make_path_mesh(3), -1.0), InvalidInput);
}

TEST_CASE("support projection on the three-vertex path") {
  // S = [[2,-1,0],[-1,3,-1],[0,-1,2]]; e_{0} delta_2 = (1/5, 0, 0)
  const auto op = assemble_operator(make_path_mesh(3), 1.0);
  const SupportProjector e0(op, {0});
  const Vec p = e0.apply(delta_vector(3, 2));
  REQUIRE(p[0] == Approx(0.2).epsilon(1e-14));
  REQUIRE(p[1] == 0.0);
  REQUIRE(p[2] == 0.0);

  const Mat m = e0.matrix();
  REQUIRE(m.rows() == 3);
  REQUIRE(m(0, 2) == Approx(0.2).epsilon(1e-14));
  REQUIRE(project_support(op, {0}, delta_vector(3, 2))[0] == Approx(0.2).epsilon(1e-14));
}

TEST_CASE("support projections behave like -1 metric orthogonal projections") {
  const auto op = assemble_operator(build_torus_lattice(6, 5), 1.0);
  const int n = op->size();
  const RegionPartition part = make_partition(op->mesh(), lattice_lines(6, 5, 1, 1, 2));
  const SupportProjector e(op, part.closure());
  const CounterRng rng(777, rng_stream::kTest);

  SECTION("fixes vectors already supported in A, exactly") {
    Vec f = Vec::Zero(n);
    for (int v : part.closure()) f[v] = rng.normal(v);
    const Vec pf = e.apply(f);
    REQUIRE((pf - f).cwiseAbs().maxCoeff() == 0.0);
  }
  SECTION("idempotent and norm one") {
    const Vec f = random_vec(rng, 1, n);
    const Vec once = e.apply(f), twice = e.apply(once);
    REQUIRE((twice - once).cwiseAbs().maxCoeff() < 1e-12 * once.cwiseAbs().maxCoeff());
    CHECK(metric_operator_norm(*op, e.matrix()) == Approx(1.0).epsilon(1e-9));
  }
  SECTION("self-adjoint in the -1 pairing") {
    const Vec f = random_vec(rng, 2, n), g = random_vec(rng, 3, n);
    const double lhs = op->inner(-1, e.apply(f), g);
    const double rhs = op->inner(-1, f, e.apply(g));
    REQUIRE(lhs == Approx(rhs).epsilon(1e-10));
  }
  SECTION("exact zeros off the support") {
    const Vec pf = e.apply(random_vec(rng, 4, n));
    for (int v : part.exterior) REQUIRE(pf[v] == 0.0);
  }
  SECTION("degenerate supports") {
    const SupportProjector none(op, {});
    REQUIRE(none.apply(random_vec(rng, 5, n)).cwiseAbs().maxCoeff() == 0.0);
    VertexSet all(n);
    for (int v = 0; v < n; ++v) all[v] = v;
    const SupportProjector full(op, all);
    const Vec f = random_vec(rng, 6, n);
    REQUIRE((full.apply(f) - f).cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(SupportProjector(op, {n}), InvalidInput);
  }
  SECTION("massless operators have no support projections") {
    const auto zero = assemble_operator(build_torus_lattice(6, 5), 0.0);
    CHECK_THROWS_AS(SupportProjector(zero, part.closure()), InvalidInput);
  }
}

TEST_CASE("triple decomposition splits distributions across a partition") {
  const auto op = assemble_operator(build_torus_lattice(7, 5), 1.3);
  const int n = op->size();
  VertexSet ball;
  const Vec bump = graph_bump(op->mesh(), 9, 2);
  for (int v = 0; v < n; ++v)
    if (bump[v] > 0.0) ball.push_back(v);
  const RegionPartition part = make_partition(op->mesh(), ball);
  const CounterRng rng(555, rng_stream::kTest);

  for (int k = 0; k < 4; ++k) {
    const Vec f = random_vec(rng, k, n);
    const auto d = triple_decompose(op, part, f);
    const double scale = f.cwiseAbs().maxCoeff();

    // exact supports
    for (int v : part.exterior) {
      REQUIRE(d.interior[v] == 0.0);
      REQUIRE(d.boundary[v] == 0.0);
    }
    for (int v : part.omega) {
      REQUIRE(d.exterior[v] == 0.0);
      REQUIRE(d.boundary[v] == 0.0);
      REQUIRE(d.interior[v] == f[v]);
    }

    const Vec sum = d.interior + d.boundary + d.exterior;
    REQUIRE((sum - f).cwiseAbs().maxCoeff() < 1e-13 * scale);

    // mutual -1 orthogonality
    auto nrm = [&](const Vec& x) { return std::sqrt(std::max(op->inner(-1, x, x), 0.0)); };
    const double ni = nrm(d.interior), ne = nrm(d.exterior), nb = nrm(d.boundary);
    CHECK(std::abs(op->inner(-1, d.interior, d.exterior)) < 1e-10 * std::max(ni * ne, 1.0));
    CHECK(std::abs(op->inner(-1, d.interior, d.boundary)) < 1e-10 * std::max(ni * nb, 1.0));
    CHECK(std::abs(op->inner(-1, d.exterior, d.boundary)) < 1e-10 * std::max(ne * nb, 1.0));

    // agreement with the support projections
    const Vec f_int = f - project_support(op, part.omega_complement(), f);
    const Vec f_ext = f - project_support(op, part.closure(), f);
    CHECK((d.interior - f_int).cwiseAbs().maxCoeff() < 1e-12 * scale);
    CHECK((d.exterior - f_ext).cwiseAbs().maxCoeff() < 1e-12 * scale);
  }

  CHECK_THROWS_AS(triple_decompose(op, part, Vec::Zero(2)), InvalidInput);
  const auto zero = assemble_operator(build_torus_lattice(7, 5), 0.0);
  CHECK_THROWS_AS(triple_decompose(zero, part, Vec::Zero(n)), InvalidInput);
}

TEST_CASE("projection identity across region shapes and masses") {
  const auto torus = shared_mesh(build_torus_lattice(6, 5));
  for (double mass : {0.1, 1.0, 10.0}) {
    const auto op = assemble_operator(torus, mass);
    for (int center : {0, 8, 17}) {
      VertexSet ball;
      const Vec bump = graph_bump(*torus, center, 1);
      for (int v = 0; v < torus->vertex_count; ++v)
        if (bump[v] > 0.0) ball.push_back(v);
      const RegionPartition part = make_partition(*torus, ball);
      INFO("mass " << mass << " center " << center);
      REQUIRE(premarkov_residual(op, part) < 1e-10);
    }
  }

  const Mesh sphere = build_icosphere(1);
  VertexSet omega;
  for (int v = 0; v < sphere.vertex_count; ++v)
    if (sphere.positions[v].x() > 0.0) omega.push_back(v);
  const RegionPartition part = make_partition(sphere, omega);
  REQUIRE(premarkov_residual(assemble_operator(sphere, 1.0), part) < 1e-10);
}

TEST_CASE("metric operator norm recovers spectral facts") {
  const auto op = assemble_operator(build_torus_lattice(5, 4), 0.9);
  const int n = op->size();
  CHECK(metric_operator_norm(*op, Mat::Identity(n, n)) == Approx(1.0).epsilon(1e-10));
  CHECK(metric_operator_norm(*op, 2.0 * Mat::Identity(n, n)) == Approx(2.0).epsilon(1e-10));

  const Mat s(op->matrix());
  Eigen::SelfAdjointEigenSolver<Mat> es(s);
  CHECK(metric_operator_norm(*op, s) ==
        Approx(es.eigenvalues()[n - 1]).epsilon(1e-9));
}
