#pragma once

// The field operator S = L + m^2 W and the discrete Sobolev pairings
//   (u, v)_{+1} = u^T S v        (functions)
//   (f, g)_{-1} = f^T S^{-1} g   (distributions)
// together with the support projections e_A and the interior / boundary /
// exterior decomposition they induce.
//
// e_A is the orthogonal projection, in the (.,.)_{-1} metric, onto vectors
// supported in A.  It is computed from a Dirichlet solve on the complement:
// with c = A^c and u_c = (S_cc)^{-1} f_c,  e_A f = f - S u  vanishes off A
// identically, so results carry exact supports.
//
// At m = 0 the operator has the constant nullspace; pairings go through the
// deflated pseudo-inverse and require mean-zero arguments.  Support
// projections and sampling are massive-only.

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include <atomic>
#include <memory>
#include <optional>
#include <string>

#include "mfield/mesh.hpp"

namespace mfield {

enum class SolveBackend { cholesky, spectral };

class FieldOperator;
using FieldOperatorPtr = std::shared_ptr<const FieldOperator>;

class FieldOperator {
 public:
  FieldOperator(std::shared_ptr<const Mesh> mesh, double mass,
                SolveBackend backend = SolveBackend::cholesky, std::string name = "")
      : mesh_(std::move(mesh)), mass_(mass), name_(std::move(name)) {
    if (!mesh_) throw InvalidInput("FieldOperator: null mesh");
    if (mass < 0.0) throw InvalidInput("FieldOperator: mass must be >= 0");
    const int n = mesh_->vertex_count;
    S_ = mesh_->stiffness;
    if (mass_ > 0.0) {
      const double m2 = mass_ * mass_;
      SpMat wdiag(n, n);
      std::vector<Triplet> wt;
      wt.reserve(n);
      for (int i = 0; i < n; ++i) wt.emplace_back(i, i, m2 * mesh_->mass[i]);
      wdiag.setFromTriplets(wt.begin(), wt.end());
      S_ = S_ + wdiag;
    }
    S_.makeCompressed();
    zero_mode_ = Vec::Constant(n, 1.0 / std::sqrt(mesh_->mass.sum()));
    if (name_.empty()) {
      static std::atomic<int> counter{0};
      name_ = "fop-" + std::to_string(counter++);
    }

    if (mass_ == 0.0 || backend == SolveBackend::spectral) {
      if (mass_ == 0.0 && !is_connected(*mesh_))
        throw InvalidInput("FieldOperator: massless operator needs a connected mesh");
      const Mat dense(S_);
      Eigen::SelfAdjointEigenSolver<Mat> es(dense);
      if (es.info() != Eigen::Success) throw Error("FieldOperator: eigendecomposition failed");
      spectral_.emplace();
      spectral_->q = es.eigenvectors();
      spectral_->lambda = es.eigenvalues();
      const double cut = 1e-10 * std::max(1.0, spectral_->lambda[spectral_->lambda.size() - 1]);
      spectral_->null_dim = 0;
      for (int i = 0; i < spectral_->lambda.size(); ++i)
        if (spectral_->lambda[i] < cut) ++spectral_->null_dim;
      if (mass_ == 0.0 && spectral_->null_dim != 1)
        throw Error("FieldOperator: massless operator has nullspace dimension " +
                    std::to_string(spectral_->null_dim) + ", expected 1");
      if (mass_ > 0.0 && spectral_->null_dim != 0)
        throw Error("FieldOperator: massive operator is numerically singular");
    } else {
      llt_ = std::make_unique<Eigen::SimplicialLLT<SpMat>>();
      llt_->compute(S_);
      if (llt_->info() != Eigen::Success)
        throw Error("FieldOperator: Cholesky factorization failed (operator not positive definite)");
    }
  }

  FieldOperator(const FieldOperator&) = delete;
  FieldOperator& operator=(const FieldOperator&) = delete;

  const Mesh& mesh() const { return *mesh_; }
  std::shared_ptr<const Mesh> mesh_ptr() const { return mesh_; }
  double mass() const { return mass_; }
  bool massless() const { return mass_ == 0.0; }
  const SpMat& matrix() const { return S_; }
  const std::string& name() const { return name_; }
  int size() const { return mesh_->vertex_count; }

  // The constant unit-norm zero mode psi_0 (psi_0^T W psi_0 = 1).
  const Vec& zero_mode() const { return zero_mode_; }

  bool is_mean_zero(const Vec& f, double rtol = 1e-9) const {
    return std::abs(f.sum()) <= rtol * std::max(1.0, f.cwiseAbs().maxCoeff() * f.size());
  }

  // S^{-1} f; for m = 0 the pseudo-inverse on the mean-zero subspace.
  Vec solve(const Vec& f) const {
    if (f.size() != size()) throw InvalidInput("FieldOperator::solve: length mismatch");
    if (massless()) {
      if (!is_mean_zero(f))
        throw InvalidInput("FieldOperator::solve: massless operator needs mean-zero input");
      return pseudo_solve(f);
    }
    if (llt_) return llt_->solve(f);
    return pseudo_solve(f);
  }

  Vec apply(const Vec& u) const {
    if (u.size() != size()) throw InvalidInput("FieldOperator::apply: length mismatch");
    return S_ * u;
  }

  // (., .)_{order} with order in {-1, +1}.
  double inner(int order, const Vec& u, const Vec& v) const {
    if (order == 1) return u.dot(apply(v));
    if (order == -1) return u.dot(solve(v));
    throw InvalidInput("FieldOperator::inner: order must be -1 or +1");
  }

  bool has_spectrum() const { return spectral_.has_value(); }
  const Mat& eigenvectors() const { return require_spectrum().q; }
  const Vec& eigenvalues() const { return require_spectrum().lambda; }

 private:
  struct Spectral {
    Mat q;
    Vec lambda;
    int null_dim = 0;
  };

  const Spectral& require_spectrum() const {
    if (!spectral_) throw Error("FieldOperator: spectral data not built (cholesky backend)");
    return *spectral_;
  }

  Vec pseudo_solve(const Vec& f) const {
    const auto& sp = require_spectrum();
    Vec out = Vec::Zero(f.size());
    for (int i = sp.null_dim; i < sp.lambda.size(); ++i) {
      const Vec q = sp.q.col(i);
      out += q * (q.dot(f) / sp.lambda[i]);
    }
    return out;
  }

  std::shared_ptr<const Mesh> mesh_;
  double mass_;
  SpMat S_;
  std::unique_ptr<Eigen::SimplicialLLT<SpMat>> llt_;
  std::optional<Spectral> spectral_;
  Vec zero_mode_;
  std::string name_;
};

inline FieldOperatorPtr assemble_operator(std::shared_ptr<const Mesh> mesh, double mass,
                                          SolveBackend backend = SolveBackend::cholesky,
                                          std::string name = "") {
  return std::make_shared<FieldOperator>(std::move(mesh), mass, backend, std::move(name));
}

inline FieldOperatorPtr assemble_operator(const Mesh& mesh, double mass,
                                          SolveBackend backend = SolveBackend::cholesky,
                                          std::string name = "") {
  return assemble_operator(std::make_shared<Mesh>(mesh), mass, backend, std::move(name));
}

inline double sobolev_inner(const FieldOperator& fop, int order, const Vec& u, const Vec& v) {
  return fop.inner(order, u, v);
}

// ---------------------------------------------------------------------------
// Support projection

namespace detail {

inline SpMat principal_submatrix(const SpMat& s, const VertexSet& idx) {
  std::vector<int> pos(s.rows(), -1);
  for (std::size_t k = 0; k < idx.size(); ++k) pos[idx[k]] = static_cast<int>(k);
  std::vector<Triplet> trips;
  for (int c : idx) {
    for (SpMat::InnerIterator it(s, c); it; ++it) {
      const int rp = pos[it.row()];
      if (rp >= 0) trips.emplace_back(rp, pos[c], it.value());
    }
  }
  SpMat out(static_cast<int>(idx.size()), static_cast<int>(idx.size()));
  out.setFromTriplets(trips.begin(), trips.end());
  out.makeCompressed();
  return out;
}

}  // namespace detail

// e_A for a fixed set A, with the Dirichlet factorization on A^c done once.
class SupportProjector {
 public:
  SupportProjector(FieldOperatorPtr fop, VertexSet a) : fop_(std::move(fop)) {
    if (!fop_) throw InvalidInput("SupportProjector: null operator");
    if (fop_->massless())
      throw InvalidInput("SupportProjector: support projections need m > 0");
    const int n = fop_->size();
    for (int v : a)
      if (v < 0 || v >= n) throw InvalidInput("SupportProjector: index out of range");
    a_ = make_vertex_set(std::move(a));
    comp_ = set_complement(a_, n);
    if (!comp_.empty()) {
      llt_.compute(detail::principal_submatrix(fop_->matrix(), comp_));
      if (llt_.info() != Eigen::Success)
        throw Error("SupportProjector: Dirichlet factorization failed");
    }
  }

  const VertexSet& support() const { return a_; }

  Vec apply(const Vec& f) const {
    const int n = fop_->size();
    if (f.size() != n) throw InvalidInput("SupportProjector: length mismatch");
    if (a_.empty()) return Vec::Zero(n);
    if (comp_.empty()) return f;
    Vec fc(static_cast<int>(comp_.size()));
    for (std::size_t k = 0; k < comp_.size(); ++k) fc[static_cast<int>(k)] = f[comp_[k]];
    const Vec uc = llt_.solve(fc);
    Vec u = Vec::Zero(n);
    for (std::size_t k = 0; k < comp_.size(); ++k) u[comp_[k]] = uc[static_cast<int>(k)];
    const Vec su = fop_->apply(u);
    // Off A the result vanishes by construction; store exact zeros so the
    // projected vector carries its support structurally.
    Vec out = Vec::Zero(n);
    for (int v : a_) out[v] = f[v] - su[v];
    return out;
  }

  Mat matrix() const {
    const int n = fop_->size();
    Mat e(n, n);
    for (int j = 0; j < n; ++j) e.col(j) = apply(delta_vector(n, j));
    return e;
  }

 private:
  FieldOperatorPtr fop_;
  VertexSet a_, comp_;
  Eigen::SimplicialLLT<SpMat> llt_;
};

inline Vec project_support(const FieldOperatorPtr& fop, const VertexSet& a, const Vec& f) {
  return SupportProjector(fop, a).apply(f);
}

// ---------------------------------------------------------------------------
// Interior / boundary / exterior decomposition

// f = f_ext + f_bdry + f_int with exact supports in exterior+boundary,
// boundary, omega+boundary respectively.  Each outer piece is S times a
// Dirichlet potential, so the three terms are mutually orthogonal in
// (.,.)_{-1} up to solver accuracy, and the pieces tie back to the support
// projections: f_int = f - e_{omega^c} f and f_ext = f - e_{closure} f.
struct TripleDecomposition {
  Vec exterior, boundary, interior;
};

inline TripleDecomposition triple_decompose(const FieldOperatorPtr& fop,
                                            const RegionPartition& part, const Vec& f) {
  if (!fop) throw InvalidInput("triple_decompose: null operator");
  if (fop->massless()) throw InvalidInput("triple_decompose: needs m > 0");
  const int n = fop->size();
  if (f.size() != n) throw InvalidInput("triple_decompose: length mismatch");

  auto dirichlet = [&](const VertexSet& region) {
    Vec u = Vec::Zero(n);
    if (region.empty()) return u;
    Eigen::SimplicialLLT<SpMat> llt(detail::principal_submatrix(fop->matrix(), region));
    if (llt.info() != Eigen::Success) throw Error("triple_decompose: Dirichlet factorization failed");
    Vec fr(static_cast<int>(region.size()));
    for (std::size_t k = 0; k < region.size(); ++k) fr[static_cast<int>(k)] = f[region[k]];
    const Vec ur = llt.solve(fr);
    for (std::size_t k = 0; k < region.size(); ++k) u[region[k]] = ur[static_cast<int>(k)];
    return u;
  };

  const Vec u_int = dirichlet(part.omega);
  const Vec u_ext = dirichlet(part.exterior);
  const Vec s_int = fop->apply(u_int);  // supported in omega + boundary
  const Vec s_ext = fop->apply(u_ext);  // supported in exterior + boundary

  TripleDecomposition d;
  d.interior = Vec::Zero(n);
  d.exterior = Vec::Zero(n);
  d.boundary = Vec::Zero(n);
  for (int v : part.omega) d.interior[v] = f[v];
  for (int v : part.exterior) d.exterior[v] = f[v];
  for (int v : part.boundary) {
    d.interior[v] = s_int[v];
    d.exterior[v] = s_ext[v];
    d.boundary[v] = f[v] - s_int[v] - s_ext[v];
  }
  return d;
}

// ---------------------------------------------------------------------------
// Operator norms in the (.,.)_{-1} metric and the projection identity

namespace detail {

inline Mat dense_sqrt_pair(const Mat& s, Mat* inv_sqrt) {
  Eigen::SelfAdjointEigenSolver<Mat> es(s);
  if (es.info() != Eigen::Success) throw Error("dense_sqrt_pair: eigendecomposition failed");
  const Vec lam = es.eigenvalues();
  if (lam[0] <= 0.0) throw Error("dense_sqrt_pair: matrix not positive definite");
  const Mat& q = es.eigenvectors();
  Mat half = q * lam.cwiseSqrt().asDiagonal() * q.transpose();
  if (inv_sqrt) *inv_sqrt = q * lam.cwiseSqrt().cwiseInverse().asDiagonal() * q.transpose();
  return half;
}

}  // namespace detail

// Operator 2-norm of X acting on distributions with the (.,.)_{-1} metric:
// || S^{-1/2} X S^{1/2} ||_2.  Dense; intended for meshes up to a few
// hundred vertices.
inline double metric_operator_norm(const FieldOperator& fop, const Mat& x) {
  Mat inv_half;
  const Mat half = detail::dense_sqrt_pair(Mat(fop.matrix()), &inv_half);
  return (inv_half * x * half).operatorNorm();
}

// Residual || e_{omega^c} e_{closure} - e_{boundary} || in the -1 metric.
// Zero in exact arithmetic whenever boundary separates omega from the
// exterior; this is the identity behind the Markov property.
inline double premarkov_residual(const FieldOperatorPtr& fop, const RegionPartition& part) {
  SupportProjector e_comp(fop, part.omega_complement());
  SupportProjector e_clos(fop, part.closure());
  SupportProjector e_bdry(fop, part.boundary);
  const Mat lhs = e_comp.matrix() * e_clos.matrix();
  return metric_operator_norm(*fop, lhs - e_bdry.matrix());
}

}  // namespace mfield
