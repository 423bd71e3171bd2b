#pragma once

// Reflection positivity.  Given a validated reflection (an involution
// swapping omega with the exterior and fixing the separating boundary), the
// reflection operator on polynomials is Theta = Gamma(theta): factors are
// permuted vertex-wise.  For a family F_1..F_k supported in the closed
// positive half, the Gram matrix
//     M_ij = < Theta F_i, F_j >
// is symmetric and, by the Markov property through the fixed boundary,
// positive semidefinite.  The m = 0 variant evaluates the same Grams with
// the deflated pairing on mean-zero families.

#include <nlohmann/json.hpp>

#include "mfield/wick.hpp"

namespace mfield {

inline WickPolynomial reflect_poly(const Involution& inv, const WickPolynomial& p) {
  return apply_gamma(p, [&inv](const Vec& f) -> Vec { return inv.apply(f); });
}

inline PlainPolynomial reflect_poly(const Involution& inv, const PlainPolynomial& p) {
  PlainPolynomial out;
  for (const auto& [mono, coef] : p.terms()) {
    std::vector<Vec> m;
    m.reserve(mono.size());
    for (const Vec& f : mono) m.push_back(inv.apply(f));
    out.add_term(coef, std::move(m));
  }
  return out;
}

enum class MassMode { massive, zero_mass_limit };

struct GramReport {
  Mat matrix;
  Vec eigenvalues;
  double min_eigenvalue = 0.0;
  double scale = 0.0;       // spectral norm of the Gram
  double tolerance = 0.0;   // PSD verdict threshold: min_eig >= -tolerance * max(scale, 1)
  bool positive = false;
  double mass = 0.0;
  int family_size = 0;
  std::vector<std::string> family_refs;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["family_size"] = family_size;
    j["mass"] = mass;
    j["matrix"] = nlohmann::json::array();
    for (int r = 0; r < matrix.rows(); ++r) {
      std::vector<double> row(matrix.cols());
      for (int c = 0; c < matrix.cols(); ++c) row[c] = matrix(r, c);
      j["matrix"].push_back(row);
    }
    j["eigenvalues"] = std::vector<double>(eigenvalues.data(), eigenvalues.data() + eigenvalues.size());
    j["min_eigenvalue"] = min_eigenvalue;
    j["scale"] = scale;
    j["tolerance"] = tolerance;
    j["positive"] = positive;
    j["family"] = family_refs;
    return j;
  }
};

namespace detail {

inline GramReport gram_verdict(Mat m, double mass, double tol,
                               std::vector<std::string> refs) {
  GramReport rep;
  rep.family_size = static_cast<int>(m.rows());
  rep.mass = mass;
  // The Gram is symmetric up to roundoff; symmetrize before the eigensolve.
  rep.matrix = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(rep.matrix);
  if (es.info() != Eigen::Success) throw Error("rp_gram: eigendecomposition failed");
  rep.eigenvalues = es.eigenvalues();
  rep.min_eigenvalue = rep.eigenvalues[0];
  rep.scale = std::max(std::abs(rep.eigenvalues[0]),
                       std::abs(rep.eigenvalues[rep.eigenvalues.size() - 1]));
  rep.tolerance = tol;
  rep.positive = rep.min_eigenvalue >= -tol * std::max(rep.scale, 1.0);
  rep.family_refs = std::move(refs);
  return rep;
}

}  // namespace detail

// Gram matrix of a Wick polynomial family under the reflection.  Every
// family member must be supported in the closed positive half
// omega + boundary; pass enforce_support = false only to build negative
// controls in tests.
inline GramReport rp_gram(const Involution& inv, const RegionPartition& part,
                          const std::vector<WickPolynomial>& family, double tol = 1e-9,
                          bool enforce_support = true,
                          std::vector<std::string> family_refs = {}) {
  if (family.empty()) throw InvalidInput("rp_gram: empty family");
  const FieldOperatorPtr& ctx = family[0].context();
  const VertexSet closed_half = set_union(part.omega, part.boundary);
  for (std::size_t i = 0; i < family.size(); ++i) {
    family[i].require_same_context(family[0]);
    if (enforce_support && !poly_supported_in(family[i], closed_half))
      throw InvalidInput("rp_gram: family member " + std::to_string(i) +
                         " is not supported in the closed positive half");
  }
  const int k = static_cast<int>(family.size());
  std::vector<WickPolynomial> reflected;
  reflected.reserve(k);
  for (const auto& f : family) reflected.push_back(reflect_poly(inv, f));
  Mat m(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) m(i, j) = wick_inner(reflected[i], family[j]);
  if (family_refs.empty()) {
    for (int i = 0; i < k; ++i) family_refs.push_back("F" + std::to_string(i));
  }
  return detail::gram_verdict(std::move(m), ctx->mass(), tol, std::move(family_refs));
}

// Same Gram for plain polynomial families, evaluated directly as Gaussian
// integrals E[(Theta F_i)(Phi) F_j(Phi)].  Plain families are mass
// independent objects, which makes them the right carrier for the m -> 0
// comparison: at m = 0 all factors must be mean-zero and the pairing is
// the deflated one.
inline GramReport rp_gram_plain(const FieldOperatorPtr& fop, const Involution& inv,
                                const RegionPartition& part,
                                const std::vector<PlainPolynomial>& family, double tol = 1e-9,
                                bool enforce_support = true,
                                std::vector<std::string> family_refs = {}) {
  if (!fop) throw InvalidInput("rp_gram_plain: null operator");
  if (family.empty()) throw InvalidInput("rp_gram_plain: empty family");
  const VertexSet closed_half = set_union(part.omega, part.boundary);
  for (std::size_t i = 0; i < family.size(); ++i) {
    if (enforce_support && !poly_supported_in(family[i], closed_half))
      throw InvalidInput("rp_gram_plain: family member " + std::to_string(i) +
                         " is not supported in the closed positive half");
  }
  const int k = static_cast<int>(family.size());
  Mat m(k, k);
  for (int i = 0; i < k; ++i) {
    const PlainPolynomial ri = reflect_poly(inv, family[i]);
    for (int j = 0; j < k; ++j) {
      const PlainPolynomial prod = ri * family[j];
      double val = 0.0;
      for (const auto& [mono, coef] : prod.terms()) val += coef * gaussian_moment(*fop, mono);
      m(i, j) = val;
    }
  }
  if (family_refs.empty()) {
    for (int i = 0; i < k; ++i) family_refs.push_back("F" + std::to_string(i));
  }
  return detail::gram_verdict(std::move(m), fop->mass(), tol, std::move(family_refs));
}

}  // namespace mfield
