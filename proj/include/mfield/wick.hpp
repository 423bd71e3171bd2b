#pragma once

// Polynomial field functionals over a Gaussian field with covariance S^{-1}.
//
// A PlainPolynomial is a sum of monomials  c * phi(f_1) ... phi(f_k)  in the
// field pairings phi(f) = f^T Phi; it can be evaluated on samples.  A
// WickPolynomial carries the same data interpreted with normal-ordered
// (orthogonalized) monomials :phi(f_1)...phi(f_k): relative to a specific
// field operator, its context.  Monomials are kept in a canonical order so
// polynomials form exact coefficient maps.
//
// Provided here: exact Gaussian moments by pairing enumeration, the Fock
// inner product of Wick polynomials (a permanent per monomial pair), the
// conversions between plain and Wick form, the multiplicative functor
// Gamma(T) acting factor-wise, conditional expectation Gamma(e_A), field
// sampling, and a Monte Carlo conditional-expectation oracle used to
// cross-check the algebraic results.
//
// Degrees are capped at 8: pairing enumeration beyond that is outside this
// library's scope and fails loudly rather than silently slowing down.

#include <functional>
#include <map>
#include <vector>

#include "mfield/rng.hpp"
#include "mfield/sobolev.hpp"

namespace mfield {

inline constexpr int kMaxDegree = 8;

namespace detail {

inline int compare_vec(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) return a.size() < b.size() ? -1 : 1;
  for (int i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) return a[i] < b[i] ? -1 : 1;
  }
  return 0;
}

struct FactorLess {
  bool operator()(const Vec& a, const Vec& b) const { return compare_vec(a, b) < 0; }
};

using Monomial = std::vector<Vec>;

struct MonomialLess {
  bool operator()(const Monomial& a, const Monomial& b) const {
    const std::size_t k = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < k; ++i) {
      const int c = compare_vec(a[i], b[i]);
      if (c != 0) return c < 0;
    }
    return a.size() < b.size();
  }
};

inline Monomial canonical(Monomial m) {
  std::sort(m.begin(), m.end(), FactorLess{});
  return m;
}

using TermMap = std::map<Monomial, double, MonomialLess>;

inline void add_to(TermMap& terms, Monomial mono, double coef) {
  if (coef == 0.0) return;
  if (static_cast<int>(mono.size()) > kMaxDegree)
    throw InvalidInput("polynomial degree exceeds the cap of " + std::to_string(kMaxDegree));
  for (const Vec& f : mono) {
    if (!f.allFinite()) throw InvalidInput("polynomial factor has non-finite entries");
  }
  auto [it, inserted] = terms.emplace(canonical(std::move(mono)), coef);
  if (!inserted) {
    it->second += coef;
    if (it->second == 0.0) terms.erase(it);
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Polynomial types

class PlainPolynomial {
 public:
  PlainPolynomial() = default;
  static PlainPolynomial constant(double c) {
    PlainPolynomial p;
    detail::add_to(p.terms_, {}, c);
    return p;
  }
  static PlainPolynomial monomial(double coef, std::vector<Vec> factors) {
    PlainPolynomial p;
    detail::add_to(p.terms_, std::move(factors), coef);
    return p;
  }

  void add_term(double coef, std::vector<Vec> factors) {
    detail::add_to(terms_, std::move(factors), coef);
  }

  const detail::TermMap& terms() const { return terms_; }
  bool zero() const { return terms_.empty(); }

  int degree() const {
    int d = 0;
    for (const auto& [m, c] : terms_) d = std::max(d, static_cast<int>(m.size()));
    return d;
  }

  double evaluate(const Vec& field) const {
    double out = 0.0;
    for (const auto& [mono, coef] : terms_) {
      double t = coef;
      for (const Vec& f : mono) t *= f.dot(field);
      out += t;
    }
    return out;
  }

  PlainPolynomial& operator+=(const PlainPolynomial& o) {
    for (const auto& [m, c] : o.terms_) detail::add_to(terms_, m, c);
    return *this;
  }
  PlainPolynomial& operator*=(double s) {
    if (s == 0.0) {
      terms_.clear();
      return *this;
    }
    for (auto& [m, c] : terms_) c *= s;
    return *this;
  }
  friend PlainPolynomial operator+(PlainPolynomial a, const PlainPolynomial& b) { return a += b; }
  friend PlainPolynomial operator*(double s, PlainPolynomial p) { return p *= s; }

  // Multiplies by the field factor phi(f).
  PlainPolynomial& multiply_field(const Vec& f) {
    detail::TermMap out;
    for (const auto& [mono, coef] : terms_) {
      detail::Monomial m = mono;
      m.push_back(f);
      detail::add_to(out, std::move(m), coef);
    }
    terms_ = std::move(out);
    return *this;
  }

  PlainPolynomial operator*(const PlainPolynomial& o) const {
    PlainPolynomial out;
    for (const auto& [ma, ca] : terms_) {
      for (const auto& [mb, cb] : o.terms_) {
        detail::Monomial m = ma;
        m.insert(m.end(), mb.begin(), mb.end());
        detail::add_to(out.terms_, std::move(m), ca * cb);
      }
    }
    return out;
  }

 private:
  detail::TermMap terms_;
};

class WickPolynomial {
 public:
  explicit WickPolynomial(FieldOperatorPtr context) : context_(std::move(context)) {
    if (!context_) throw InvalidInput("WickPolynomial: null context");
  }
  static WickPolynomial constant(FieldOperatorPtr ctx, double c) {
    WickPolynomial p(std::move(ctx));
    detail::add_to(p.terms_, {}, c);
    return p;
  }
  static WickPolynomial monomial(FieldOperatorPtr ctx, double coef, std::vector<Vec> factors) {
    WickPolynomial p(std::move(ctx));
    p.add_term(coef, std::move(factors));
    return p;
  }

  void add_term(double coef, std::vector<Vec> factors) {
    for (const Vec& f : factors) {
      if (f.size() != context_->size())
        throw InvalidInput("WickPolynomial: factor length does not match the operator");
    }
    detail::add_to(terms_, std::move(factors), coef);
  }

  const detail::TermMap& terms() const { return terms_; }
  const FieldOperatorPtr& context() const { return context_; }
  bool zero() const { return terms_.empty(); }

  int degree() const {
    int d = 0;
    for (const auto& [m, c] : terms_) d = std::max(d, static_cast<int>(m.size()));
    return d;
  }

  WickPolynomial& operator+=(const WickPolynomial& o) {
    require_same_context(o);
    for (const auto& [m, c] : o.terms_) detail::add_to(terms_, m, c);
    return *this;
  }
  WickPolynomial& operator*=(double s) {
    if (s == 0.0) {
      terms_.clear();
      return *this;
    }
    for (auto& [m, c] : terms_) c *= s;
    return *this;
  }
  friend WickPolynomial operator+(WickPolynomial a, const WickPolynomial& b) { return a += b; }
  friend WickPolynomial operator*(double s, WickPolynomial p) { return p *= s; }

  void require_same_context(const WickPolynomial& o) const {
    if (context_.get() != o.context_.get())
      throw InvalidInput("Wick polynomials belong to different operator contexts");
  }

 private:
  FieldOperatorPtr context_;
  detail::TermMap terms_;
};

// True when every monomial of p has all factors supported in A.
template <class Poly>
inline bool poly_supported_in(const Poly& p, const VertexSet& a) {
  for (const auto& [mono, coef] : p.terms()) {
    for (const Vec& f : mono) {
      if (!supported_in(f, a)) return false;
    }
  }
  return true;
}

template <class Poly>
inline double max_abs_coefficient(const Poly& p) {
  double m = 0.0;
  for (const auto& [mono, coef] : p.terms()) m = std::max(m, std::abs(coef));
  return m;
}

// ---------------------------------------------------------------------------
// Gaussian moments and the Fock inner product

namespace detail {

// Per-call cache of S^{-1} f.  Keyed by value: callers pair vectors living
// in short-lived intermediate term maps, so address keys would alias freed
// storage.
class SolveCache {
 public:
  explicit SolveCache(const FieldOperator& fop) : fop_(fop) {}
  const Vec& solved(const Vec& f) {
    auto it = cache_.find(f);
    if (it == cache_.end()) it = cache_.emplace(f, fop_.solve(f)).first;
    return it->second;
  }
  double pair(const Vec& f, const Vec& g) { return f.dot(solved(g)); }

 private:
  const FieldOperator& fop_;
  std::map<Vec, Vec, FactorLess> cache_;
};

// Sum over perfect matchings of the complete graph on `fs`, weighted by the
// pairwise covariances; the memoized recursion removes the lowest indexed
// element and its partner.
inline double pairing_sum(const Mat& c) {
  const int n = static_cast<int>(c.rows());
  if (n % 2 != 0) return 0.0;
  std::vector<double> memo(std::size_t(1) << n, 0.0);
  std::vector<char> known(std::size_t(1) << n, 0);
  std::function<double(std::uint32_t)> rec = [&](std::uint32_t mask) -> double {
    if (mask == 0) return 1.0;
    if (known[mask]) return memo[mask];
    const int i = __builtin_ctz(mask);
    double s = 0.0;
    for (int j = i + 1; j < n; ++j) {
      if (mask & (1u << j)) s += c(i, j) * rec(mask & ~(1u << i) & ~(1u << j));
    }
    known[mask] = 1;
    memo[mask] = s;
    return s;
  };
  return rec((n == 32 ? ~0u : ((1u << n) - 1)));
}

// Permanent by subset dynamic programming (rows in order, masks of columns).
inline double permanent(const Mat& a) {
  const int k = static_cast<int>(a.rows());
  std::vector<double> dp(std::size_t(1) << k, 0.0);
  dp[0] = 1.0;
  for (std::uint32_t mask = 1; mask < (1u << k); ++mask) {
    const int row = __builtin_popcount(mask) - 1;
    double s = 0.0;
    for (int j = 0; j < k; ++j) {
      if (mask & (1u << j)) s += dp[mask & ~(1u << j)] * a(row, j);
    }
    dp[mask] = s;
  }
  return dp[(1u << k) - 1];
}

}  // namespace detail

// E[ phi(f_1) ... phi(f_k) ] under the centered Gaussian with covariance
// S^{-1}: zero for odd k, the pairing sum otherwise.  At m = 0 all factors
// must be mean-zero (the pairing is the deflated pseudo-inverse one).
inline double gaussian_moment(const FieldOperator& fop, const std::vector<Vec>& fs) {
  const int n = static_cast<int>(fs.size());
  if (n > kMaxDegree) throw InvalidInput("gaussian_moment: degree exceeds cap");
  if (n % 2 != 0) return 0.0;
  if (n == 0) return 1.0;
  detail::SolveCache cache(fop);
  Mat c(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) c(i, j) = c(j, i) = cache.pair(fs[i], fs[j]);
  }
  return detail::pairing_sum(c);
}

// Fock inner product <a, b>: Wick monomials of different degree are
// orthogonal; equal-degree monomials pair via the permanent of their
// covariance matrix.
inline double wick_inner(const WickPolynomial& a, const WickPolynomial& b) {
  a.require_same_context(b);
  detail::SolveCache cache(*a.context());
  double out = 0.0;
  for (const auto& [ma, ca] : a.terms()) {
    for (const auto& [mb, cb] : b.terms()) {
      if (ma.size() != mb.size()) continue;
      const int k = static_cast<int>(ma.size());
      if (k == 0) {
        out += ca * cb;
        continue;
      }
      Mat c(k, k);
      for (int r = 0; r < k; ++r)
        for (int s = 0; s < k; ++s) c(r, s) = cache.pair(ma[r], mb[s]);
      out += ca * cb * detail::permanent(c);
    }
  }
  return out;
}

inline double fock_norm(const WickPolynomial& p) {
  return std::sqrt(std::max(0.0, wick_inner(p, p)));
}

// ---------------------------------------------------------------------------
// Conversions between plain and Wick form

namespace detail {

inline PlainPolynomial wick_monomial_as_plain(SolveCache& cache, const Monomial& fs) {
  const int n = static_cast<int>(fs.size());
  Mat c(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) c(i, j) = c(j, i) = (i == j ? 0.0 : cache.pair(fs[i], fs[j]));

  std::map<std::uint32_t, PlainPolynomial> memo;
  std::function<const PlainPolynomial&(std::uint32_t)> rec =
      [&](std::uint32_t mask) -> const PlainPolynomial& {
    auto it = memo.find(mask);
    if (it != memo.end()) return it->second;
    PlainPolynomial out;
    if (mask == 0) {
      out = PlainPolynomial::constant(1.0);
    } else {
      const int i = __builtin_ctz(mask);
      const std::uint32_t rest = mask & ~(1u << i);
      // :phi(f_i) Q: = phi(f_i) :Q: - sum_j (f_i, f_j) :Q without f_j:
      PlainPolynomial head = rec(rest);
      head.multiply_field(fs[i]);
      out += head;
      for (int j = 0; j < n; ++j) {
        if (rest & (1u << j)) {
          PlainPolynomial tail = rec(rest & ~(1u << j));
          tail *= -c(i, j);
          out += tail;
        }
      }
    }
    return memo.emplace(mask, std::move(out)).first->second;
  };
  return rec(n == 0 ? 0u : (1u << n) - 1);
}

}  // namespace detail

// Expands normal-ordered monomials into ordinary field products.
inline PlainPolynomial to_plain(const WickPolynomial& p) {
  detail::SolveCache cache(*p.context());
  PlainPolynomial out;
  for (const auto& [mono, coef] : p.terms()) {
    PlainPolynomial term = detail::wick_monomial_as_plain(cache, mono);
    term *= coef;
    out += term;
  }
  return out;
}

namespace detail {

// phi(f) * (Wick polynomial): the product rule
//   phi(f) :phi(g_1)...phi(g_k): = :phi(f) phi(g_1)...: + sum_i (f, g_i) :... g_i removed ...:
inline void field_times_wick(SolveCache& cache, const Vec& f, const TermMap& terms, TermMap& out) {
  for (const auto& [gs, c] : terms) {
    Monomial up = gs;
    up.push_back(f);
    add_to(out, std::move(up), c);
    for (std::size_t i = 0; i < gs.size(); ++i) {
      Monomial down;
      down.reserve(gs.size() - 1);
      for (std::size_t j = 0; j < gs.size(); ++j)
        if (j != i) down.push_back(gs[j]);
      add_to(out, std::move(down), c * cache.pair(f, gs[i]));
    }
  }
}

}  // namespace detail

// Rewrites an ordinary polynomial in the normal-ordered basis of `ctx`.
inline WickPolynomial to_wick(FieldOperatorPtr ctx, const PlainPolynomial& p) {
  if (!ctx) throw InvalidInput("to_wick: null context");
  detail::SolveCache cache(*ctx);
  WickPolynomial out(ctx);
  detail::TermMap acc;
  for (const auto& [mono, coef] : p.terms()) {
    detail::TermMap cur;
    detail::add_to(cur, {}, coef);
    for (const Vec& f : mono) {
      detail::TermMap next;
      detail::field_times_wick(cache, f, cur, next);
      cur = std::move(next);
    }
    for (auto& [m, c] : cur) detail::add_to(acc, m, c);
  }
  for (auto& [m, c] : acc) out.add_term(c, m);
  return out;
}

// ---------------------------------------------------------------------------
// The multiplicative functor Gamma and conditional expectation

// Gamma(T) acts on Wick monomials factor-wise:
// :phi(f_1)...phi(f_k): -> :phi(T f_1)...phi(T f_k):.
inline WickPolynomial apply_gamma(const WickPolynomial& p,
                                  const std::function<Vec(const Vec&)>& t) {
  WickPolynomial out(p.context());
  std::map<Vec, Vec, detail::FactorLess> mapped;
  for (const auto& [mono, coef] : p.terms()) {
    detail::Monomial m;
    m.reserve(mono.size());
    for (const Vec& f : mono) {
      auto it = mapped.find(f);
      if (it == mapped.end()) it = mapped.emplace(f, t(f)).first;
      m.push_back(it->second);
    }
    out.add_term(coef, std::move(m));
  }
  return out;
}

inline WickPolynomial apply_gamma(const WickPolynomial& p, const Mat& t) {
  return apply_gamma(p, [&t](const Vec& f) -> Vec { return t * f; });
}

// E_A = Gamma(e_A): conditional expectation onto the sigma-algebra of the
// field in A, acting on normal-ordered polynomials.
inline WickPolynomial conditional_expectation(const VertexSet& a, const WickPolynomial& p) {
  SupportProjector e(p.context(), a);
  return apply_gamma(p, [&e](const Vec& f) -> Vec { return e.apply(f); });
}

// ---------------------------------------------------------------------------
// Coefficient-wise comparison

namespace detail {

// Clusters numerically coincident factors across both polynomials (inf-norm
// distance <= factor_tol), rewrites both over cluster representatives and
// returns the largest coefficient difference.  This makes "same polynomial"
// robust to factors that agree only to solver accuracy.
template <class Poly>
inline double coefficient_distance_impl(const Poly& a, const Poly& b, double factor_tol) {
  std::vector<Vec> factors;
  auto collect = [&factors](const Poly& p) {
    for (const auto& [mono, c] : p.terms())
      for (const Vec& f : mono) factors.push_back(f);
  };
  collect(a);
  collect(b);
  const int nf = static_cast<int>(factors.size());
  std::vector<int> rep(nf);
  for (int i = 0; i < nf; ++i) rep[i] = i;
  std::function<int(int)> find = [&](int x) { return rep[x] == x ? x : rep[x] = find(rep[x]); };
  for (int i = 0; i < nf; ++i) {
    for (int j = i + 1; j < nf; ++j) {
      if (factors[i].size() != factors[j].size()) continue;
      if ((factors[i] - factors[j]).cwiseAbs().maxCoeff() <= factor_tol) {
        rep[find(i)] = find(j);
      }
    }
  }
  TermMap ta, tb;
  {
    // First the factors of `a` occupy the cursor range, then those of `b`.
    TermMap out;
    int cursor = 0;
    for (const auto& [mono, c] : a.terms()) {
      Monomial m;
      for (std::size_t k = 0; k < mono.size(); ++k) m.push_back(factors[find(cursor++)]);
      add_to(out, std::move(m), c);
    }
    ta = std::move(out);
    out.clear();
    for (const auto& [mono, c] : b.terms()) {
      Monomial m;
      for (std::size_t k = 0; k < mono.size(); ++k) m.push_back(factors[find(cursor++)]);
      add_to(out, std::move(m), c);
    }
    tb = std::move(out);
  }
  double dist = 0.0;
  MonomialLess less;
  auto ia = ta.begin();
  auto ib = tb.begin();
  while (ia != ta.end() || ib != tb.end()) {
    if (ib == tb.end() || (ia != ta.end() && less(ia->first, ib->first))) {
      dist = std::max(dist, std::abs(ia->second));
      ++ia;
    } else if (ia == ta.end() || less(ib->first, ia->first)) {
      dist = std::max(dist, std::abs(ib->second));
      ++ib;
    } else {
      dist = std::max(dist, std::abs(ia->second - ib->second));
      ++ia;
      ++ib;
    }
  }
  return dist;
}

}  // namespace detail

inline double coefficientwise_distance(const WickPolynomial& a, const WickPolynomial& b,
                                       double factor_tol = 1e-12) {
  a.require_same_context(b);
  return detail::coefficient_distance_impl(a, b, factor_tol);
}

inline double coefficientwise_distance(const PlainPolynomial& a, const PlainPolynomial& b,
                                       double factor_tol = 1e-12) {
  return detail::coefficient_distance_impl(a, b, factor_tol);
}

// ---------------------------------------------------------------------------
// Sampling

struct FieldSample {
  Vec values;
  std::uint64_t seed = 0;
  std::uint64_t index = 0;
};

namespace detail {

// x = P^{-1} U^{-1} z has covariance A^{-1} when P A P^T = L L^T = U^T U.
inline Vec white_to_sample(const Eigen::SimplicialLLT<SpMat>& llt, const Vec& z) {
  return llt.permutationPinv() * llt.matrixU().solve(z);
}

}  // namespace detail

// Draws n independent fields with covariance S^{-1} (m > 0).  Sample k is a
// pure function of (seed, k): its noise vector occupies indices
// [k*dim, (k+1)*dim) of the kField stream.
inline std::vector<FieldSample> sample_field(const FieldOperatorPtr& fop, std::uint64_t seed,
                                             int n) {
  if (!fop) throw InvalidInput("sample_field: null operator");
  if (fop->massless()) throw InvalidInput("sample_field: massless operator has no field measure");
  if (n <= 0) throw InvalidInput("sample_field: need n >= 1");
  const int dim = fop->size();
  const CounterRng rng(seed, rng_stream::kField);

  std::optional<Eigen::SimplicialLLT<SpMat>> llt;
  if (!fop->has_spectrum()) {
    llt.emplace();
    llt->compute(fop->matrix());
    if (llt->info() != Eigen::Success) throw Error("sample_field: factorization failed");
  }
  std::vector<FieldSample> out;
  out.reserve(n);
  for (int k = 0; k < n; ++k) {
    const Vec z = rng.normal_vector(static_cast<std::uint64_t>(k) * dim, dim);
    FieldSample s;
    s.seed = seed;
    s.index = static_cast<std::uint64_t>(k);
    if (llt) {
      s.values = detail::white_to_sample(*llt, z);
    } else {
      const Vec scaled = z.cwiseQuotient(fop->eigenvalues().cwiseSqrt());
      s.values = fop->eigenvectors() * scaled;
    }
    out.push_back(std::move(s));
  }
  return out;
}

struct Estimate {
  double value = 0.0;
  double stderr_ = 0.0;
  int n = 0;
  std::uint64_t seed = 0;
};

namespace detail {

inline Estimate estimate_from(const std::vector<double>& xs, std::uint64_t seed) {
  Estimate e;
  e.n = static_cast<int>(xs.size());
  e.seed = seed;
  if (xs.empty()) return e;
  const bool constant = std::all_of(xs.begin(), xs.end(), [&](double x) { return x == xs[0]; });
  if (constant) {
    e.value = xs[0];
    e.stderr_ = 0.0;
    return e;
  }
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= e.n;
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= (e.n - 1);
  e.value = mean;
  e.stderr_ = std::sqrt(var / e.n);
  return e;
}

}  // namespace detail

// The conditional Gaussian law of the field given its values on A:
// mean -S_cc^{-1} S_cA phi_A on c = A^c, covariance S_cc^{-1}.
class ConditionalGaussian {
 public:
  ConditionalGaussian(FieldOperatorPtr fop, VertexSet a) : fop_(std::move(fop)) {
    if (!fop_) throw InvalidInput("ConditionalGaussian: null operator");
    if (fop_->massless()) throw InvalidInput("ConditionalGaussian: needs m > 0");
    const int n = fop_->size();
    for (int v : a)
      if (v < 0 || v >= n) throw InvalidInput("ConditionalGaussian: index out of range");
    a_ = make_vertex_set(std::move(a));
    if (a_.empty()) throw InvalidInput("ConditionalGaussian: conditioning set must be nonempty");
    comp_ = set_complement(a_, n);
    if (!comp_.empty()) {
      llt_.compute(detail::principal_submatrix(fop_->matrix(), comp_));
      if (llt_.info() != Eigen::Success) throw Error("ConditionalGaussian: factorization failed");
    }
  }

  const VertexSet& conditioning_set() const { return a_; }
  int free_dim() const { return static_cast<int>(comp_.size()); }

  // Full-length conditional mean; entries on A are copied from phi.
  Vec mean_given(const Vec& phi) const {
    const int n = fop_->size();
    if (phi.size() != n) throw InvalidInput("ConditionalGaussian: length mismatch");
    Vec masked = Vec::Zero(n);
    for (int v : a_) masked[v] = phi[v];
    Vec mean = masked;
    if (!comp_.empty()) {
      const Vec t = fop_->apply(masked);
      Vec tc(free_dim());
      for (int k = 0; k < free_dim(); ++k) tc[k] = t[comp_[k]];
      const Vec mc = llt_.solve(tc);
      for (int k = 0; k < free_dim(); ++k) mean[comp_[k]] = -mc[k];
    }
    return mean;
  }

  // Draws around a precomputed conditional mean; noise indices are
  // [k*free_dim, (k+1)*free_dim) of the given stream.
  Vec draw(const Vec& mean, const CounterRng& rng, std::uint64_t k) const {
    Vec out = mean;
    if (!comp_.empty()) {
      const Vec z = rng.normal_vector(k * static_cast<std::uint64_t>(free_dim()), free_dim());
      const Vec x = detail::white_to_sample(llt_, z);
      for (int i = 0; i < free_dim(); ++i) out[comp_[i]] += x[i];
    }
    return out;
  }

 private:
  FieldOperatorPtr fop_;
  VertexSet a_, comp_;
  Eigen::SimplicialLLT<SpMat> llt_;
};

// Monte Carlo estimate of E[ p(Phi) | Phi = phi on A ], the sampling-side
// counterpart of conditional_expectation.  Deterministic in (seed).
inline Estimate mc_conditional_oracle(const FieldOperatorPtr& fop, const VertexSet& a,
                                      const PlainPolynomial& p, const Vec& phi,
                                      std::uint64_t seed, int n) {
  if (n < 2) throw InvalidInput("mc_conditional_oracle: need n >= 2");
  ConditionalGaussian cg(fop, a);
  const Vec mean = cg.mean_given(phi);
  const CounterRng rng(seed, rng_stream::kConditional);
  std::vector<double> xs;
  xs.reserve(n);
  for (int k = 0; k < n; ++k) xs.push_back(p.evaluate(cg.draw(mean, rng, k)));
  return detail::estimate_from(xs, seed);
}

}  // namespace mfield
