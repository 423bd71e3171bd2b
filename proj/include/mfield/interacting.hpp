#pragma once

// Interacting (perturbed Gaussian) measures d nu = e^{-V} d mu / Z.
//
// The interaction is a Wick-ordered vertex potential
//     V_A(Phi) = sum_{i in A} W_i * :P(Phi_i):_{c_i},   c_i = (S^{-1})_{ii},
// with :x^n:_c the Hermite-style ordered power (recursion
// h_{n+1} = x h_n - n c h_{n-1}).  P must be bounded below: even top degree
// with positive leading coefficient.  Degree-zero P is any constant.
//
// Moments of nu are estimated by importance reweighting of Gaussian
// samples; conditional expectations under nu follow the ratio formula
//     E^nu_A F = E_A(F e^{-V_{A^c}}) / E_A(e^{-V_{A^c}}),
// estimated with the conditional Gaussian sampler at fixed boundary data.
// The Markov check draws outer configurations from nu by resampling,
// compares conditioning on the full complement against conditioning on the
// boundary alone, and pools the per-configuration discrepancies into a z
// score.

#include "mfield/wick.hpp"

namespace mfield {

// :x^n:_c in closed recursive form; exact for c >= 0, n >= 0.
inline double wick_power(double x, double c, int n) {
  if (n < 0) throw InvalidInput("wick_power: negative degree");
  double prev = 1.0, cur = x;
  if (n == 0) return prev;
  for (int k = 1; k < n; ++k) {
    const double next = x * cur - k * c * prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

// Monomial-basis coefficients of :x^n:_c (index = power of x).
inline std::vector<double> wick_power_coeffs(double c, int n) {
  std::vector<double> prev{1.0};
  if (n == 0) return prev;
  std::vector<double> cur{0.0, 1.0};
  for (int k = 1; k < n; ++k) {
    std::vector<double> next(k + 2, 0.0);
    for (std::size_t j = 0; j < cur.size(); ++j) next[j + 1] += cur[j];
    for (std::size_t j = 0; j < prev.size(); ++j) next[j] -= k * c * prev[j];
    prev = std::move(cur);
    cur = std::move(next);
  }
  return cur;
}

// A Wick vertex potential over a region.  Ordering constants are the
// diagonal covariances of the full operator and travel with the object, so
// restrictions keep the global normal ordering.
class Potential {
 public:
  Potential(const FieldOperatorPtr& fop, VertexSet region, std::vector<double> coeffs)
      : mesh_(fop ? fop->mesh_ptr() : nullptr), region_(make_vertex_set(std::move(region))),
        coeffs_(std::move(coeffs)) {
    if (!fop) throw InvalidInput("Potential: null operator");
    if (fop->massless()) throw InvalidInput("Potential: needs m > 0");
    while (!coeffs_.empty() && coeffs_.back() == 0.0) coeffs_.pop_back();
    if (coeffs_.empty()) coeffs_ = {0.0};
    const int top = static_cast<int>(coeffs_.size()) - 1;
    if (top > 0) {
      // Degree-zero potentials are constants, bounded below regardless of sign.
      if (top % 2 != 0)
        throw InvalidInput("Potential: odd top degree is unbounded below");
      if (coeffs_[top] < 0.0)
        throw InvalidInput("Potential: negative leading coefficient is unbounded below");
    }
    const int n = fop->size();
    for (int v : region_)
      if (v < 0 || v >= n) throw InvalidInput("Potential: region index out of range");
    order_const_ = Vec::Zero(n);
    for (int v : region_) order_const_[v] = fop->solve(delta_vector(n, v))[v];
  }

  const VertexSet& region() const { return region_; }
  const std::vector<double>& coeffs() const { return coeffs_; }
  int degree() const { return static_cast<int>(coeffs_.size()) - 1; }
  double ordering_constant(int v) const { return order_const_[v]; }

  double operator()(const Vec& field) const {
    double v = 0.0;
    for (int i : region_) {
      double site = 0.0;
      for (std::size_t d = 0; d < coeffs_.size(); ++d) {
        if (coeffs_[d] != 0.0)
          site += coeffs_[d] * wick_power(field[i], order_const_[i], static_cast<int>(d));
      }
      v += mesh_->mass[i] * site;
    }
    return v;
  }

  // The same potential restricted to region intersect keep; ordering
  // constants are reused, not recomputed.
  Potential restricted_to(const VertexSet& keep) const {
    Potential p(*this);
    p.region_ = set_intersection(region_, keep);
    return p;
  }

 private:
  std::shared_ptr<const Mesh> mesh_;
  VertexSet region_;
  std::vector<double> coeffs_;
  Vec order_const_;
};

inline Potential wick_potential(const FieldOperatorPtr& fop, const VertexSet& region,
                                const std::vector<double>& coeffs) {
  return Potential(fop, region, coeffs);
}

// ---------------------------------------------------------------------------
// Estimators

struct McParams {
  std::uint64_t seed = 1;
  int n = 10000;
  int batches = 32;
};

struct NuEstimate {
  double value = 0.0;
  double stderr_ = 0.0;
  int n = 0;
  std::uint64_t seed = 0;
  double ess = 0.0;      // effective sample size of the importance weights
  bool degenerate = false;
};

namespace detail {

// Self-normalized ratio sum(w f) / sum(w) with batch-means standard error.
// When every f value coincides bitwise the ratio is that constant exactly
// and the error is zero (the weights cancel algebraically).
inline NuEstimate ratio_estimate(const std::vector<double>& fs, const std::vector<double>& ws,
                                 std::uint64_t seed, int batches) {
  const int n = static_cast<int>(fs.size());
  NuEstimate e;
  e.n = n;
  e.seed = seed;
  double sw = 0.0, sw2 = 0.0;
  for (double w : ws) {
    sw += w;
    sw2 += w * w;
  }
  e.ess = sw2 > 0.0 ? sw * sw / sw2 : 0.0;
  e.degenerate = e.ess < 10.0;
  const bool constant = std::all_of(fs.begin(), fs.end(), [&](double x) { return x == fs[0]; });
  if (constant) {
    e.value = fs[0];
    e.stderr_ = 0.0;
    return e;
  }
  double swf = 0.0;
  for (int i = 0; i < n; ++i) swf += ws[i] * fs[i];
  e.value = swf / sw;
  const int nb = std::max(2, std::min(batches, n / 2));
  std::vector<double> batch_ratio;
  batch_ratio.reserve(nb);
  for (int b = 0; b < nb; ++b) {
    const int lo = static_cast<int>(static_cast<long long>(n) * b / nb);
    const int hi = static_cast<int>(static_cast<long long>(n) * (b + 1) / nb);
    double bw = 0.0, bwf = 0.0;
    for (int i = lo; i < hi; ++i) {
      bw += ws[i];
      bwf += ws[i] * fs[i];
    }
    if (bw > 0.0) batch_ratio.push_back(bwf / bw);
  }
  if (batch_ratio.size() >= 2) {
    double mean = 0.0;
    for (double r : batch_ratio) mean += r;
    mean /= batch_ratio.size();
    double var = 0.0;
    for (double r : batch_ratio) var += (r - mean) * (r - mean);
    var /= (batch_ratio.size() - 1);
    e.stderr_ = std::sqrt(var / batch_ratio.size());
  }
  return e;
}

}  // namespace detail

// E_nu[F] by importance reweighting of n Gaussian samples with

// weights e^{-V}.  F = 1 returns exactly 1 with zero error.
inline NuEstimate nu_moment(const FieldOperatorPtr& fop, const Potential& pot,
                            const PlainPolynomial& f, const McParams& mc) {
  if (mc.n < 4) throw InvalidInput("nu_moment: need n >= 4");
  const auto samples = sample_field(fop, mc.seed, mc.n);
  std::vector<double> fs, ws;
  fs.reserve(mc.n);
  ws.reserve(mc.n);
  for (const auto& s : samples) {
    fs.push_back(f.evaluate(s.values));
    ws.push_back(std::exp(-pot(s.values)));
  }
  return detail::ratio_estimate(fs, ws, mc.seed, mc.batches);
}

// E^nu[F | Phi = phi on A] via the ratio formula: conditional Gaussian
// draws at fixed phi_A, reweighted by e^{-V_{A^c}}.
inline NuEstimate nu_conditional(const FieldOperatorPtr& fop, const Potential& pot,
                                 const VertexSet& a, const PlainPolynomial& f, const Vec& phi,
                                 const McParams& mc) {
  if (mc.n < 4) throw InvalidInput("nu_conditional: need n >= 4");
  const ConditionalGaussian cg(fop, a);
  const Potential v_comp = pot.restricted_to(set_complement(a, fop->size()));
  const Vec mean = cg.mean_given(phi);
  const CounterRng rng(mc.seed, rng_stream::kConditional);
  std::vector<double> fs, ws;
  fs.reserve(mc.n);
  ws.reserve(mc.n);
  for (int k = 0; k < mc.n; ++k) {
    const Vec field = cg.draw(mean, rng, k);
    fs.push_back(f.evaluate(field));
    ws.push_back(std::exp(-v_comp(field)));
  }
  return detail::ratio_estimate(fs, ws, mc.seed, mc.batches);
}

// ---------------------------------------------------------------------------
// The Markov comparison under nu

struct NuMarkovRow {
  int config = 0;
  double lhs = 0.0, rhs = 0.0, diff = 0.0, se = 0.0, z = 0.0;
};

struct NuMarkovReport {
  std::vector<NuMarkovRow> rows;
  double pooled_z = 0.0;
  double max_abs_z = 0.0;
  int n_outer = 0, n_inner = 0;
  std::uint64_t seed = 0;
};

struct NuMarkovParams {
  std::uint64_t seed = 1;
  int n_outer = 50;
  int n_inner = 10000;
  int outer_pool = 0;  // 0: max(1000, 4 * n_outer)
  int batches = 32;
};

// Draws outer configurations from nu by systematic resampling of weighted
// Gaussian samples, then compares E^nu[F | complement of omega] against
// E^nu[F | boundary] at each configuration.  F must be supported in the
// closure of omega.  Everything is a pure function of params.seed.
inline NuMarkovReport nu_markov_report(const FieldOperatorPtr& fop, const Potential& pot,
                                       const RegionPartition& part, const PlainPolynomial& f,
                                       const NuMarkovParams& params) {
  if (!poly_supported_in(f, part.closure()))
    throw InvalidInput("nu_markov_report: F must be supported in the closure of omega");
  if (params.n_outer < 1) throw InvalidInput("nu_markov_report: need n_outer >= 1");

  const int pool = params.outer_pool > 0 ? params.outer_pool : std::max(1000, 4 * params.n_outer);
  const auto samples = sample_field(fop, mix64(params.seed + 0x0E1), pool);
  std::vector<double> w(pool);
  double wsum = 0.0;
  for (int i = 0; i < pool; ++i) {
    w[i] = std::exp(-pot(samples[i].values));
    wsum += w[i];
  }
  if (!(wsum > 0.0)) throw Error("nu_markov_report: all importance weights vanished");

  // Systematic resampling: one uniform offset, evenly spaced quantiles.
  const CounterRng rng(params.seed, rng_stream::kResample);
  const double u0 = rng.uniform(0);
  std::vector<int> picks(params.n_outer);
  {
    double cum = w[0];
    int idx = 0;
    for (int k = 0; k < params.n_outer; ++k) {
      const double target = wsum * (k + u0) / params.n_outer;
      while (cum < target && idx + 1 < pool) cum += w[++idx];
      picks[k] = idx;
    }
  }

  NuMarkovReport rep;
  rep.n_outer = params.n_outer;
  rep.n_inner = params.n_inner;
  rep.seed = params.seed;
  const VertexSet comp = part.omega_complement();
  double dsum = 0.0, varsum = 0.0;
  for (int k = 0; k < params.n_outer; ++k) {
    const Vec& phi = samples[picks[k]].values;
    McParams inner;
    inner.n = params.n_inner;
    inner.batches = params.batches;
    inner.seed = mix64(params.seed ^ (0x5EEDull + 2 * k));
    const NuEstimate lhs = nu_conditional(fop, pot, comp, f, phi, inner);
    inner.seed = mix64(params.seed ^ (0x5EEDull + 2 * k + 1));
    const NuEstimate rhs = nu_conditional(fop, pot, part.boundary, f, phi, inner);
    NuMarkovRow row;
    row.config = k;
    row.lhs = lhs.value;
    row.rhs = rhs.value;
    row.diff = lhs.value - rhs.value;
    row.se = std::sqrt(lhs.stderr_ * lhs.stderr_ + rhs.stderr_ * rhs.stderr_);
    row.z = row.se > 0.0 ? row.diff / row.se : (row.diff == 0.0 ? 0.0 : INFINITY);
    rep.max_abs_z = std::max(rep.max_abs_z, std::abs(row.z));
    dsum += row.diff;
    varsum += row.se * row.se;
    rep.rows.push_back(row);
  }
  rep.pooled_z = varsum > 0.0 ? dsum / std::sqrt(varsum) : (dsum == 0.0 ? 0.0 : INFINITY);
  return rep;
}

// ---------------------------------------------------------------------------
// Distribution checks for z scores

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Two-sided Kolmogorov-Smirnov p value against the standard normal
// (asymptotic series with the small-sample correction).
inline double ks_normal_pvalue(std::vector<double> zs) {
  const int n = static_cast<int>(zs.size());
  if (n < 2) throw InvalidInput("ks_normal_pvalue: need >= 2 values");
  std::sort(zs.begin(), zs.end());
  double d = 0.0;
  for (int i = 0; i < n; ++i) {
    const double c = normal_cdf(zs[i]);
    d = std::max(d, std::abs(c - static_cast<double>(i) / n));
    d = std::max(d, std::abs(static_cast<double>(i + 1) / n - c));
  }
  const double sn = std::sqrt(static_cast<double>(n));
  const double lam = (sn + 0.12 + 0.11 / sn) * d;
  double p = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = 2.0 * ((k % 2 == 1) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lam * lam);
    p += term;
    if (std::abs(term) < 1e-12) break;
  }
  return std::clamp(p, 0.0, 1.0);
}

}  // namespace mfield
