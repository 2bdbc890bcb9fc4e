#pragma once

// Clamped cubic B-spline bases and the quadrature that turns an observed
// curve into a design-row block. Basis evaluation follows the Cox-de Boor
// triangular scheme over a clamped knot vector (endpoint multiplicity 4),
// which gives partition of unity on the closed domain and at most four
// nonzero basis functions at any point.
//
// Design rows integrate the curve's piecewise-linear interpolant against
// the basis with a composite trapezoid rule on the observation grid refined
// `refine` times per interval.

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace funmix {

struct Domain {
  double lo;
  double hi;

  Domain(double lo_, double hi_) : lo(lo_), hi(hi_) {
    if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi))
      throw std::invalid_argument("Domain: need finite lo < hi");
  }
  double length() const { return hi - lo; }
  bool contains(double t) const { return t >= lo && t <= hi; }
};

inline constexpr int kSplineDegree = 3;

struct BasisSpec {
  Domain domain;
  int num_basis;              // K
  std::vector<double> knots;  // length K + 4, clamped

  int size() const { return num_basis; }
};

struct Curve {
  std::vector<double> grid;  // strictly increasing
  std::vector<double> values;

  void validate(const Domain& domain) const {
    if (grid.size() != values.size()) throw std::invalid_argument("Curve: grid/value length mismatch");
    if (grid.size() < 2) throw std::invalid_argument("Curve: fewer than two observation points");
    for (std::size_t s = 0; s + 1 < grid.size(); ++s)
      if (!(grid[s] < grid[s + 1])) throw std::invalid_argument("Curve: grid not strictly increasing");
    if (grid.front() < domain.lo - 1e-12 || grid.back() > domain.hi + 1e-12)
      throw std::invalid_argument("Curve: grid outside basis domain");
  }
};

struct TensorBasisSpec {
  BasisSpec time_spec;   // over the observation domain
  BasisSpec value_spec;  // over the range of the covariate
};

// Equally spaced interior knots; endpoint multiplicity 4.
inline BasisSpec make_knots(const Domain& domain, int num_basis) {
  if (num_basis < 4) throw std::invalid_argument("make_knots: need at least 4 basis functions");
  const int interior = num_basis - 4;
  std::vector<double> knots;
  knots.reserve(num_basis + 4);
  for (int i = 0; i < 4; ++i) knots.push_back(domain.lo);
  for (int k = 1; k <= interior; ++k)
    knots.push_back(domain.lo + domain.length() * k / double(interior + 1));
  for (int i = 0; i < 4; ++i) knots.push_back(domain.hi);
  return BasisSpec{domain, num_basis, std::move(knots)};
}

// Interior knots at equally spaced quantiles of a pooled sample (config
// alternative to equal spacing). Collisions collapse toward equal spacing.
inline BasisSpec make_knots_quantile(const Domain& domain, int num_basis, std::vector<double> pooled) {
  if (num_basis < 4) throw std::invalid_argument("make_knots_quantile: need at least 4 basis functions");
  const int interior = num_basis - 4;
  if (pooled.empty() || interior == 0) return make_knots(domain, num_basis);
  std::sort(pooled.begin(), pooled.end());
  std::vector<double> knots;
  knots.reserve(num_basis + 4);
  for (int i = 0; i < 4; ++i) knots.push_back(domain.lo);
  const double eps = 1e-9 * domain.length();
  double prev = domain.lo;
  for (int k = 1; k <= interior; ++k) {
    const double q = double(k) / (interior + 1);
    const double pos = q * (pooled.size() - 1);
    const std::size_t i0 = static_cast<std::size_t>(pos);
    const double frac = pos - double(i0);
    double knot = pooled[i0];
    if (i0 + 1 < pooled.size()) knot += frac * (pooled[i0 + 1] - pooled[i0]);
    knot = std::clamp(knot, domain.lo + eps, domain.hi - eps);
    if (knot <= prev + eps) knot = prev + eps;  // keep strictly increasing
    knots.push_back(knot);
    prev = knot;
  }
  for (int i = 0; i < 4; ++i) knots.push_back(domain.hi);
  return BasisSpec{domain, num_basis, std::move(knots)};
}

namespace detail {

// Index of the knot span containing t: largest mu with knots[mu] <= t and
// knots[mu] < knots[mu+1]; t == hi maps to the last nonempty span.
inline int find_span(const BasisSpec& spec, double t) {
  const auto& knots = spec.knots;
  const int last = spec.num_basis - 1;  // last valid span start
  if (t >= spec.domain.hi) return last;
  int lo = kSplineDegree, hi = last;
  while (lo < hi) {
    const int mid = (lo + hi + 1) / 2;
    if (knots[mid] <= t) lo = mid; else hi = mid - 1;
  }
  return lo;
}

// The four nonzero cubic basis values at t, for basis indices
// span-3 .. span (triangular Cox-de Boor recurrence).
inline std::array<double, 4> nonzero_basis(const BasisSpec& spec, double t, int span) {
  const auto& knots = spec.knots;
  std::array<double, 4> vals{1.0, 0.0, 0.0, 0.0};
  std::array<double, 4> left{}, right{};
  for (int j = 1; j <= kSplineDegree; ++j) {
    left[j] = t - knots[span + 1 - j];
    right[j] = knots[span + j] - t;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double denom = right[r + 1] + left[j - r];
      const double term = denom != 0.0 ? vals[r] / denom : 0.0;
      vals[r] = saved + right[r + 1] * term;
      saved = left[j - r] * term;
    }
    vals[j] = saved;
  }
  return vals;
}

}  // namespace detail

// All K basis values at t (at most four are nonzero).
inline std::vector<double> eval_basis(const BasisSpec& spec, double t) {
  if (!spec.domain.contains(t))
    throw std::domain_error("eval_basis: t = " + std::to_string(t) + " outside basis domain [" +
                            std::to_string(spec.domain.lo) + ", " + std::to_string(spec.domain.hi) + "]");
  const int span = detail::find_span(spec, t);
  const auto vals = detail::nonzero_basis(spec, t, span);
  std::vector<double> out(spec.num_basis, 0.0);
  for (int r = 0; r <= kSplineDegree; ++r) out[span - kSplineDegree + r] = vals[r];
  return out;
}

inline constexpr int kDefaultRefine = 8;

namespace detail {

// Observation grid refined `refine`-fold with linearly interpolated values.
inline void refined_grid(const Curve& curve, int refine, std::vector<double>& ts, std::vector<double>& xs) {
  const std::size_t n = curve.grid.size();
  ts.clear();
  xs.clear();
  ts.reserve((n - 1) * refine + 1);
  xs.reserve((n - 1) * refine + 1);
  for (std::size_t s = 0; s + 1 < n; ++s) {
    const double t0 = curve.grid[s], t1 = curve.grid[s + 1];
    const double x0 = curve.values[s], x1 = curve.values[s + 1];
    for (int r = 0; r < refine; ++r) {
      const double f = double(r) / refine;
      ts.push_back(t0 + f * (t1 - t0));
      xs.push_back(x0 + f * (x1 - x0));
    }
  }
  ts.push_back(curve.grid.back());
  xs.push_back(curve.values.back());
}

}  // namespace detail

// R_k = integral of B_k(t) X(t) dt over the curve's observation range.
inline std::vector<double> functional_design_row(const Curve& curve, const BasisSpec& spec,
                                                 int refine = kDefaultRefine) {
  curve.validate(spec.domain);
  std::vector<double> ts, xs;
  detail::refined_grid(curve, refine, ts, xs);
  std::vector<double> row(spec.num_basis, 0.0);
  const std::size_t m = ts.size();
  for (std::size_t j = 0; j < m; ++j) {
    double w;
    if (j == 0) w = 0.5 * (ts[1] - ts[0]);
    else if (j == m - 1) w = 0.5 * (ts[m - 1] - ts[m - 2]);
    else w = 0.5 * (ts[j + 1] - ts[j - 1]);
    const int span = detail::find_span(spec, ts[j]);
    const auto vals = detail::nonzero_basis(spec, ts[j], span);
    const double wx = w * xs[j];
    for (int r = 0; r <= kSplineDegree; ++r) row[span - kSplineDegree + r] += wx * vals[r];
  }
  return row;
}

enum class ValueClip { error, clip };

// Entry (k1, k2), stacked row-major with k1 over the value basis and k2
// over the time basis: integral of B_k1(X(t)) B_k2(t) dt.
inline std::vector<double> tensor_design_row(const Curve& curve, const TensorBasisSpec& spec,
                                             ValueClip policy = ValueClip::clip,
                                             int refine = kDefaultRefine) {
  curve.validate(spec.time_spec.domain);
  const int kv = spec.value_spec.num_basis, kt = spec.time_spec.num_basis;
  std::vector<double> ts, xs;
  detail::refined_grid(curve, refine, ts, xs);
  std::vector<double> row(std::size_t(kv) * kt, 0.0);
  const Domain& chi = spec.value_spec.domain;
  const std::size_t m = ts.size();
  for (std::size_t j = 0; j < m; ++j) {
    double w;
    if (j == 0) w = 0.5 * (ts[1] - ts[0]);
    else if (j == m - 1) w = 0.5 * (ts[m - 1] - ts[m - 2]);
    else w = 0.5 * (ts[j + 1] - ts[j - 1]);
    double u = xs[j];
    if (!chi.contains(u)) {
      if (policy == ValueClip::error)
        throw std::domain_error("tensor_design_row: curve value " + std::to_string(u) +
                                " outside value domain");
      u = std::clamp(u, chi.lo, chi.hi);
    }
    const int span_t = detail::find_span(spec.time_spec, ts[j]);
    const auto bt = detail::nonzero_basis(spec.time_spec, ts[j], span_t);
    const int span_v = detail::find_span(spec.value_spec, u);
    const auto bv = detail::nonzero_basis(spec.value_spec, u, span_v);
    for (int rv = 0; rv <= kSplineDegree; ++rv) {
      const int k1 = span_v - kSplineDegree + rv;
      const double c = w * bv[rv];
      for (int rt = 0; rt <= kSplineDegree; ++rt) {
        const int k2 = span_t - kSplineDegree + rt;
        row[std::size_t(k1) * kt + k2] += c * bt[rt];
      }
    }
  }
  return row;
}

// w(t) = sum_k coef_k B_k(t); used to reconstruct fitted weight functions.
inline std::vector<double> basis_expansion(const BasisSpec& spec, const std::vector<double>& coef,
                                           const std::vector<double>& grid) {
  if (coef.size() != std::size_t(spec.num_basis))
    throw std::invalid_argument("basis_expansion: coefficient count mismatch");
  std::vector<double> out;
  out.reserve(grid.size());
  for (double t : grid) {
    const int span = detail::find_span(spec, t);
    const auto vals = detail::nonzero_basis(spec, t, span);
    double acc = 0.0;
    for (int r = 0; r <= kSplineDegree; ++r) acc += coef[span - kSplineDegree + r] * vals[r];
    out.push_back(acc);
  }
  return out;
}

}  // namespace funmix
