#pragma once

// Two-variable hyperbola machinery for height-ball sums
// Upsilon_h(P) = sum_{l^b1 m^b2 <= P} h(l, m):
//   - exact three-region decomposition (two off-diagonal regions split at a
//     tunable exponent mu, plus the rectangular corner), with every boundary
//     comparison done in integer arithmetic so the region totals add up to
//     Upsilon_h(P) as an integer identity;
//   - dyadic slicing of an off-diagonal region with per-slice sandwich bounds
//     obtained by freezing the inner range at the slice endpoints;
//   - weighted least-squares extraction of the constants in
//     Upsilon_h(P) ~ C P log P + B P;
//   - empirical per-variable density functions c1(m), c2(l) with convergence
//     diagnostics;
//   - the largest admissible split exponent mu for given growth/error
//     parameters.

#include "bihom/arith.hpp"
#include "bihom/counting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace bihom {

// Growth/error parameters of a shell function: partial sums over either
// variable obey c(m) L^{beta1} (1 + O(L^{-delta})) style laws with total mass
// C, the complementary variable saves a power nu, and point values grow at
// most like a degree-D divisor bound.
struct ConditionParams {
  double C = 0.0;      // leading constant scale, >= 0
  double delta = 0.0;  // error saving in the partial-sum law, > 0
  double beta1 = 0.0;  // height exponent of the first variable, > 0
  double beta2 = 0.0;  // height exponent of the second variable, > 0
  double nu = 0.0;     // complementary-sum saving, >= 0 (0 admits no split)
  double D = 0.0;      // divisor-growth degree, >= 0

  void validate() const {
    if (!(C >= 0.0)) throw std::invalid_argument("ConditionParams: C must be >= 0");
    if (!(delta > 0.0)) throw std::invalid_argument("ConditionParams: delta must be > 0");
    if (!(beta1 > 0.0) || !(beta2 > 0.0))
      throw std::invalid_argument("ConditionParams: beta1, beta2 must be > 0");
    if (!(nu >= 0.0)) throw std::invalid_argument("ConditionParams: nu must be >= 0");
    if (!(D >= 0.0)) throw std::invalid_argument("ConditionParams: D must be >= 0");
  }
};

// Parameter instantiation for the point-count shell function of an R-form
// system: beta_i = n_i - R d_i, divisor-growth degree n2 - 1 + 2 R (R+1) d2,
// complementary saving (d1 - 1) / ((3R - 1) d2).
inline ConditionParams system_condition_params(const FormSystem& sys, double C, double delta) {
  ConditionParams p;
  p.C = C;
  p.delta = delta;
  p.beta1 = static_cast<double>(sys.n1() - sys.R() * sys.d1());
  p.beta2 = static_cast<double>(sys.n2() - sys.R() * sys.d2());
  if (p.beta1 < 1 || p.beta2 < 1)
    throw std::invalid_argument(
        "system_condition_params: height undefined (requires n_i > R d_i)");
  p.D = static_cast<double>(sys.n2() - 1 + 2 * sys.R() * (sys.R() + 1) * sys.d2());
  p.nu = static_cast<double>(sys.d1() - 1) /
         static_cast<double>((3 * sys.R() - 1) * sys.d2());
  return p;
}

// H(L, M) = sum_{l <= L} sum_{m <= M} h(l, m), exact.
inline Int partial_sum_H(const ShellFn& h, i64 L, i64 M) {
  if (L < 0 || M < 0) throw std::invalid_argument("partial_sum_H: L, M must be >= 0");
  if (L == 0 || M == 0) return 0;
  h.prepare(ipow(Int(L), static_cast<unsigned>(h.beta1())) *
            ipow(Int(M), static_cast<unsigned>(h.beta2())));
  Int s = 0;
  for (i64 l = 1; l <= L; ++l)
    for (i64 m = 1; m <= M; ++m) s += h.value(l, m);
  return s;
}

struct DecompositionReport {
  Int T1, T2;          // m-heavy region (m^{2 b2} > P), split at l <= P^mu
  Int T1_sym, T2_sym;  // l-heavy region (l^{2 b1} > P), split at m <= P^mu
  Int corner;          // rectangle l^{2 b1} <= P and m^{2 b2} <= P
  Int total;           // sum of the five parts
  bool exact = true;   // integer exponents, integer boundary arithmetic
  i64 l_split = 0, l_half = 0;  // T1 covers l in [1, l_split]; region ends at l_half
  i64 m_split = 0, m_half = 0;
};

namespace detail {

// Integer split boundary floor(Q^mu), clamped to the region; the same
// expression is used by decompose and dyadic_slices so their T2 agree.
inline i64 mu_boundary(double Qd, double mu, i64 half) {
  i64 b = static_cast<i64>(std::floor(std::pow(Qd, mu)));
  return std::min(half, std::max<i64>(b, 0));
}

}  // namespace detail

// Exact partition of {(l, m) : l^{b1} m^{b2} <= P}: pairs with m^{2 b2} > P
// (split at l <= P^mu into T1 / T2), pairs with l^{2 b1} > P (split at
// m <= P^mu into the symmetric pair), and the corner rectangle.  The two
// strict regions cannot overlap (both inequalities force the key above P),
// so the five parts sum to Upsilon_h(P) exactly.
inline DecompositionReport decompose(const ShellFn& h, const Rat& P, double mu) {
  const int b1 = h.beta1(), b2 = h.beta2();
  if (!(mu > 0.0) || !(b1 * mu < 0.5))
    throw std::invalid_argument("decompose: need 0 < beta1*mu < 1/2");
  DecompositionReport rep;
  rep.T1 = rep.T2 = rep.T1_sym = rep.T2_sym = rep.corner = rep.total = 0;
  Int Q = rat_floor(P);
  if (Q < 1) return rep;
  h.prepare(Q);
  double Qd = Q.convert_to<double>();
  rep.l_half = detail::int_root_i64(Q, 2 * b1);
  rep.m_half = detail::int_root_i64(Q, 2 * b2);
  rep.l_split = detail::mu_boundary(Qd, mu, rep.l_half);
  rep.m_split = detail::mu_boundary(Qd, mu, rep.m_half);
  // m-heavy region: m^{2 b2} > Q forces l^{2 b1} < Q, so l stays <= l_half
  for (i64 l = 1; l <= rep.l_half; ++l) {
    i64 m_hi = detail::int_root_i64(Q / ipow(Int(l), static_cast<unsigned>(b1)), b2);
    Int inner = 0;
    for (i64 m = rep.m_half + 1; m <= m_hi; ++m) inner += h.value(l, m);
    (l <= rep.l_split ? rep.T1 : rep.T2) += inner;
  }
  // l-heavy region, roles swapped
  for (i64 m = 1; m <= rep.m_half; ++m) {
    i64 l_hi = detail::int_root_i64(Q / ipow(Int(m), static_cast<unsigned>(b2)), b1);
    Int inner = 0;
    for (i64 l = rep.l_half + 1; l <= l_hi; ++l) inner += h.value(l, m);
    (m <= rep.m_split ? rep.T1_sym : rep.T2_sym) += inner;
  }
  rep.corner = partial_sum_H(h, rep.l_half, rep.m_half);
  rep.total = rep.T1 + rep.T2 + rep.T1_sym + rep.T2_sym + rep.corner;
  return rep;
}

struct DyadicSlice {
  int j = 0;          // 1-based slice index
  double L = 0.0;     // nominal right endpoint P^mu (1+theta)^j
  i64 l_lo = 0, l_hi = 0;  // integer l-range covered: l_lo <= l <= l_hi
  Int V, V_minus, V_plus;  // true slice sum and endpoint-frozen bounds
};

struct DyadicReport {
  double theta = 0.0;  // (1+theta)^J = P^{1/(2 b1) - mu}
  i64 l_start = 0;     // slices cover l in (l_start, l_half]
  i64 l_half = 0;
  std::vector<DyadicSlice> slices;
  Int T2_total;  // sum of V over slices; equals decompose(...).T2
};

// Splits the l-range (P^mu, P^{1/(2 b1)}] of the m-heavy off-diagonal region
// into J geometric slices.  V(L_j) sums the true inner ranges; V-(L_j) and
// V+(L_j) freeze the inner range at the slice's last/first l, so for h >= 0
// the sandwich V- <= V <= V+ holds per slice, and the V add up to T2 exactly.
inline DyadicReport dyadic_slices(const ShellFn& h, const Rat& P, double mu, int J) {
  const int b1 = h.beta1(), b2 = h.beta2();
  if (J < 1) throw std::invalid_argument("dyadic_slices: J must be >= 1");
  if (!(mu > 0.0) || !(b1 * mu < 0.5))
    throw std::invalid_argument("dyadic_slices: need 0 < beta1*mu < 1/2");
  DyadicReport rep;
  rep.T2_total = 0;
  Int Q = rat_floor(P);
  if (Q < 1) return rep;
  h.prepare(Q);
  double Qd = Q.convert_to<double>();
  rep.l_half = detail::int_root_i64(Q, 2 * b1);
  rep.l_start = detail::mu_boundary(Qd, mu, rep.l_half);
  rep.theta = std::pow(Qd, (1.0 / (2 * b1) - mu) / J) - 1.0;
  const i64 m_half = detail::int_root_i64(Q, 2 * b2);
  i64 prev = rep.l_start;
  for (int j = 1; j <= J; ++j) {
    DyadicSlice s;
    s.j = j;
    s.L = std::pow(Qd, mu) * std::pow(1.0 + rep.theta, j);
    i64 cur = (j == J) ? rep.l_half
                       : std::min(rep.l_half, static_cast<i64>(std::floor(s.L)));
    if (cur < prev) cur = prev;
    s.l_lo = prev + 1;
    s.l_hi = cur;
    s.V = s.V_minus = s.V_plus = 0;
    if (cur > prev) {
      auto inner_hi = [&](i64 l) {
        return detail::int_root_i64(Q / ipow(Int(l), static_cast<unsigned>(b1)), b2);
      };
      i64 hi_wide = inner_hi(prev + 1);  // widest inner range in the slice
      i64 hi_narrow = inner_hi(cur);     // narrowest
      for (i64 l = prev + 1; l <= cur; ++l) {
        i64 m_hi = inner_hi(l);
        for (i64 m = m_half + 1; m <= m_hi; ++m) s.V += h.value(l, m);
        for (i64 m = m_half + 1; m <= hi_narrow; ++m) s.V_minus += h.value(l, m);
        for (i64 m = m_half + 1; m <= hi_wide; ++m) s.V_plus += h.value(l, m);
      }
    }
    rep.T2_total += s.V;
    rep.slices.push_back(std::move(s));
    prev = cur;
  }
  return rep;
}

struct HyperbolaFit {
  double C_fit = 0.0;
  double B_fit = 0.0;
  std::vector<double> residuals;    // per-point (y - model) / max(1, |y|)
  double residual_envelope = 0.0;   // max |residual|
};

// Weighted least squares of y ~ C x log x + B x with weight 1/x per point
// (equalizes the relative influence of a geometric grid).
inline HyperbolaFit fit_points(const std::vector<double>& P, const std::vector<double>& y) {
  if (P.size() != y.size())
    throw std::invalid_argument("fit_points: grid and value lengths differ");
  if (P.size() < 4) throw std::invalid_argument("fit_points: need at least 4 grid points");
  double a11 = 0, a12 = 0, a22 = 0, r1 = 0, r2 = 0;
  for (std::size_t k = 0; k < P.size(); ++k) {
    if (!(P[k] >= 1.0)) throw std::invalid_argument("fit_points: grid values must be >= 1");
    double x = P[k], f1 = x * std::log(x), f2 = x, w = 1.0 / x;
    a11 += w * f1 * f1;
    a12 += w * f1 * f2;
    a22 += w * f2 * f2;
    r1 += w * f1 * y[k];
    r2 += w * f2 * y[k];
  }
  double det = a11 * a22 - a12 * a12;
  if (!(std::abs(det) > 1e-12 * std::max(a11 * a22, 1.0)))
    throw std::runtime_error("fit_points: singular normal equations (degenerate grid)");
  HyperbolaFit fit;
  fit.C_fit = (r1 * a22 - r2 * a12) / det;
  fit.B_fit = (a11 * r2 - a12 * r1) / det;
  for (std::size_t k = 0; k < P.size(); ++k) {
    double model = fit.C_fit * P[k] * std::log(P[k]) + fit.B_fit * P[k];
    double res = (y[k] - model) / std::max(1.0, std::abs(y[k]));
    fit.residuals.push_back(res);
    fit.residual_envelope = std::max(fit.residual_envelope, std::abs(res));
  }
  return fit;
}

inline HyperbolaFit fit_CB(const ShellFn& h, const std::vector<i64>& P_grid) {
  std::vector<double> P, y;
  P.reserve(P_grid.size());
  y.reserve(P_grid.size());
  for (i64 p : P_grid) {
    P.push_back(static_cast<double>(p));
    y.push_back(h.upsilon_int(Int(p)).convert_to<double>());
  }
  return fit_points(P, y);
}

struct CFunctionReport {
  std::vector<i64> L_grid;  // ascending cutoffs
  i64 m_max = 0;
  // c1[k][m-1] = sum_{l <= L_k} h(l, m) / L_k^{b1}; c2[k][l-1] symmetric.
  std::vector<std::vector<double>> c1;
  std::vector<std::vector<double>> c2;
  double c1_last_change = 0.0;  // max relative change between the last two cutoffs
  double c2_last_change = 0.0;
  // H(Lmax, Lmax) / (Lmax^{b1} Lmax^{b2}): recovers the leading constant when
  // the partial sums of the empirical c2 follow C L^{b1}.
  double C_estimate = 0.0;
};

inline CFunctionReport estimate_c_functions(const ShellFn& h, std::vector<i64> L_grid,
                                            i64 m_max) {
  if (L_grid.empty()) throw std::invalid_argument("estimate_c_functions: empty cutoff grid");
  if (m_max < 1) throw std::invalid_argument("estimate_c_functions: m_max must be >= 1");
  std::sort(L_grid.begin(), L_grid.end());
  if (L_grid.front() < 1)
    throw std::invalid_argument("estimate_c_functions: cutoffs must be >= 1");
  const int b1 = h.beta1(), b2 = h.beta2();
  const i64 Lmax = L_grid.back();
  h.prepare(ipow(Int(std::max(Lmax, m_max)), static_cast<unsigned>(b1 + b2)));
  CFunctionReport rep;
  rep.L_grid = L_grid;
  rep.m_max = m_max;
  for (i64 L : L_grid) {
    double Lb1 = std::pow(static_cast<double>(L), b1);
    double Lb2 = std::pow(static_cast<double>(L), b2);
    std::vector<double> row1(static_cast<std::size_t>(m_max));
    std::vector<double> row2(static_cast<std::size_t>(m_max));
    for (i64 m = 1; m <= m_max; ++m) {
      Int s1 = 0, s2 = 0;
      for (i64 l = 1; l <= L; ++l) {
        s1 += h.value(l, m);
        s2 += h.value(m, l);
      }
      row1[static_cast<std::size_t>(m - 1)] = s1.convert_to<double>() / Lb1;
      row2[static_cast<std::size_t>(m - 1)] = s2.convert_to<double>() / Lb2;
    }
    rep.c1.push_back(std::move(row1));
    rep.c2.push_back(std::move(row2));
  }
  auto max_change = [](const std::vector<double>& a, const std::vector<double>& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      double scale = std::max({std::abs(a[i]), std::abs(b[i]), 1e-12});
      worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
    }
    return worst;
  };
  if (L_grid.size() >= 2) {
    rep.c1_last_change = max_change(rep.c1[rep.c1.size() - 2], rep.c1.back());
    rep.c2_last_change = max_change(rep.c2[rep.c2.size() - 2], rep.c2.back());
  }
  double denom = std::pow(static_cast<double>(Lmax), b1 + b2);
  rep.C_estimate = partial_sum_H(h, Lmax, Lmax).convert_to<double>() / denom;
  return rep;
}

struct MuReport {
  bool exists = false;   // positive admissible mu
  double sup = 0.0;      // least upper bound of the admissible range
  bool attained = false; // sup itself admissible (binding constraint non-strict)
  std::string binding;   // constraint determining sup
  double bound_split = 0.0;  // mu (1 + nu b1/b2) <= nu/b2        (non-strict)
  double bound_error = 0.0;  // mu (D - b1 + 1 + delta b1/b2) < delta/(2 b2)
  double bound_half = 0.0;   // b1 mu < 1/2
};

// Largest split exponent satisfying the three admissibility constraints.
// When no positive mu exists the report names the binding constraint instead
// of throwing.
inline MuReport admissible_mu(const ConditionParams& p) {
  p.validate();
  MuReport rep;
  rep.bound_split = p.nu / (p.beta2 + p.nu * p.beta1);
  double coeff = p.D - p.beta1 + 1.0 + p.delta * p.beta1 / p.beta2;
  rep.bound_error = coeff > 0.0 ? (p.delta / (2.0 * p.beta2)) / coeff
                                : std::numeric_limits<double>::infinity();
  rep.bound_half = 0.5 / p.beta1;
  rep.sup = std::min({rep.bound_split, rep.bound_error, rep.bound_half});
  rep.exists = rep.sup > 0.0;
  if (rep.sup == rep.bound_split && rep.bound_split < rep.bound_error &&
      rep.bound_split < rep.bound_half) {
    rep.binding = "partial-sum constraint (non-strict)";
    rep.attained = true;
  } else if (rep.sup == rep.bound_error && rep.bound_error <= rep.bound_half) {
    rep.binding = "error-term constraint (strict)";
  } else if (rep.sup == rep.bound_half) {
    rep.binding = "half-exponent constraint (strict)";
  } else {
    rep.binding = "partial-sum constraint (tied with a strict constraint)";
  }
  return rep;
}

}  // namespace bihom
