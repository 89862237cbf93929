#pragma once

// Exponential sums over lattice boxes and the major-arc objects built from
// them: complete sums mod q evaluated exactly as integer multiplicity vectors
// over q-th roots of unity, oscillatory integrals by two-level tensor
// trapezoid quadrature, truncated singular series/integrals, per-fiber
// predictions, and the polarized multilinear forms with rank-deficiency
// counts.  Phases are computed from exact integer form values and reduced
// mod 1 only at the last moment.

#include "bihom/arith.hpp"
#include "bihom/counting.hpp"
#include "bihom/forms.hpp"
#include "bihom/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

namespace bihom {

struct ArcPoint {
  std::vector<double> alpha;  // R entries in [0,1)
  bool has_rational = false;
  std::vector<i64> a;  // numerators, 0 <= a_i < q
  i64 q = 1;

  void validate(int R) const {
    if (static_cast<int>(alpha.size()) != R)
      throw std::invalid_argument("ArcPoint: alpha has wrong length");
    for (double v : alpha)
      if (!(v >= 0.0 && v < 1.0)) throw std::invalid_argument("ArcPoint: alpha not in [0,1)");
    if (!has_rational) return;
    if (q < 1 || static_cast<int>(a.size()) != R)
      throw std::invalid_argument("ArcPoint: bad rational approximation");
    i64 g = q;
    for (i64 ai : a) {
      if (ai < 0 || ai >= q) throw std::invalid_argument("ArcPoint: numerator out of range");
      g = std::gcd(g, ai);
    }
    if (g != 1) throw std::invalid_argument("ArcPoint: gcd(q, a) must be 1");
  }

  static ArcPoint rational(std::vector<i64> nums, i64 den, std::vector<double> beta = {}) {
    ArcPoint pt;
    pt.has_rational = true;
    pt.a = std::move(nums);
    pt.q = den;
    if (beta.empty()) beta.assign(pt.a.size(), 0.0);
    for (std::size_t i = 0; i < pt.a.size(); ++i) {
      double v = static_cast<double>(pt.a[i]) / static_cast<double>(den) + beta[i];
      v -= std::floor(v);
      pt.alpha.push_back(v);
    }
    pt.validate(static_cast<int>(pt.a.size()));
    return pt;
  }
};

namespace detail {

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

inline std::complex<double> unit_phase(double t) {
  t -= std::round(t);  // reduce to [-1/2, 1/2] before scaling by 2*pi
  double ang = kTwoPi * t;
  return {std::cos(ang), std::sin(ang)};
}

struct ComplexKahan {
  Kahan re, im;
  void add(std::complex<double> z) {
    re.add(z.real());
    im.add(z.imag());
  }
  std::complex<double> value() const { return {re.value(), im.value()}; }
};

inline i64 ranges_cardinality_checked(const IntRanges& rg, Budget& budget, const char* what) {
  u64 card = rg.cardinality();
  budget.charge(card, what);
  return static_cast<i64>(card);
}

inline void decode_mixed_radix(u64 idx, const IntRanges& rg, std::vector<i64>& out) {
  for (int j = rg.n() - 1; j >= 0; --j) {
    u64 w = static_cast<u64>(rg.hi[j] - rg.lo[j] + 1);
    out[j] = rg.lo[j] + static_cast<i64>(idx % w);
    idx /= w;
  }
}

}  // namespace detail

// S_y(alpha) = sum over x in P1*B1 of e(sum_i alpha_i F_i(x; y)), with the
// form values computed exactly and converted to phases at the end.  Chunked
// compensated reduction; the result does not depend on the worker count.
inline std::complex<double> weyl_sum(const FormSystem& sys, const std::vector<i64>& y,
                                     const Rat& P1, const std::vector<double>& alpha,
                                     Budget& budget, const BoxSpec* box = nullptr,
                                     int workers = default_workers()) {
  if (static_cast<int>(y.size()) != sys.n2())
    throw std::invalid_argument("weyl_sum: y has wrong length");
  if (static_cast<int>(alpha.size()) != sys.R())
    throw std::invalid_argument("weyl_sum: alpha has wrong length");
  BoxSpec defbox = BoxSpec::unit(sys.n1(), sys.n2());
  const BoxSpec& b = box ? *box : defbox;
  IntRanges xrg = b.x_ranges(P1);
  if (xrg.empty_range()) return {0.0, 0.0};
  i64 card = detail::ranges_cardinality_checked(xrg, budget, "weyl sum lattice");

  detail::ComplexKahan total = chunked_reduce_range(
      static_cast<std::size_t>(card), workers, detail::ComplexKahan{},
      [&](std::size_t lo, std::size_t hi, detail::ComplexKahan& acc) {
        std::vector<i64> x(xrg.n());
        detail::ComplexKahan local;
        for (std::size_t idx = lo; idx < hi; ++idx) {
          detail::decode_mixed_radix(idx, xrg, x);
          Kahan phase;
          for (int i = 0; i < sys.R(); ++i)
            phase.add(alpha[i] * sys[i].evaluate(x, y).convert_to<double>());
          local.add(detail::unit_phase(phase.value()));
        }
        acc.add(local.value());
      },
      [](detail::ComplexKahan& a, const detail::ComplexKahan& b2) { a.add(b2.value()); },
      4096);
  return total.value();
}

// Exact content of S_{a,q}(y): entry k counts residues z mod q with
// sum_i a_i F_i(z; y) == k mod q, so S_{a,q}(y) = sum_k mult[k] e(k/q).
inline std::vector<i64> complete_sum_multiplicities(const FormSystem& sys,
                                                    const std::vector<i64>& y, i64 q,
                                                    const std::vector<i64>& a, Budget& budget) {
  if (q < 1) throw std::invalid_argument("complete_sum: q must be >= 1");
  if (static_cast<int>(a.size()) != sys.R())
    throw std::invalid_argument("complete_sum: a has wrong length");
  if (static_cast<int>(y.size()) != sys.n2())
    throw std::invalid_argument("complete_sum: y has wrong length");
  u64 card = 1;
  for (int j = 0; j < sys.n1(); ++j)
    card = (card > UINT64_MAX / static_cast<u64>(q)) ? UINT64_MAX
                                                     : card * static_cast<u64>(q);
  budget.charge(card, "complete sum residues");
  std::vector<i64> mult(static_cast<std::size_t>(q), 0);
  std::vector<i64> z(sys.n1(), 0);
  std::function<void(int)> rec = [&](int j) {
    if (j == sys.n1()) {
      Int k = 0;
      for (int i = 0; i < sys.R(); ++i) k += Int(a[i]) * sys[i].evaluate(z, y);
      Int kr = k % q;
      if (kr < 0) kr += q;
      ++mult[kr.convert_to<std::size_t>()];
      return;
    }
    for (i64 v = 0; v < q; ++v) {
      z[j] = v;
      rec(j + 1);
    }
  };
  rec(0);
  return mult;
}

inline std::complex<double> complete_sum(const FormSystem& sys, const std::vector<i64>& y,
                                         i64 q, const std::vector<i64>& a, Budget& budget) {
  std::vector<i64> mult = complete_sum_multiplicities(sys, y, q, a, budget);
  detail::ComplexKahan acc;
  for (i64 k = 0; k < q; ++k)
    if (mult[static_cast<std::size_t>(k)] != 0)
      acc.add(static_cast<double>(mult[static_cast<std::size_t>(k)]) *
              detail::unit_phase(static_cast<double>(k) / static_cast<double>(q)));
  return acc.value();
}

// Cyclotomic polynomial of order q, ascending coefficients, computed by exact
// division of x^q - 1 by the lower-order factors.
inline std::vector<Int> cyclotomic_poly(i64 q) {
  if (q < 1) throw std::invalid_argument("cyclotomic_poly: q must be >= 1");
  auto divide_exact = [](std::vector<Int> num, const std::vector<Int>& den) {
    // monic denominator; remainder must vanish
    std::vector<Int> out(num.size() - den.size() + 1, 0);
    for (std::size_t i = out.size(); i-- > 0;) {
      Int c = num[i + den.size() - 1];
      out[i] = c;
      if (c == 0) continue;
      for (std::size_t j = 0; j < den.size(); ++j) num[i + j] -= c * den[j];
    }
    for (const Int& c : num)
      if (c != 0) throw std::logic_error("cyclotomic_poly: non-exact division");
    return out;
  };
  std::vector<Int> poly(static_cast<std::size_t>(q) + 1, 0);
  poly[0] = -1;
  poly[static_cast<std::size_t>(q)] = 1;  // x^q - 1
  for (i64 d = 1; d < q; ++d)
    if (q % d == 0) poly = divide_exact(std::move(poly), cyclotomic_poly(d));
  return poly;
}

// Exact algebraic identity check: sum_k mult[k] zeta_q^k == expected, decided
// by reducing the difference mod the order-q cyclotomic polynomial over Z.
inline bool root_sum_equals_integer(const std::vector<i64>& mult, i64 q, const Int& expected) {
  if (static_cast<i64>(mult.size()) != q)
    throw std::invalid_argument("root_sum_equals_integer: multiplicity vector has wrong length");
  std::vector<Int> poly(mult.size());
  for (std::size_t k = 0; k < mult.size(); ++k) poly[k] = mult[k];
  poly[0] -= expected;
  std::vector<Int> phi = cyclotomic_poly(q);
  // reduce poly mod phi (phi is monic)
  const int dphi = static_cast<int>(phi.size()) - 1;
  for (int i = static_cast<int>(poly.size()) - 1; i >= dphi; --i) {
    if (poly[i] == 0) continue;
    Int c = poly[i];
    int off = i - dphi;
    for (int j = 0; j <= dphi; ++j) poly[off + j] -= c * phi[j];
  }
  for (const Int& c : poly)
    if (c != 0) return false;
  return true;
}

struct OscillatoryIntegral {
  std::complex<double> value;   // fine-grid estimate
  double error_estimate = 0.0;  // |fine - coarse|
  int grid = 0;                 // coarse subintervals per axis; fine uses 2x
};

namespace detail {

// Tensor-product trapezoid rule over box.x scaled to [lo, hi] per axis with
// `segs` subintervals; integrand receives the real x vector.
template <typename F>
std::complex<double> tensor_trapezoid(const BoxSpec& box, int n1, int segs, Budget& budget,
                                      int workers, F&& integrand) {
  std::vector<double> lo(n1), step(n1);
  double cell = 1.0;
  for (int j = 0; j < n1; ++j) {
    lo[j] = box.x[j].lo.convert_to<double>();
    double hij = box.x[j].hi.convert_to<double>();
    step[j] = (hij - lo[j]) / segs;
    cell *= step[j];
  }
  u64 nodes = 1;
  for (int j = 0; j < n1; ++j) nodes *= static_cast<u64>(segs + 1);
  budget.charge(nodes, "quadrature nodes");
  ComplexKahan total = chunked_reduce_range(
      static_cast<std::size_t>(nodes), workers, ComplexKahan{},
      [&](std::size_t lo_i, std::size_t hi_i, ComplexKahan& acc) {
        std::vector<double> v(n1);
        ComplexKahan local;
        for (std::size_t idx = lo_i; idx < hi_i; ++idx) {
          u64 t = idx;
          double w = 1.0;
          for (int j = n1 - 1; j >= 0; --j) {
            u64 k = t % static_cast<u64>(segs + 1);
            t /= static_cast<u64>(segs + 1);
            v[j] = lo[j] + step[j] * static_cast<double>(k);
            if (k == 0 || k == static_cast<u64>(segs)) w *= 0.5;
          }
          local.add(w * integrand(v));
        }
        acc.add(local.value());
      },
      [](ComplexKahan& a, const ComplexKahan& b) { a.add(b.value()); }, 4096);
  return cell * total.value();
}

}  // namespace detail

// I_y(beta) = integral over B1 of e(sum_i beta_i F_i(v; y)) dv, two grid
// levels (grid and 2*grid subintervals per axis).
inline OscillatoryIntegral oscillatory_integral(const FormSystem& sys,
                                                const std::vector<i64>& y,
                                                const std::vector<double>& beta, Budget& budget,
                                                int grid = 16, const BoxSpec* box = nullptr,
                                                int workers = default_workers()) {
  if (grid < 8) throw std::invalid_argument("oscillatory_integral: grid must be >= 8");
  if (static_cast<int>(beta.size()) != sys.R())
    throw std::invalid_argument("oscillatory_integral: beta has wrong length");
  if (static_cast<int>(y.size()) != sys.n2())
    throw std::invalid_argument("oscillatory_integral: y has wrong length");
  BoxSpec defbox = BoxSpec::unit(sys.n1(), sys.n2());
  const BoxSpec& b = box ? *box : defbox;
  std::vector<double> yd(y.begin(), y.end());
  auto integrand = [&](const std::vector<double>& v) {
    double phase = 0.0;
    for (int i = 0; i < sys.R(); ++i) phase += beta[i] * sys[i].evaluate_real(v, yd);
    return detail::unit_phase(phase);
  };
  std::complex<double> coarse =
      detail::tensor_trapezoid(b, sys.n1(), grid, budget, workers, integrand);
  std::complex<double> fine =
      detail::tensor_trapezoid(b, sys.n1(), 2 * grid, budget, workers, integrand);
  OscillatoryIntegral rep;
  rep.value = fine;
  rep.error_estimate = std::abs(fine - coarse);
  rep.grid = grid;
  return rep;
}

struct SeriesReport {
  double value = 0.0;
  i64 Q = 0;
  std::vector<std::pair<i64, double>> partials;  // cumulative value after each q
};

// Truncated singular series sum_{q<=Q} q^{-n1} sum_{gcd(q,a)=1} S_{a,q}(y).
// Per q the phase content is assembled exactly as integer multiplicities
// before any floating point enters.
inline SeriesReport truncated_singular_series(const FormSystem& sys, const std::vector<i64>& y,
                                              i64 Q, Budget& budget) {
  if (Q < 1) throw std::invalid_argument("truncated_singular_series: Q must be >= 1");
  if (static_cast<int>(y.size()) != sys.n2())
    throw std::invalid_argument("truncated_singular_series: y has wrong length");
  const int R = sys.R();
  SeriesReport rep;
  rep.Q = Q;
  detail::ComplexKahan total;
  for (i64 q = 1; q <= Q; ++q) {
    // residue-vector counts C[r] = #{z mod q : F(z;y) == r mod q}
    u64 zcard = 1, rcard = 1;
    for (int j = 0; j < sys.n1(); ++j) zcard *= static_cast<u64>(q);
    for (int i = 0; i < R; ++i) rcard *= static_cast<u64>(q);
    budget.charge(zcard + rcard * rcard, "singular series terms");
    std::vector<i64> C(static_cast<std::size_t>(rcard), 0);
    std::vector<i64> z(sys.n1(), 0);
    std::function<void(int)> rec = [&](int j) {
      if (j == sys.n1()) {
        u64 key = 0;
        for (int i = 0; i < R; ++i) {
          Int ri = sys[i].evaluate(z, y) % q;
          if (ri < 0) ri += q;
          key = key * static_cast<u64>(q) + ri.convert_to<u64>();
        }
        ++C[key];
        return;
      }
      for (i64 v = 0; v < q; ++v) {
        z[j] = v;
        rec(j + 1);
      }
    };
    rec(0);
    // D[k] = total multiplicity of phase k/q over admissible numerators a
    std::vector<i64> D(static_cast<std::size_t>(q), 0);
    std::vector<i64> a(R, 0);
    std::function<void(int)> loop_a = [&](int i) {
      if (i == R) {
        i64 g = q;
        for (i64 ai : a) g = std::gcd(g, ai);
        if (g != 1) return;
        for (u64 key = 0; key < rcard; ++key) {
          if (C[key] == 0) continue;
          u64 t = key;
          i64 k = 0;
          for (int ii = R - 1; ii >= 0; --ii) {
            k += a[ii] * static_cast<i64>(t % static_cast<u64>(q));
            t /= static_cast<u64>(q);
          }
          D[static_cast<std::size_t>(((k % q) + q) % q)] += C[key];
        }
        return;
      }
      for (i64 v = 0; v < q; ++v) {
        a[i] = v;
        loop_a(i + 1);
      }
    };
    if (q == 1) {
      D[0] = 1;  // single residue, single numerator a = 0
    } else {
      loop_a(0);
    }
    detail::ComplexKahan Aq;
    for (i64 k = 0; k < q; ++k)
      if (D[static_cast<std::size_t>(k)] != 0)
        Aq.add(static_cast<double>(D[static_cast<std::size_t>(k)]) *
               detail::unit_phase(static_cast<double>(k) / static_cast<double>(q)));
    double qn = std::pow(static_cast<double>(q), -sys.n1());
    total.add(qn * Aq.value());
    rep.partials.emplace_back(q, total.value().real());
  }
  std::complex<double> v = total.value();
  if (std::abs(v.imag()) > 1e-9)
    throw std::logic_error("truncated_singular_series: imaginary part above tolerance");
  rep.value = v.real();
  return rep;
}

struct SingularIntegralReport {
  double value = 0.0;
  double error_estimate = 0.0;
  double B = 0.0;
  int grid = 0;
};

// J_y(B) = integral over |beta_i| <= B of I_y(beta); the beta integral is
// done in closed form, leaving the product of sin(2 pi B F_i)/(pi F_i)
// kernels over the box.
inline SingularIntegralReport truncated_singular_integral(const FormSystem& sys,
                                                          const std::vector<i64>& y, double B,
                                                          Budget& budget, int grid = 16,
                                                          int workers = default_workers()) {
  if (!(B > 0)) throw std::invalid_argument("truncated_singular_integral: B must be > 0");
  if (grid < 8) throw std::invalid_argument("truncated_singular_integral: grid must be >= 8");
  if (static_cast<int>(y.size()) != sys.n2())
    throw std::invalid_argument("truncated_singular_integral: y has wrong length");
  BoxSpec box = BoxSpec::unit(sys.n1(), sys.n2());
  std::vector<double> yd(y.begin(), y.end());
  auto integrand = [&](const std::vector<double>& v) -> std::complex<double> {
    double w = 1.0;
    for (int i = 0; i < sys.R(); ++i) {
      double t = detail::kTwoPi * B * sys[i].evaluate_real(v, yd);
      w *= 2.0 * B * (std::abs(t) < 1e-8 ? 1.0 - t * t / 6.0 : std::sin(t) / t);
    }
    return {w, 0.0};
  };
  std::complex<double> coarse =
      detail::tensor_trapezoid(box, sys.n1(), grid, budget, workers, integrand);
  std::complex<double> fine =
      detail::tensor_trapezoid(box, sys.n1(), 2 * grid, budget, workers, integrand);
  SingularIntegralReport rep;
  rep.value = fine.real();
  rep.error_estimate = std::abs(fine - coarse);
  rep.B = B;
  rep.grid = grid;
  return rep;
}

struct FiberPrediction {
  double series_value = 0.0;
  double integral_value = 0.0;
  i64 Q = 0;
  double B = 0.0;
  Rat P1;
  double prediction = 0.0;  // series * integral * P1^{n1 - R d1}
  Int exact_count;
  double relative_error = 0.0;
};

inline FiberPrediction fiber_prediction(const FormSystem& sys, const std::vector<i64>& y,
                                        const Rat& P1, i64 Q, double B, Budget& budget,
                                        int grid = 16) {
  if (sys.n1() <= sys.R() * sys.d1())
    throw std::invalid_argument("fiber_prediction: requires n1 > R*d1");
  bool all_zero = true;
  for (int i = 0; i < sys.R(); ++i) all_zero = all_zero && sys[i].specialize_y(y).is_zero();
  if (all_zero)
    throw std::invalid_argument(
        "fiber_prediction: degenerate fiber (every form vanishes identically at y)");
  FiberPrediction rep;
  rep.Q = Q;
  rep.B = B;
  rep.P1 = P1;
  rep.series_value = truncated_singular_series(sys, y, Q, budget).value;
  rep.integral_value = truncated_singular_integral(sys, y, B, budget, grid).value;
  double growth = std::pow(P1.convert_to<double>(), sys.n1() - sys.R() * sys.d1());
  rep.prediction = rep.series_value * rep.integral_value * growth;
  rep.exact_count = count_fiber(sys, y, P1, BoxSpec::unit(sys.n1(), sys.n2()), budget);
  double exact = rep.exact_count.convert_to<double>();
  rep.relative_error = std::abs(rep.prediction - exact) / std::max(1.0, std::abs(exact));
  return rep;
}

// ---------------------------------------------------------------------------
// polarized multilinear forms

// Value of the symmetric d1-linear form attached to d2! * F_i(.; y) at the
// given d1 slot vectors, by iterated finite differencing:
// sum over subsets S of slots of (-1)^{d1-|S|} G(sum_{s in S} u_s).
inline Int polarized_value(const FormSystem& sys, const std::vector<i64>& y, int i,
                           const std::vector<std::vector<i64>>& slots) {
  if (i < 0 || i >= sys.R()) throw std::invalid_argument("polarized_value: bad form index");
  if (static_cast<int>(slots.size()) != sys.d1())
    throw std::invalid_argument("polarized_value: need d1 slot vectors");
  for (const auto& u : slots)
    if (static_cast<int>(u.size()) != sys.n1())
      throw std::invalid_argument("polarized_value: slot vector has wrong length");
  Int scale = 1;
  for (int k = 2; k <= sys.d2(); ++k) scale *= k;
  const int d = sys.d1();
  Int acc = 0;
  std::vector<i64> x(sys.n1());
  for (unsigned mask = 0; mask < (1u << d); ++mask) {
    std::fill(x.begin(), x.end(), 0);
    int bits = 0;
    for (int s = 0; s < d; ++s)
      if (mask & (1u << s)) {
        ++bits;
        for (int j = 0; j < sys.n1(); ++j) x[j] += slots[s][j];
      }
    Int v = sys[i].evaluate(x, y);
    acc += ((d - bits) % 2 == 0) ? v : -v;
  }
  return scale * acc;
}

namespace detail {

inline int rank_of_rat(std::vector<std::vector<Rat>> m) {
  int rows = static_cast<int>(m.size());
  int cols = rows ? static_cast<int>(m[0].size()) : 0;
  int rank = 0;
  for (int c = 0; c < cols && rank < rows; ++c) {
    int pivot = -1;
    for (int r = rank; r < rows; ++r)
      if (m[r][c] != 0) { pivot = r; break; }
    if (pivot < 0) continue;
    std::swap(m[rank], m[pivot]);
    for (int r = rank + 1; r < rows; ++r) {
      if (m[r][c] == 0) continue;
      Rat f = m[r][c] / m[rank][c];
      for (int cc = c; cc < cols; ++cc) m[r][cc] -= f * m[rank][cc];
    }
    ++rank;
  }
  return rank;
}

}  // namespace detail

struct MultilinearReport {
  std::vector<std::vector<Int>> gamma;  // gamma[i][j] with first slot e_j
  int rank = 0;                         // exact rank of the R x n1 matrix
};

inline MultilinearReport multilinear_forms(const FormSystem& sys, const std::vector<i64>& y,
                                           const std::vector<std::vector<i64>>& xhat) {
  if (sys.d1() < 2)
    throw std::invalid_argument("multilinear_forms: requires d1 >= 2 (nothing to polarize)");
  if (static_cast<int>(xhat.size()) != sys.d1() - 1)
    throw std::invalid_argument("multilinear_forms: need d1 - 1 companion vectors");
  MultilinearReport rep;
  rep.gamma.assign(sys.R(), std::vector<Int>(sys.n1()));
  std::vector<std::vector<i64>> slots(sys.d1(), std::vector<i64>(sys.n1(), 0));
  for (int s = 0; s < sys.d1() - 1; ++s) slots[s + 1] = xhat[s];
  for (int j = 0; j < sys.n1(); ++j) {
    std::fill(slots[0].begin(), slots[0].end(), 0);
    slots[0][j] = 1;
    for (int i = 0; i < sys.R(); ++i) rep.gamma[i][j] = polarized_value(sys, y, i, slots);
  }
  std::vector<std::vector<Rat>> m(sys.R(), std::vector<Rat>(sys.n1()));
  for (int i = 0; i < sys.R(); ++i)
    for (int j = 0; j < sys.n1(); ++j) m[i][j] = Rat(rep.gamma[i][j]);
  rep.rank = detail::rank_of_rat(std::move(m));
  return rep;
}

// M_y(P1^theta): companion tuples xhat with every coordinate strictly inside
// (-P1^theta, P1^theta) whose multilinear matrix drops rank.
inline Int rank_deficiency_count(const FormSystem& sys, const std::vector<i64>& y, double theta,
                                 double P1, Budget& budget) {
  if (sys.d1() < 2)
    throw std::invalid_argument("rank_deficiency_count: requires d1 >= 2");
  if (!(P1 >= 1.0) || !(theta >= 0.0))
    throw std::invalid_argument("rank_deficiency_count: need P1 >= 1 and theta >= 0");
  double X = std::pow(P1, theta);
  i64 L = static_cast<i64>(std::floor(X));
  if (static_cast<double>(L) == X) --L;  // strict inequality
  if (L < 0) L = 0;
  const int dims = sys.n1() * (sys.d1() - 1);
  u64 points = 1;
  for (int j = 0; j < dims; ++j) {
    u64 w = static_cast<u64>(2 * L + 1);
    points = (points > UINT64_MAX / w) ? UINT64_MAX : points * w;
  }
  budget.charge(points, "rank deficiency lattice");
  std::vector<std::vector<i64>> xhat(sys.d1() - 1, std::vector<i64>(sys.n1(), 0));
  Int count = 0;
  std::function<void(int)> rec = [&](int pos) {
    if (pos == dims) {
      if (multilinear_forms(sys, y, xhat).rank < sys.R()) ++count;
      return;
    }
    int vec = pos / sys.n1(), coord = pos % sys.n1();
    for (i64 v = -L; v <= L; ++v) {
      xhat[vec][coord] = v;
      rec(pos + 1);
    }
  };
  rec(0);
  return count;
}

// ---------------------------------------------------------------------------
// major-arc comparison

struct MajorArcCheck {
  std::complex<double> lattice_sum;  // S_y(a/q + beta)
  std::complex<double> main_term;    // P1^n1 q^{-n1} S_{a,q}(y) I_y(P1^{d1} beta)
  double gap = 0.0;
  double normalized_gap = 0.0;  // gap / (P1^{n1-1+2R theta (d1-1)} |y|^{2R d2})
};

inline MajorArcCheck major_arc_comparison(const FormSystem& sys, const std::vector<i64>& y,
                                          const std::vector<i64>& a, i64 q,
                                          const std::vector<double>& beta, const Rat& P1,
                                          double theta, Budget& budget, int grid = 16) {
  if (static_cast<int>(beta.size()) != sys.R())
    throw std::invalid_argument("major_arc_comparison: beta has wrong length");
  std::vector<double> alpha(sys.R());
  for (int i = 0; i < sys.R(); ++i)
    alpha[i] = static_cast<double>(a[i]) / static_cast<double>(q) + beta[i];
  MajorArcCheck rep;
  rep.lattice_sum = weyl_sum(sys, y, P1, alpha, budget);
  double P1d = P1.convert_to<double>();
  std::vector<double> scaled_beta(sys.R());
  for (int i = 0; i < sys.R(); ++i) scaled_beta[i] = beta[i] * std::pow(P1d, sys.d1());
  std::complex<double> Sq = complete_sum(sys, y, q, a, budget);
  std::complex<double> I = oscillatory_integral(sys, y, scaled_beta, budget, grid).value;
  rep.main_term = std::pow(P1d, sys.n1()) * std::pow(static_cast<double>(q), -sys.n1()) * Sq * I;
  rep.gap = std::abs(rep.lattice_sum - rep.main_term);
  i64 ynorm = 0;
  for (i64 v : y) ynorm = std::max(ynorm, std::abs(v));
  double denom = std::pow(P1d, sys.n1() - 1 + 2.0 * sys.R() * theta * (sys.d1() - 1)) *
                 std::pow(static_cast<double>(std::max<i64>(ynorm, 1)),
                          2.0 * sys.R() * sys.d2());
  rep.normalized_gap = rep.gap / denom;
  return rep;
}

}  // namespace bihom
