#pragma once

// Local densities.  p-adic side: exact counts of solutions mod p^r by three
// interchangeable strategies (full residue scan, lift-and-filter from mod
// p^{r-1}, and a closed form for systems linear in one variable group),
// density estimates N(r)/p^{r(n1+n2-R)}, the restricted counts with both
// residue vectors nonzero mod p, and Euler products.  Real side: two
// independent estimators of the singular integral over [-1,1]^{n1+n2} (slab
// Monte Carlo and a solved-coordinate chart), seed-deterministic.

#include "bihom/arith.hpp"
#include "bihom/counting.hpp"
#include "bihom/forms.hpp"
#include "bihom/parallel.hpp"
#include "bihom/rng.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace bihom {

inline bool is_prime_i64(i64 n) {
  if (n < 2) return false;
  for (i64 d = 2; d * d <= n; ++d)
    if (n % d == 0) return false;
  return true;
}

enum class ModCountMode { Auto, Exhaustive, Lifting, LinearFiber };

namespace detail {

inline i64 mulmod(i64 a, i64 b, i64 m) {
  return static_cast<i64>(static_cast<__int128>(a) * b % m);
}

inline i64 mod_norm(const Int& c, i64 m) {
  Int r = c % m;
  if (r < 0) r += m;
  return static_cast<i64>(r);
}

// System with coefficients reduced mod m.
struct ModSystem {
  i64 m;
  int n1, n2, R;
  struct Term {
    i64 c;
    std::vector<int> xe, ye;
  };
  std::vector<std::vector<Term>> forms;
  bool x_diagonal = true;

  ModSystem(const FormSystem& sys, i64 mod) : m(mod) {
    n1 = sys.n1();
    n2 = sys.n2();
    R = sys.R();
    forms.resize(R);
    for (int i = 0; i < R; ++i) {
      for (const auto& t : sys[i].terms()) {
        i64 c = mod_norm(t.coef, m);
        if (c == 0) continue;
        int touched = 0;
        for (int j = 0; j < n1; ++j) touched += (t.xexp[j] > 0);
        if (touched > 1) x_diagonal = false;
        forms[i].push_back(Term{c, t.xexp, t.yexp});
      }
    }
  }

  i64 eval(int i, const std::vector<i64>& x, const std::vector<i64>& y) const {
    i64 s = 0;
    for (const auto& t : forms[i]) {
      i64 v = t.c;
      for (int j = 0; j < n1; ++j)
        for (int k = 0; k < t.xe[j]; ++k) v = mulmod(v, x[j] % m, m);
      for (int j = 0; j < n2; ++j)
        for (int k = 0; k < t.ye[j]; ++k) v = mulmod(v, y[j] % m, m);
      s = (s + v) % m;
    }
    return s;
  }

  // y-specialized value tables for x-diagonal systems:
  // form i at x equals cst[i] + sum_j table[i][j][x_j]  (all mod m).
  void specialize_tables(const std::vector<i64>& y, std::vector<std::vector<std::vector<i64>>>& table,
                         std::vector<i64>& cst) const {
    table.assign(R, std::vector<std::vector<i64>>(n1));
    cst.assign(R, 0);
    for (int i = 0; i < R; ++i) {
      // collect per-variable dense polynomials c_k for x_j^k
      std::vector<std::vector<i64>> poly(n1);
      for (const auto& t : forms[i]) {
        i64 c = t.c;
        for (int j = 0; j < n2; ++j)
          for (int k = 0; k < t.ye[j]; ++k) c = mulmod(c, y[j], m);
        int var = -1, deg = 0;
        for (int j = 0; j < n1; ++j)
          if (t.xe[j] > 0) { var = j; deg = t.xe[j]; }
        if (var < 0) {
          cst[i] = (cst[i] + c) % m;
          continue;
        }
        auto& pj = poly[var];
        if (static_cast<int>(pj.size()) <= deg) pj.resize(deg + 1, 0);
        pj[deg] = (pj[deg] + c) % m;
      }
      for (int j = 0; j < n1; ++j) {
        if (poly[j].empty()) continue;
        auto& tab = table[i][j];
        tab.assign(static_cast<std::size_t>(m), 0);
        for (i64 v = 0; v < m; ++v) {
          i64 s = 0;
          for (int k = static_cast<int>(poly[j].size()) - 1; k >= 0; --k)
            s = (mulmod(s, v, m) + poly[j][k]) % m;
          tab[static_cast<std::size_t>(v)] = s;
        }
      }
    }
  }
};

// Counts x residue vectors (each coordinate stepping by `step` through
// [0, m)) that solve the y-specialized system.  Diagonal systems use the
// precomputed value tables; general ones evaluate directly.
inline i64 count_x_residues(const ModSystem& ms, const std::vector<i64>& y, i64 step,
                            Budget& budget) {
  i64 per_axis = ms.m / step;  // step divides m (m = p^r, step in {1, p})
  u64 total = 1;
  for (int j = 0; j < ms.n1; ++j) {
    total = (total > UINT64_MAX / static_cast<u64>(per_axis))
                ? UINT64_MAX
                : total * static_cast<u64>(per_axis);
  }
  budget.charge(total, "residue scan");

  if (ms.x_diagonal) {
    std::vector<std::vector<std::vector<i64>>> table;
    std::vector<i64> cst;
    ms.specialize_tables(y, table, cst);
    i64 count = 0;
    // plevel[j] = running per-form sums after fixing x_0..x_{j-1}; sums stay
    // below (n1+1)*m, so reduction mod m is deferred to the leaf.
    std::vector<std::vector<i64>> plevel(ms.n1 + 1, std::vector<i64>(ms.R));
    plevel[0] = cst;
    std::function<void(int)> rec = [&](int j) {
      if (j == ms.n1) {
        for (int i = 0; i < ms.R; ++i)
          if (plevel[j][i] % ms.m != 0) return;
        ++count;
        return;
      }
      for (i64 v = 0; v < ms.m; v += step) {
        for (int i = 0; i < ms.R; ++i) {
          const auto& tab = table[i][j];
          plevel[j + 1][i] = plevel[j][i] + (tab.empty() ? 0 : tab[static_cast<std::size_t>(v)]);
        }
        rec(j + 1);
      }
    };
    rec(0);
    return count;
  }

  i64 count = 0;
  std::vector<i64> x(ms.n1, 0);
  std::function<void(int)> rec = [&](int j) {
    if (j == ms.n1) {
      for (int i = 0; i < ms.R; ++i)
        if (ms.eval(i, x, y) != 0) return;
      ++count;
      return;
    }
    for (i64 v = 0; v < ms.m; v += step) {
      x[j] = v;
      rec(j + 1);
    }
  };
  rec(0);
  return count;
}

inline bool nonzero_mod(const std::vector<i64>& v, i64 p) {
  for (i64 c : v)
    if (c % p != 0) return true;
  return false;
}

// Exhaustive count over y residues; star restricts both sides to vectors
// nonzero mod p.
inline Int count_mod_scan(const FormSystem& sys, i64 p, int r, Budget& budget, bool star,
                          int workers) {
  i64 m = ipow_i64(p, static_cast<unsigned>(r));
  ModSystem ms(sys, m);
  u64 ycard = 1;
  for (int j = 0; j < ms.n2; ++j)
    ycard = (ycard > UINT64_MAX / static_cast<u64>(m)) ? UINT64_MAX
                                                       : ycard * static_cast<u64>(m);
  budget.charge(ycard, "residue outer loop");
  return chunked_reduce_range(
      static_cast<std::size_t>(ycard), workers, Int(0),
      [&](std::size_t lo, std::size_t hi, Int& acc) {
        std::vector<i64> y(ms.n2);
        for (std::size_t idx = lo; idx < hi; ++idx) {
          u64 t = idx;
          for (int j = ms.n2 - 1; j >= 0; --j) {
            y[j] = static_cast<i64>(t % static_cast<u64>(m));
            t /= static_cast<u64>(m);
          }
          if (star && !nonzero_mod(y, p)) continue;
          i64 a = count_x_residues(ms, y, 1, budget);
          if (star) a -= count_x_residues(ms, y, p, budget);
          acc += a;
        }
      },
      [](Int& a, const Int& b) { a += b; }, 64);
}

// Lift solutions from mod p^{k} to mod p^{k+1}, starting from a full scan at
// r = 1.  Solution vectors are stored flat with stride n1+n2.
inline Int count_mod_lifting(const FormSystem& sys, i64 p, int r, Budget& budget, bool star) {
  const int n = sys.n1() + sys.n2();
  std::vector<i64> sols;  // flat, stride n
  {
    ModSystem ms(sys, p);
    u64 card = 1;
    for (int j = 0; j < n; ++j)
      card = (card > UINT64_MAX / static_cast<u64>(p)) ? UINT64_MAX
                                                       : card * static_cast<u64>(p);
    budget.charge(card, "lifting base scan");
    std::vector<i64> x(sys.n1()), y(sys.n2());
    std::function<void(int)> rec = [&](int j) {
      if (j == n) {
        if (star && (!nonzero_mod(x, p) || !nonzero_mod(y, p))) return;
        for (int i = 0; i < ms.R; ++i)
          if (ms.eval(i, x, y) != 0) return;
        sols.insert(sols.end(), x.begin(), x.end());
        sols.insert(sols.end(), y.begin(), y.end());
        return;
      }
      i64& slot = (j < sys.n1()) ? x[j] : y[j - sys.n1()];
      for (i64 v = 0; v < p; ++v) {
        slot = v;
        rec(j + 1);
      }
    };
    rec(0);
  }
  for (int k = 1; k < r; ++k) {
    i64 mk = ipow_i64(p, static_cast<unsigned>(k));
    i64 mk1 = mk * p;
    ModSystem ms(sys, mk1);
    u64 incs = 1;
    for (int j = 0; j < n; ++j)
      incs = (incs > UINT64_MAX / static_cast<u64>(p)) ? UINT64_MAX
                                                       : incs * static_cast<u64>(p);
    u64 nsols = static_cast<u64>(sols.size() / static_cast<std::size_t>(n));
    budget.charge(nsols > 0 && incs > UINT64_MAX / nsols ? UINT64_MAX : nsols * incs,
                  "lifting step");
    std::vector<i64> next;
    std::vector<i64> x(sys.n1()), y(sys.n2());
    for (std::size_t s = 0; s < sols.size(); s += static_cast<std::size_t>(n)) {
      std::vector<i64> inc(n, 0);
      std::function<void(int)> rec = [&](int j) {
        if (j == n) {
          for (int i = 0; i < sys.n1(); ++i) x[i] = sols[s + i] + mk * inc[i];
          for (int i = 0; i < sys.n2(); ++i)
            y[i] = sols[s + sys.n1() + i] + mk * inc[sys.n1() + i];
          for (int i = 0; i < ms.R; ++i)
            if (ms.eval(i, x, y) != 0) return;
          next.insert(next.end(), x.begin(), x.end());
          next.insert(next.end(), y.begin(), y.end());
          return;
        }
        for (i64 v = 0; v < p; ++v) {
          inc[j] = v;
          rec(j + 1);
        }
      };
      rec(0);
    }
    sols = std::move(next);
  }
  return Int(sols.size() / static_cast<std::size_t>(n));
}

// True when the system is linear in x after transposition bookkeeping:
// R = 1 and d1 = 1, so for fixed y the solutions of c(y).x == 0 mod m have
// the closed-form count m^{n1-1} gcd(m, c(y)).
inline bool linear_fiber_applicable(const FormSystem& sys) {
  return sys.R() == 1 && sys.d1() == 1;
}

inline Int count_mod_linear(const FormSystem& sys, i64 p, int r, Budget& budget, bool star) {
  i64 m = ipow_i64(p, static_cast<unsigned>(r));
  ModSystem ms(sys, m);
  u64 ycard = 1;
  for (int j = 0; j < ms.n2; ++j)
    ycard = (ycard > UINT64_MAX / static_cast<u64>(m)) ? UINT64_MAX
                                                       : ycard * static_cast<u64>(m);
  budget.charge(ycard, "linear fiber outer loop");
  Int total = 0;
  std::vector<i64> y(ms.n2), coeff(ms.n1);
  Int full_pow = ipow(Int(m), static_cast<unsigned>(ms.n1 - 1));
  i64 mprev = m / p;  // p^{r-1}
  Int sub_pow = (r >= 2) ? ipow(Int(mprev), static_cast<unsigned>(ms.n1 - 1)) : Int(1);
  std::function<void(int)> rec = [&](int j) {
    if (j == ms.n2) {
      if (star && !nonzero_mod(y, p)) return;
      std::fill(coeff.begin(), coeff.end(), 0);
      for (const auto& t : ms.forms[0]) {
        i64 c = t.c;
        for (int k = 0; k < ms.n2; ++k)
          for (int e = 0; e < t.ye[k]; ++e) c = mulmod(c, y[k], m);
        for (int k = 0; k < ms.n1; ++k)
          if (t.xe[k] == 1) coeff[k] = (coeff[k] + c) % m;
      }
      i64 g = m;
      for (i64 c : coeff) g = std::gcd(g, c);
      total += full_pow * g;
      if (star) {
        // remove x == 0 mod p: x = p u with c(y).u == 0 mod p^{r-1}
        if (r == 1) total -= 1;
        else {
          i64 gp = mprev;
          for (i64 c : coeff) gp = std::gcd(gp, c % mprev);
          total -= sub_pow * gp;
        }
      }
      return;
    }
    for (i64 v = 0; v < m; ++v) {
      y[j] = v;
      rec(j + 1);
    }
  };
  rec(0);
  return total;
}

}  // namespace detail

// N(r) (or N*(r) when star): solution pairs mod p^r.  Auto picks the linear
// closed form when the system is linear in one side (transposing if that is
// the cheaper orientation), otherwise lifts for r >= 2 and scans for r = 1.
inline Int count_mod(const FormSystem& sys, i64 p, int r, Budget& budget,
                     ModCountMode mode = ModCountMode::Auto, bool star = false,
                     int workers = default_workers()) {
  if (!is_prime_i64(p)) throw std::invalid_argument("count_mod: p must be prime");
  if (r < 1) throw std::invalid_argument("count_mod: r must be >= 1");
  if (mode == ModCountMode::Auto) {
    bool lin_direct = detail::linear_fiber_applicable(sys);
    bool lin_transposed = detail::linear_fiber_applicable(sys.transpose());
    if (lin_direct || lin_transposed) {
      // iterate the smaller side
      if (lin_direct && (!lin_transposed || sys.n2() <= sys.n1()))
        return detail::count_mod_linear(sys, p, r, budget, star);
      return detail::count_mod_linear(sys.transpose(), p, r, budget, star);
    }
    if (r == 1) return detail::count_mod_scan(sys, p, r, budget, star, workers);
    return detail::count_mod_lifting(sys, p, r, budget, star);
  }
  if (mode == ModCountMode::Exhaustive)
    return detail::count_mod_scan(sys, p, r, budget, star, workers);
  if (mode == ModCountMode::Lifting) return detail::count_mod_lifting(sys, p, r, budget, star);
  if (detail::linear_fiber_applicable(sys))
    return detail::count_mod_linear(sys, p, r, budget, star);
  if (detail::linear_fiber_applicable(sys.transpose()))
    return detail::count_mod_linear(sys.transpose(), p, r, budget, star);
  throw std::invalid_argument("count_mod: system is not linear in either side");
}

// N*(r): both residue vectors nonzero mod p.  Defined for hypersurfaces.
inline Int count_mod_star(const FormSystem& sys, i64 p, int r, Budget& budget,
                          ModCountMode mode = ModCountMode::Auto,
                          int workers = default_workers()) {
  if (sys.R() != 1)
    throw std::invalid_argument("count_mod_star: defined for a single form (R = 1)");
  return count_mod(sys, p, r, budget, mode, /*star=*/true, workers);
}

// #{x mod q : F_i(x; y) == 0 mod q}; q >= 1 arbitrary.
inline Int fiber_count_mod(const FormSystem& sys, const std::vector<i64>& y, i64 q,
                           Budget& budget) {
  if (q < 1) throw std::invalid_argument("fiber_count_mod: q must be >= 1");
  if (static_cast<int>(y.size()) != sys.n2())
    throw std::invalid_argument("fiber_count_mod: y has wrong length");
  if (q == 1) return 1;
  detail::ModSystem ms(sys, q);
  std::vector<i64> yr(y.size());
  for (std::size_t j = 0; j < y.size(); ++j) yr[j] = ((y[j] % q) + q) % q;
  if (detail::linear_fiber_applicable(sys)) {
    std::vector<i64> coeff(ms.n1, 0);
    for (const auto& t : ms.forms[0]) {
      i64 c = t.c;
      for (int k = 0; k < ms.n2; ++k)
        for (int e = 0; e < t.ye[k]; ++e) c = detail::mulmod(c, yr[k], q);
      for (int k = 0; k < ms.n1; ++k)
        if (t.xe[k] == 1) coeff[k] = (coeff[k] + c) % q;
    }
    i64 g = q;
    for (i64 c : coeff) g = std::gcd(g, c);
    return ipow(Int(q), static_cast<unsigned>(ms.n1 - 1)) * g;
  }
  return Int(detail::count_x_residues(ms, yr, 1, budget));
}

// ---------------------------------------------------------------------------
// density reports

struct PadicReport {
  i64 p = 0;
  int r = 0;
  Int N_r;
  Rat sigma_estimate;
  bool stabilized = false;
  std::vector<std::pair<int, Rat>> ladder;  // (r', estimate) for r' = 1..r
};

// N(r') / p^{r'(n1+n2-R)} for r' = 1..r, with a plateau flag when the last
// two rungs agree exactly or within 1e-3 relative.
inline PadicReport sigma_p_estimate(const FormSystem& sys, i64 p, int r, Budget& budget,
                                    ModCountMode mode = ModCountMode::Auto) {
  PadicReport rep;
  rep.p = p;
  rep.r = r;
  int expo = sys.n1() + sys.n2() - sys.R();
  for (int rr = 1; rr <= r; ++rr) {
    Int N = count_mod(sys, p, rr, budget, mode);
    Rat est = Rat(N) / Rat(ipow(Int(p), static_cast<unsigned>(rr * expo)));
    rep.ladder.emplace_back(rr, est);
    if (rr == r) rep.N_r = N;
  }
  rep.sigma_estimate = rep.ladder.back().second;
  if (rep.ladder.size() >= 2) {
    const Rat& a = rep.ladder[rep.ladder.size() - 2].second;
    const Rat& b = rep.ladder.back().second;
    if (a == b) rep.stabilized = true;
    else if (b != 0) {
      Rat rel = (a - b) / b;
      if (rel < 0) rel = -rel;
      rep.stabilized = (rel.convert_to<double>() < 1e-3);
    }
  }
  return rep;
}

struct OmegaTauReport {
  i64 p = 0;
  int r = 0;
  Rat sigma;     // N(r)/p^{r(n1+n2-1)}
  Rat factor;    // (1 - p^{-(n1-d1)})(1 - p^{-(n2-d2)})
  Rat omega_p;   // factor / (1-1/p)^2 * sigma
  Rat tau_p;     // factor * sigma
};

inline OmegaTauReport omega_p(const FormSystem& sys, i64 p, int r, Budget& budget) {
  if (sys.R() != 1) throw std::invalid_argument("omega_p: defined for a single form (R = 1)");
  if (sys.n1() <= sys.d1() || sys.n2() <= sys.d2())
    throw std::invalid_argument("omega_p: requires n1 > d1 and n2 > d2");
  OmegaTauReport rep;
  rep.p = p;
  rep.r = r;
  rep.sigma = sigma_p_estimate(sys, p, r, budget).sigma_estimate;
  Rat f1 = Rat(1) - Rat(1, ipow(Int(p), static_cast<unsigned>(sys.n1() - sys.d1())));
  Rat f2 = Rat(1) - Rat(1, ipow(Int(p), static_cast<unsigned>(sys.n2() - sys.d2())));
  rep.factor = f1 * f2;
  Rat unit = Rat(1) - Rat(1, p);
  rep.omega_p = rep.factor / (unit * unit) * rep.sigma;
  rep.tau_p = rep.factor * rep.sigma;
  return rep;
}

struct EulerFactor {
  i64 p;
  int r;
  Rat sigma;
};

struct EulerProductReport {
  double value = 1.0;
  std::vector<EulerFactor> factors;
  double tail_exponent = 0.0;  // product tail behaves like 1 + O(p_max^tail_exponent)
};

// Default truncation level: the largest r whose estimated work fits the
// per-prime allowance (linear systems iterate one side only).
inline int default_r_for(const FormSystem& sys, i64 p, u64 per_prime_work) {
  bool lin_direct = detail::linear_fiber_applicable(sys);
  bool lin_transposed = detail::linear_fiber_applicable(sys.transpose());
  int dims;  // residue dimensions actually iterated
  if (lin_direct && lin_transposed) dims = std::min(sys.n1(), sys.n2());
  else if (lin_direct) dims = sys.n2();
  else if (lin_transposed) dims = sys.n1();
  else dims = sys.n1() + sys.n2();
  int r = 1;
  for (int rr = 2; rr <= 12; ++rr) {
    long double work = powl(static_cast<long double>(p), static_cast<long double>(rr) * dims);
    if (work > static_cast<long double>(per_prime_work)) break;
    r = rr;
  }
  return r;
}

inline EulerProductReport euler_product(const FormSystem& sys, i64 p_max, Budget& budget,
                                        u64 per_prime_work = 10'000'000) {
  if (p_max < 2) throw std::invalid_argument("euler_product: p_max must be >= 2");
  EulerProductReport rep;
  for (i64 p : primes_upto(p_max)) {
    int r = default_r_for(sys, p, per_prime_work);
    Rat sigma = sigma_p_estimate(sys, p, r, budget).sigma_estimate;
    rep.factors.push_back(EulerFactor{p, r, sigma});
    rep.value *= sigma.convert_to<double>();
  }
  rep.tail_exponent =
      1.0 - static_cast<double>(std::min(sys.n1() - sys.d1(), sys.n2() - sys.d2()));
  return rep;
}

// ---------------------------------------------------------------------------
// real density

enum class RealDensityMethod { MonteCarloSlab, LerayChart };

struct RealDensityReport {
  double estimate = 0.0;
  double standard_error = 0.0;
  RealDensityMethod method = RealDensityMethod::MonteCarloSlab;
  u64 samples = 0;
  double epsilon = 0.0;  // slab half-width (MonteCarloSlab only)
  u64 seed = 0;
  std::string rng_name;
  int chart = -1;  // solved y-coordinate (LerayChart only)
};

// (2 eps)^{-R} vol{(x,y) in [-1,1]^{n1+n2} : |F_i| <= eps}: slab volume by
// uniform sampling.  Chunked substreams make the result worker-independent.
inline RealDensityReport sigma_infty_mc(const FormSystem& sys, double epsilon, u64 samples,
                                        u64 seed, Budget& budget,
                                        int workers = default_workers()) {
  if (epsilon <= 0) throw std::invalid_argument("sigma_infty_mc: epsilon must be > 0");
  if (samples < 1000) throw std::invalid_argument("sigma_infty_mc: needs >= 1000 samples");
  budget.charge(samples, "monte carlo samples");
  const u64 chunk = 65536;
  u64 nchunks = (samples + chunk - 1) / chunk;
  u64 hits = chunked_reduce_range(
      static_cast<std::size_t>(nchunks), workers, u64(0),
      [&](std::size_t lo, std::size_t hi, u64& acc) {
        std::vector<double> x(sys.n1()), y(sys.n2());
        for (std::size_t ci = lo; ci < hi; ++ci) {
          SplitMix64 rng = SplitMix64::stream(seed, static_cast<u64>(ci));
          u64 in_chunk = std::min(chunk, samples - static_cast<u64>(ci) * chunk);
          for (u64 s = 0; s < in_chunk; ++s) {
            for (auto& v : x) v = rng.uniform_sym();
            for (auto& v : y) v = rng.uniform_sym();
            bool hit = true;
            for (int i = 0; i < sys.R() && hit; ++i)
              hit = std::abs(sys[i].evaluate_real(x, y)) <= epsilon;
            acc += hit;
          }
        }
      },
      [](u64& a, const u64& b) { a += b; }, 1);

  double phat = static_cast<double>(hits) / static_cast<double>(samples);
  double cube = std::pow(2.0, sys.n1() + sys.n2());
  double scale = cube / std::pow(2.0 * epsilon, sys.R());
  RealDensityReport rep;
  rep.estimate = scale * phat;
  rep.standard_error =
      scale * std::sqrt(std::max(phat * (1.0 - phat), 0.0) / static_cast<double>(samples));
  rep.method = RealDensityMethod::MonteCarloSlab;
  rep.samples = samples;
  rep.epsilon = epsilon;
  rep.seed = seed;
  rep.rng_name = SplitMix64::name();
  return rep;
}

struct SigmaLadderReport {
  std::vector<RealDensityReport> rungs;  // epsilon = 2^-3 .. 2^-8
  double richardson = 0.0;               // 2*last - previous (halving step)
  bool exploding = false;
};

inline SigmaLadderReport sigma_infty_ladder(const FormSystem& sys, u64 samples, u64 seed,
                                            Budget& budget, int workers = default_workers()) {
  SigmaLadderReport rep;
  for (int k = 3; k <= 8; ++k) {
    double eps = std::pow(2.0, -k);
    rep.rungs.push_back(sigma_infty_mc(sys, eps, samples, seed + static_cast<u64>(k), budget,
                                       workers));
  }
  const auto& a = rep.rungs[rep.rungs.size() - 2];
  const auto& b = rep.rungs.back();
  rep.richardson = 2.0 * b.estimate - a.estimate;
  bool monotone_up = true;
  for (std::size_t i = 1; i < rep.rungs.size(); ++i)
    monotone_up = monotone_up && (rep.rungs[i].estimate > rep.rungs[i - 1].estimate);
  rep.exploding = monotone_up && (b.estimate - rep.rungs.front().estimate >
                                  3.0 * (b.standard_error + rep.rungs.front().standard_error));
  return rep;
}

namespace detail {

// Coefficients of F(x; y) viewed as a polynomial in y_chart, everything else
// fixed at the sample point.
inline void chart_poly(const Form& f, const std::vector<double>& x, const std::vector<double>& y,
                       int chart, std::vector<double>& coeffs) {
  std::fill(coeffs.begin(), coeffs.end(), 0.0);
  for (const auto& t : f.terms()) {
    double v = t.coef.convert_to<double>();
    for (std::size_t j = 0; j < t.xexp.size(); ++j)
      for (int k = 0; k < t.xexp[j]; ++k) v *= x[j];
    int deg = 0;
    for (std::size_t j = 0; j < t.yexp.size(); ++j) {
      if (static_cast<int>(j) == chart) { deg = t.yexp[j]; continue; }
      for (int k = 0; k < t.yexp[j]; ++k) v *= y[j];
    }
    coeffs[static_cast<std::size_t>(deg)] += v;
  }
}

}  // namespace detail

// Chart estimator: sample all coordinates but one y-coordinate, solve for the
// remaining one, and accumulate 1/|dF/dy_chart| at each in-box root.  Chart
// degree must be at most 2; chart < 0 auto-selects by a pilot scan of the
// mean absolute derivative.
inline RealDensityReport sigma_infty_leray(const FormSystem& sys, u64 samples, u64 seed,
                                           Budget& budget, int chart = -1,
                                           int workers = default_workers()) {
  if (sys.R() != 1)
    throw std::invalid_argument("sigma_infty_leray: defined for a single form (R = 1)");
  if (samples < 1000) throw std::invalid_argument("sigma_infty_leray: needs >= 1000 samples");
  const Form& F = sys[0];
  const int n1 = sys.n1(), n2 = sys.n2();

  std::vector<Form> dF;
  for (int j = 0; j < n2; ++j) dF.push_back(F.partial_y(j));

  if (chart < 0) {
    double best = -1.0;
    SplitMix64 pilot = SplitMix64::stream(seed, ~u64(0));
    std::vector<double> x(n1), y(n2);
    std::vector<double> mean(n2, 0.0);
    for (int s = 0; s < 2000; ++s) {
      for (auto& v : x) v = pilot.uniform_sym();
      for (auto& v : y) v = pilot.uniform_sym();
      for (int j = 0; j < n2; ++j) mean[j] += std::abs(dF[j].evaluate_real(x, y));
    }
    for (int j = 0; j < n2; ++j)
      if (mean[j] > best) { best = mean[j]; chart = j; }
  }
  int chart_deg = 0;
  for (const auto& t : F.terms()) chart_deg = std::max(chart_deg, t.yexp[chart]);
  if (chart_deg == 0 || chart_deg > 2)
    throw std::invalid_argument("sigma_infty_leray: chart coordinate must appear with degree 1 or 2");

  budget.charge(samples, "chart samples");
  const u64 chunk = 65536;
  u64 nchunks = (samples + chunk - 1) / chunk;
  struct Acc {
    double sum = 0.0, sumsq = 0.0;
  };
  Acc acc = chunked_reduce_range(
      static_cast<std::size_t>(nchunks), workers, Acc{},
      [&](std::size_t lo, std::size_t hi, Acc& a) {
        std::vector<double> x(n1), y(n2), coeffs(chart_deg + 1);
        for (std::size_t ci = lo; ci < hi; ++ci) {
          // accumulate per sample chunk, then merge once: the grouping of
          // floating-point additions is then the same for any worker count
          Acc local;
          SplitMix64 rng = SplitMix64::stream(seed, static_cast<u64>(ci));
          u64 in_chunk = std::min(chunk, samples - static_cast<u64>(ci) * chunk);
          for (u64 s = 0; s < in_chunk; ++s) {
            for (auto& v : x) v = rng.uniform_sym();
            for (auto& v : y) v = rng.uniform_sym();
            detail::chart_poly(F, x, y, chart, coeffs);
            double roots[2];
            int nroots = 0;
            if (chart_deg == 1 || coeffs[chart_deg] == 0.0) {
              if (coeffs[1] != 0.0) roots[nroots++] = -coeffs[0] / coeffs[1];
            } else {
              double disc = coeffs[1] * coeffs[1] - 4.0 * coeffs[2] * coeffs[0];
              if (disc >= 0.0) {
                double sq = std::sqrt(disc);
                roots[nroots++] = (-coeffs[1] + sq) / (2.0 * coeffs[2]);
                roots[nroots++] = (-coeffs[1] - sq) / (2.0 * coeffs[2]);
              }
            }
            double w = 0.0;
            for (int k = 0; k < nroots; ++k) {
              double t = roots[k];
              if (!(t >= -1.0 && t <= 1.0)) continue;
              double deriv = (chart_deg == 1)
                                 ? coeffs[1]
                                 : (2.0 * coeffs[2] * t + coeffs[1]);
              if (deriv != 0.0) w += 1.0 / std::abs(deriv);
            }
            local.sum += w;
            local.sumsq += w * w;
          }
          a.sum += local.sum;
          a.sumsq += local.sumsq;
        }
      },
      [](Acc& a, const Acc& b) {
        a.sum += b.sum;
        a.sumsq += b.sumsq;
      },
      1);

  double n = static_cast<double>(samples);
  double mean = acc.sum / n;
  double var = std::max(acc.sumsq / n - mean * mean, 0.0);
  double cube = std::pow(2.0, n1 + n2 - 1);  // sampled volume (chart coord excluded)
  RealDensityReport rep;
  rep.estimate = cube * mean;
  rep.standard_error = cube * std::sqrt(var / n);
  rep.method = RealDensityMethod::LerayChart;
  rep.samples = samples;
  rep.seed = seed;
  rep.rng_name = SplitMix64::name();
  rep.chart = chart;
  return rep;
}

// Archimedean Tamagawa factor relative to the slab density.
inline Rat tau_infty_factor(const FormSystem& sys) {
  if (sys.R() != 1)
    throw std::invalid_argument("tau_infty_factor: defined for a single form (R = 1)");
  return Rat((sys.n1() - sys.d1()) * (sys.n2() - sys.d2()), 4);
}

}  // namespace bihom
