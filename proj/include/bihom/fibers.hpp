#pragma once

// Per-fiber enumeration: given y, solve F_i(x; y) = 0 over an integer box.
// The y-specialized system is compiled once per system (FiberSpecializer);
// per fiber we scan all but one of the x-variables that actually occur and
// solve the remaining one exactly when its degree is at most 2.  Variables
// that disappear entirely from the specialized system are reported as free
// ranges rather than scanned.

#include "bihom/arith.hpp"
#include "bihom/forms.hpp"

#include <functional>
#include <optional>
#include <type_traits>
#include <vector>

namespace bihom {

// Inclusive integer ranges per coordinate.
struct IntRanges {
  std::vector<i64> lo, hi;
  int n() const { return static_cast<int>(lo.size()); }
  bool empty_range() const {
    for (int j = 0; j < n(); ++j)
      if (lo[j] > hi[j]) return true;
    return false;
  }
  u64 cardinality() const {  // saturating
    u64 c = 1;
    for (int j = 0; j < n(); ++j) {
      if (lo[j] > hi[j]) return 0;
      u64 w = static_cast<u64>(hi[j] - lo[j] + 1);
      if (c > UINT64_MAX / w) return UINT64_MAX;
      c *= w;
    }
    return c;
  }
  static IntRanges symmetric(int n, i64 L) {
    IntRanges r;
    r.lo.assign(n, -L);
    r.hi.assign(n, L);
    return r;
  }
};

namespace detail {

inline i64 sqrt_i128(__int128 a) {
  if (a < 0) return -1;
  long double g = sqrtl(static_cast<long double>(a));
  i64 s = static_cast<i64>(g);
  while (s > 0 && static_cast<__int128>(s) * s > a) --s;
  while (static_cast<__int128>(s + 1) * (s + 1) <= a) ++s;
  return (static_cast<__int128>(s) * s == a) ? s : -1;
}

// Specialized system whose monomials each involve a single x-variable:
// form i ==  cst[i] + sum_j phi[i][j](x_j),  phi stored densely by degree.
template <typename T>
struct DiagSpec {
  int nx = 0, R = 0, dmax = 0;
  std::vector<std::vector<std::vector<T>>> phi;  // [R][nx][dmax+1]
  std::vector<T> cst;
  std::vector<char> present;                     // var occurs in some form

  void reset(int R_, int nx_, int dmax_) {
    R = R_; nx = nx_; dmax = dmax_;
    phi.assign(R, std::vector<std::vector<T>>(nx, std::vector<T>(dmax + 1, T(0))));
    cst.assign(R, T(0));
    present.assign(nx, 0);
  }
  void clear_values() {
    for (auto& f : phi)
      for (auto& v : f) std::fill(v.begin(), v.end(), T(0));
    std::fill(cst.begin(), cst.end(), T(0));
    std::fill(present.begin(), present.end(), 0);
  }
};

// Roots of c[0] + c[1] t + ... + c[d] t^d in [lo, hi], exact.  Returns false
// when the polynomial is identically zero (every t is a root).  Degree >= 3
// falls back to a scan (budget-charged by the caller).
template <typename T>
bool univariate_roots(const std::vector<T>& c, i64 lo, i64 hi, Budget& budget,
                      std::vector<i64>& out) {
  out.clear();
  int deg = -1;
  for (int k = static_cast<int>(c.size()) - 1; k >= 0; --k)
    if (c[k] != 0) { deg = k; break; }
  if (deg < 0) return false;  // identically zero
  if (deg == 0) return true;  // nonzero constant: no roots
  auto push = [&](const T& num, const T& den) {
    if (den == 0) return;
    if (num % den != 0) return;
    T q = num / den;
    if (q < lo || q > hi) return;
    i64 t = static_cast<i64>(q);
    for (i64 r : out)
      if (r == t) return;
    out.push_back(t);
  };
  if (deg == 1) {
    push(T(-c[0]), c[1]);
    return true;
  }
  if (deg == 2) {
    if constexpr (std::is_same_v<T, i64>) {
      __int128 disc = static_cast<__int128>(c[1]) * c[1] -
                      static_cast<__int128>(4) * c[2] * c[0];
      i64 s = sqrt_i128(disc);
      if (s < 0) return true;
      push(-c[1] + s, 2 * c[2]);
      push(-c[1] - s, 2 * c[2]);
    } else {
      T disc = c[1] * c[1] - 4 * c[2] * c[0];
      if (disc < 0) return true;
      T s = iroot(disc, 2);
      if (s * s != disc) return true;
      push(-c[1] + s, 2 * c[2]);
      push(-c[1] - s, 2 * c[2]);
    }
    return true;
  }
  // degree >= 3: exact scan
  budget.charge(static_cast<u64>(hi - lo + 1), "univariate scan");
  for (i64 t = lo; t <= hi; ++t) {
    T v = 0;
    for (int k = deg; k >= 0; --k) v = v * t + c[k];
    if (v == 0) out.push_back(t);
  }
  return true;
}

template <typename T>
T eval_univariate(const std::vector<T>& c, i64 t) {
  T v = 0;
  for (int k = static_cast<int>(c.size()) - 1; k >= 0; --k) v = v * t + c[k];
  return v;
}

// Enumerates solutions of a single-variable-per-monomial system over rg.
// sink.solution(x): fully determined solution.
// sink.family(x, free_mask): entries of x with free_mask set range freely.
template <typename T, typename Sink>
void enumerate_diag(const DiagSpec<T>& sp, const IntRanges& rg, Budget& budget,
                    Sink& sink) {
  const int nx = sp.nx;
  if (rg.empty_range()) return;
  std::vector<int> scan_vars, free_vars;
  int pivot = -1;
  for (int j = 0; j < nx; ++j) {
    if (!sp.present[j]) { free_vars.push_back(j); continue; }
    // solvable pivot candidate: degree <= 2 in every form
    int dm = 0;
    for (int i = 0; i < sp.R; ++i)
      for (int k = sp.dmax; k >= 1; --k)
        if (sp.phi[i][j][k] != 0) { dm = std::max(dm, k); break; }
    // prefer the solvable variable with the widest range (largest saving)
    if (dm <= 2 && (pivot < 0 || rg.hi[j] - rg.lo[j] > rg.hi[pivot] - rg.lo[pivot]))
      pivot = j;
    scan_vars.push_back(j);
  }
  if (pivot >= 0) scan_vars.erase(std::find(scan_vars.begin(), scan_vars.end(), pivot));

  // budget: one charge for the whole prefix scan
  u64 steps = 1;
  for (int j : scan_vars) {
    u64 w = static_cast<u64>(rg.hi[j] - rg.lo[j] + 1);
    steps = (steps > UINT64_MAX / w) ? UINT64_MAX : steps * w;
  }
  budget.charge(steps, "fiber scan");

  std::vector<i64> x(nx, 0);
  std::vector<char> fmask(nx, 0);
  for (int j : free_vars) fmask[j] = 1;
  std::vector<T> s(sp.R, T(0));
  std::vector<T> upoly;
  std::vector<i64> roots;

  auto leaf = [&]() {
    if (pivot < 0) {
      for (int i = 0; i < sp.R; ++i)
        if (s[i] + sp.cst[i] != 0) return;
      if (free_vars.empty()) sink.solution(x);
      else sink.family(x, fmask);
      return;
    }
    // find first form with a nonzero univariate part in the pivot
    int lead = -1;
    for (int i = 0; i < sp.R; ++i) {
      bool nz = (s[i] + sp.cst[i]) != 0;
      for (int k = 1; k <= sp.dmax && !nz; ++k) nz = sp.phi[i][pivot][k] != 0;
      if (nz) { lead = i; break; }
    }
    if (lead < 0) {
      // pivot (and the global frees) are unconstrained here
      fmask[pivot] = 1;
      x[pivot] = 0;
      sink.family(x, fmask);
      fmask[pivot] = 0;
      return;
    }
    upoly = sp.phi[lead][pivot];
    upoly[0] += s[lead] + sp.cst[lead];
    if (!univariate_roots(upoly, rg.lo[pivot], rg.hi[pivot], budget, roots)) {
      // identically zero for the lead form: but lead was chosen nonzero
      return;  // unreachable by construction
    }
    for (i64 t : roots) {
      bool ok = true;
      for (int i = 0; i < sp.R && ok; ++i) {
        if (i == lead) continue;
        T v = eval_univariate(sp.phi[i][pivot], t) + s[i] + sp.cst[i];
        ok = (v == 0);
      }
      if (!ok) continue;
      x[pivot] = t;
      if (free_vars.empty()) sink.solution(x);
      else sink.family(x, fmask);
    }
    x[pivot] = 0;
  };

  // iterative recursion over scan_vars
  std::function<void(std::size_t)> rec = [&](std::size_t level) {
    if (level == scan_vars.size()) { leaf(); return; }
    int j = scan_vars[level];
    for (i64 v = rg.lo[j]; v <= rg.hi[j]; ++v) {
      x[j] = v;
      for (int i = 0; i < sp.R; ++i) s[i] += eval_univariate(sp.phi[i][j], v) - sp.phi[i][j][0];
      rec(level + 1);
      for (int i = 0; i < sp.R; ++i) s[i] -= eval_univariate(sp.phi[i][j], v) - sp.phi[i][j][0];
    }
    x[j] = 0;
  };
  rec(0);
}

// General (non-diagonal) specialized system: exact, allocation-heavy; used
// when some monomial mixes several x-variables.
struct GenTerm {
  Int c;
  std::vector<int> e;
};
using GenPoly = std::vector<GenTerm>;

template <typename Sink>
void enumerate_general_rec(std::vector<GenPoly> polys, const std::vector<int>& vars,
                           std::size_t vi, const IntRanges& rg, Budget& budget,
                           std::vector<i64>& x, std::vector<char>& fmask, Sink& sink) {
  if (vi + 1 == vars.size()) {
    // univariate in vars.back()
    int piv = vars[vi];
    int dmax = 0;
    for (const auto& p : polys)
      for (const auto& t : p)
        dmax = std::max(dmax, t.e[piv]);
    int lead = -1;
    std::vector<std::vector<Int>> uni(polys.size(), std::vector<Int>(dmax + 1, Int(0)));
    for (std::size_t i = 0; i < polys.size(); ++i) {
      for (const auto& t : polys[i]) uni[i][t.e[piv]] += t.c;
      if (lead < 0)
        for (const auto& c : uni[i])
          if (c != 0) { lead = static_cast<int>(i); break; }
    }
    if (lead < 0) {
      fmask[piv] = 1;
      x[piv] = 0;
      sink.family(x, fmask);
      fmask[piv] = 0;
      return;
    }
    std::vector<i64> roots;
    if (!univariate_roots(uni[lead], rg.lo[piv], rg.hi[piv], budget, roots)) return;
    for (i64 t : roots) {
      bool ok = true;
      for (std::size_t i = 0; i < polys.size() && ok; ++i) {
        if (static_cast<int>(i) == static_cast<std::size_t>(lead)) continue;
        ok = (eval_univariate(uni[i], t) == 0);
      }
      if (!ok) continue;
      x[piv] = t;
      bool anyfree = false;
      for (char f : fmask) anyfree |= (f != 0);
      if (anyfree) sink.family(x, fmask);
      else sink.solution(x);
    }
    x[piv] = 0;
    return;
  }
  int j = vars[vi];
  budget.charge(static_cast<u64>(rg.hi[j] - rg.lo[j] + 1), "fiber scan");
  for (i64 v = rg.lo[j]; v <= rg.hi[j]; ++v) {
    x[j] = v;
    std::vector<GenPoly> sub(polys.size());
    for (std::size_t i = 0; i < polys.size(); ++i) {
      for (const auto& t : polys[i]) {
        Int c = t.c;
        for (int k = 0; k < t.e[j]; ++k) c *= v;
        if (c == 0) continue;
        GenTerm nt{std::move(c), t.e};
        nt.e[j] = 0;
        bool merged = false;
        for (auto& ex : sub[i])
          if (ex.e == nt.e) { ex.c += nt.c; merged = true; break; }
        if (!merged) sub[i].push_back(std::move(nt));
      }
      sub[i].erase(std::remove_if(sub[i].begin(), sub[i].end(),
                                  [](const GenTerm& t) { return t.c == 0; }),
                   sub[i].end());
    }
    enumerate_general_rec(std::move(sub), vars, vi + 1, rg, budget, x, fmask, sink);
  }
  x[j] = 0;
}

template <typename Sink>
void enumerate_general(const std::vector<GenPoly>& polys, int nx, const IntRanges& rg,
                       Budget& budget, Sink& sink) {
  if (rg.empty_range()) return;
  std::vector<char> active(nx, 0);
  for (const auto& p : polys)
    for (const auto& t : p)
      for (int j = 0; j < nx; ++j)
        if (t.e[j] > 0) active[j] = 1;
  std::vector<int> vars;
  std::vector<i64> x(nx, 0);
  std::vector<char> fmask(nx, 0);
  for (int j = 0; j < nx; ++j) {
    if (active[j]) vars.push_back(j);
    else fmask[j] = 1;
  }
  if (vars.empty()) {
    bool zero = true;
    for (const auto& p : polys)
      if (!p.empty()) { zero = false; break; }
    if (!zero) return;
    bool anyfree = false;
    for (char f : fmask) anyfree |= (f != 0);
    if (anyfree) sink.family(x, fmask);
    else sink.solution(x);
    return;
  }
  enumerate_general_rec(polys, vars, 0, rg, budget, x, fmask, sink);
}

}  // namespace detail

// Compiled per-system view for fast repeated specialization at integer y.
class FiberSpecializer {
 public:
  explicit FiberSpecializer(const FormSystem& sys) : sys_(sys) {
    nx_ = sys.n1();
    R_ = sys.R();
    dmax_ = sys.d1();
    diagonal_ = true;
    for (int i = 0; i < R_; ++i) {
      for (const auto& m : sys[i].terms()) {
        int var = -1, deg = 0;
        bool single = true;
        for (int j = 0; j < nx_; ++j) {
          if (m.xexp[j] == 0) continue;
          if (var >= 0) { single = false; break; }
          var = j;
          deg = m.xexp[j];
        }
        if (!single) diagonal_ = false;
        entries_.push_back(Entry{i, var, deg, m.coef, m.yexp});
      }
    }
  }

  bool diagonal() const { return diagonal_; }
  int nx() const { return nx_; }

  // Upper bound on |sum of specialized terms| for |y| <= m, |x| <= L.
  Int eval_bound(i64 m, i64 L) const {
    Int per_form_max = 0;
    std::vector<Int> acc(R_, 0);
    for (const auto& e : entries_) {
      Int t = abs(e.coef);
      int ydeg = 0;
      for (int k : e.yexp) ydeg += k;
      t *= ipow(Int(m < 1 ? 1 : m), static_cast<unsigned>(ydeg));
      t *= ipow(Int(L < 1 ? 1 : L), static_cast<unsigned>(e.deg));
      acc[e.form] += t;
    }
    for (const auto& a : acc) per_form_max = std::max(per_form_max, a);
    return per_form_max;
  }

  // Fills the dense diagonal view at y; requires diagonal().
  template <typename T, typename TY>
  void specialize_diag(const std::vector<TY>& y, detail::DiagSpec<T>& out) const {
    if (out.R != R_ || out.nx != nx_ || out.dmax != dmax_) out.reset(R_, nx_, dmax_);
    else out.clear_values();
    for (const auto& e : entries_) {
      T c;
      if constexpr (std::is_same_v<T, i64>) {
        i64 v = 1;
        for (std::size_t j = 0; j < e.yexp.size(); ++j)
          for (int k = 0; k < e.yexp[j]; ++k) v *= static_cast<i64>(y[j]);
        c = static_cast<i64>(e.coef) * v;
      } else {
        Int v = e.coef;
        for (std::size_t j = 0; j < e.yexp.size(); ++j)
          for (int k = 0; k < e.yexp[j]; ++k) v *= Int(y[j]);
        c = v;
      }
      if (e.var < 0) out.cst[e.form] += c;
      else {
        out.phi[e.form][e.var][e.deg] += c;
      }
    }
    for (int i = 0; i < R_; ++i)
      for (int j = 0; j < nx_; ++j)
        for (int k = 1; k <= dmax_; ++k)
          if (out.phi[i][j][k] != 0) { out.present[j] = 1; break; }
  }

  // Exact general specialization (used for non-diagonal systems).
  template <typename TY>
  std::vector<detail::GenPoly> specialize_general(const std::vector<TY>& y) const {
    std::vector<detail::GenPoly> polys(R_);
    for (int i = 0; i < R_; ++i) {
      for (const auto& m : sys_[i].terms()) {
        Int c = m.coef;
        for (std::size_t j = 0; j < m.yexp.size(); ++j)
          for (int k = 0; k < m.yexp[j]; ++k) c *= Int(y[j]);
        if (c == 0) continue;
        bool merged = false;
        for (auto& t : polys[i])
          if (t.e == m.xexp) { t.c += c; merged = true; break; }
        if (!merged) polys[i].push_back(detail::GenTerm{std::move(c), m.xexp});
      }
      polys[i].erase(std::remove_if(polys[i].begin(), polys[i].end(),
                                    [](const detail::GenTerm& t) { return t.c == 0; }),
                     polys[i].end());
    }
    return polys;
  }

 private:
  struct Entry {
    int form;
    int var;   // -1 when the monomial has no x part (d1 == 0)
    int deg;
    Int coef;
    std::vector<int> yexp;
  };
  FormSystem sys_;
  std::vector<Entry> entries_;
  int nx_, R_, dmax_;
  bool diagonal_;
};

}  // namespace bihom
