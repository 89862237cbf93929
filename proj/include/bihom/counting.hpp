#pragma once

// Exact enumeration layer: box counts, fiber counts, the shell function
// h(l,m) (solutions with max-norms exactly l and m, both sides nonzero),
// height-ball sums Upsilon(P) = sum_{l^b1 m^b2 <= P} h(l,m), and the Moebius
// assembly that turns shell sums into counts of primitive point pairs modulo
// the sign group.
//
// Shell tables are built in two triangular passes: an outer loop over
// y-shells handles the cells with m^b2 <= l^b1, and the same routine run on
// the transposed system handles the strict complement.  This keeps the build
// near O(P^{3/2}) fiber-steps for bilinear surfaces instead of O(P^2).

#include "bihom/arith.hpp"
#include "bihom/fibers.hpp"
#include "bihom/forms.hpp"
#include "bihom/parallel.hpp"

#include <algorithm>
#include <array>
#include <cstdlib>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace bihom {

// ---------------------------------------------------------------------------
// rational helpers

inline Int rat_floor(const Rat& q) {
  Int num = numerator(q), den = denominator(q);  // den > 0
  Int t = num / den;                             // truncates toward zero
  if (num < 0 && t * den != num) --t;
  return t;
}

inline Int rat_ceil(const Rat& q) { return -rat_floor(-q); }

inline i64 to_i64_checked(const Int& v, const char* what) {
  if (v > Int(INT64_MAX) || v < Int(INT64_MIN))
    throw std::overflow_error(std::string(what) + ": value exceeds 64-bit range");
  return static_cast<i64>(v);
}

inline i64 add_i64_checked(i64 a, i64 b, const char* what) {
  i64 r;
  if (__builtin_add_overflow(a, b, &r))
    throw std::overflow_error(std::string(what) + ": 64-bit accumulator overflow");
  return r;
}

// ---------------------------------------------------------------------------
// boxes

struct Interval {
  Rat lo{-1}, hi{1};
};

// Per-coordinate closed rational intervals, scaled by P before intersecting
// with the integer lattice.  Default: [-1,1] in every coordinate.
struct BoxSpec {
  std::vector<Interval> x, y;

  BoxSpec() = default;
  BoxSpec(int n1, int n2) : x(n1), y(n2) {}

  static BoxSpec unit(int n1, int n2) { return BoxSpec(n1, n2); }

  void validate() const {
    for (const auto& iv : x)
      if (iv.lo > iv.hi) throw std::invalid_argument("box: x interval with lo > hi");
    for (const auto& iv : y)
      if (iv.lo > iv.hi) throw std::invalid_argument("box: y interval with lo > hi");
  }

  static IntRanges scale(const std::vector<Interval>& side, const Rat& P) {
    IntRanges r;
    r.lo.reserve(side.size());
    r.hi.reserve(side.size());
    for (const auto& iv : side) {
      r.lo.push_back(to_i64_checked(rat_ceil(iv.lo * P), "box lower bound"));
      r.hi.push_back(to_i64_checked(rat_floor(iv.hi * P), "box upper bound"));
    }
    return r;
  }
  IntRanges x_ranges(const Rat& P1) const { return scale(x, P1); }
  IntRanges y_ranges(const Rat& P2) const { return scale(y, P2); }
};

// ---------------------------------------------------------------------------
// exclusion predicates (one side each)

struct Predicate {
  using Fn = std::function<bool(const std::vector<i64>&)>;
  std::string id = "all";
  bool trivial = true;         // accepts every vector; fast path
  bool sign_invariant = true;  // pred(v) == pred(-v); enables shell halving
  Fn allow;

  bool operator()(const std::vector<i64>& v) const { return trivial || allow(v); }

  static Predicate all_points() { return Predicate{}; }

  // Allow vectors with fewer than lambda zero coordinates.
  static Predicate diagonal_zero_count(int lambda) {
    Predicate p;
    p.id = "diagonal_zero_count(" + std::to_string(lambda) + ")";
    p.trivial = false;
    p.allow = [lambda](const std::vector<i64>& v) {
      int zeros = 0;
      for (i64 c : v) zeros += (c == 0);
      return zeros < lambda;
    };
    return p;
  }

  static Predicate user_table(std::string id, Fn fn, bool sign_invariant = false) {
    Predicate p;
    p.id = std::move(id);
    p.trivial = false;
    p.sign_invariant = sign_invariant;
    p.allow = std::move(fn);
    return p;
  }
};

struct PredicatePair {
  Predicate on_y;  // judges y vectors
  Predicate on_x;  // judges x vectors
  static PredicatePair all_points() { return PredicatePair{}; }
  std::string id() const { return "y:" + on_y.id + "|x:" + on_x.id; }
};

// ---------------------------------------------------------------------------
// count tables (CSV-facing rows)

struct CountRow {
  Rat p1, p2;         // p2 unused when single_param
  bool single_param = false;
  Int count;
  double seconds = 0.0;
};

struct CountTable {
  std::string system_digest;
  std::string box_id;
  std::string predicate_id;
  std::vector<CountRow> rows;
};

inline std::string system_digest(const FormSystem& sys) {
  std::string all;
  for (int i = 0; i < sys.R(); ++i) all += sys[i].render() + ";";
  return hex64(fnv1a64(all));
}

// ---------------------------------------------------------------------------
// box and fiber counts

namespace detail {

struct BoxCountSink {
  const IntRanges* rg = nullptr;
  Int total = 0;
  void solution(const std::vector<i64>&) { ++total; }
  void family(const std::vector<i64>&, const std::vector<char>& fmask) {
    Int f = 1;
    for (std::size_t j = 0; j < fmask.size(); ++j)
      if (fmask[j]) f *= Int(rg->hi[j] - rg->lo[j] + 1);
    total += f;
  }
};

inline i64 ranges_abs_max(const IntRanges& rg) {
  i64 m = 0;
  for (int j = 0; j < rg.n(); ++j) {
    m = std::max(m, std::abs(rg.lo[j]));
    m = std::max(m, std::abs(rg.hi[j]));
  }
  return m;
}

constexpr i64 kI64KernelCutoff = i64(1) << 60;

// Counts solutions x of sys(.; y) = 0 with x in xrg.
inline Int solve_fiber(const FiberSpecializer& fs, const std::vector<i64>& y,
                       const IntRanges& xrg, bool use_i64, DiagSpec<i64>& sp64,
                       DiagSpec<Int>& spI, Budget& budget) {
  BoxCountSink sink;
  sink.rg = &xrg;
  if (fs.diagonal()) {
    if (use_i64) {
      fs.specialize_diag(y, sp64);
      enumerate_diag(sp64, xrg, budget, sink);
    } else {
      fs.specialize_diag(y, spI);
      enumerate_diag(spI, xrg, budget, sink);
    }
  } else {
    auto polys = fs.specialize_general(y);
    enumerate_general(polys, fs.nx(), xrg, budget, sink);
  }
  return sink.total;
}

// Mixed-radix decode of a flat index into a lattice point of rg.
inline void decode_point(u64 idx, const IntRanges& rg, std::vector<i64>& out) {
  out.resize(rg.n());
  for (int j = rg.n() - 1; j >= 0; --j) {
    u64 w = static_cast<u64>(rg.hi[j] - rg.lo[j] + 1);
    out[j] = rg.lo[j] + static_cast<i64>(idx % w);
    idx /= w;
  }
}

}  // namespace detail

// N_y(P1): solutions x in the scaled x-box with F_i(x; y) = 0 for all i.
inline Int count_fiber(const FormSystem& sys, const std::vector<i64>& y,
                       const Rat& P1, const BoxSpec& box, Budget& budget) {
  if (static_cast<int>(y.size()) != sys.n2())
    throw std::invalid_argument("count_fiber: y has wrong length");
  box.validate();
  if (P1 < 0) return 0;
  IntRanges xrg = box.x_ranges(P1);
  if (xrg.empty_range()) return 0;
  FiberSpecializer fs(sys);
  i64 ymax = 0;
  for (i64 c : y) ymax = std::max(ymax, std::abs(c));
  bool use_i64 = fs.eval_bound(ymax, detail::ranges_abs_max(xrg)) <= detail::kI64KernelCutoff;
  detail::DiagSpec<i64> sp64;
  detail::DiagSpec<Int> spI;
  return detail::solve_fiber(fs, y, xrg, use_i64, sp64, spI, budget);
}

// N'(P1,P2): pairs (x,y) in the scaled boxes solving the system.  The outer
// loop runs over the smaller side by lattice cardinality; the other side is
// enumerated by the pivot-solving fiber kernel.
inline Int count_box(const FormSystem& sys, const Rat& P1, const Rat& P2,
                     const BoxSpec& box, Budget& budget,
                     int workers = default_workers()) {
  box.validate();
  if (P1 < 0 || P2 < 0) return 0;
  IntRanges xrg = box.x_ranges(P1);
  IntRanges yrg = box.y_ranges(P2);
  if (xrg.empty_range() || yrg.empty_range()) return 0;

  bool outer_is_y = yrg.cardinality() <= xrg.cardinality();
  const FormSystem work = outer_is_y ? sys : sys.transpose();
  const IntRanges outer = outer_is_y ? yrg : xrg;
  const IntRanges inner = outer_is_y ? xrg : yrg;

  FiberSpecializer fs(work);
  bool use_i64 = fs.eval_bound(detail::ranges_abs_max(outer),
                               detail::ranges_abs_max(inner)) <= detail::kI64KernelCutoff;
  u64 card = outer.cardinality();
  budget.charge(card, "count_box outer loop");

  return chunked_reduce_range(
      static_cast<std::size_t>(card), workers, Int(0),
      [&](std::size_t lo, std::size_t hi, Int& acc) {
        detail::DiagSpec<i64> sp64;
        detail::DiagSpec<Int> spI;
        std::vector<i64> yv;
        for (std::size_t idx = lo; idx < hi; ++idx) {
          detail::decode_point(static_cast<u64>(idx), outer, yv);
          acc += detail::solve_fiber(fs, yv, inner, use_i64, sp64, spI, budget);
        }
      },
      [](Int& a, const Int& b) { a += b; }, 1024);
}

// ---------------------------------------------------------------------------
// shell functions

struct ShellEntry {
  i64 l, m;
  i64 key;  // l^b1 * m^b2
  i64 h;
};

// Arithmetical function h(l,m) with integral height exponents b1, b2 and the
// height-ball sum Upsilon(Q) = sum over key <= Q.
class ShellFn {
 public:
  virtual ~ShellFn() = default;
  virtual int beta1() const = 0;
  virtual int beta2() const = 0;
  virtual i64 value(i64 l, i64 m) const = 0;
  virtual std::vector<ShellEntry> entries(const Int& Q) const = 0;

  // Hint that many point queries with key <= Q follow; memoized
  // implementations build their tables once here.  Default: no-op.
  virtual void prepare(const Int& /*Q*/) const {}

  virtual Int upsilon_int(const Int& Q) const {
    Int s = 0;
    for (const auto& e : entries(Q)) s += e.h;
    return s;
  }
  Int upsilon(const Rat& Q) const { return upsilon_int(rat_floor(Q)); }
};

namespace detail {

inline i64 shell_key(i64 l, i64 m, int b1, int b2) {
  return ipow_i64(l, static_cast<unsigned>(b1)) * ipow_i64(m, static_cast<unsigned>(b2));
}

// Largest t >= 0 with t^e <= Q (Q >= 0).
inline i64 int_root_i64(const Int& Q, int e) {
  if (Q < 1) return 0;
  return to_i64_checked(iroot(Q, static_cast<unsigned>(e)), "integer root");
}

}  // namespace detail

// h identically 1 on all shells (the divisor-problem model).
class UnitShell : public ShellFn {
 public:
  UnitShell(int b1, int b2) : b1_(b1), b2_(b2) {
    if (b1 < 1 || b2 < 1) throw std::invalid_argument("UnitShell: exponents must be >= 1");
  }
  int beta1() const override { return b1_; }
  int beta2() const override { return b2_; }
  i64 value(i64 l, i64 m) const override { return (l >= 1 && m >= 1) ? 1 : 0; }
  std::vector<ShellEntry> entries(const Int& Q) const override {
    std::vector<ShellEntry> out;
    i64 lmax = detail::int_root_i64(Q, b1_);
    for (i64 l = 1; l <= lmax; ++l) {
      Int rem = Q / ipow(Int(l), static_cast<unsigned>(b1_));
      i64 mmax = detail::int_root_i64(rem, b2_);
      for (i64 m = 1; m <= mmax; ++m)
        out.push_back(ShellEntry{l, m, detail::shell_key(l, m, b1_, b2_), 1});
    }
    std::sort(out.begin(), out.end(), [](const ShellEntry& a, const ShellEntry& b) {
      return std::tie(a.key, a.l, a.m) < std::tie(b.key, b.l, b.m);
    });
    return out;
  }
  Int upsilon_int(const Int& Q) const override {
    Int s = 0;
    i64 lmax = detail::int_root_i64(Q, b1_);
    for (i64 l = 1; l <= lmax; ++l)
      s += Int(detail::int_root_i64(Q / ipow(Int(l), static_cast<unsigned>(b1_)), b2_));
    return s;
  }

 private:
  int b1_, b2_;
};

// Explicit finite table of shell values; zero elsewhere.  For synthetic tests.
class MapShell : public ShellFn {
 public:
  MapShell(int b1, int b2, std::map<std::pair<i64, i64>, i64> values)
      : b1_(b1), b2_(b2), values_(std::move(values)) {
    for (const auto& [lm, v] : values_)
      if (lm.first < 1 || lm.second < 1 || v < 0)
        throw std::invalid_argument("MapShell: shells must have l,m >= 1 and h >= 0");
  }
  int beta1() const override { return b1_; }
  int beta2() const override { return b2_; }
  i64 value(i64 l, i64 m) const override {
    auto it = values_.find({l, m});
    return it == values_.end() ? 0 : it->second;
  }
  std::vector<ShellEntry> entries(const Int& Q) const override {
    std::vector<ShellEntry> out;
    for (const auto& [lm, v] : values_) {
      i64 key = detail::shell_key(lm.first, lm.second, b1_, b2_);
      if (Int(key) <= Q) out.push_back(ShellEntry{lm.first, lm.second, key, v});
    }
    std::sort(out.begin(), out.end(), [](const ShellEntry& a, const ShellEntry& b) {
      return std::tie(a.key, a.l, a.m) < std::tie(b.key, b.l, b.m);
    });
    return out;
  }

 private:
  int b1_, b2_;
  std::map<std::pair<i64, i64>, i64> values_;
};

// ---------------------------------------------------------------------------
// shell table built from a system

namespace detail {

// Visits every y in Z^n with max-norm exactly m.  When halved, only the
// representative with positive designated-max coordinate is visited (callers
// double the contribution; valid when everything downstream is even in y).
template <typename Fn>
void for_each_shell_vector(int n, i64 m, bool halved, Fn&& fn) {
  std::vector<i64> y(n, 0);
  // Partition the shell by the first coordinate j attaining the max: coords
  // before j lie in [-(m-1), m-1], coord j is +-m, coords after in [-m, m].
  // Negation fixes j, so visiting only y_j = +m covers one of {y, -y} each.
  for (int j = 0; j < n; ++j) {
    std::function<void(int)> rec = [&](int k) {
      if (k == n) { fn(y); return; }
      if (k == j) {
        if (!halved) { y[k] = -m; rec(k + 1); }
        y[k] = m;
        rec(k + 1);
        return;
      }
      i64 b = (k < j) ? m - 1 : m;
      for (i64 v = -b; v <= b; ++v) { y[k] = v; rec(k + 1); }
    };
    rec(0);
  }
}

struct ShellCell {
  i64 l, m;
  i64 h = 0;
  i64 hpp = 0;  // both-primitive count
};

// Accumulates fiber solutions into per-shell rows for one outer shell m.
struct ShellRowSink {
  i64 l_lo = 1, l_hi = 0;
  bool y_primitive = false;
  int weight = 1;  // 2 when the y-shell is halved
  const Predicate* pred_x = nullptr;
  const std::vector<int>* mobius = nullptr;  // table up to l_hi
  std::vector<i64>* hrow = nullptr;          // indexed by l, size l_hi+1
  std::vector<i64>* pprow = nullptr;
  Budget* budget = nullptr;

  void solution(const std::vector<i64>& x) {
    i64 l = 0;
    for (i64 c : x) l = std::max(l, std::abs(c));
    if (l < l_lo || l > l_hi) return;
    if (!(*pred_x)(x)) return;
    (*hrow)[l] = add_i64_checked((*hrow)[l], weight, "shell count");
    if (y_primitive && gcd_vec(x) == 1)
      (*pprow)[l] = add_i64_checked((*pprow)[l], weight, "shell count");
  }

  void family(const std::vector<i64>& x, const std::vector<char>& fmask) {
    int k = 0;
    for (char f : fmask) k += (f != 0);
    if (k == 0) { solution(x); return; }
    if (!pred_x->trivial) { expand_family(x, fmask); return; }

    i64 a = 0;   // max |fixed coordinate|
    i64 g0 = 0;  // gcd of the fixed part
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (fmask[j]) continue;
      a = std::max(a, std::abs(x[j]));
      g0 = std::gcd(g0, std::abs(x[j]));
    }
    // overall max = a: free coords all within [-a, a]
    if (a >= l_lo && a <= l_hi)
      (*hrow)[a] = add_i64_checked(
          (*hrow)[a], mul_i64_checked(weight, ipow_i64(2 * a + 1, static_cast<unsigned>(k))),
          "shell count");
    // overall max = l > a: count (2l+1)^k - (2l-1)^k assignments
    for (i64 l = std::max(l_lo, a + 1); l <= l_hi; ++l) {
      i64 c = ipow_i64(2 * l + 1, static_cast<unsigned>(k)) -
              ipow_i64(2 * l - 1, static_cast<unsigned>(k));
      (*hrow)[l] = add_i64_checked((*hrow)[l], mul_i64_checked(weight, c), "shell count");
    }
    if (!y_primitive) return;

    // primitive-x counts via Moebius over the common divisor
    auto boxed = [&](i64 l, i64 d) {  // #{t in (dZ)^k : |t| <= l}
      return ipow_i64(2 * (l / d) + 1, static_cast<unsigned>(k));
    };
    if (g0 > 0) {
      for (i64 d : divisors_of(g0)) {
        int mu = (*mobius)[static_cast<std::size_t>(d)];
        if (mu == 0) continue;
        if (a >= l_lo && a <= l_hi)
          (*pprow)[a] = add_i64_checked(
              (*pprow)[a], mul_i64_checked(weight * mu, boxed(a, d)), "shell count");
        for (i64 l = std::max(l_lo, a + 1); l <= l_hi; ++l)
          (*pprow)[l] = add_i64_checked(
              (*pprow)[l], mul_i64_checked(weight * mu, boxed(l, d) - boxed(l - 1, d)),
              "shell count");
      }
    } else if (k == 1) {
      // gcd(x) = |t|: primitive only on shell l = 1 (t = +-1)
      if (l_lo <= 1 && 1 <= l_hi)
        (*pprow)[1] = add_i64_checked((*pprow)[1], weight * 2, "shell count");
    } else {
      // gcd(x) = gcd(t); per-shell primitive count is a divisor sum
      budget->charge(static_cast<u64>(l_hi - std::max<i64>(l_lo, 1) + 1), "primitive family");
      for (i64 l = std::max<i64>(l_lo, 1); l <= l_hi; ++l) {
        i64 c = 0;
        for (i64 d : divisors_of(l)) {
          int mu = (*mobius)[static_cast<std::size_t>(d)];
          if (mu == 0) continue;
          c = add_i64_checked(c, mu * (boxed(l, d) - boxed(l - 1, d)), "shell count");
        }
        (*pprow)[l] = add_i64_checked((*pprow)[l], mul_i64_checked(weight, c), "shell count");
      }
    }
  }

 private:
  void expand_family(const std::vector<i64>& x, const std::vector<char>& fmask) {
    std::vector<int> free_idx;
    for (std::size_t j = 0; j < fmask.size(); ++j)
      if (fmask[j]) free_idx.push_back(static_cast<int>(j));
    u64 width = static_cast<u64>(2 * l_hi + 1), steps = 1;
    for (std::size_t i = 0; i < free_idx.size(); ++i)
      steps = (steps > UINT64_MAX / width) ? UINT64_MAX : steps * width;
    budget->charge(steps, "family expansion");
    std::vector<i64> v = x;
    std::function<void(std::size_t)> rec = [&](std::size_t i) {
      if (i == free_idx.size()) { solution(v); return; }
      for (i64 t = -l_hi; t <= l_hi; ++t) {
        v[free_idx[i]] = t;
        rec(i + 1);
      }
    };
    rec(0);
  }
};

}  // namespace detail

// Memoized shell function of a form system over the full lattice, with
// per-side exclusion predicates.  Exposes both the unrestricted shell count
// h(l,m) and the both-sides-primitive variant used for projective counts.
class ShellTable : public ShellFn {
 public:
  ShellTable(FormSystem sys, PredicatePair preds, Budget* budget,
             int workers = default_workers())
      : sys_(std::move(sys)), preds_(std::move(preds)), budget_(budget), workers_(workers) {
    b1_ = sys_.n1() - sys_.R() * sys_.d1();
    b2_ = sys_.n2() - sys_.R() * sys_.d2();
    if (b1_ < 1 || b2_ < 1)
      throw std::invalid_argument(
          "height undefined: requires n_i > R d_i on both sides (got beta1=" +
          std::to_string(b1_) + ", beta2=" + std::to_string(b2_) + ")");
  }

  int beta1() const override { return b1_; }
  int beta2() const override { return b2_; }
  const FormSystem& system() const { return sys_; }

  // Builds every shell cell with key l^b1 m^b2 <= P.
  void ensure(const Int& P) {
    std::lock_guard<std::mutex> lock(mu_);
    ensure_locked(P);
  }

  void prepare(const Int& Q) const override {
    std::lock_guard<std::mutex> lock(mu_);
    ensure_locked(Q);
  }

  i64 value(i64 l, i64 m) const override {
    if (l < 1 || m < 1) return 0;
    std::lock_guard<std::mutex> lock(mu_);
    Int key = ipow(Int(l), static_cast<unsigned>(b1_)) * ipow(Int(m), static_cast<unsigned>(b2_));
    ensure_locked(key);
    return lookup(l, m).first;
  }

  i64 value_primitive(i64 l, i64 m) const {
    if (l < 1 || m < 1) return 0;
    std::lock_guard<std::mutex> lock(mu_);
    Int key = ipow(Int(l), static_cast<unsigned>(b1_)) * ipow(Int(m), static_cast<unsigned>(b2_));
    ensure_locked(key);
    return lookup(l, m).second;
  }

  std::vector<ShellEntry> entries(const Int& Q) const override {
    std::lock_guard<std::mutex> lock(mu_);
    ensure_locked(Q);
    std::vector<ShellEntry> out;
    for (const auto& c : cells_) {
      i64 key = detail::shell_key(c.l, c.m, b1_, b2_);
      if (Int(key) > Q) break;
      out.push_back(ShellEntry{c.l, c.m, key, c.h});
    }
    return out;
  }

  Int upsilon_int(const Int& Q) const override { return prefix_at(Q, /*primitive=*/false); }
  Int upsilon_primitive(const Int& Q) const { return prefix_at(Q, /*primitive=*/true); }

 private:
  std::pair<i64, i64> lookup(i64 l, i64 m) const {
    i64 key = detail::shell_key(l, m, b1_, b2_);
    auto it = std::lower_bound(cells_.begin(), cells_.end(), std::make_tuple(key, l, m),
                               [&](const detail::ShellCell& c, const std::tuple<i64, i64, i64>& t) {
                                 return std::make_tuple(detail::shell_key(c.l, c.m, b1_, b2_),
                                                        c.l, c.m) < t;
                               });
    if (it == cells_.end() || it->l != l || it->m != m) return {0, 0};
    return {it->h, it->hpp};
  }

  Int prefix_at(const Int& Q, bool primitive) const {
    std::lock_guard<std::mutex> lock(mu_);
    ensure_locked(Q);
    if (Q < 1 || keys_.empty()) return 0;
    i64 q = (Q > Int(INT64_MAX)) ? INT64_MAX : static_cast<i64>(Q);
    auto it = std::upper_bound(keys_.begin(), keys_.end(), q);
    std::size_t idx = static_cast<std::size_t>(it - keys_.begin());
    if (idx == 0) return 0;
    return Int(primitive ? prefix_pp_[idx - 1] : prefix_h_[idx - 1]);
  }

  void ensure_locked(const Int& P) const {
    if (P <= built_P_) return;
    // Grow geometrically: value() probes just past the built range (e.g. the
    // frozen-endpoint slice bounds) must not trigger a from-scratch rebuild
    // per probe.
    Int target = P;
    if (built_P_ > 0 && target < built_P_ * 2) target = built_P_ * 2;
    build_to(target);
  }

  void build_to(const Int& P) const {
    cells_.clear();
    // pass 1: cells with m^b2 <= l^b1; pass 2 on the transposed system
    // covers the strict complement
    build_pass(sys_, preds_.on_y, preds_.on_x, b1_, b2_, P, /*strict=*/false, /*swapped=*/false);
    build_pass(sys_.transpose(), preds_.on_x, preds_.on_y, b2_, b1_, P, /*strict=*/true,
               /*swapped=*/true);
    std::sort(cells_.begin(), cells_.end(),
              [&](const detail::ShellCell& a, const detail::ShellCell& b) {
                return std::make_tuple(detail::shell_key(a.l, a.m, b1_, b2_), a.l, a.m) <
                       std::make_tuple(detail::shell_key(b.l, b.m, b1_, b2_), b.l, b.m);
              });
    keys_.resize(cells_.size());
    prefix_h_.resize(cells_.size());
    prefix_pp_.resize(cells_.size());
    i64 ah = 0, app = 0;
    for (std::size_t i = 0; i < cells_.size(); ++i) {
      keys_[i] = detail::shell_key(cells_[i].l, cells_[i].m, b1_, b2_);
      ah = add_i64_checked(ah, cells_[i].h, "shell prefix");
      app = add_i64_checked(app, cells_[i].hpp, "shell prefix");
      prefix_h_[i] = ah;
      prefix_pp_[i] = app;
    }
    built_P_ = P;
  }

  // One triangular pass on `work`: outer shells are the y-side of `work`.
  // Keeps cells with m^bb <= l^ba (strict: <).  When swapped, emitted cells
  // are transposed back into the original orientation.
  void build_pass(const FormSystem& work, const Predicate& pred_outer,
                  const Predicate& pred_inner, int ba, int bb, const Int& P,
                  bool strict, bool swapped) const {
    // outer shell range: need l_lo(m) <= l_hi(m)
    std::vector<std::array<i64, 3>> mrange;  // (m, l_lo, l_hi)
    for (i64 m = 1;; ++m) {
      Int mb = ipow(Int(m), static_cast<unsigned>(bb));
      if (mb > P) break;
      i64 r = detail::int_root_i64(mb, ba);  // largest r with r^ba <= m^bb
      i64 l_lo = (!strict && ipow(Int(r), static_cast<unsigned>(ba)) == mb) ? r : r + 1;
      i64 l_hi = detail::int_root_i64(P / mb, ba);
      if (l_lo > l_hi) break;
      mrange.push_back({m, l_lo, l_hi});
    }
    if (mrange.empty()) return;

    FiberSpecializer fs(work);
    bool halved = pred_outer.sign_invariant;
    const int n2w = work.n2();

    auto mob_max = mrange.front()[2];  // largest l_hi (m = 1)
    std::vector<int> mobius = mobius_table(static_cast<std::size_t>(mob_max) + 1);

    auto result = chunked_reduce_range(
        mrange.size(), workers_, std::vector<detail::ShellCell>{},
        [&](std::size_t lo, std::size_t hi, std::vector<detail::ShellCell>& acc) {
          detail::DiagSpec<i64> sp64;
          detail::DiagSpec<Int> spI;
          for (std::size_t mi = lo; mi < hi; ++mi) {
            auto [m, l_lo, l_hi] = mrange[mi];
            u64 shell_size = to_u64_saturating(ipow(Int(2 * m + 1), static_cast<unsigned>(n2w)) -
                                               ipow(Int(2 * m - 1), static_cast<unsigned>(n2w)));
            budget_->charge(halved ? shell_size / 2 : shell_size, "shell outer loop");
            bool use_i64 = fs.eval_bound(m, l_hi) <= detail::kI64KernelCutoff;
            IntRanges xrg = IntRanges::symmetric(work.n1(), l_hi);
            std::vector<i64> hrow(static_cast<std::size_t>(l_hi) + 1, 0);
            std::vector<i64> pprow(static_cast<std::size_t>(l_hi) + 1, 0);
            detail::ShellRowSink sink;
            sink.l_lo = l_lo;
            sink.l_hi = l_hi;
            sink.weight = halved ? 2 : 1;
            sink.pred_x = &pred_inner;
            sink.mobius = &mobius;
            sink.hrow = &hrow;
            sink.pprow = &pprow;
            sink.budget = budget_;
            detail::for_each_shell_vector(n2w, m, halved, [&](const std::vector<i64>& yv) {
              if (!pred_outer(yv)) return;
              sink.y_primitive = (gcd_vec(yv) == 1);
              if (fs.diagonal()) {
                if (use_i64) {
                  fs.specialize_diag(yv, sp64);
                  enumerate_diag(sp64, xrg, *budget_, sink);
                } else {
                  fs.specialize_diag(yv, spI);
                  enumerate_diag(spI, xrg, *budget_, sink);
                }
              } else {
                auto polys = fs.specialize_general(yv);
                enumerate_general(polys, fs.nx(), xrg, *budget_, sink);
              }
            });
            for (i64 l = l_lo; l <= l_hi; ++l) {
              if (hrow[static_cast<std::size_t>(l)] == 0 &&
                  pprow[static_cast<std::size_t>(l)] == 0)
                continue;
              detail::ShellCell c;
              c.l = swapped ? m : l;
              c.m = swapped ? l : m;
              c.h = hrow[static_cast<std::size_t>(l)];
              c.hpp = pprow[static_cast<std::size_t>(l)];
              acc.push_back(c);
            }
          }
        },
        [](std::vector<detail::ShellCell>& a, const std::vector<detail::ShellCell>& b) {
          a.insert(a.end(), b.begin(), b.end());
        },
        1);
    cells_.insert(cells_.end(), result.begin(), result.end());
  }

  FormSystem sys_;
  PredicatePair preds_;
  Budget* budget_;
  int workers_;
  int b1_, b2_;
  mutable std::mutex mu_;
  mutable Int built_P_ = 0;
  mutable std::vector<detail::ShellCell> cells_;
  mutable std::vector<i64> keys_, prefix_h_, prefix_pp_;
};

// ---------------------------------------------------------------------------
// Upsilon variants and Moebius assembly

// Exact Upsilon_h(P): integral height exponents carried by the shell object.
inline Int upsilon_direct(const ShellFn& h, const Rat& P) { return h.upsilon(P); }

struct UpsilonFloat {
  double value = 0.0;
  bool approximate = true;
};

// Floating-point Upsilon with real exponents; flagged approximate.  The shell
// values are read through ShellFn::value, so tables should be pre-built.
inline UpsilonFloat upsilon_float(const ShellFn& h, double b1, double b2, double P) {
  if (b1 <= 0 || b2 <= 0) throw std::invalid_argument("upsilon_float: exponents must be > 0");
  Kahan acc;
  for (i64 l = 1; std::pow(static_cast<double>(l), b1) <= P; ++l) {
    double rem = P / std::pow(static_cast<double>(l), b1);
    for (i64 m = 1; std::pow(static_cast<double>(m), b2) <= rem; ++m)
      acc.add(static_cast<double>(h.value(l, m)));
  }
  return UpsilonFloat{acc.value(), true};
}

// (1/4) sum_{e1^b1 e2^b2 <= P} mu(e1) mu(e2) Upsilon_h(P / (e1^b1 e2^b2)).
// The inner height constraint is cleared of denominators, so every Upsilon
// argument is the exact integer floor and the identity with the direct
// primitive count is an integer identity.
inline Rat moebius_assembly(const ShellFn& h, const Rat& P) {
  Int Pf = rat_floor(P);
  if (Pf < 1) return 0;
  int b1 = h.beta1(), b2 = h.beta2();
  i64 e1max = detail::int_root_i64(Pf, b1);
  i64 e2max = detail::int_root_i64(Pf, b2);
  std::vector<int> mu1 = mobius_table(static_cast<std::size_t>(e1max) + 1);
  std::vector<int> mu2 = mobius_table(static_cast<std::size_t>(e2max) + 1);
  Int total = 0;
  for (i64 e1 = 1; e1 <= e1max; ++e1) {
    if (mu1[static_cast<std::size_t>(e1)] == 0) continue;
    Int E1 = ipow(Int(e1), static_cast<unsigned>(b1));
    Int rem = Pf / E1;
    i64 cap = detail::int_root_i64(rem, b2);
    for (i64 e2 = 1; e2 <= cap; ++e2) {
      if (mu2[static_cast<std::size_t>(e2)] == 0) continue;
      Int E = E1 * ipow(Int(e2), static_cast<unsigned>(b2));
      int mu = mu1[static_cast<std::size_t>(e1)] * mu2[static_cast<std::size_t>(e2)];
      total += Int(mu) * h.upsilon_int(Pf / E);
    }
  }
  return Rat(total) / 4;
}

// N_{U,H}(P): point pairs with both vectors primitive, counted modulo the
// sign group (+-x, +-y), with height (max|x|)^b1 (max|y|)^b2 <= P.
inline Int count_projective(ShellTable& table, const Rat& P) {
  Int Pf = rat_floor(P);
  if (Pf < 1) return 0;
  Int raw = table.upsilon_primitive(Pf);
  if (raw % 4 != 0)
    throw std::logic_error("count_projective: primitive shell sum not divisible by 4 "
                           "(predicates must be sign-invariant)");
  return raw / 4;
}

inline Int count_projective(const FormSystem& sys, const Rat& P, const PredicatePair& preds,
                            Budget& budget, int workers = default_workers()) {
  ShellTable table(sys, preds, &budget, workers);
  return count_projective(table, P);
}

}  // namespace bihom
