#pragma once

// Exact integer/rational arithmetic helpers shared across the library.

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace bihom {

using Int = boost::multiprecision::cpp_int;
using Rat = boost::multiprecision::cpp_rational;
using i64 = std::int64_t;
using u64 = std::uint64_t;

// Thrown when a task would exceed its step budget.  The CLI maps this to a
// dedicated exit code so batch drivers can tell "too big" from "wrong".
struct BudgetExceeded : std::runtime_error {
  explicit BudgetExceeded(const std::string& what) : std::runtime_error(what) {}
};

struct Budget {
  u64 limit = 1000000000;  // elementary steps
  std::atomic<u64> used{0};
  Budget() = default;
  explicit Budget(u64 lim) : limit(lim) {}
  void charge(u64 n, const char* what) {
    u64 total = used.fetch_add(n, std::memory_order_relaxed) + n;
    if (total > limit)
      throw BudgetExceeded(std::string(what) + ": step budget exceeded (" +
                           std::to_string(total) + " > " + std::to_string(limit) + ")");
  }
  u64 spent() const { return used.load(std::memory_order_relaxed); }
};

inline Int ipow(Int base, unsigned e) {
  Int r = 1;
  while (e) {
    if (e & 1) r *= base;
    base *= base;
    e >>= 1;
  }
  return r;
}

// Overflow-checked power on i64; throws instead of wrapping.
inline i64 ipow_i64(i64 base, unsigned e) {
  __int128 r = 1;
  for (unsigned i = 0; i < e; ++i) {
    r *= base;
    if (r > INT64_MAX || r < INT64_MIN) throw std::overflow_error("ipow_i64 overflow");
  }
  return static_cast<i64>(r);
}

// Overflow-checked multiply on i64; throws instead of wrapping.
inline i64 mul_i64_checked(i64 a, i64 b) {
  i64 r;
  if (__builtin_mul_overflow(a, b, &r)) throw std::overflow_error("mul_i64 overflow");
  return r;
}

inline u64 to_u64_saturating(const Int& v) {
  if (v <= 0) return 0;
  if (v > Int(UINT64_MAX)) return UINT64_MAX;
  return v.convert_to<u64>();
}

// Largest r >= 0 with r^n <= a (a >= 0, n >= 1).
inline Int iroot(const Int& a, unsigned n) {
  if (a < 0) throw std::invalid_argument("iroot: negative radicand");
  if (n == 0) throw std::invalid_argument("iroot: zeroth root");
  if (a == 0) return 0;
  if (n == 1) return a;
  Int lo = 0, hi = 1;
  while (ipow(hi, n) <= a) hi <<= 1;
  while (lo + 1 < hi) {
    Int mid = (lo + hi) >> 1;
    if (ipow(mid, n) <= a) lo = mid; else hi = mid;
  }
  return lo;
}

// Exact integer square root of a perfect square, or nullopt-like -1 signal.
// Returns s >= 0 with s*s == a, or -1 when a is not a perfect square.
inline i64 perfect_sqrt_i64(i64 a) {
  if (a < 0) return -1;
  i64 s = static_cast<i64>(std::sqrt(static_cast<double>(a)));
  while (s > 0 && s * s > a) --s;
  while ((s + 1) * (s + 1) <= a) ++s;
  return (s * s == a) ? s : -1;
}

inline i64 gcd_vec(const std::vector<i64>& v) {
  i64 g = 0;
  for (i64 t : v) g = std::gcd(g, t < 0 ? -t : t);
  return g;
}

// Moebius function table mu[0..n]; mu[0] unused.
inline std::vector<int> mobius_table(std::size_t n) {
  std::vector<int> mu(n + 1, 1);
  std::vector<char> sieved(n + 1, 0);
  std::vector<std::size_t> primes;
  if (n >= 1) mu[0] = 0;
  for (std::size_t i = 2; i <= n; ++i) {
    if (!sieved[i]) { primes.push_back(i); mu[i] = -1; }
    for (std::size_t p : primes) {
      if (i * p > n) break;
      sieved[i * p] = 1;
      if (i % p == 0) { mu[i * p] = 0; break; }
      mu[i * p] = -mu[i];
    }
  }
  return mu;
}

inline std::vector<i64> primes_upto(i64 n) {
  std::vector<char> comp(std::max<i64>(n + 1, 2), 0);
  std::vector<i64> ps;
  for (i64 i = 2; i <= n; ++i) {
    if (comp[i]) continue;
    ps.push_back(i);
    for (i64 j = i * i; j <= n; j += i) comp[j] = 1;
  }
  return ps;
}

inline std::vector<i64> divisors_of(i64 n) {
  std::vector<i64> ds;
  for (i64 d = 1; d * d <= n; ++d)
    if (n % d == 0) {
      ds.push_back(d);
      if (d != n / d) ds.push_back(n / d);
    }
  std::sort(ds.begin(), ds.end());
  return ds;
}

// Stable 64-bit content hash (FNV-1a); used to stamp output files so a CSV
// can be traced back to the exact configuration that produced it.
inline u64 fnv1a64(const std::string& s) {
  u64 h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(u64 h) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) { s[i] = digits[h & 0xf]; h >>= 4; }
  return s;
}

// Neumaier-compensated accumulator for long floating sums.
struct Kahan {
  double sum = 0.0, c = 0.0;
  void add(double v) {
    double t = sum + v;
    if (std::abs(sum) >= std::abs(v)) c += (sum - t) + v;
    else c += (v - t) + sum;
    sum = t;
  }
  double value() const { return sum + c; }
};

}  // namespace bihom
