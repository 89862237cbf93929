#include "bihom/expsums.hpp"

#include <catch2/catch_amalgamated.hpp>

#include "bihom/densities.hpp"
#include "bihom/parser.hpp"

#include <cmath>
#include <complex>
#include <functional>
#include <vector>

using namespace bihom;

namespace {

FormSystem sys_of(std::vector<std::string> texts, int n1, int n2) {
  return parse_system(texts, n1, n2);
}

bool close(std::complex<double> a, std::complex<double> b, double tol = 1e-10) {
  return std::abs(a - b) <= tol;
}

}  // namespace

TEST_CASE("arc point validation") {
  auto pt = ArcPoint::rational({1}, 2);
  CHECK(pt.alpha == std::vector<double>{0.5});
  CHECK(pt.has_rational);
  CHECK_NOTHROW(ArcPoint::rational({1, 3}, 4).validate(2));
  // beta shifts wrap into [0,1)
  auto wrapped = ArcPoint::rational({1}, 2, {0.75});
  CHECK(wrapped.alpha[0] == Catch::Approx(0.25));
  CHECK_THROWS_AS(ArcPoint::rational({2}, 4), std::invalid_argument);  // gcd 2
  CHECK_THROWS_AS(ArcPoint::rational({5}, 4), std::invalid_argument);  // out of range
  ArcPoint bad;
  bad.alpha = {1.0};
  CHECK_THROWS_AS(bad.validate(1), std::invalid_argument);
}

TEST_CASE("lattice exponential sums") {
  Budget budget;
  auto toy = sys_of({"x1*y1"}, 1, 1);
  auto bilinear22 = sys_of({"x1*y1 - x2*y2"}, 2, 2);

  SECTION("zero phase counts lattice points") {
    CHECK(close(weyl_sum(toy, {1}, Rat(3), {0.0}, budget), {7.0, 0.0}));
    CHECK(close(weyl_sum(bilinear22, {1, 2}, Rat(2), {0.0}, budget), {25.0, 0.0}));
  }

  SECTION("three-point sum at half phase") {
    CHECK(close(weyl_sum(toy, {1}, Rat(1), {0.5}, budget), {-1.0, 0.0}, 1e-12));
  }

  SECTION("conjugate symmetry") {
    auto plus = weyl_sum(bilinear22, {1, 2}, Rat(5), {0.3}, budget);
    auto minus = weyl_sum(bilinear22, {1, 2}, Rat(5), {-0.3}, budget);
    CHECK(close(minus, std::conj(plus), 1e-10));
  }

  SECTION("magnitude bounded by the point count") {
    auto v = weyl_sum(bilinear22, {2, 1}, Rat(6), {0.37}, budget);
    CHECK(std::abs(v) <= 169.0 + 1e-9);
  }

  SECTION("worker-count independent") {
    auto a = weyl_sum(bilinear22, {1, 2}, Rat(20), {0.123}, budget, nullptr, 1);
    auto b = weyl_sum(bilinear22, {1, 2}, Rat(20), {0.123}, budget, nullptr, 3);
    CHECK(a.real() == b.real());
    CHECK(a.imag() == b.imag());
  }

  SECTION("argument checks") {
    CHECK_THROWS_AS(weyl_sum(toy, {1, 2}, Rat(1), {0.0}, budget), std::invalid_argument);
    CHECK_THROWS_AS(weyl_sum(toy, {1}, Rat(1), {0.0, 0.1}, budget), std::invalid_argument);
  }
}

TEST_CASE("complete sums mod q") {
  Budget budget;
  auto toy = sys_of({"x1*y1"}, 1, 1);
  auto bilinear22 = sys_of({"x1*y1 - x2*y2"}, 2, 2);
  auto quad = sys_of({"x1^2*y1 + x2^2*y2 - x3^2*y1 - x3^2*y2"}, 3, 2);

  SECTION("frozen values") {
    CHECK(close(complete_sum(toy, {1}, 1, {0}, budget), {1.0, 0.0}, 1e-14));
    CHECK(close(complete_sum(toy, {1}, 2, {1}, budget), {0.0, 0.0}, 1e-14));
    CHECK(complete_sum_multiplicities(toy, {1}, 2, {1}, budget) == std::vector<i64>{1, 1});
    // Gauss-sum fiber: x1^2+x2^2-2x3^2 mod 3 gives (i sqrt 3)^3
    CHECK(close(complete_sum(quad, {1, 1}, 3, {1}, budget),
                {0.0, -3.0 * std::sqrt(3.0) * std::sqrt(3.0) * std::sqrt(3.0) / 3.0}, 1e-9));
    CHECK(close(complete_sum(quad, {1, 1}, 3, {1}, budget), {0.0, -5.196152422706632}, 1e-9));
  }

  SECTION("conjugate numerator symmetry") {
    auto a = complete_sum(bilinear22, {1, 3}, 5, {2}, budget);
    auto b = complete_sum(bilinear22, {1, 3}, 5, {3}, budget);
    CHECK(close(b, std::conj(a), 1e-12));
  }

  SECTION("box tiling reduces the lattice sum to the complete sum") {
    // [-4,4] covers each residue class mod 3 exactly three times per axis
    auto w = weyl_sum(quad, {1, 1}, Rat(4), {1.0 / 3.0}, budget);
    auto s = complete_sum(quad, {1, 1}, 3, {1}, budget);
    CHECK(close(w, 27.0 * s, 1e-9));
  }

  SECTION("argument checks") {
    CHECK_THROWS_AS(complete_sum(toy, {1}, 0, {0}, budget), std::invalid_argument);
    CHECK_THROWS_AS(complete_sum(toy, {1}, 2, {1, 1}, budget), std::invalid_argument);
  }
}

TEST_CASE("cyclotomic polynomials and exact root-of-unity identities") {
  CHECK(cyclotomic_poly(1) == std::vector<Int>{-1, 1});
  CHECK(cyclotomic_poly(2) == std::vector<Int>{1, 1});
  CHECK(cyclotomic_poly(4) == std::vector<Int>{1, 0, 1});
  CHECK(cyclotomic_poly(6) == std::vector<Int>{1, -1, 1});
  CHECK(cyclotomic_poly(12) == std::vector<Int>{1, 0, -1, 0, 1});

  // 3 + zeta_2 = 2 exactly; 2 + zeta_2 != 0
  CHECK(root_sum_equals_integer({3, 1}, 2, Int(2)));
  CHECK_FALSE(root_sum_equals_integer({2, 1}, 2, Int(0)));
  // 1 + zeta_4 + zeta_4^2 + zeta_4^3 = 0
  CHECK(root_sum_equals_integer({1, 1, 1, 1}, 4, Int(0)));
  CHECK_FALSE(root_sum_equals_integer({1, 2, 1, 1}, 4, Int(0)));
}

TEST_CASE("character orthogonality is exact") {
  Budget budget;
  struct Case {
    FormSystem sys;
    std::vector<i64> y;
    i64 qmax;
  };
  std::vector<Case> cases;
  cases.push_back({sys_of({"x1*y1"}, 1, 1), {5}, 30});
  cases.push_back({sys_of({"x1*y1 - x2*y2"}, 2, 2), {1, 2}, 15});
  cases.push_back({sys_of({"x1^2*y1 + x2^2*y2 - x3^2*y1 - x3^2*y2"}, 3, 2), {1, 1}, 8});
  cases.push_back({sys_of({"x1*y1 - x2*y2", "x3*y2 - x4*y3"}, 4, 3), {1, 1, 1}, 5});

  for (const auto& c : cases) {
    const int R = c.sys.R();
    for (i64 q = 1; q <= c.qmax; ++q) {
      // sum multiplicity vectors over every numerator tuple a mod q
      std::vector<i64> total(static_cast<std::size_t>(q), 0);
      std::vector<i64> a(R, 0);
      std::function<void(int)> loop = [&](int i) {
        if (i == R) {
          auto m = complete_sum_multiplicities(c.sys, c.y, q, a, budget);
          for (i64 k = 0; k < q; ++k) total[k] += m[k];
          return;
        }
        for (i64 v = 0; v < q; ++v) {
          a[i] = v;
          loop(i + 1);
        }
      };
      loop(0);
      Int expected =
          ipow(Int(q), static_cast<unsigned>(R)) * fiber_count_mod(c.sys, c.y, q, budget);
      CAPTURE(q);
      CHECK(root_sum_equals_integer(total, q, expected));
    }
  }
}

TEST_CASE("oscillatory integrals") {
  Budget budget;
  auto toy = sys_of({"x1*y1"}, 1, 1);
  auto bilinear22 = sys_of({"x1*y1 - x2*y2"}, 2, 2);

  SECTION("zero frequency gives the box volume exactly") {
    auto r = oscillatory_integral(bilinear22, {1, 2}, {0.0}, budget);
    CHECK(r.value.real() == Catch::Approx(4.0).margin(1e-12));
    CHECK(r.value.imag() == Catch::Approx(0.0).margin(1e-14));
    CHECK(r.error_estimate < 1e-12);
  }

  SECTION("single-variable closed forms") {
    auto quarter = oscillatory_integral(toy, {1}, {0.25}, budget);
    CHECK(quarter.value.real() == Catch::Approx(4.0 / 3.14159265358979).margin(2e-3));
    auto whole = oscillatory_integral(toy, {1}, {1.0}, budget);
    CHECK(std::abs(whole.value) < 1e-12);
  }

  SECTION("conjugate symmetry") {
    auto plus = oscillatory_integral(bilinear22, {1, 2}, {0.7}, budget);
    auto minus = oscillatory_integral(bilinear22, {1, 2}, {-0.7}, budget);
    CHECK(close(minus.value, std::conj(plus.value), 1e-12));
  }

  SECTION("worker-count independent") {
    auto a = oscillatory_integral(bilinear22, {1, 2}, {0.3}, budget, 16, nullptr, 1);
    auto b = oscillatory_integral(bilinear22, {1, 2}, {0.3}, budget, 16, nullptr, 4);
    CHECK(a.value.real() == b.value.real());
    CHECK(a.value.imag() == b.value.imag());
  }

  SECTION("grid floor enforced") {
    CHECK_THROWS_AS(oscillatory_integral(toy, {1}, {0.1}, budget, 4), std::invalid_argument);
  }
}

TEST_CASE("truncated singular series") {
  Budget budget;
  auto bilinear22 = sys_of({"x1*y1 - x2*y2"}, 2, 2);
  auto quad = sys_of({"x1^2*y1 + x2^2*y2 - x3^2*y1 - x3^2*y2"}, 3, 2);

  SECTION("first term is always 1") {
    auto r = truncated_singular_series(bilinear22, {1, 1}, 1, budget);
    CHECK(r.value == Catch::Approx(1.0).margin(1e-14));
    REQUIRE(r.partials.size() == 1);
    CHECK(r.partials[0].first == 1);
  }

  SECTION("linear fibers collapse to 1 at every truncation") {
    // specialized form x1 - 2x2: every nontrivial complete sum vanishes
    auto r = truncated_singular_series(bilinear22, {1, 2}, 20, budget);
    CHECK(r.value == Catch::Approx(1.0).margin(1e-12));
    for (const auto& [q, partial] : r.partials)
      CHECK(partial == Catch::Approx(1.0).margin(1e-12));
    // same collapse for a two-form system with independent linear fibers
    auto pair = sys_of({"x1*y1 - x2*y2", "x3*y2 - x4*y3"}, 4, 3);
    auto r2 = truncated_singular_series(pair, {1, 1, 1}, 8, budget);
    CHECK(r2.value == Catch::Approx(1.0).margin(1e-12));
  }

  SECTION("quadric fiber: frozen partial values") {
    auto r = truncated_singular_series(quad, {1, 1}, 16, budget);
    auto at = [&](i64 q) { return r.partials[static_cast<std::size_t>(q - 1)].second; };
    CHECK(at(4) == Catch::Approx(1.0).margin(1e-12));
    CHECK(at(8) == Catch::Approx(1.5).margin(1e-9));
    CHECK(at(9) == Catch::Approx(1.5 + 2.0 / 9.0).margin(1e-9));
    CHECK(at(16) == Catch::Approx(1.5 + 2.0 / 9.0).margin(1e-9));
  }

  SECTION("divisor sums recover the residue count at every level") {
    auto r = truncated_singular_series(quad, {1, 1}, 12, budget);
    auto term = [&](i64 q) {
      double cur = r.partials[static_cast<std::size_t>(q - 1)].second;
      double prev = (q >= 2) ? r.partials[static_cast<std::size_t>(q - 2)].second : 0.0;
      return cur - prev;
    };
    for (i64 q = 1; q <= 12; ++q) {
      double lhs = 0.0;
      for (i64 d = 1; d <= q; ++d)
        if (q % d == 0) lhs += term(d);
      double rhs = fiber_count_mod(quad, {1, 1}, q, budget).convert_to<double>() /
                   std::pow(static_cast<double>(q), 2);
      CAPTURE(q);
      CHECK(lhs == Catch::Approx(rhs).margin(1e-9));
    }
  }

  SECTION("argument checks") {
    CHECK_THROWS_AS(truncated_singular_series(quad, {1, 1}, 0, budget), std::invalid_argument);
  }
}

TEST_CASE("truncated singular integral") {
  Budget budget;
  auto bilinear22 = sys_of({"x1*y1 - x2*y2"}, 2, 2);

  SECTION("small width limit") {
    auto r = truncated_singular_integral(bilinear22, {1, 1}, 1e-4, budget);
    CHECK(r.value == Catch::Approx(2e-4 * 4.0).epsilon(1e-6));
    CHECK(r.error_estimate < 1e-10);
  }

  SECTION("width ladder stabilizes on a linear fiber") {
    double j05 = truncated_singular_integral(bilinear22, {1, 2}, 0.5, budget, 32).value;
    double j1 = truncated_singular_integral(bilinear22, {1, 2}, 1.0, budget, 32).value;
    double j2 = truncated_singular_integral(bilinear22, {1, 2}, 2.0, budget, 32).value;
    double j4 = truncated_singular_integral(bilinear22, {1, 2}, 4.0, budget, 32).value;
    double d1 = std::abs(j1 - j05), d2 = std::abs(j2 - j1), d3 = std::abs(j4 - j2);
    CHECK(d2 < d1);
    CHECK(d3 < d2);
    CHECK(j4 == Catch::Approx(1.0).margin(1e-3));  // limit is the hyperplane section measure
  }

  SECTION("argument checks") {
    CHECK_THROWS_AS(truncated_singular_integral(bilinear22, {1, 1}, 0.0, budget),
                    std::invalid_argument);
    CHECK_THROWS_AS(truncated_singular_integral(bilinear22, {1, 1}, 1.0, budget, 4),
                    std::invalid_argument);
  }
}

TEST_CASE("fiber predictions") {
  Budget budget;
  auto bilinear22 = sys_of({"x1*y1 - x2*y2"}, 2, 2);

  SECTION("degenerate and undersized fibers are refused") {
    CHECK_THROWS_AS(fiber_prediction(bilinear22, {0, 0}, Rat(10), 5, 1.0, budget),
                    std::invalid_argument);
    auto toy = sys_of({"x1*y1"}, 1, 1);  // n1 = R d1
    CHECK_THROWS_AS(fiber_prediction(toy, {1}, Rat(10), 5, 1.0, budget),
                    std::invalid_argument);
  }

  SECTION("prediction recombines from its parts and scales exactly") {
    auto a = fiber_prediction(bilinear22, {1, 2}, Rat(10), 10, 2.0, budget);
    CHECK(a.prediction ==
          Catch::Approx(a.series_value * a.integral_value * 10.0).epsilon(1e-12));
    auto b = fiber_prediction(bilinear22, {1, 2}, Rat(20), 10, 2.0, budget);
    CHECK(b.prediction / a.prediction == Catch::Approx(2.0).epsilon(1e-12));
    CHECK(a.Q == 10);
    CHECK(a.B == 2.0);
  }

  SECTION("relative error shrinks along a height ladder") {
    double prev = 1e9;
    for (i64 P : {10, 30, 90}) {
      auto fp = fiber_prediction(bilinear22, {1, 2}, Rat(P), 20, 2.0, budget, 32);
      CHECK(fp.relative_error < prev);
      prev = fp.relative_error;
    }
    CHECK(prev < 0.02);
  }
}

TEST_CASE("polarized multilinear forms") {
  auto quad = sys_of({"x1^2*y1 + x2^2*y2 - x3^2*y1 - x3^2*y2"}, 3, 2);
  auto diag22 = sys_of({"x1^2*y1^2 + x2^2*y2^2"}, 2, 2);

  SECTION("quadratic case is the Hessian action") {
    // F(.; (1,2)) = x1^2 + 2 x2^2 - 3 x3^2, Hessian diag(2, 4, -6)
    auto rep = multilinear_forms(quad, {1, 2}, {{1, 1, 1}});
    REQUIRE(rep.gamma.size() == 1);
    CHECK(rep.gamma[0] == std::vector<Int>{2, 4, -6});
    CHECK(rep.rank == 1);
    // entry-by-entry agreement with second partials
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) {
        std::vector<std::vector<i64>> slots(2, std::vector<i64>(3, 0));
        slots[0][j] = 1;
        slots[1][k] = 1;
        Int expect = quad[0].partial_x(j).partial_x(k).evaluate(std::vector<i64>{0, 0, 0},
                                                                std::vector<i64>{1, 2});
        CHECK(polarized_value(quad, {1, 2}, 0, slots) == expect);
      }
  }

  SECTION("diagonal example keeps a single nonzero column") {
    auto rep = multilinear_forms(diag22, {1, 1}, {{1, 0}});
    CHECK(rep.gamma[0] == std::vector<Int>{4, 0});
    CHECK(rep.rank == 1);
  }

  SECTION("multilinearity and slot symmetry") {
    auto cubic = sys_of({"x1^2*x2*y1 + x2^3*y2 + x1*x2*x3*y1"}, 3, 2);
    std::vector<i64> u{1, 2, 0}, v{0, 1, 1}, w{2, 0, 1}, up{1, -1, 3};
    std::vector<i64> y{1, 2};
    Int base = polarized_value(cubic, y, 0, {u, v, w});
    CHECK(base == polarized_value(cubic, y, 0, {v, u, w}));
    CHECK(base == polarized_value(cubic, y, 0, {w, v, u}));
    std::vector<i64> usum(3);
    for (int j = 0; j < 3; ++j) usum[j] = u[j] + up[j];
    CHECK(polarized_value(cubic, y, 0, {usum, v, w}) ==
          base + polarized_value(cubic, y, 0, {up, v, w}));
  }

  SECTION("linear systems are rejected") {
    auto bilinear22 = sys_of({"x1*y1 - x2*y2"}, 2, 2);
    CHECK_THROWS_AS(multilinear_forms(bilinear22, {1, 1}, {}), std::invalid_argument);
  }
}

TEST_CASE("rank deficiency counts") {
  Budget budget;
  auto quad = sys_of({"x1^2*y1 + x2^2*y2 - x3^2*y1 - x3^2*y2"}, 3, 2);

  SECTION("nondegenerate fiber only drops rank at the origin") {
    CHECK(rank_deficiency_count(quad, {1, 1}, 0.5, 16.0, budget) == 1);
  }

  SECTION("degenerate fiber drops rank on a line") {
    // F(.; (1,-1)) = x1^2 - x2^2: third coordinate free
    CHECK(rank_deficiency_count(quad, {1, -1}, 0.5, 16.0, budget) == 7);   // |v| < 4
    CHECK(rank_deficiency_count(quad, {1, -1}, 0.5, 17.0, budget) == 9);   // |v| < 4.12
  }

  SECTION("two-point slope matches the deficiency dimension") {
    double m1 = rank_deficiency_count(quad, {1, -1}, 0.5, 100.0, budget).convert_to<double>();
    double m2 = rank_deficiency_count(quad, {1, -1}, 0.5, 400.0, budget).convert_to<double>();
    double slope = std::log(m2 / m1) / std::log(4.0);
    CHECK(slope == Catch::Approx(0.5).margin(0.05));
  }

  SECTION("budget refuses oversized lattices") {
    Budget tiny(1000);
    CHECK_THROWS_AS(rank_deficiency_count(quad, {1, 1}, 1.0, 100.0, tiny), BudgetExceeded);
  }
}

TEST_CASE("major arc approximation stays bounded") {
  Budget budget;
  auto bilinear22 = sys_of({"x1*y1 - x2*y2"}, 2, 2);
  auto quad = sys_of({"x1^2*y1 + x2^2*y2 - x3^2*y1 - x3^2*y2"}, 3, 2);

  SECTION("principal arc, linear fiber") {
    double first = -1.0, last = -1.0;
    for (i64 P : {6, 12, 24, 48}) {
      auto mc =
          major_arc_comparison(bilinear22, {1, 2}, {0}, 1, {5e-4}, Rat(P), 0.25, budget);
      CHECK(mc.normalized_gap < 1.5);
      if (first < 0) first = mc.normalized_gap;
      last = mc.normalized_gap;
    }
    CHECK(last <= first);
  }

  SECTION("principal arc, quadric fiber") {
    double first = -1.0, last = -1.0;
    for (i64 P : {4, 8, 16, 32}) {
      auto mc = major_arc_comparison(quad, {1, 1}, {0}, 1, {2e-5}, Rat(P), 0.2, budget, 24);
      CHECK(mc.normalized_gap < 10.0);
      if (first < 0) first = mc.normalized_gap;
      last = mc.normalized_gap;
    }
    CHECK(last <= first);
  }

  SECTION("nonprincipal arc with vanishing main term") {
    auto mc = major_arc_comparison(bilinear22, {1, 2}, {1}, 3, {5e-4}, Rat(24), 0.25, budget);
    CHECK(std::abs(mc.main_term) < 1e-9);
    CHECK(mc.normalized_gap < 0.05);
  }
}
