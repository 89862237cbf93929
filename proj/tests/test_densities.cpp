#include "bihom/densities.hpp"

#include <catch2/catch_amalgamated.hpp>

#include "bihom/parser.hpp"

#include <cmath>
#include <functional>
#include <vector>

using namespace bihom;

namespace {

FormSystem sys_of(std::vector<std::string> texts, int n1, int n2) {
  return parse_system(texts, n1, n2);
}

// Independent oracle: iterate every residue pair mod p^r and test each form by
// exact integer evaluation.
Int brute_count_mod(const FormSystem& sys, i64 p, int r, bool star = false) {
  i64 m = 1;
  for (int i = 0; i < r; ++i) m *= p;
  const int n = sys.n1() + sys.n2();
  std::vector<i64> x(sys.n1()), y(sys.n2());
  Int cnt = 0;
  std::function<void(int)> rec = [&](int j) {
    if (j == n) {
      if (star) {
        bool xnz = false, ynz = false;
        for (i64 v : x) xnz = xnz || (v % p != 0);
        for (i64 v : y) ynz = ynz || (v % p != 0);
        if (!xnz || !ynz) return;
      }
      for (int i = 0; i < sys.R(); ++i)
        if (sys[i].evaluate(x, y) % m != 0) return;
      ++cnt;
      return;
    }
    i64& slot = (j < sys.n1()) ? x[j] : y[j - sys.n1()];
    for (i64 v = 0; v < m; ++v) {
      slot = v;
      rec(j + 1);
    }
  };
  rec(0);
  return cnt;
}

// Closed form for the bilinear sum-of-products density ladder:
// sigma(r) = (1 - p^-3)(1 - p^-2r)/(1 - p^-2) + p^-2r.
Rat bilinear33_sigma_rung(i64 p, int r) {
  Rat pr = Rat(1, ipow(Int(p), static_cast<unsigned>(2 * r)));
  Rat a = Rat(1) - Rat(1, ipow(Int(p), 3));
  Rat b = Rat(1) - Rat(1, ipow(Int(p), 2));
  return a * (Rat(1) - pr) / b + pr;
}

}  // namespace

TEST_CASE("primality helper") {
  CHECK(is_prime_i64(2));
  CHECK(is_prime_i64(3));
  CHECK(is_prime_i64(97));
  CHECK_FALSE(is_prime_i64(1));
  CHECK_FALSE(is_prime_i64(4));
  CHECK_FALSE(is_prime_i64(91));  // 7 * 13
  CHECK_FALSE(is_prime_i64(0));
  CHECK_FALSE(is_prime_i64(-7));
}

TEST_CASE("residue counts: frozen values and mode agreement") {
  Budget budget;
  auto toy = sys_of({"x1*y1"}, 1, 1);
  auto bilinear22 = sys_of({"x1*y1 - x2*y2"}, 2, 2);

  SECTION("x1*y1 mod 2: three residue pairs") {
    for (auto mode : {ModCountMode::Auto, ModCountMode::Exhaustive, ModCountMode::Lifting,
                      ModCountMode::LinearFiber})
      CHECK(count_mod(toy, 2, 1, budget, mode) == 3);
    CHECK(brute_count_mod(toy, 2, 1) == 3);
  }

  SECTION("x1*y1 mod p: 2p - 1 residue pairs") {
    for (i64 p : {2, 3, 5, 7, 11, 13}) {
      CHECK(count_mod(toy, p, 1, budget) == 2 * p - 1);
      CHECK(count_mod(toy, p, 1, budget, ModCountMode::Exhaustive) == 2 * p - 1);
    }
  }

  SECTION("bilinear 2+2 mod 2: ten residue pairs, three with both sides nonzero") {
    for (auto mode : {ModCountMode::Auto, ModCountMode::Exhaustive, ModCountMode::Lifting,
                      ModCountMode::LinearFiber}) {
      CHECK(count_mod(bilinear22, 2, 1, budget, mode) == 10);
      CHECK(count_mod_star(bilinear22, 2, 1, budget, mode) == 3);
    }
    CHECK(brute_count_mod(bilinear22, 2, 1) == 10);
    CHECK(brute_count_mod(bilinear22, 2, 1, /*star=*/true) == 3);
  }

  SECTION("bilinear 3+3 mod p: p^5 + p^3 - p^2") {
    auto bl33 = sys_of({"x1*y1 + x2*y2 + x3*y3"}, 3, 3);
    for (i64 p : {2, 3, 5, 7}) {
      Int expect = ipow(Int(p), 5) + ipow(Int(p), 3) - ipow(Int(p), 2);
      CHECK(count_mod(bl33, p, 1, budget) == expect);
    }
    CHECK(count_mod(bl33, 2, 1, budget, ModCountMode::Exhaustive) == 36);
    CHECK(count_mod(bl33, 3, 1, budget, ModCountMode::Exhaustive) == 3 * 81 + 27 - 9);
  }

  SECTION("rejects bad inputs") {
    CHECK_THROWS_AS(count_mod(toy, 4, 1, budget), std::invalid_argument);
    CHECK_THROWS_AS(count_mod(toy, 1, 1, budget), std::invalid_argument);
    CHECK_THROWS_AS(count_mod(toy, 2, 0, budget), std::invalid_argument);
    auto pair = sys_of({"x1*y1 - x2*y2", "x3*y2 - x4*y3"}, 4, 3);
    CHECK_THROWS_AS(count_mod_star(pair, 2, 1, budget), std::invalid_argument);
    auto biquad = sys_of({"x1^2*y1^2 + x2^2*y2^2"}, 2, 2);
    CHECK_THROWS_AS(count_mod(biquad, 2, 1, budget, ModCountMode::LinearFiber),
                    std::invalid_argument);
    CHECK(count_mod(sys_of({"x1*x2*y1 - x3^2*y2"}, 3, 2), 2, 1, budget,
                    ModCountMode::LinearFiber) ==
          brute_count_mod(sys_of({"x1*x2*y1 - x3^2*y2"}, 3, 2), 2, 1));
  }

  SECTION("tiny step budget is enforced") {
    Budget tiny(10);
    CHECK_THROWS_AS(count_mod(bilinear22, 3, 2, tiny, ModCountMode::Exhaustive),
                    BudgetExceeded);
  }
}

TEST_CASE("residue counts: strategies agree on mixed systems") {
  Budget budget;
  struct Case {
    FormSystem sys;
    std::vector<std::pair<i64, int>> pr;
  };
  std::vector<Case> cases;
  cases.push_back({sys_of({"x1*y1"}, 1, 1), {{2, 3}, {3, 3}, {5, 2}}});
  cases.push_back({sys_of({"x1*y1 - x2*y2"}, 2, 2), {{2, 3}, {3, 2}, {5, 2}}});
  cases.push_back(
      {sys_of({"x1^2*y1 + x2^2*y2 - x3^2*y1 - x3^2*y2"}, 3, 2), {{2, 3}, {3, 2}, {5, 1}}});
  cases.push_back({sys_of({"x1*x2*y1 - x3^2*y2"}, 3, 2), {{2, 2}, {3, 1}}});
  cases.push_back({sys_of({"x1*y1 - x2*y2", "x3*y2 - x4*y3"}, 4, 3), {{2, 2}, {3, 1}}});

  for (const auto& c : cases) {
    for (auto [p, rmax] : c.pr) {
      for (int r = 1; r <= rmax; ++r) {
        Int ex = count_mod(c.sys, p, r, budget, ModCountMode::Exhaustive);
        Int li = count_mod(c.sys, p, r, budget, ModCountMode::Lifting);
        Int au = count_mod(c.sys, p, r, budget, ModCountMode::Auto);
        CAPTURE(p, r);
        CHECK(ex == li);
        CHECK(ex == au);
        if (r == 1 || (p == 2 && r == 2)) CHECK(ex == brute_count_mod(c.sys, p, r));
      }
    }
  }
}

TEST_CASE("residue counts: linear closed form matches scans") {
  Budget budget;
  auto bl33 = sys_of({"x1*y1 + x2*y2 + x3*y3"}, 3, 3);
  CHECK(count_mod(bl33, 2, 2, budget, ModCountMode::LinearFiber) ==
        count_mod(bl33, 2, 2, budget, ModCountMode::Exhaustive));
  CHECK(count_mod(bl33, 2, 3, budget, ModCountMode::LinearFiber) ==
        count_mod(bl33, 2, 3, budget, ModCountMode::Lifting));
  CHECK(count_mod(bl33, 5, 1, budget, ModCountMode::LinearFiber) ==
        count_mod(bl33, 5, 1, budget, ModCountMode::Exhaustive));
  CHECK(count_mod(bl33, 7, 1, budget, ModCountMode::LinearFiber) ==
        count_mod(bl33, 7, 1, budget, ModCountMode::Exhaustive));

  // linear in x but not x-diagonal on the y side
  auto skew = sys_of({"x1*y1 + x2*y1 + x2*y2"}, 2, 2);
  for (auto [p, r] : std::vector<std::pair<i64, int>>{{2, 2}, {3, 2}, {5, 1}})
    CHECK(count_mod(skew, p, r, budget, ModCountMode::LinearFiber) ==
          count_mod(skew, p, r, budget, ModCountMode::Exhaustive));

  // quadratic in x, linear in y: Auto must transpose and still agree
  auto qlin = sys_of({"x1^2*y1 + x2^2*y2 + x1*x2*y3"}, 2, 3);
  for (auto [p, r] : std::vector<std::pair<i64, int>>{{2, 2}, {3, 1}})
    CHECK(count_mod(qlin, p, r, budget, ModCountMode::Auto) ==
          count_mod(qlin, p, r, budget, ModCountMode::Exhaustive));

  // star variant through the closed form
  auto bilinear22 = sys_of({"x1*y1 - x2*y2"}, 2, 2);
  for (auto [p, r] : std::vector<std::pair<i64, int>>{{2, 2}, {3, 2}, {2, 3}})
    CHECK(count_mod_star(bilinear22, p, r, budget, ModCountMode::LinearFiber) ==
          count_mod_star(bilinear22, p, r, budget, ModCountMode::Exhaustive));
}

TEST_CASE("fiber residue counts") {
  Budget budget;
  auto bilinear22 = sys_of({"x1*y1 - x2*y2"}, 2, 2);
  CHECK(fiber_count_mod(bilinear22, {1, 1}, 6, budget) == 6);
  CHECK(fiber_count_mod(bilinear22, {2, 0}, 6, budget) == 12);
  CHECK(fiber_count_mod(bilinear22, {0, 0}, 6, budget) == 36);
  CHECK(fiber_count_mod(bilinear22, {1, 1}, 1, budget) == 1);
  CHECK(fiber_count_mod(bilinear22, {-1, 5}, 6, budget) ==
        fiber_count_mod(bilinear22, {5, 5}, 6, budget));

  auto quad = sys_of({"x1^2*y1 + x2^2*y2 - x3^2*y1 - x3^2*y2"}, 3, 2);
  for (i64 q : {2, 3, 4, 6}) {
    Int direct = 0;
    std::vector<i64> x(3);
    for (x[0] = 0; x[0] < q; ++x[0])
      for (x[1] = 0; x[1] < q; ++x[1])
        for (x[2] = 0; x[2] < q; ++x[2])
          if (quad[0].evaluate(x, std::vector<i64>{1, 1}) % q == 0) ++direct;
    CHECK(fiber_count_mod(quad, {1, 1}, q, budget) == direct);
  }
  CHECK_THROWS_AS(fiber_count_mod(bilinear22, {1, 1}, 0, budget), std::invalid_argument);
  CHECK_THROWS_AS(fiber_count_mod(bilinear22, {1}, 4, budget), std::invalid_argument);
}

TEST_CASE("p-adic density estimates") {
  Budget budget;

  SECTION("frozen rung: bilinear 2+2 at p = 2") {
    auto rep = sigma_p_estimate(sys_of({"x1*y1 - x2*y2"}, 2, 2), 2, 1, budget);
    CHECK(rep.N_r == 10);
    CHECK(rep.sigma_estimate == Rat(10, 8));
    CHECK(rep.ladder.size() == 1);
    CHECK_FALSE(rep.stabilized);
  }

  SECTION("bilinear 3+3 ladder matches the closed form and converges") {
    auto bl33 = sys_of({"x1*y1 + x2*y2 + x3*y3"}, 3, 3);
    auto rep = sigma_p_estimate(bl33, 2, 5, budget);
    REQUIRE(rep.ladder.size() == 5);
    for (const auto& [r, est] : rep.ladder) CHECK(est == bilinear33_sigma_rung(2, r));
    CHECK(rep.ladder[0].second == Rat(9, 8));
    // distance to the limit (1 - p^-3)/(1 - p^-2) shrinks monotonically
    Rat limit = (Rat(1) - Rat(1, 8)) / (Rat(1) - Rat(1, 4));
    Rat prev_gap = -1;
    for (const auto& [r, est] : rep.ladder) {
      Rat gap = limit - est;
      if (gap < 0) gap = -gap;
      if (prev_gap >= 0) CHECK(gap < prev_gap);
      prev_gap = gap;
    }
    CHECK(rep.stabilized);  // relative step at r = 5 is ~4e-4
    CHECK_FALSE(sigma_p_estimate(bl33, 2, 3, budget).stabilized);
  }

  SECTION("degenerate system does not stabilize") {
    // x1*y1: N(r)/p^r = r(1 - 1/p) + 1 grows without bound
    auto toy = sys_of({"x1*y1"}, 1, 1);
    auto rep = sigma_p_estimate(toy, 2, 5, budget);
    CHECK(rep.ladder[0].second == Rat(3, 2));
    for (int r = 1; r <= 5; ++r)
      CHECK(rep.ladder[r - 1].second == Rat(r, 2) + 1);
    CHECK_FALSE(rep.stabilized);
  }
}

TEST_CASE("omega and tau factors at finite places") {
  Budget budget;
  auto bl33 = sys_of({"x1*y1 + x2*y2 + x3*y3"}, 3, 3);

  auto rep = omega_p(bl33, 2, 3, budget);
  CHECK(rep.factor == Rat(9, 16));
  CHECK(rep.tau_p == rep.factor * rep.sigma);
  CHECK(rep.tau_p / rep.sigma == Rat(9, 16));
  Rat unit = Rat(1, 2);  // 1 - 1/2
  CHECK(rep.omega_p * unit * unit == rep.tau_p);

  // estimates at successive truncation levels stay close
  auto rep2 = omega_p(bl33, 2, 2, budget);
  double rel = std::abs((rep2.omega_p - rep.omega_p).convert_to<double>() /
                        rep.omega_p.convert_to<double>());
  CHECK(rel < 0.01);

  auto pair = sys_of({"x1*y1 - x2*y2", "x3*y2 - x4*y3"}, 4, 3);
  CHECK_THROWS_AS(omega_p(pair, 2, 1, budget), std::invalid_argument);
  CHECK_THROWS_AS(omega_p(sys_of({"x1*y1"}, 1, 1), 2, 1, budget), std::invalid_argument);
}

TEST_CASE("restricted density approaches the unit-factor multiple") {
  Budget budget;
  auto bl33 = sys_of({"x1*y1 + x2*y2 + x3*y3"}, 3, 3);
  // |N*(r) - (1-p^-2)^2 N(r)| / p^{5r} shrinks as r grows
  double prev = -1.0;
  for (int r = 1; r <= 3; ++r) {
    Int N = count_mod(bl33, 2, r, budget);
    Int Nstar = count_mod_star(bl33, 2, r, budget);
    Rat scale(1, ipow(Int(2), static_cast<unsigned>(5 * r)));
    Rat gap = (Rat(Nstar) - Rat(9, 16) * Rat(N)) * scale;
    if (gap < 0) gap = -gap;
    double g = gap.convert_to<double>();
    if (prev >= 0) CHECK(g <= prev + 1e-12);
    prev = g;
  }
  CHECK(prev < 0.03);
}

TEST_CASE("euler products over small primes") {
  Budget budget;
  auto bl33 = sys_of({"x1*y1 + x2*y2 + x3*y3"}, 3, 3);

  SECTION("default truncation level tracks the per-prime work allowance") {
    CHECK(default_r_for(bl33, 2, 10'000'000) == 7);
    CHECK(default_r_for(bl33, 3, 10'000'000) == 4);
    CHECK(default_r_for(bl33, 97, 10'000'000) == 1);
    auto quad = sys_of({"x1*x2*y1 - x3^2*y2"}, 3, 2);  // linear in y: iterate the x side
    CHECK(default_r_for(quad, 2, 10'000'000) == 7);    // 2^{3r} within the allowance
    auto biquad = sys_of({"x1^2*y1^2 + x2^2*y2^2"}, 2, 2);  // no linear side: scan all 4 dims
    CHECK(default_r_for(biquad, 2, 10'000'000) == 5);
  }

  SECTION("factors approximate the limiting local densities") {
    auto rep = euler_product(bl33, 30, budget);
    REQUIRE(rep.factors.size() == 10);  // primes up to 30
    double expect = 1.0;
    for (const auto& f : rep.factors) {
      double p = static_cast<double>(f.p);
      double limit = (1.0 - std::pow(p, -3.0)) / (1.0 - std::pow(p, -2.0));
      CHECK(f.sigma.convert_to<double>() == Catch::Approx(limit).epsilon(0.02));
      expect *= limit;
    }
    CHECK(rep.value == Catch::Approx(expect).epsilon(0.02));
    CHECK(rep.tail_exponent == -1.0);
  }

  SECTION("single-prime product equals its only factor") {
    auto rep = euler_product(bl33, 2, budget);
    REQUIRE(rep.factors.size() == 1);
    CHECK(rep.value ==
          Catch::Approx(rep.factors[0].sigma.convert_to<double>()).epsilon(1e-12));
  }

  SECTION("budget is enforced") {
    Budget tiny(100);
    CHECK_THROWS_AS(euler_product(bl33, 30, tiny), BudgetExceeded);
  }
}

TEST_CASE("real density: slab monte carlo") {
  Budget budget(u64(1) << 40);
  auto bilinear22 = sys_of({"x1*y1 - x2*y2"}, 2, 2);

  SECTION("deterministic for a fixed seed, worker-independent") {
    auto a = sigma_infty_mc(bilinear22, 0.125, 200000, 42, budget, 1);
    auto b = sigma_infty_mc(bilinear22, 0.125, 200000, 42, budget, 3);
    CHECK(a.estimate == b.estimate);
    CHECK(a.standard_error == b.standard_error);
    auto c = sigma_infty_mc(bilinear22, 0.125, 200000, 43, budget, 2);
    CHECK(a.estimate != c.estimate);
    CHECK(a.method == RealDensityMethod::MonteCarloSlab);
    CHECK(a.samples == 200000);
    CHECK(a.epsilon == 0.125);
    CHECK(a.seed == 42);
    CHECK(a.rng_name == "splitmix64");
    CHECK(a.estimate > 0.0);
    CHECK(a.standard_error > 0.0);
  }

  SECTION("doubling the form halves the density") {
    auto doubled = sys_of({"2*x1*y1 - 2*x2*y2"}, 2, 2);
    auto a = sigma_infty_mc(doubled, 0.125, 400000, 7, budget);
    auto b = sigma_infty_mc(bilinear22, 0.0625, 400000, 8, budget);
    double tol = 3.0 * std::sqrt(a.standard_error * a.standard_error +
                                 0.25 * b.standard_error * b.standard_error);
    CHECK(std::abs(a.estimate - 0.5 * b.estimate) < tol);
  }

  SECTION("rejects bad inputs") {
    CHECK_THROWS_AS(sigma_infty_mc(bilinear22, 0.0, 10000, 1, budget), std::invalid_argument);
    CHECK_THROWS_AS(sigma_infty_mc(bilinear22, 0.1, 10, 1, budget), std::invalid_argument);
  }
}

TEST_CASE("real density: slab ladder") {
  Budget budget(u64(1) << 40);

  SECTION("smooth example is stable") {
    auto bl33 = sys_of({"x1*y1 + x2*y2 + x3*y3"}, 3, 3);
    auto rep = sigma_infty_ladder(bl33, 150000, 1234, budget);
    REQUIRE(rep.rungs.size() == 6);
    for (int k = 0; k < 6; ++k)
      CHECK(rep.rungs[k].epsilon == Catch::Approx(std::pow(2.0, -3 - k)));
    CHECK_FALSE(rep.exploding);
    CHECK(std::isfinite(rep.richardson));
    CHECK(rep.richardson > 0.0);
  }

  SECTION("positive form explodes and is flagged") {
    auto pos = sys_of({"x1^2*y1^2 + x2^2*y2^2"}, 2, 2);
    auto rep = sigma_infty_ladder(pos, 150000, 99, budget);
    CHECK(rep.exploding);
    CHECK(rep.rungs.back().estimate > 2.0 * rep.rungs.front().estimate);
  }
}

TEST_CASE("real density: chart estimator") {
  Budget budget(u64(1) << 40);
  auto bilinear22 = sys_of({"x1*y1 - x2*y2"}, 2, 2);

  SECTION("deterministic and labelled") {
    auto a = sigma_infty_leray(bilinear22, 200000, 5, budget, -1, 1);
    auto b = sigma_infty_leray(bilinear22, 200000, 5, budget, -1, 3);
    CHECK(a.estimate == b.estimate);
    CHECK(a.method == RealDensityMethod::LerayChart);
    CHECK(a.chart >= 0);
    CHECK(a.estimate > 0.0);
  }

  SECTION("chart choice does not move the estimate") {
    auto a = sigma_infty_leray(bilinear22, 400000, 11, budget, 0);
    auto b = sigma_infty_leray(bilinear22, 400000, 12, budget, 1);
    CHECK(a.chart == 0);
    CHECK(b.chart == 1);
    double tol = 3.0 * (a.standard_error + b.standard_error) + 0.02 * a.estimate;
    CHECK(std::abs(a.estimate - b.estimate) < tol);
  }

  SECTION("agrees with the slab estimator") {
    auto bl33 = sys_of({"x1*y1 + x2*y2 + x3*y3"}, 3, 3);
    auto slab = sigma_infty_mc(bl33, 1.0 / 64.0, 600000, 21, budget);
    auto chart = sigma_infty_leray(bl33, 600000, 22, budget);
    double tol =
        3.0 * (slab.standard_error + chart.standard_error) + 0.03 * chart.estimate;
    CHECK(std::abs(slab.estimate - chart.estimate) < tol);
  }

  SECTION("rejects unusable inputs") {
    auto pair = sys_of({"x1*y1 - x2*y2", "x3*y2 - x4*y3"}, 4, 3);
    CHECK_THROWS_AS(sigma_infty_leray(pair, 10000, 1, budget), std::invalid_argument);
    CHECK_THROWS_AS(sigma_infty_leray(bilinear22, 10, 1, budget), std::invalid_argument);
    auto cubic = sys_of({"x1*y1^3 + x2*y2^3"}, 2, 2);
    CHECK_THROWS_AS(sigma_infty_leray(cubic, 10000, 1, budget, 0), std::invalid_argument);
  }
}

TEST_CASE("archimedean factor bookkeeping") {
  CHECK(tau_infty_factor(sys_of({"x1*y1 + x2*y2 + x3*y3"}, 3, 3)) == Rat(1));
  CHECK(tau_infty_factor(sys_of({"x1*y1 - x2*y2"}, 2, 2)) == Rat(1, 4));
  CHECK_THROWS_AS(tau_infty_factor(sys_of({"x1*y1 - x2*y2", "x3*y2 - x4*y3"}, 4, 3)),
                  std::invalid_argument);
}
