#include "bihom/forms.hpp"
#include "bihom/parser.hpp"
#include "bihom/rng.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace bihom;

namespace {

// Test-local oracle: term-by-term evaluation written independently of
// Form::evaluate (explicit loops over stored exponents, no shared helper).
Int oracle_eval(const Form& f, const std::vector<i64>& x, const std::vector<i64>& y) {
  Int total = 0;
  for (const auto& mono : f.terms()) {
    Int prod = 1;
    for (std::size_t j = 0; j < x.size(); ++j) {
      Int base = x[j];
      for (int k = 0; k < mono.xexp[j]; ++k) prod *= base;
    }
    for (std::size_t j = 0; j < y.size(); ++j) {
      Int base = y[j];
      for (int k = 0; k < mono.yexp[j]; ++k) prod *= base;
    }
    total += mono.coef * prod;
  }
  return total;
}

std::vector<i64> random_vec(SplitMix64& g, int n, i64 lo, i64 hi) {
  std::vector<i64> v(n);
  for (auto& t : v) t = lo + static_cast<i64>(g.next() % static_cast<u64>(hi - lo + 1));
  return v;
}

}  // namespace

TEST_CASE("evaluate matches hand-computed values") {
  Form f = parse_form("x1^2*y1^2 + x2^2*y2^2 - x3^2*y3^2", 3, 3);
  REQUIRE(f.d1() == 2);
  REQUIRE(f.d2() == 2);
  std::vector<i64> x{1, 2, 3}, y{1, 1, 1};
  CHECK(f.evaluate(x, y) == -4);           // 1 + 4 - 9
  CHECK(oracle_eval(f, x, y) == -4);
  CHECK(f.evaluate(std::vector<i64>{0, 0, 0}, y) == 0);
}

TEST_CASE("evaluate agrees with oracle on random points") {
  SplitMix64 g(20260825);
  std::vector<Form> forms = {
      parse_form("x1*y1 - x2*y2", 2, 2),
      parse_form("x1^2*y1^2 + x2^2*y2^2 - x3^2*y3^2", 3, 3),
      parse_form("3*x1^3*y1 - 7*x1*x2^2*y2 + x2^3*y1", 2, 2),
  };
  for (const auto& f : forms) {
    for (int rep = 0; rep < 50; ++rep) {
      auto x = random_vec(g, f.n1(), -1000000, 1000000);
      auto y = random_vec(g, f.n2(), -1000000, 1000000);
      REQUIRE(f.evaluate(x, y) == oracle_eval(f, x, y));
    }
  }
}

TEST_CASE("monomials merge and sort canonically") {
  Form f = parse_form("2*x1*y1 + 3*x1*y1", 2, 2);
  REQUIRE(f.terms().size() == 1);
  CHECK(f.terms()[0].coef == 5);
  CHECK(f.render() == "5*x1*y1");

  Form z = parse_form("x1*y1 - 1*x1*y1", 2, 2);
  CHECK(z.is_zero());
  CHECK(z.render() == "0");
  CHECK(z.evaluate(std::vector<i64>{7, 9}, std::vector<i64>{2, 5}) == 0);

  Form g = parse_form("x2*y2 + x1*y1", 2, 2);
  CHECK(g.render() == "x1*y1 + x2*y2");
}

TEST_CASE("specialize_y gives the expected x-form") {
  Form f = parse_form("x1^2*y1^2 + x2^2*y2^2", 2, 2);
  Form s = f.specialize_y(std::vector<i64>{2, 3});
  CHECK(s.d1() == 2);
  CHECK(s.d2() == 0);
  CHECK(s.render() == "4*x1^2 + 9*x2^2");
  // specialize-then-evaluate equals direct evaluate on sampled points
  SplitMix64 g(99);
  for (int rep = 0; rep < 40; ++rep) {
    auto x = random_vec(g, 2, -50, 50);
    auto y = random_vec(g, 2, -50, 50);
    Form sy = f.specialize_y(y);
    REQUIRE(sy.evaluate(x, y) == f.evaluate(x, y));
  }
}

TEST_CASE("partial derivatives satisfy the Euler identity") {
  SplitMix64 g(7);
  std::vector<Form> forms = {
      parse_form("x1*y1 - x2*y2", 2, 2),
      parse_form("x1^2*y1^2 + x2^2*y2^2 - x3^2*y3^2", 3, 3),
      parse_form("5*x1^2*x2*y1^3 - x2^3*y2^3", 2, 2),
  };
  for (const auto& f : forms) {
    for (int rep = 0; rep < 20; ++rep) {
      auto x = random_vec(g, f.n1(), -30, 30);
      auto y = random_vec(g, f.n2(), -30, 30);
      Int ex = 0, ey = 0;
      for (int j = 0; j < f.n1(); ++j) ex += Int(x[j]) * f.partial_x(j).evaluate(x, y);
      for (int j = 0; j < f.n2(); ++j) ey += Int(y[j]) * f.partial_y(j).evaluate(x, y);
      REQUIRE(ex == Int(f.d1()) * f.evaluate(x, y));
      REQUIRE(ey == Int(f.d2()) * f.evaluate(x, y));
    }
  }
}

TEST_CASE("transpose swaps the variable groups") {
  Form f = parse_form("3*x1^2*y2 - x1*x2*y1", 2, 2);
  Form t = f.transpose();
  CHECK(t.d1() == f.d2());
  CHECK(t.d2() == f.d1());
  SplitMix64 g(17);
  for (int rep = 0; rep < 20; ++rep) {
    auto x = random_vec(g, 2, -20, 20);
    auto y = random_vec(g, 2, -20, 20);
    REQUIRE(t.evaluate(y, x) == f.evaluate(x, y));
  }
  CHECK(t.transpose() == f);
}

TEST_CASE("jacobian ranks are exact") {
  FormSystem sys({parse_form("x1*y1 - x2*y2", 2, 2)});
  auto pt = [](std::initializer_list<int> v) {
    std::vector<Rat> r;
    for (int t : v) r.emplace_back(t);
    return r;
  };
  // dF/dx = (y1, -y2): rank 1 unless y = 0.
  CHECK(jacobian_rank_x(sys, pt({1, 1}), pt({1, 1})) == 1);
  CHECK(jacobian_rank_x(sys, pt({5, 7}), pt({0, 0})) == 0);
  CHECK(jacobian_rank_y(sys, pt({0, 0}), pt({3, 4})) == 0);
  CHECK(jacobian_rank_y(sys, pt({2, 0}), pt({3, 4})) == 1);

  // Rank drops exactly, not approximately: scaled rows stay rank 1.
  FormSystem sys2({parse_form("x1*y1", 1, 1), parse_form("7*x1*y1", 1, 1)});
  CHECK(jacobian_rank_x(sys2, pt({1}), pt({1})) == 1);
}

TEST_CASE("rational_rank on known matrices") {
  auto q = [](int a, int b) { return Rat(a, b); };
  CHECK(rational_rank({{q(1, 2), q(1, 3)}, {q(3, 2), q(2, 1)}}) == 2);
  CHECK(rational_rank({{q(1, 2), q(1, 3)}, {q(3, 2), q(1, 1)}}) == 1);  // det = 0
  CHECK(rational_rank({{q(2, 1), q(4, 1)}, {q(1, 1), q(2, 1)}}) == 1);
  CHECK(rational_rank({{q(0, 1), q(0, 1)}}) == 0);
  // 3x3 with third row = row1 + row2
  CHECK(rational_rank({{q(1, 1), q(0, 1), q(1, 2)},
                       {q(0, 1), q(1, 3), q(1, 1)},
                       {q(1, 1), q(1, 3), q(3, 2)}}) == 2);
}

TEST_CASE("form construction rejects malformed input") {
  CHECK_THROWS_AS(Form(0, 1, 1, 1), std::invalid_argument);
  // exponent tuple of wrong length
  CHECK_THROWS_AS(Form(2, 2, 1, 1, {Monomial{1, {1}, {1, 0}}}), std::invalid_argument);
  // monomial bidegree mismatch
  CHECK_THROWS_AS(Form(2, 2, 1, 1, {Monomial{1, {2, 0}, {1, 0}}}), std::invalid_argument);
  // big coefficients survive round trips
  Form f = parse_form("123456789012345678901234567890*x1*y1", 1, 1);
  CHECK(f.evaluate(std::vector<i64>{1}, std::vector<i64>{1}) ==
        Int("123456789012345678901234567890"));
}

TEST_CASE("scaled multiplies every coefficient") {
  Form f = parse_form("x1*y1 - x2*y2", 2, 2);
  Form g = f.scaled(2);
  CHECK(g.render() == "2*x1*y1 - 2*x2*y2");
  CHECK(g.evaluate(std::vector<i64>{3, 4}, std::vector<i64>{5, 6}) ==
        2 * f.evaluate(std::vector<i64>{3, 4}, std::vector<i64>{5, 6}));
}
