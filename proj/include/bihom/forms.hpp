#pragma once

// Bihomogeneous integer forms F(x;y): every monomial has x-degree d1 and
// y-degree d2.  Coefficients are arbitrary-precision integers and all
// evaluation/derivative/rank routines here are exact; floating-point entry
// points are provided separately and say so in their names.

#include "bihom/arith.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace bihom {

struct Monomial {
  Int coef;
  std::vector<int> xexp;  // length n1, entries >= 0, sum == d1
  std::vector<int> yexp;  // length n2, entries >= 0, sum == d2

  bool same_exponents(const Monomial& o) const {
    return xexp == o.xexp && yexp == o.yexp;
  }
};

// Canonical monomial order: graded lexicographic on the concatenated
// exponent tuple (total degree first, then lex, larger first).
inline bool monomial_before(const Monomial& a, const Monomial& b) {
  int da = 0, db = 0;
  for (int e : a.xexp) da += e;
  for (int e : a.yexp) da += e;
  for (int e : b.xexp) db += e;
  for (int e : b.yexp) db += e;
  if (da != db) return da > db;
  if (a.xexp != b.xexp) return a.xexp > b.xexp;
  return a.yexp > b.yexp;
}

class Form {
 public:
  // Explicit bidegree so the zero form (empty term list) is representable.
  Form(int n1, int n2, int d1, int d2, std::vector<Monomial> terms = {})
      : n1_(n1), n2_(n2), d1_(d1), d2_(d2) {
    if (n1 < 1 || n2 < 1) throw std::invalid_argument("Form: need n1,n2 >= 1");
    if (d1 < 0 || d2 < 0) throw std::invalid_argument("Form: negative bidegree");
    for (const auto& m : terms) validate_term(m);
    normalize(std::move(terms));
  }

  int n1() const { return n1_; }
  int n2() const { return n2_; }
  int d1() const { return d1_; }
  int d2() const { return d2_; }
  const std::vector<Monomial>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }

  bool operator==(const Form& o) const {
    if (n1_ != o.n1_ || n2_ != o.n2_ || d1_ != o.d1_ || d2_ != o.d2_) return false;
    if (terms_.size() != o.terms_.size()) return false;
    for (std::size_t i = 0; i < terms_.size(); ++i)
      if (!(terms_[i].coef == o.terms_[i].coef && terms_[i].same_exponents(o.terms_[i])))
        return false;
    return true;
  }

  template <typename TX, typename TY>
  Int evaluate(const std::vector<TX>& x, const std::vector<TY>& y) const {
    check_point_sizes(x.size(), y.size());
    Int acc = 0;
    for (const auto& m : terms_) {
      Int t = m.coef;
      for (int j = 0; j < n1_; ++j)
        for (int e = 0; e < m.xexp[j]; ++e) t *= Int(x[j]);
      for (int j = 0; j < n2_; ++j)
        for (int e = 0; e < m.yexp[j]; ++e) t *= Int(y[j]);
      acc += t;
    }
    return acc;
  }

  Rat evaluate_rat(const std::vector<Rat>& x, const std::vector<Rat>& y) const {
    check_point_sizes(x.size(), y.size());
    Rat acc = 0;
    for (const auto& m : terms_) {
      Rat t = m.coef;
      for (int j = 0; j < n1_; ++j)
        for (int e = 0; e < m.xexp[j]; ++e) t *= x[j];
      for (int j = 0; j < n2_; ++j)
        for (int e = 0; e < m.yexp[j]; ++e) t *= y[j];
      acc += t;
    }
    return acc;
  }

  double evaluate_real(const std::vector<double>& x, const std::vector<double>& y) const {
    check_point_sizes(x.size(), y.size());
    double acc = 0.0;
    for (const auto& m : terms_) {
      double t = m.coef.convert_to<double>();
      for (int j = 0; j < n1_; ++j)
        for (int e = 0; e < m.xexp[j]; ++e) t *= x[j];
      for (int j = 0; j < n2_; ++j)
        for (int e = 0; e < m.yexp[j]; ++e) t *= y[j];
      acc += t;
    }
    return acc;
  }

  // Formal partial derivative in x_j (0-based j).
  Form partial_x(int j) const {
    if (j < 0 || j >= n1_) throw std::invalid_argument("partial_x: index out of range");
    if (d1_ == 0) return Form(n1_, n2_, 0, d2_);
    std::vector<Monomial> out;
    for (const auto& m : terms_) {
      if (m.xexp[j] == 0) continue;
      Monomial t = m;
      t.coef *= t.xexp[j];
      t.xexp[j] -= 1;
      out.push_back(std::move(t));
    }
    return Form(n1_, n2_, d1_ - 1, d2_, std::move(out));
  }

  Form partial_y(int j) const {
    if (j < 0 || j >= n2_) throw std::invalid_argument("partial_y: index out of range");
    if (d2_ == 0) return Form(n1_, n2_, d1_, 0);
    std::vector<Monomial> out;
    for (const auto& m : terms_) {
      if (m.yexp[j] == 0) continue;
      Monomial t = m;
      t.coef *= t.yexp[j];
      t.yexp[j] -= 1;
      out.push_back(std::move(t));
    }
    return Form(n1_, n2_, d1_, d2_ - 1, std::move(out));
  }

  // Substitutes integer values for y, leaving a form of bidegree (d1, 0)
  // in x alone (the y-exponent tuples become zero).
  template <typename TY>
  Form specialize_y(const std::vector<TY>& y) const {
    if (static_cast<int>(y.size()) != n2_)
      throw std::invalid_argument("specialize_y: wrong y length");
    std::vector<Monomial> out;
    for (const auto& m : terms_) {
      Monomial t;
      t.coef = m.coef;
      for (int j = 0; j < n2_; ++j)
        for (int e = 0; e < m.yexp[j]; ++e) t.coef *= Int(y[j]);
      t.xexp = m.xexp;
      t.yexp.assign(n2_, 0);
      out.push_back(std::move(t));
    }
    return Form(n1_, n2_, d1_, 0, std::move(out));
  }

  template <typename TX>
  Form specialize_x(const std::vector<TX>& x) const {
    return transpose().specialize_y(x).transpose();
  }

  // Swaps the roles of x and y.
  Form transpose() const {
    std::vector<Monomial> out;
    for (const auto& m : terms_) out.push_back(Monomial{m.coef, m.yexp, m.xexp});
    return Form(n2_, n1_, d2_, d1_, std::move(out));
  }

  Form scaled(const Int& c) const {
    std::vector<Monomial> out = terms_;
    for (auto& m : out) m.coef *= c;
    return Form(n1_, n2_, d1_, d2_, std::move(out));
  }

  // Canonical text rendering; parse(render(f)) reproduces f for nonzero f.
  std::string render() const {
    if (terms_.empty()) return "0";
    std::ostringstream os;
    bool first = true;
    for (const auto& m : terms_) {
      Int c = m.coef;
      bool neg = c < 0;
      if (first) {
        if (neg) os << "-";
      } else {
        os << (neg ? " - " : " + ");
      }
      if (neg) c = -c;
      bool wrote = false;
      if (c != 1) { os << c.str(); wrote = true; }
      auto emit = [&](char v, const std::vector<int>& exp) {
        for (std::size_t j = 0; j < exp.size(); ++j) {
          if (exp[j] == 0) continue;
          if (wrote) os << "*";
          os << v << (j + 1);
          if (exp[j] > 1) os << "^" << exp[j];
          wrote = true;
        }
      };
      emit('x', m.xexp);
      emit('y', m.yexp);
      if (!wrote) os << "1";  // degree-zero corner case
      first = false;
    }
    return os.str();
  }

 private:
  void validate_term(const Monomial& m) const {
    if (static_cast<int>(m.xexp.size()) != n1_ || static_cast<int>(m.yexp.size()) != n2_)
      throw std::invalid_argument("Form: exponent tuple length mismatch");
    int sx = 0, sy = 0;
    for (int e : m.xexp) { if (e < 0) throw std::invalid_argument("Form: negative exponent"); sx += e; }
    for (int e : m.yexp) { if (e < 0) throw std::invalid_argument("Form: negative exponent"); sy += e; }
    if (sx != d1_ || sy != d2_)
      throw std::invalid_argument("Form: monomial bidegree (" + std::to_string(sx) + "," +
                                  std::to_string(sy) + ") != (" + std::to_string(d1_) + "," +
                                  std::to_string(d2_) + ")");
  }

  void check_point_sizes(std::size_t nx, std::size_t ny) const {
    if (static_cast<int>(nx) != n1_ || static_cast<int>(ny) != n2_)
      throw std::invalid_argument("evaluate: point dimension mismatch");
  }

  // Sort canonically, merge equal exponent tuples, drop zero coefficients.
  void normalize(std::vector<Monomial> terms) {
    std::sort(terms.begin(), terms.end(), monomial_before);
    terms_.clear();
    for (auto& m : terms) {
      if (!terms_.empty() && terms_.back().same_exponents(m))
        terms_.back().coef += m.coef;
      else
        terms_.push_back(std::move(m));
    }
    terms_.erase(std::remove_if(terms_.begin(), terms_.end(),
                                [](const Monomial& m) { return m.coef == 0; }),
                 terms_.end());
  }

  int n1_, n2_, d1_, d2_;
  std::vector<Monomial> terms_;
};

// A system of R forms sharing (n1, n2, d1, d2).
class FormSystem {
 public:
  explicit FormSystem(std::vector<Form> forms) : forms_(std::move(forms)) {
    if (forms_.empty()) throw std::invalid_argument("FormSystem: empty system");
    for (const auto& f : forms_)
      if (f.n1() != forms_[0].n1() || f.n2() != forms_[0].n2() ||
          f.d1() != forms_[0].d1() || f.d2() != forms_[0].d2())
        throw std::invalid_argument("FormSystem: mixed shapes or bidegrees");
  }

  int R() const { return static_cast<int>(forms_.size()); }
  int n1() const { return forms_[0].n1(); }
  int n2() const { return forms_[0].n2(); }
  int d1() const { return forms_[0].d1(); }
  int d2() const { return forms_[0].d2(); }
  const std::vector<Form>& forms() const { return forms_; }
  const Form& operator[](int i) const { return forms_.at(i); }

  template <typename TX, typename TY>
  bool vanishes_at(const std::vector<TX>& x, const std::vector<TY>& y) const {
    for (const auto& f : forms_)
      if (f.evaluate(x, y) != 0) return false;
    return true;
  }

  FormSystem transpose() const {
    std::vector<Form> t;
    for (const auto& f : forms_) t.push_back(f.transpose());
    return FormSystem(std::move(t));
  }

  template <typename TY>
  FormSystem specialize_y(const std::vector<TY>& y) const {
    std::vector<Form> t;
    for (const auto& f : forms_) t.push_back(f.specialize_y(y));
    return FormSystem(std::move(t));
  }

 private:
  std::vector<Form> forms_;
};

// Exact rank of a rational matrix by Gaussian elimination.
inline int rational_rank(std::vector<std::vector<Rat>> a) {
  int rows = static_cast<int>(a.size());
  if (rows == 0) return 0;
  int cols = static_cast<int>(a[0].size());
  int rank = 0;
  for (int c = 0; c < cols && rank < rows; ++c) {
    int piv = -1;
    for (int r = rank; r < rows; ++r)
      if (a[r][c] != 0) { piv = r; break; }
    if (piv < 0) continue;
    std::swap(a[rank], a[piv]);
    for (int r = rank + 1; r < rows; ++r) {
      if (a[r][c] == 0) continue;
      Rat f = a[r][c] / a[rank][c];
      for (int cc = c; cc < cols; ++cc) a[r][cc] -= f * a[rank][cc];
    }
    ++rank;
  }
  return rank;
}

// Rank of the R x n1 Jacobian (dF_i/dx_j) at a rational point.
inline int jacobian_rank_x(const FormSystem& sys, const std::vector<Rat>& x,
                           const std::vector<Rat>& y) {
  std::vector<std::vector<Rat>> jac(sys.R(), std::vector<Rat>(sys.n1()));
  for (int i = 0; i < sys.R(); ++i)
    for (int j = 0; j < sys.n1(); ++j)
      jac[i][j] = sys[i].partial_x(j).evaluate_rat(x, y);
  return rational_rank(std::move(jac));
}

inline int jacobian_rank_y(const FormSystem& sys, const std::vector<Rat>& x,
                           const std::vector<Rat>& y) {
  std::vector<std::vector<Rat>> jac(sys.R(), std::vector<Rat>(sys.n2()));
  for (int i = 0; i < sys.R(); ++i)
    for (int j = 0; j < sys.n2(); ++j)
      jac[i][j] = sys[i].partial_y(j).evaluate_rat(x, y);
  return rational_rank(std::move(jac));
}

}  // namespace bihom
