#pragma once

// Text format for bihomogeneous forms.
//
//   form   := ["-"] term (("+"|"-") term)*
//   term   := (integer "*")? factor ("*" factor)*
//   factor := ("x"|"y") index ("^" positive-integer)?
//
// Indices are 1-based and bounded by (n1, n2); coefficients are unbounded
// decimal integers; exponent 0 is rejected.  Whitespace is allowed between
// tokens.  Errors carry the byte offset of the offending token.

#include "bihom/forms.hpp"

#include <cctype>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace bihom {

enum class ParseErrorKind {
  Syntax,
  UnknownVariable,
  IndexOutOfRange,
  NonBihomogeneous,
  EmptyForm,
  BidegreeMismatch,
  EmptySystem,
};

inline const char* to_string(ParseErrorKind k) {
  switch (k) {
    case ParseErrorKind::Syntax: return "Syntax";
    case ParseErrorKind::UnknownVariable: return "UnknownVariable";
    case ParseErrorKind::IndexOutOfRange: return "IndexOutOfRange";
    case ParseErrorKind::NonBihomogeneous: return "NonBihomogeneous";
    case ParseErrorKind::EmptyForm: return "EmptyForm";
    case ParseErrorKind::BidegreeMismatch: return "BidegreeMismatch";
    case ParseErrorKind::EmptySystem: return "EmptySystem";
  }
  return "?";
}

struct ParseError : std::runtime_error {
  ParseErrorKind kind;
  std::size_t pos;  // byte offset into the source string
  ParseError(ParseErrorKind k, std::size_t p, const std::string& msg)
      : std::runtime_error(std::string(to_string(k)) + " at byte " + std::to_string(p) +
                           ": " + msg),
        kind(k), pos(p) {}
};

namespace detail {

class FormScanner {
 public:
  FormScanner(const std::string& src, int n1, int n2) : s_(src), n1_(n1), n2_(n2) {}

  Form parse() {
    skip_ws();
    if (eof()) throw ParseError(ParseErrorKind::EmptyForm, 0, "no terms");
    std::vector<Monomial> terms;
    std::vector<std::size_t> term_pos;
    std::vector<std::pair<int, int>> bidegs;
    int sign = 1;
    if (peek() == '-') { sign = -1; ++i_; }
    for (;;) {
      skip_ws();
      term_pos.push_back(i_);
      auto [m, dx, dy] = parse_term(sign);
      terms.push_back(std::move(m));
      bidegs.emplace_back(dx, dy);
      skip_ws();
      if (eof()) break;
      char c = peek();
      if (c == '+') sign = 1;
      else if (c == '-') sign = -1;
      else throw ParseError(ParseErrorKind::Syntax, i_, "expected '+' or '-'");
      ++i_;
    }
    for (std::size_t t = 1; t < bidegs.size(); ++t)
      if (bidegs[t] != bidegs[0])
        throw ParseError(ParseErrorKind::NonBihomogeneous, term_pos[t],
                         "term bidegree (" + std::to_string(bidegs[t].first) + "," +
                         std::to_string(bidegs[t].second) + ") differs from (" +
                         std::to_string(bidegs[0].first) + "," +
                         std::to_string(bidegs[0].second) + ")");
    return Form(n1_, n2_, bidegs[0].first, bidegs[0].second, std::move(terms));
  }

 private:
  bool eof() const { return i_ >= s_.size(); }
  char peek() const { return s_[i_]; }
  void skip_ws() { while (!eof() && (s_[i_] == ' ' || s_[i_] == '\t')) ++i_; }

  Int parse_integer() {
    std::size_t start = i_;
    while (!eof() && std::isdigit(static_cast<unsigned char>(peek()))) ++i_;
    if (i_ == start) throw ParseError(ParseErrorKind::Syntax, start, "expected integer");
    return Int(s_.substr(start, i_ - start));
  }

  // factor := ("x"|"y") index ("^" positive-integer)?
  // Accumulates into the exponent tuples; returns degree contribution.
  void parse_factor(Monomial& m, int& dx, int& dy) {
    std::size_t start = i_;
    char v = peek();
    if (v != 'x' && v != 'y') {
      if (std::isalpha(static_cast<unsigned char>(v)))
        throw ParseError(ParseErrorKind::UnknownVariable, start,
                         std::string("unknown variable '") + v + "'");
      throw ParseError(ParseErrorKind::Syntax, start, "expected variable");
    }
    ++i_;
    if (eof() || !std::isdigit(static_cast<unsigned char>(peek())))
      throw ParseError(ParseErrorKind::Syntax, i_, "expected variable index");
    std::size_t idx_pos = i_;
    Int idx_big = parse_integer();
    int limit = (v == 'x') ? n1_ : n2_;
    if (idx_big < 1 || idx_big > limit)
      throw ParseError(ParseErrorKind::IndexOutOfRange, idx_pos,
                       std::string(1, v) + idx_big.str() + " out of range 1.." +
                       std::to_string(limit));
    int idx = idx_big.convert_to<int>();
    int exp = 1;
    skip_ws();
    if (!eof() && peek() == '^') {
      ++i_;
      skip_ws();
      std::size_t exp_pos = i_;
      Int e = parse_integer();
      if (e < 1)
        throw ParseError(ParseErrorKind::Syntax, exp_pos, "exponent must be positive");
      if (e > 64)
        throw ParseError(ParseErrorKind::Syntax, exp_pos, "exponent too large");
      exp = e.convert_to<int>();
    }
    if (v == 'x') { m.xexp[idx - 1] += exp; dx += exp; }
    else          { m.yexp[idx - 1] += exp; dy += exp; }
  }

  std::tuple<Monomial, int, int> parse_term(int sign) {
    Monomial m;
    m.coef = sign;
    m.xexp.assign(n1_, 0);
    m.yexp.assign(n2_, 0);
    int dx = 0, dy = 0;
    skip_ws();
    if (eof()) throw ParseError(ParseErrorKind::Syntax, i_, "expected term");
    if (std::isdigit(static_cast<unsigned char>(peek()))) {
      m.coef *= parse_integer();
      skip_ws();
      if (eof() || peek() != '*')
        throw ParseError(ParseErrorKind::Syntax, i_, "expected '*' after coefficient");
      ++i_;
      skip_ws();
    }
    parse_factor(m, dx, dy);
    for (;;) {
      skip_ws();
      if (eof() || peek() != '*') break;
      ++i_;
      skip_ws();
      if (eof()) throw ParseError(ParseErrorKind::Syntax, i_, "expected factor after '*'");
      parse_factor(m, dx, dy);
    }
    return {std::move(m), dx, dy};
  }

  const std::string& s_;
  std::size_t i_ = 0;
  int n1_, n2_;
};

}  // namespace detail

inline Form parse_form(const std::string& src, int n1, int n2) {
  return detail::FormScanner(src, n1, n2).parse();
}

inline FormSystem parse_system(const std::vector<std::string>& sources, int n1, int n2) {
  if (sources.empty())
    throw ParseError(ParseErrorKind::EmptySystem, 0, "system has no forms");
  std::vector<Form> forms;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    Form f = parse_form(sources[i], n1, n2);
    if (!forms.empty() && (f.d1() != forms[0].d1() || f.d2() != forms[0].d2()))
      throw ParseError(ParseErrorKind::BidegreeMismatch, 0,
                       "form " + std::to_string(i + 1) + " has bidegree (" +
                       std::to_string(f.d1()) + "," + std::to_string(f.d2()) +
                       ") but form 1 has (" + std::to_string(forms[0].d1()) + "," +
                       std::to_string(forms[0].d2()) + ")");
    forms.push_back(std::move(f));
  }
  return FormSystem(std::move(forms));
}

}  // namespace bihom
