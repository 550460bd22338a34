#pragma once

// Recursive-descent parser for the model DSL.
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' unary)?          (right-associative)
//   primary := number | identifier | name '(' expr ')' | '(' expr ')'
//
// Identifiers: x1, x2, lambda, i, thetaK, thetaK_D...D (K in 1..9, D in {1,2}),
// and lowercase parameter names. A minus sign applied directly to a numeric
// literal yields a negative constant; "a/b" with two rational operands folds
// to a rational constant.

#include <cctype>
#include <cerrno>
#include <cstdlib>
#include <set>
#include <string_view>

#include "solsurf/symexpr/expr.hpp"

namespace solsurf {

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " at byte " + std::to_string(offset)), offset_(offset) {}
  [[nodiscard]] std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

struct ParseOptions {
  /// When set, only these bare identifiers are accepted as parameters.
  std::optional<std::set<std::string>> parameters;
};

namespace detail {

class Parser {
 public:
  Parser(std::string_view text, const ParseOptions& opts) : text_(text), opts_(opts) {}

  Expr parse() {
    Expr e = expr();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected character '" + std::string(1, text_[pos_]) + "'");
    return e;
  }

 private:
  struct Operand {
    Expr value;
    bool bare_literal = false;
  };

  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, pos_); }
  [[noreturn]] void fail_at(const std::string& msg, std::size_t at) const { throw ParseError(msg, at); }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  [[nodiscard]] char peek() {
    skip_ws();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }

  Expr expr() {
    std::vector<Expr> terms{term()};
    for (;;) {
      if (accept('+'))
        terms.push_back(term());
      else if (accept('-'))
        terms.push_back(Expr::raw_neg(term()));
      else
        break;
    }
    return terms.size() == 1 ? terms.front() : Expr::raw_sum(std::move(terms));
  }

  Expr term() {
    Expr acc = unary().value;
    bool any = false;
    std::vector<Expr> factors{acc};
    for (;;) {
      std::size_t at = (skip_ws(), pos_);
      if (accept('*')) {
        factors.push_back(unary().value);
        any = true;
      } else if (accept('/')) {
        Expr d = unary().value;
        Expr left = factors.size() == 1 ? factors.front() : Expr{};
        if (factors.size() == 1 && left.is_rational() && d.is_rational()) {
          if (d.rational_value().num == 0) fail_at("division by zero", at);
          auto q = Rational::make(static_cast<__int128>(left.rational_value().num) * d.rational_value().den,
                                  static_cast<__int128>(left.rational_value().den) * d.rational_value().num);
          if (!q) fail_at("rational constant overflow", at);
          factors = {Expr::rational(*q)};
          continue;
        }
        factors.push_back(Expr::raw_power(d, Expr::integer(-1)));
        any = true;
      } else {
        break;
      }
    }
    if (!any) return factors.front();
    return Expr::raw_product(std::move(factors));
  }

  Operand unary() {
    if (accept('-')) {
      Operand inner = unary();
      if (inner.bare_literal) {
        const Expr& v = inner.value;
        if (v.is_rational()) return {Expr::rational(Rational{-v.rational_value().num, v.rational_value().den}), false};
        return {Expr::real(-v.float_value()), false};
      }
      return {Expr::raw_neg(inner.value), false};
    }
    return power();
  }

  Operand power() {
    Operand base = primary();
    if (accept('^')) {
      Expr e = unary().value;
      return {Expr::raw_power(base.value, e), false};
    }
    return base;
  }

  Operand primary() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      Expr e = expr();
      if (!accept(')')) fail("expected ')'");
      return {e, false};
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return {number(), true};
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return {identifier(), false};
    fail("unexpected character '" + std::string(1, c) + "'");
  }

  Expr number() {
    std::size_t start = pos_;
    bool is_float = false;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (pos_ < text_.size() && text_[pos_] == '.') {
      is_float = true;
      ++pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t save = pos_;
      ++pos_;
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
      if (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        is_float = true;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      } else {
        pos_ = save;
      }
    }
    std::string tok(text_.substr(start, pos_ - start));
    if (tok == ".") fail_at("malformed number", start);
    if (!is_float) {
      errno = 0;
      char* end = nullptr;
      long long v = std::strtoll(tok.c_str(), &end, 10);
      if (errno == 0) return Expr::integer(v);
    }
    return Expr::real(std::strtod(tok.c_str(), nullptr));
  }

  Expr identifier() {
    std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      ++pos_;
    std::string name(text_.substr(start, pos_ - start));
    bool call = peek() == '(';
    if (call) {
      auto f = fn_from_name(name);
      if (!f) fail_at("unknown function name '" + name + "'", start);
      ++pos_;
      Expr arg = expr();
      if (!accept(')')) fail("expected ')'");
      return Expr::raw_func(*f, arg);
    }
    if (fn_from_name(name)) fail_at("function '" + name + "' used without an argument", start);
    if (name == "x1") return Expr::x1();
    if (name == "x2") return Expr::x2();
    if (name == "lambda") return Expr::lambda();
    if (name == "i") return Expr::imag();
    if (name.rfind("theta", 0) == 0 && name.size() > 5 && std::isdigit(static_cast<unsigned char>(name[5])))
      return jet(name, start);
    for (char ch : name) {
      if (!(std::islower(static_cast<unsigned char>(ch)) || std::isdigit(static_cast<unsigned char>(ch)) || ch == '_'))
        fail_at("identifier '" + name + "' is not a lowercase parameter name", start);
    }
    if (opts_.parameters && !opts_.parameters->count(name))
      fail_at("undeclared parameter '" + name + "'", start);
    return Expr::param(name);
  }

  Expr jet(const std::string& name, std::size_t start) {
    std::size_t k = 5;
    std::size_t digits_end = k;
    while (digits_end < name.size() && std::isdigit(static_cast<unsigned char>(name[digits_end]))) ++digits_end;
    if (digits_end - k != 1 || name[k] == '0')
      fail_at("field index of '" + name + "' must be a single digit 1..9", start + k);
    int field = name[k] - '0';
    if (digits_end == name.size()) return Expr::theta(field);
    if (name[digits_end] != '_' || digits_end + 1 == name.size())
      fail_at("malformed jet variable '" + name + "'", start + digits_end);
    int n1 = 0;
    int n2 = 0;
    for (std::size_t p = digits_end + 1; p < name.size(); ++p) {
      if (name[p] == '1')
        ++n1;
      else if (name[p] == '2')
        ++n2;
      else
        fail_at("jet index digit other than 1 or 2 in '" + name + "'", start + p);
    }
    return Expr::theta(field, n1, n2);
  }

  std::string_view text_;
  const ParseOptions& opts_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline Expr parse_expr(std::string_view text, const ParseOptions& opts = {}) {
  return detail::Parser(text, opts).parse();
}

}  // namespace solsurf
