#pragma once

// Algebraic constructors. Each applies only local rules that are sound for
// complex arithmetic: 0/1 absorption, folding of numeric constants, double
// negation. No trigonometric or branch-dependent rewriting is performed.

#include <unordered_map>

#include "solsurf/symexpr/expr.hpp"

namespace solsurf {

namespace detail {

// Sum or product of two numeric constants, exact when both are rational.
inline Expr fold_numbers(const Expr& a, const Expr& b, bool product) {
  if (a.is_rational() && b.is_rational()) {
    auto r = product ? a.rational_value() * b.rational_value() : a.rational_value() + b.rational_value();
    if (r) return Expr::rational(*r);
  }
  double x = a.number_value();
  double y = b.number_value();
  return Expr::real(product ? x * y : x + y);
}

inline Expr negate_number(const Expr& a) {
  if (a.is_rational()) return Expr::rational(Rational{-a.rational_value().num, a.rational_value().den});
  return Expr::real(-a.float_value());
}

}  // namespace detail

inline Expr neg(const Expr& x) {
  if (x.is_number()) return detail::negate_number(x);
  if (x.op() == Op::Neg) return x.arg(0);
  return Expr::raw_neg(x);
}

inline Expr add(std::vector<Expr> terms) {
  std::vector<Expr> out;
  std::optional<Expr> constant;
  for (auto& t : terms) {
    std::vector<Expr> pieces;
    if (t.op() == Op::Sum)
      pieces = t.args();
    else
      pieces.push_back(t);
    for (auto& p : pieces) {
      if (p.is_number()) {
        constant = constant ? detail::fold_numbers(*constant, p, false) : p;
      } else {
        out.push_back(std::move(p));
      }
    }
  }
  if (constant && !constant->is_zero()) out.push_back(*constant);
  if (out.empty()) return constant ? *constant : Expr{};
  return Expr::raw_sum(std::move(out));
}

inline Expr mul(std::vector<Expr> factors) {
  std::vector<Expr> out;
  std::optional<Expr> constant;
  bool negate = false;
  for (auto& f : factors) {
    std::vector<Expr> pieces;
    if (f.op() == Op::Product)
      pieces = f.args();
    else
      pieces.push_back(f);
    for (auto& p : pieces) {
      if (p.op() == Op::Neg) {
        negate = !negate;
        p = p.arg(0);
      }
      if (p.is_number()) {
        if (p.is_zero()) return p.is_rational() ? Expr{} : Expr::real(0.0);
        constant = constant ? detail::fold_numbers(*constant, p, true) : p;
      } else {
        out.push_back(std::move(p));
      }
    }
  }
  if (negate) constant = constant ? detail::negate_number(*constant) : Expr::integer(-1);
  if (constant && constant->is_minus_one() && !out.empty()) {
    return Expr::raw_neg(out.size() == 1 ? out.front() : Expr::raw_product(std::move(out)));
  }
  if (constant && !constant->is_one()) out.insert(out.begin(), *constant);
  if (out.empty()) return constant ? *constant : Expr::integer(1);
  return Expr::raw_product(std::move(out));
}

inline Expr pow(const Expr& base, const Expr& exponent) {
  if (exponent.is_zero()) return Expr::integer(1);
  if (exponent.is_one()) return base;
  if (base.is_one() && base.is_rational()) return base;
  if (base.is_rational() && exponent.is_integer()) {
    std::int64_t n = exponent.rational_value().num;
    if (base.is_zero() && n < 0) return Expr::raw_power(base, exponent);  // left for evaluation to reject
    if (n >= -64 && n <= 64) {
      Rational acc{1, 1};
      Rational b = base.rational_value();
      if (n < 0) {
        auto inv = Rational::make(b.den, b.num);
        if (!inv) return Expr::raw_power(base, exponent);
        b = *inv;
        n = -n;
      }
      bool ok = true;
      for (std::int64_t k = 0; k < n && ok; ++k) {
        auto next = acc * b;
        if (next)
          acc = *next;
        else
          ok = false;
      }
      if (ok) return Expr::rational(acc);
    }
  }
  // (b^m)^n = b^(mn) holds for integer n regardless of branch.
  if (base.op() == Op::Power && exponent.is_integer() && base.arg(1).is_integer()) {
    auto prod = base.arg(1).rational_value() * exponent.rational_value();
    if (prod) return pow(base.arg(0), Expr::rational(*prod));
  }
  return Expr::raw_power(base, exponent);
}

inline Expr apply(Fn f, const Expr& x) {
  if (x.is_zero()) {
    switch (f) {
      case Fn::Sin:
      case Fn::Tan:
      case Fn::Atan:
      case Fn::Sinh:
      case Fn::Tanh:
      case Fn::Sqrt: return Expr{};
      case Fn::Cos:
      case Fn::Cosh:
      case Fn::Exp: return Expr::integer(1);
      case Fn::Log: break;
    }
  }
  if (f == Fn::Log && x.is_one() && x.is_rational()) return Expr{};
  return Expr::raw_func(f, x);
}

inline Expr sin(const Expr& x) { return apply(Fn::Sin, x); }
inline Expr cos(const Expr& x) { return apply(Fn::Cos, x); }
inline Expr tan(const Expr& x) { return apply(Fn::Tan, x); }
inline Expr atan(const Expr& x) { return apply(Fn::Atan, x); }
inline Expr exp(const Expr& x) { return apply(Fn::Exp, x); }
inline Expr log(const Expr& x) { return apply(Fn::Log, x); }
inline Expr sinh(const Expr& x) { return apply(Fn::Sinh, x); }
inline Expr cosh(const Expr& x) { return apply(Fn::Cosh, x); }
inline Expr tanh(const Expr& x) { return apply(Fn::Tanh, x); }
inline Expr sqrt(const Expr& x) { return apply(Fn::Sqrt, x); }

inline Expr operator+(const Expr& a, const Expr& b) { return add({a, b}); }
inline Expr operator-(const Expr& a, const Expr& b) { return add({a, neg(b)}); }
inline Expr operator-(const Expr& a) { return neg(a); }
inline Expr operator*(const Expr& a, const Expr& b) { return mul({a, b}); }
inline Expr operator/(const Expr& a, const Expr& b) { return mul({a, pow(b, Expr::integer(-1))}); }
inline Expr operator+(const Expr& a, std::int64_t b) { return a + Expr::integer(b); }
inline Expr operator*(std::int64_t a, const Expr& b) { return Expr::integer(a) * b; }

inline Expr frac(std::int64_t n, std::int64_t d) {
  auto q = Rational::make(n, d);
  if (!q) throw Error("invalid rational constant");
  return Expr::rational(*q);
}

// ---------------------------------------------------------------------------

namespace detail {

// term = coefficient * rest, where the coefficient is a numeric constant.
inline std::pair<Expr, Expr> split_coefficient(const Expr& t) {
  if (t.is_number()) return {t, Expr::integer(1)};
  if (t.op() == Op::Neg) {
    auto [c, r] = split_coefficient(t.arg(0));
    return {negate_number(c), r};
  }
  if (t.op() == Op::Product && t.arg(0).is_number()) {
    std::vector<Expr> rest(t.args().begin() + 1, t.args().end());
    return {t.arg(0), rest.size() == 1 ? rest.front() : Expr::raw_product(std::move(rest))};
  }
  return {Expr::integer(1), t};
}

inline Expr collect_sum(const std::vector<Expr>& terms) {
  std::vector<std::pair<Expr, Expr>> groups;  // (rest, coefficient), in first-seen order
  std::unordered_map<Expr, std::size_t, ExprHash> index;
  for (const auto& t : terms) {
    auto [c, r] = split_coefficient(t);
    auto it = index.find(r);
    if (it == index.end()) {
      index.emplace(r, groups.size());
      groups.emplace_back(r, c);
    } else {
      groups[it->second].second = fold_numbers(groups[it->second].second, c, false);
    }
  }
  std::vector<Expr> out;
  for (auto& [r, c] : groups) {
    if (c.is_zero()) continue;
    out.push_back(mul({c, r}));
  }
  return add(std::move(out));
}

// Combine repeated factors b^m * b^n -> b^(m+n) for integer m, n.
inline Expr collect_product(const std::vector<Expr>& factors) {
  std::vector<std::pair<Expr, Expr>> groups;  // (base, integer exponent) or (factor, none)
  std::vector<bool> integral;
  std::unordered_map<Expr, std::size_t, ExprHash> index;
  for (const auto& f : factors) {
    Expr base = f;
    Expr e = Expr::integer(1);
    if (f.op() == Op::Power && f.arg(1).is_integer()) {
      base = f.arg(0);
      e = f.arg(1);
    } else if (f.op() == Op::Power || f.is_number()) {
      groups.emplace_back(f, Expr{});
      integral.push_back(false);
      continue;
    }
    auto it = index.find(base);
    if (it == index.end()) {
      index.emplace(base, groups.size());
      groups.emplace_back(base, e);
      integral.push_back(true);
    } else {
      groups[it->second].second = fold_numbers(groups[it->second].second, e, false);
    }
  }
  std::vector<Expr> out;
  for (std::size_t k = 0; k < groups.size(); ++k) {
    if (!integral[k])
      out.push_back(groups[k].first);
    else
      out.push_back(pow(groups[k].first, groups[k].second));
  }
  return mul(std::move(out));
}

}  // namespace detail

/// Bottom-up rebuild applying: constant folding, 0/1 absorption, flattening,
/// collection of identical terms in sums and of integer powers of identical
/// bases in products. Shared subtrees are simplified once.
inline Expr simplify(const Expr& e) {
  std::unordered_map<const detail::Node*, Expr> memo;
  std::function<Expr(const Expr&)> go = [&](const Expr& x) -> Expr {
    if (x.args().empty()) return x;
    if (auto it = memo.find(x.get()); it != memo.end()) return it->second;
    std::vector<Expr> a;
    a.reserve(x.args().size());
    for (const auto& c : x.args()) a.push_back(go(c));
    Expr r;
    switch (x.op()) {
      case Op::Sum: {
        Expr flat = add(a);
        r = flat.op() == Op::Sum ? detail::collect_sum(flat.args()) : flat;
        break;
      }
      case Op::Product: {
        Expr flat = mul(a);
        if (flat.op() == Op::Product) {
          r = detail::collect_product(flat.args());
        } else if (flat.op() == Op::Neg && flat.arg(0).op() == Op::Product) {
          r = neg(detail::collect_product(flat.arg(0).args()));
        } else {
          r = flat;
        }
        break;
      }
      case Op::Power: r = pow(a[0], a[1]); break;
      case Op::Neg: r = neg(a[0]); break;
      case Op::Func: r = apply(x.fn(), a[0]); break;
      default: r = x; break;
    }
    memo.emplace(x.get(), r);
    return r;
  };
  return go(e);
}

}  // namespace solsurf
