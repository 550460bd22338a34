#pragma once

// Partial and total derivatives on the jet space, and prolongation of
// evolutionary vector fields w_R = R^k d/dtheta^k.

#include <map>
#include <unordered_map>

#include "solsurf/symexpr/algebra.hpp"

namespace solsurf {

/// Exact partial derivative. Every jet coordinate is an independent symbol.
inline Expr partial(const Expr& e, const Symbol& s) {
  std::unordered_map<const detail::Node*, Expr> memo;
  std::function<Expr(const Expr&)> d = [&](const Expr& x) -> Expr {
    if (!x.depends_on(s)) return Expr{};
    if (auto it = memo.find(x.get()); it != memo.end()) return it->second;
    Expr r;
    switch (x.op()) {
      case Op::Symbol: r = Expr::integer(1); break;
      case Op::Sum: {
        std::vector<Expr> terms;
        for (const auto& t : x.args())
          if (t.depends_on(s)) terms.push_back(d(t));
        r = add(std::move(terms));
        break;
      }
      case Op::Product: {
        std::vector<Expr> terms;
        const auto& f = x.args();
        for (std::size_t k = 0; k < f.size(); ++k) {
          if (!f[k].depends_on(s)) continue;
          std::vector<Expr> factors = f;
          factors[k] = d(f[k]);
          terms.push_back(mul(std::move(factors)));
        }
        r = add(std::move(terms));
        break;
      }
      case Op::Neg: r = neg(d(x.arg(0))); break;
      case Op::Power: {
        const Expr& b = x.arg(0);
        const Expr& p = x.arg(1);
        if (!p.depends_on(s)) {
          r = mul({p, pow(b, add({p, Expr::integer(-1)})), d(b)});
        } else if (!b.depends_on(s)) {
          r = mul({x, log(b), d(p)});
        } else {
          r = mul({x, add({mul({d(p), log(b)}), mul({p, d(b), pow(b, Expr::integer(-1))})})});
        }
        break;
      }
      case Op::Func: {
        const Expr& u = x.arg(0);
        Expr outer;
        switch (x.fn()) {
          case Fn::Sin: outer = cos(u); break;
          case Fn::Cos: outer = neg(sin(u)); break;
          case Fn::Tan: outer = add({Expr::integer(1), pow(x, Expr::integer(2))}); break;
          case Fn::Atan: outer = pow(add({Expr::integer(1), pow(u, Expr::integer(2))}), Expr::integer(-1)); break;
          case Fn::Exp: outer = x; break;
          case Fn::Log: outer = pow(u, Expr::integer(-1)); break;
          case Fn::Sinh: outer = cosh(u); break;
          case Fn::Cosh: outer = sinh(u); break;
          case Fn::Tanh: outer = add({Expr::integer(1), neg(pow(x, Expr::integer(2)))}); break;
          case Fn::Sqrt: outer = mul({frac(1, 2), pow(x, Expr::integer(-1))}); break;
        }
        r = mul({outer, d(u)});
        break;
      }
      default: r = Expr{}; break;
    }
    memo.emplace(x.get(), r);
    return r;
  };
  return d(e);
}

/// D_axis e = de/dx^axis + sum over jet variables theta^k_J present in e of
/// theta^k_{J,axis} * de/dtheta^k_J.
inline Expr total_derivative(const Expr& e, int axis) {
  if (axis != 1 && axis != 2) throw Error("total derivative axis must be 1 or 2");
  if (has_params(e)) throw Error("total derivative of an expression containing family parameters: " + to_string(e));
  std::vector<Expr> terms{partial(e, Symbol::coord(axis))};
  for (const auto& s : e.free_symbols()) {
    if (!s.is_jet()) continue;
    terms.push_back(mul({partial(e, s), Expr::symbol(Symbol::jet_var(s.jet.raised(axis)))}));
  }
  return add(std::move(terms));
}

/// Characteristic R = (R_1, ..., R_N) of an evolutionary vector field.
class Characteristic {
 public:
  Characteristic() = default;
  explicit Characteristic(std::vector<Expr> components) : components_(std::move(components)) {
    for (const auto& c : components_) {
      for (const auto& s : c.free_symbols()) {
        if (s.kind == SymbolKind::Lambda)
          throw Error("characteristic component depends on lambda: " + to_string(c));
        if (s.is_param())
          throw Error("characteristic component contains parameter '" + s.name + "': " + to_string(c));
      }
    }
  }

  [[nodiscard]] const std::vector<Expr>& components() const { return components_; }
  [[nodiscard]] std::size_t size() const { return components_.size(); }
  [[nodiscard]] const Expr& operator[](std::size_t k) const { return components_[k]; }
  [[nodiscard]] bool is_zero() const {
    return std::all_of(components_.begin(), components_.end(), [](const Expr& c) { return c.is_zero(); });
  }

 private:
  std::vector<Expr> components_;
};

/// Caches D_J R^k for repeated prolongations with the same characteristic.
class ProlongationCache {
 public:
  explicit ProlongationCache(Characteristic R) : R_(std::move(R)) {}

  const Expr& total_derivative_of(const JetIndex& j) {
    if (j.field < 1 || static_cast<std::size_t>(j.field) > R_.size())
      throw Error("characteristic has no component for field " + std::to_string(j.field));
    if (auto it = cache_.find(j); it != cache_.end()) return it->second;
    Expr v;
    if (j.order() == 0) {
      v = R_[static_cast<std::size_t>(j.field - 1)];
    } else if (j.n2 > 0) {
      v = total_derivative(total_derivative_of(JetIndex{j.field, j.n1, j.n2 - 1}), 2);
    } else {
      v = total_derivative(total_derivative_of(JetIndex{j.field, j.n1 - 1, 0}), 1);
    }
    return cache_.emplace(j, std::move(v)).first->second;
  }

  /// pr w_R (e) = sum over jets theta^k_J in e of (D_J R^k) de/dtheta^k_J.
  Expr apply(const Expr& e) {
    if (has_params(e)) throw Error("prolongation of an expression containing family parameters: " + to_string(e));
    std::vector<Expr> terms;
    for (const auto& s : e.free_symbols()) {
      if (!s.is_jet()) continue;
      const Expr& dr = total_derivative_of(s.jet);
      if (dr.is_zero()) continue;
      terms.push_back(mul({partial(e, s), dr}));
    }
    return add(std::move(terms));
  }

 private:
  Characteristic R_;
  std::map<JetIndex, Expr> cache_;
};

inline Expr prolong_scalar(const Characteristic& R, const Expr& e) { return ProlongationCache(R).apply(e); }

}  // namespace solsurf
