#pragma once

#include <map>
#include <span>
#include <unordered_map>

#include "solsurf/symexpr/expr.hpp"

namespace solsurf {

class EvalError : public Error {
 public:
  using Error::Error;
};

/// Values for the free symbols of an expression. Lookups never default.
class EvalContext {
 public:
  EvalContext& bind(const Symbol& s, cplx v) {
    values_[s] = v;
    return *this;
  }
  EvalContext& bind_coords(double x1, double x2) {
    values_[Symbol::x1()] = x1;
    values_[Symbol::x2()] = x2;
    return *this;
  }
  [[nodiscard]] std::optional<cplx> find(const Symbol& s) const {
    auto it = values_.find(s);
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }
  [[nodiscard]] cplx at(const Symbol& s) const {
    auto v = find(s);
    if (!v) throw EvalError("unbound symbol " + to_string(s));
    return *v;
  }
  [[nodiscard]] bool contains(const Symbol& s) const { return values_.count(s) != 0; }
  [[nodiscard]] const std::map<Symbol, cplx>& values() const { return values_; }

 private:
  std::map<Symbol, cplx> values_;
};

namespace detail {

inline cplx int_power(cplx b, std::int64_t n) {
  bool invert = n < 0;
  std::uint64_t m = invert ? static_cast<std::uint64_t>(-(n + 1)) + 1 : static_cast<std::uint64_t>(n);
  cplx acc = 1.0;
  while (m) {
    if (m & 1U) acc *= b;
    b *= b;
    m >>= 1U;
  }
  return invert ? 1.0 / acc : acc;
}

inline cplx apply_fn(Fn f, cplx u) {
  switch (f) {
    case Fn::Sin: return std::sin(u);
    case Fn::Cos: return std::cos(u);
    case Fn::Tan: return std::tan(u);
    case Fn::Atan: return std::atan(u);
    case Fn::Exp: return std::exp(u);
    case Fn::Log: return std::log(u);
    case Fn::Sinh: return std::sinh(u);
    case Fn::Cosh: return std::cosh(u);
    case Fn::Tanh: return std::tanh(u);
    case Fn::Sqrt: return std::sqrt(u);
  }
  return {};
}

inline bool finite(cplx v) { return std::isfinite(v.real()) && std::isfinite(v.imag()); }

[[noreturn]] inline void domain_error(const std::string& what, const Expr& node) {
  throw EvalError(what + " in " + to_string(node));
}

inline cplx eval_power(cplx b, const Expr& exponent, cplx e, const Expr& node) {
  if (exponent.is_integer()) {
    std::int64_t n = exponent.rational_value().num;
    if (n < 0 && b == cplx{}) domain_error("division by zero", node);
    return int_power(b, n);
  }
  if (b == cplx{}) {
    if (e.real() > 0) return {};
    domain_error("division by zero", node);
  }
  return std::pow(b, e);
}

inline cplx eval_func(Fn f, cplx u, const Expr& node) {
  if (f == Fn::Log && u == cplx{}) domain_error("log of zero", node);
  return apply_fn(f, u);
}

}  // namespace detail

/// Complex evaluation. Throws EvalError on unbound symbols and on domain
/// errors (log 0, division by 0, non-finite intermediate values).
inline cplx evaluate(const Expr& e, const EvalContext& ctx) {
  std::unordered_map<const detail::Node*, cplx> memo;
  std::function<cplx(const Expr&)> ev = [&](const Expr& x) -> cplx {
    if (auto it = memo.find(x.get()); it != memo.end()) return it->second;
    cplx r;
    switch (x.op()) {
      case Op::Rational: r = x.rational_value().value(); break;
      case Op::Float: r = x.float_value(); break;
      case Op::Imag: r = cplx{0.0, 1.0}; break;
      case Op::Symbol: r = ctx.at(x.symbol_value()); break;
      case Op::Sum:
        r = 0.0;
        for (const auto& a : x.args()) r += ev(a);
        break;
      case Op::Product:
        r = 1.0;
        for (const auto& a : x.args()) r *= ev(a);
        break;
      case Op::Neg: r = -ev(x.arg(0)); break;
      case Op::Power: r = detail::eval_power(ev(x.arg(0)), x.arg(1), ev(x.arg(1)), x); break;
      case Op::Func: r = detail::eval_func(x.fn(), ev(x.arg(0)), x); break;
    }
    if (!detail::finite(r)) detail::domain_error("non-finite value", x);
    memo.emplace(x.get(), r);
    return r;
  };
  return ev(e);
}

/// A batch of expressions flattened into a straight-line program over a slot
/// table. Structurally equal subtrees are computed once. Running a program
/// does not allocate beyond the caller's scratch buffer.
class Program {
 public:
  Program() = default;

  explicit Program(const std::vector<Expr>& outputs) {
    std::vector<Symbol> syms;
    for (const auto& e : outputs) {
      const auto& fs = e.free_symbols();
      std::vector<Symbol> merged;
      std::set_union(syms.begin(), syms.end(), fs.begin(), fs.end(), std::back_inserter(merged));
      syms = std::move(merged);
    }
    slots_ = std::move(syms);
    std::unordered_map<Expr, std::uint32_t, ExprHash> seen;
    for (const auto& e : outputs) outputs_.push_back(emit(e, seen));
  }

  [[nodiscard]] const std::vector<Symbol>& slots() const { return slots_; }
  [[nodiscard]] std::optional<std::size_t> slot_of(const Symbol& s) const {
    auto it = std::lower_bound(slots_.begin(), slots_.end(), s);
    if (it == slots_.end() || !(*it == s)) return std::nullopt;
    return static_cast<std::size_t>(it - slots_.begin());
  }
  [[nodiscard]] std::size_t output_count() const { return outputs_.size(); }
  [[nodiscard]] std::size_t instruction_count() const { return code_.size(); }

  /// Evaluates all outputs. slot_values follows slots(); out has output_count() entries.
  void run(std::span<const cplx> slot_values, std::span<cplx> out, std::vector<cplx>& scratch) const {
    scratch.resize(code_.size());
    for (std::size_t k = 0; k < code_.size(); ++k) {
      const Ins& in = code_[k];
      cplx r;
      switch (in.op) {
        case Op::Rational:
        case Op::Float:
        case Op::Imag: r = in.constant; break;
        case Op::Symbol: r = slot_values[in.a]; break;
        case Op::Sum:
          r = 0.0;
          for (std::uint32_t j = 0; j < in.count; ++j) r += scratch[operands_[in.a + j]];
          break;
        case Op::Product:
          r = 1.0;
          for (std::uint32_t j = 0; j < in.count; ++j) r *= scratch[operands_[in.a + j]];
          break;
        case Op::Neg: r = -scratch[in.a]; break;
        case Op::Power:
          if (in.integral) {
            cplx b = scratch[in.a];
            if (in.exponent < 0 && b == cplx{}) detail::domain_error("division by zero", nodes_[k]);
            r = detail::int_power(b, in.exponent);
          } else {
            r = detail::eval_power(scratch[in.a], nodes_[k].arg(1), scratch[in.b], nodes_[k]);
          }
          break;
        case Op::Func: r = detail::eval_func(in.fn, scratch[in.a], nodes_[k]); break;
      }
      if (!detail::finite(r)) detail::domain_error("non-finite value", nodes_[k]);
      scratch[k] = r;
    }
    for (std::size_t o = 0; o < outputs_.size(); ++o) out[o] = scratch[outputs_[o]];
  }

 private:
  struct Ins {
    Op op = Op::Rational;
    Fn fn = Fn::Sin;
    bool integral = false;
    std::uint32_t a = 0;
    std::uint32_t b = 0;
    std::uint32_t count = 0;
    std::int64_t exponent = 0;
    cplx constant{};
  };

  std::uint32_t emit(const Expr& e, std::unordered_map<Expr, std::uint32_t, ExprHash>& seen) {
    if (auto it = seen.find(e); it != seen.end()) return it->second;
    Ins in;
    in.op = e.op();
    switch (e.op()) {
      case Op::Rational: in.constant = e.rational_value().value(); break;
      case Op::Float: in.constant = e.float_value(); break;
      case Op::Imag: in.constant = cplx{0.0, 1.0}; break;
      case Op::Symbol: in.a = static_cast<std::uint32_t>(*slot_of(e.symbol_value())); break;
      case Op::Sum:
      case Op::Product: {
        std::vector<std::uint32_t> ops;
        for (const auto& a : e.args()) ops.push_back(emit(a, seen));
        in.a = static_cast<std::uint32_t>(operands_.size());
        in.count = static_cast<std::uint32_t>(ops.size());
        operands_.insert(operands_.end(), ops.begin(), ops.end());
        break;
      }
      case Op::Neg: in.a = emit(e.arg(0), seen); break;
      case Op::Power:
        in.a = emit(e.arg(0), seen);
        if (e.arg(1).is_integer()) {
          in.integral = true;
          in.exponent = e.arg(1).rational_value().num;
        } else {
          in.b = emit(e.arg(1), seen);
        }
        break;
      case Op::Func:
        in.fn = e.fn();
        in.a = emit(e.arg(0), seen);
        break;
    }
    auto idx = static_cast<std::uint32_t>(code_.size());
    code_.push_back(in);
    nodes_.push_back(e);
    seen.emplace(e, idx);
    return idx;
  }

  std::vector<Symbol> slots_;
  std::vector<Ins> code_;
  std::vector<Expr> nodes_;
  std::vector<std::uint32_t> operands_;
  std::vector<std::uint32_t> outputs_;
};

}  // namespace solsurf
