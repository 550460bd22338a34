#pragma once

// Immutable expression trees over the jet space: coordinates x1, x2, the
// spectral parameter lambda, jet variables theta^k_J and named family
// parameters. Nodes are shared and never mutated after construction, so an
// Expr can be copied freely and evaluated concurrently.

#include <algorithm>
#include <cmath>
#include <complex>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace solsurf {

using cplx = std::complex<double>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Jet coordinate theta^field_J. The multi-index J is a multiset over {1,2},
/// stored as the multiplicities of 1 and 2, so theta_12 and theta_21 are the
/// same coordinate by construction.
struct JetIndex {
  int field = 1;
  int n1 = 0;
  int n2 = 0;

  [[nodiscard]] int order() const { return n1 + n2; }

  [[nodiscard]] JetIndex raised(int axis) const {
    JetIndex j = *this;
    (axis == 1 ? j.n1 : j.n2) += 1;
    return j;
  }

  friend auto operator<=>(const JetIndex&, const JetIndex&) = default;
};

enum class SymbolKind : std::uint8_t { X1, X2, Lambda, Jet, Param };

struct Symbol {
  SymbolKind kind = SymbolKind::X1;
  JetIndex jet{};
  std::string name{};

  static Symbol x1() { return {SymbolKind::X1, {}, {}}; }
  static Symbol x2() { return {SymbolKind::X2, {}, {}}; }
  static Symbol coord(int axis) { return axis == 1 ? x1() : x2(); }
  static Symbol lambda() { return {SymbolKind::Lambda, {}, {}}; }
  static Symbol theta(int field, int n1 = 0, int n2 = 0) {
    return {SymbolKind::Jet, JetIndex{field, n1, n2}, {}};
  }
  static Symbol jet_var(JetIndex j) { return {SymbolKind::Jet, j, {}}; }
  static Symbol param(std::string n) { return {SymbolKind::Param, {}, std::move(n)}; }

  [[nodiscard]] bool is_jet() const { return kind == SymbolKind::Jet; }
  [[nodiscard]] bool is_param() const { return kind == SymbolKind::Param; }

  friend auto operator<=>(const Symbol&, const Symbol&) = default;
  friend bool operator==(const Symbol&, const Symbol&) = default;
};

/// DSL spelling: x1, x2, lambda, thetaK, thetaK_11..22, or the parameter name.
inline std::string to_string(const Symbol& s) {
  switch (s.kind) {
    case SymbolKind::X1: return "x1";
    case SymbolKind::X2: return "x2";
    case SymbolKind::Lambda: return "lambda";
    case SymbolKind::Param: return s.name;
    case SymbolKind::Jet: {
      std::string out = "theta" + std::to_string(s.jet.field);
      if (s.jet.order() > 0) {
        out += '_';
        out.append(static_cast<std::size_t>(s.jet.n1), '1');
        out.append(static_cast<std::size_t>(s.jet.n2), '2');
      }
      return out;
    }
  }
  return "?";
}

/// Exact rational constant with 64-bit numerator and positive denominator.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  /// Reduced rational, or nullopt when it does not fit in 64 bits.
  static std::optional<Rational> make(__int128 n, __int128 d) {
    if (d == 0) return std::nullopt;
    if (d < 0) {
      n = -n;
      d = -d;
    }
    __int128 a = n < 0 ? -n : n;
    __int128 b = d;
    while (b != 0) {
      __int128 t = a % b;
      a = b;
      b = t;
    }
    if (a > 1) {
      n /= a;
      d /= a;
    }
    constexpr __int128 lim = INT64_MAX;
    if (n > lim || n < -lim || d > lim) return std::nullopt;
    return Rational{static_cast<std::int64_t>(n), static_cast<std::int64_t>(d)};
  }

  [[nodiscard]] bool is_integer() const { return den == 1; }
  [[nodiscard]] double value() const { return static_cast<double>(num) / static_cast<double>(den); }

  friend std::optional<Rational> operator+(Rational a, Rational b) {
    return make(static_cast<__int128>(a.num) * b.den + static_cast<__int128>(b.num) * a.den,
                static_cast<__int128>(a.den) * b.den);
  }
  friend std::optional<Rational> operator*(Rational a, Rational b) {
    return make(static_cast<__int128>(a.num) * b.num, static_cast<__int128>(a.den) * b.den);
  }
  friend bool operator==(const Rational&, const Rational&) = default;
};

enum class Op : std::uint8_t { Rational, Float, Imag, Symbol, Sum, Product, Power, Neg, Func };
enum class Fn : std::uint8_t { Sin, Cos, Tan, Atan, Exp, Log, Sinh, Cosh, Tanh, Sqrt };

inline const char* fn_name(Fn f) {
  switch (f) {
    case Fn::Sin: return "sin";
    case Fn::Cos: return "cos";
    case Fn::Tan: return "tan";
    case Fn::Atan: return "atan";
    case Fn::Exp: return "exp";
    case Fn::Log: return "log";
    case Fn::Sinh: return "sinh";
    case Fn::Cosh: return "cosh";
    case Fn::Tanh: return "tanh";
    case Fn::Sqrt: return "sqrt";
  }
  return "?";
}

inline std::optional<Fn> fn_from_name(std::string_view n) {
  static constexpr std::pair<const char*, Fn> table[] = {
      {"sin", Fn::Sin},   {"cos", Fn::Cos},   {"tan", Fn::Tan},   {"atan", Fn::Atan},
      {"exp", Fn::Exp},   {"log", Fn::Log},   {"sinh", Fn::Sinh}, {"cosh", Fn::Cosh},
      {"tanh", Fn::Tanh}, {"sqrt", Fn::Sqrt}};
  for (const auto& [name, f] : table)
    if (n == name) return f;
  return std::nullopt;
}

class Expr;

namespace detail {
struct Node;
}

class Expr {
 public:
  /// The integer constant 0.
  Expr();

  static Expr integer(std::int64_t n) { return rational(Rational{n, 1}); }
  static Expr rational(Rational q);
  static Expr real(double v);
  static Expr imag();
  static Expr symbol(Symbol s);
  static Expr x1() { return symbol(Symbol::x1()); }
  static Expr x2() { return symbol(Symbol::x2()); }
  static Expr lambda() { return symbol(Symbol::lambda()); }
  static Expr theta(int field, int n1 = 0, int n2 = 0) { return symbol(Symbol::theta(field, n1, n2)); }
  static Expr param(std::string name) { return symbol(Symbol::param(std::move(name))); }

  // Structural constructors. They only flatten nested sums/products so that a
  // Sum never has a Sum child and a Product never has a Product child; no
  // other rewriting happens. Algebraic constructors live in algebra.hpp.
  static Expr raw_sum(std::vector<Expr> terms);
  static Expr raw_product(std::vector<Expr> factors);
  static Expr raw_power(Expr base, Expr exponent);
  static Expr raw_neg(Expr x);
  static Expr raw_func(Fn f, Expr x);

  [[nodiscard]] Op op() const;
  [[nodiscard]] const Rational& rational_value() const;
  [[nodiscard]] double float_value() const;
  [[nodiscard]] const Symbol& symbol_value() const;
  [[nodiscard]] Fn fn() const;
  [[nodiscard]] const std::vector<Expr>& args() const;
  [[nodiscard]] const Expr& arg(std::size_t i) const { return args()[i]; }
  [[nodiscard]] std::size_t hash() const;
  /// Sorted, unique free symbols of the subtree.
  [[nodiscard]] const std::vector<Symbol>& free_symbols() const;
  [[nodiscard]] bool depends_on(const Symbol& s) const {
    const auto& fs = free_symbols();
    return std::binary_search(fs.begin(), fs.end(), s);
  }
  [[nodiscard]] const detail::Node* get() const { return node_.get(); }

  [[nodiscard]] bool is_number() const { return op() == Op::Rational || op() == Op::Float; }
  [[nodiscard]] bool is_rational() const { return op() == Op::Rational; }
  [[nodiscard]] bool is_integer() const { return is_rational() && rational_value().is_integer(); }
  [[nodiscard]] bool is_zero() const {
    return (op() == Op::Rational && rational_value().num == 0) || (op() == Op::Float && float_value() == 0.0);
  }
  [[nodiscard]] bool is_one() const {
    return (op() == Op::Rational && rational_value() == Rational{1, 1}) || (op() == Op::Float && float_value() == 1.0);
  }
  [[nodiscard]] bool is_minus_one() const {
    return (op() == Op::Rational && rational_value() == Rational{-1, 1}) || (op() == Op::Float && float_value() == -1.0);
  }
  /// Numeric constant that would print with a leading minus sign.
  [[nodiscard]] bool is_negative_number() const {
    return (op() == Op::Rational && rational_value().num < 0) || (op() == Op::Float && std::signbit(float_value()));
  }
  [[nodiscard]] double number_value() const {
    return op() == Op::Rational ? rational_value().value() : float_value();
  }

  friend bool operator==(const Expr& a, const Expr& b);

 private:
  explicit Expr(std::shared_ptr<const detail::Node> n) : node_(std::move(n)) {}
  static Expr make(detail::Node n);

  std::shared_ptr<const detail::Node> node_;
};

namespace detail {

struct Node {
  Op op = Op::Rational;
  Rational q{};
  double f = 0.0;
  Symbol sym{};
  Fn fn = Fn::Sin;
  std::vector<Expr> args{};
  std::size_t hash = 0;
  std::vector<Symbol> free{};
};

inline std::size_t mix(std::size_t seed, std::size_t v) {
  return seed ^ (v + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2));
}

inline std::size_t symbol_hash(const Symbol& s) {
  std::size_t h = std::hash<int>{}(static_cast<int>(s.kind));
  h = mix(h, static_cast<std::size_t>(s.jet.field * 1000003 + s.jet.n1 * 1009 + s.jet.n2));
  return mix(h, std::hash<std::string>{}(s.name));
}

}  // namespace detail

inline Expr Expr::make(detail::Node n) {
  std::size_t h = std::hash<int>{}(static_cast<int>(n.op));
  switch (n.op) {
    case Op::Rational:
      h = detail::mix(h, std::hash<std::int64_t>{}(n.q.num));
      h = detail::mix(h, std::hash<std::int64_t>{}(n.q.den));
      break;
    case Op::Float: h = detail::mix(h, std::hash<double>{}(n.f)); break;
    case Op::Symbol:
      h = detail::mix(h, detail::symbol_hash(n.sym));
      n.free = {n.sym};
      break;
    case Op::Func: h = detail::mix(h, static_cast<std::size_t>(n.fn)); break;
    default: break;
  }
  for (const auto& a : n.args) {
    h = detail::mix(h, a.hash());
    const auto& fa = a.free_symbols();
    if (fa.empty()) continue;
    std::vector<Symbol> merged;
    merged.reserve(n.free.size() + fa.size());
    std::set_union(n.free.begin(), n.free.end(), fa.begin(), fa.end(), std::back_inserter(merged));
    n.free = std::move(merged);
  }
  n.hash = h;
  return Expr(std::make_shared<const detail::Node>(std::move(n)));
}

inline Expr::Expr() : Expr(rational(Rational{0, 1})) {}

inline Expr Expr::rational(Rational q) {
  detail::Node n;
  n.op = Op::Rational;
  n.q = q;
  return make(std::move(n));
}

inline Expr Expr::real(double v) {
  detail::Node n;
  n.op = Op::Float;
  n.f = v;
  return make(std::move(n));
}

inline Expr Expr::imag() {
  detail::Node n;
  n.op = Op::Imag;
  return make(std::move(n));
}

inline Expr Expr::symbol(Symbol s) {
  detail::Node n;
  n.op = Op::Symbol;
  n.sym = std::move(s);
  return make(std::move(n));
}

inline Expr Expr::raw_sum(std::vector<Expr> terms) {
  std::vector<Expr> flat;
  for (auto& t : terms) {
    if (t.op() == Op::Sum)
      flat.insert(flat.end(), t.args().begin(), t.args().end());
    else
      flat.push_back(std::move(t));
  }
  if (flat.size() == 1) return flat.front();
  if (flat.empty()) return Expr{};
  detail::Node n;
  n.op = Op::Sum;
  n.args = std::move(flat);
  return make(std::move(n));
}

inline Expr Expr::raw_product(std::vector<Expr> factors) {
  std::vector<Expr> flat;
  for (auto& t : factors) {
    if (t.op() == Op::Product)
      flat.insert(flat.end(), t.args().begin(), t.args().end());
    else
      flat.push_back(std::move(t));
  }
  if (flat.size() == 1) return flat.front();
  if (flat.empty()) return integer(1);
  detail::Node n;
  n.op = Op::Product;
  n.args = std::move(flat);
  return make(std::move(n));
}

inline Expr Expr::raw_power(Expr base, Expr exponent) {
  detail::Node n;
  n.op = Op::Power;
  n.args = {std::move(base), std::move(exponent)};
  return make(std::move(n));
}

inline Expr Expr::raw_neg(Expr x) {
  detail::Node n;
  n.op = Op::Neg;
  n.args = {std::move(x)};
  return make(std::move(n));
}

inline Expr Expr::raw_func(Fn f, Expr x) {
  detail::Node n;
  n.op = Op::Func;
  n.fn = f;
  n.args = {std::move(x)};
  return make(std::move(n));
}

inline Op Expr::op() const { return node_->op; }
inline const Rational& Expr::rational_value() const { return node_->q; }
inline double Expr::float_value() const { return node_->f; }
inline const Symbol& Expr::symbol_value() const { return node_->sym; }
inline Fn Expr::fn() const { return node_->fn; }
inline const std::vector<Expr>& Expr::args() const { return node_->args; }
inline std::size_t Expr::hash() const { return node_->hash; }
inline const std::vector<Symbol>& Expr::free_symbols() const { return node_->free; }

inline bool operator==(const Expr& a, const Expr& b) {
  if (a.node_ == b.node_) return true;
  const auto& x = *a.node_;
  const auto& y = *b.node_;
  if (x.hash != y.hash || x.op != y.op || x.args.size() != y.args.size()) return false;
  switch (x.op) {
    case Op::Rational:
      if (!(x.q == y.q)) return false;
      break;
    case Op::Float:
      if (x.f != y.f) return false;
      break;
    case Op::Symbol:
      if (!(x.sym == y.sym)) return false;
      break;
    case Op::Func:
      if (x.fn != y.fn) return false;
      break;
    default: break;
  }
  for (std::size_t i = 0; i < x.args.size(); ++i)
    if (!(x.args[i] == y.args[i])) return false;
  return true;
}

struct ExprHash {
  std::size_t operator()(const Expr& e) const { return e.hash(); }
};

inline std::vector<Symbol> free_symbols(const Expr& e) { return e.free_symbols(); }

inline bool has_params(const Expr& e) {
  return std::any_of(e.free_symbols().begin(), e.free_symbols().end(),
                     [](const Symbol& s) { return s.is_param(); });
}

// ---------------------------------------------------------------------------
// Printing. The output is valid DSL and parses back to the same tree.

namespace detail {

inline std::string format_float(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s = buf;
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

// Binding strength of the printed form: 1 sum, 2 product, 3 unary, 4 power, 5 atom.
inline int print_level(const Expr& e) {
  switch (e.op()) {
    case Op::Sum: return 1;
    case Op::Product: return 2;
    case Op::Neg: return 3;
    case Op::Power: return 4;
    case Op::Rational:
      if (!e.rational_value().is_integer()) return 5;  // printed in parentheses
      return e.rational_value().num < 0 ? 3 : 5;
    case Op::Float: return std::signbit(e.float_value()) ? 3 : 5;
    default: return 5;
  }
}

inline std::string print(const Expr& e);

inline std::string paren(const Expr& e, bool wrap) { return wrap ? "(" + print(e) + ")" : print(e); }

inline std::string print(const Expr& e) {
  switch (e.op()) {
    case Op::Rational: {
      const auto& q = e.rational_value();
      if (q.is_integer()) return std::to_string(q.num);
      return "(" + std::to_string(q.num) + "/" + std::to_string(q.den) + ")";
    }
    case Op::Float: return format_float(e.float_value());
    case Op::Imag: return "i";
    case Op::Symbol: return to_string(e.symbol_value());
    case Op::Func: return std::string(fn_name(e.fn())) + "(" + print(e.arg(0)) + ")";
    case Op::Neg: {
      const Expr& x = e.arg(0);
      // A bare literal after unary minus would be folded into a negative
      // constant by the parser, so it is parenthesized.
      bool wrap = print_level(x) < 3 || (x.is_number() && !x.is_negative_number());
      return "-" + paren(x, wrap);
    }
    case Op::Power: {
      const Expr& b = e.arg(0);
      const Expr& x = e.arg(1);
      return paren(b, print_level(b) < 5) + "^" + paren(x, print_level(x) < 5);
    }
    case Op::Product: {
      std::string out;
      for (std::size_t k = 0; k < e.args().size(); ++k) {
        const Expr& f = e.arg(k);
        bool reciprocal = k > 0 && f.op() == Op::Power && f.arg(1).is_rational() && f.arg(1).is_minus_one() &&
                          f.arg(0).op() != Op::Rational;
        if (reciprocal) {
          const Expr& b = f.arg(0);
          out += "/" + paren(b, print_level(b) < 3 || print_level(b) == 3);
          continue;
        }
        if (k > 0) out += "*";
        int lvl = print_level(f);
        out += paren(f, lvl < 2 || (k > 0 && lvl == 3));
      }
      return out;
    }
    case Op::Sum: {
      std::string out;
      for (std::size_t k = 0; k < e.args().size(); ++k) {
        const Expr& t = e.arg(k);
        if (k == 0) {
          out += print(t);
        } else if (t.op() == Op::Neg) {
          out += " - " + paren(t.arg(0), print_level(t.arg(0)) < 2);
        } else {
          out += " + " + paren(t, print_level(t) == 3);
        }
      }
      return out;
    }
  }
  return "?";
}

}  // namespace detail

inline std::string to_string(const Expr& e) { return detail::print(e); }

}  // namespace solsurf
