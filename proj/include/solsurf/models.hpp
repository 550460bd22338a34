#pragma once

// Integrable models: Lax potentials U1, U2, explicit solution families and
// named characteristics, loaded from a small TOML-style model file.

#include <cstdio>
#include <memory>
#include <mutex>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "solsurf/config_text.hpp"
#include "solsurf/liealg.hpp"

namespace solsurf {

class ModelError : public Error {
 public:
  using Error::Error;
};

using ParamValues = std::map<std::string, double>;

struct ParamSpec {
  std::string name;
  double lo = 0.5;
  double hi = 1.5;
};

/// scale * d(theta)/d(param) = R[theta] along the family.
struct Binding {
  std::string characteristic;
  std::string param;
  Expr scale;
};

struct NamedCharacteristic {
  std::string name;
  Characteristic R;
};

class SolutionFamily {
 public:
  std::string name;
  std::vector<ParamSpec> params;
  std::vector<Expr> fields;  // theta^k(x1, x2; params)
  std::vector<Binding> bindings;

  [[nodiscard]] const Binding* binding_for(const std::string& characteristic) const {
    for (const auto& b : bindings)
      if (b.characteristic == characteristic) return &b;
    return nullptr;
  }
  [[nodiscard]] const ParamSpec* param(const std::string& p) const {
    for (const auto& s : params)
      if (s.name == p) return &s;
    return nullptr;
  }

  /// d^{n1}/dx1^{n1} d^{n2}/dx2^{n2} theta^k as an expression in x1, x2 and the parameters.
  [[nodiscard]] Expr jet_expr(const JetIndex& j) const {
    if (j.field < 1 || static_cast<std::size_t>(j.field) > fields.size())
      throw ModelError("solution '" + name + "' has no field " + std::to_string(j.field) + " (requested " +
                       to_string(Symbol::jet_var(j)) + ")");
    std::lock_guard lock(cache_->mu);
    return jet_locked(j);
  }

  /// Binds x1, x2, the parameters, and every requested jet variable.
  [[nodiscard]] EvalContext eval_jets(const ParamValues& values, double x1, double x2,
                                      const std::vector<JetIndex>& needed) const {
    EvalContext pctx = param_context(values);
    pctx.bind_coords(x1, x2);
    EvalContext out;
    out.bind_coords(x1, x2);
    for (const auto& j : needed) out.bind(Symbol::jet_var(j), evaluate(jet_expr(j), pctx));
    return out;
  }

  [[nodiscard]] EvalContext param_context(const ParamValues& values) const {
    EvalContext ctx;
    for (const auto& p : params) {
      auto it = values.find(p.name);
      if (it == values.end()) throw ModelError("no value for parameter '" + p.name + "' of solution '" + name + "'");
      ctx.bind(Symbol::param(p.name), it->second);
    }
    return ctx;
  }

  /// Midpoint of every admissible range, overridden by the given values.
  [[nodiscard]] ParamValues defaults(const ParamValues& given = {}) const {
    ParamValues out;
    for (const auto& p : params) out[p.name] = 0.5 * (p.lo + p.hi);
    for (const auto& [k, v] : given) {
      if (!param(k)) throw ModelError("solution '" + name + "' has no parameter '" + k + "'");
      out[k] = v;
    }
    return out;
  }

 private:
  struct JetCache {
    std::mutex mu;
    std::map<JetIndex, Expr> exprs;
  };

  Expr jet_locked(const JetIndex& j) const {
    if (auto it = cache_->exprs.find(j); it != cache_->exprs.end()) return it->second;
    Expr e;
    if (j.order() == 0) {
      e = fields[static_cast<std::size_t>(j.field - 1)];
    } else if (j.n2 > 0) {
      e = simplify(partial(jet_locked({j.field, j.n1, j.n2 - 1}), Symbol::x2()));
    } else {
      e = simplify(partial(jet_locked({j.field, j.n1 - 1, 0}), Symbol::x1()));
    }
    cache_->exprs.emplace(j, e);
    return e;
  }

  std::shared_ptr<JetCache> cache_ = std::make_shared<JetCache>();
};

struct ModelDefinition {
  std::string name;
  int field_count = 1;
  int dim = 2;
  MatrixExpr U1;
  MatrixExpr U2;
  std::vector<cplx> singular_lambdas;
  std::vector<SolutionFamily> families;
  std::vector<NamedCharacteristic> characteristics;

  [[nodiscard]] const MatrixExpr& U(int axis) const { return axis == 1 ? U1 : U2; }

  [[nodiscard]] const SolutionFamily& family(const std::string& n) const {
    for (const auto& f : families)
      if (f.name == n) return f;
    throw ModelError("model '" + name + "' has no solution family '" + n + "'");
  }
  [[nodiscard]] const NamedCharacteristic& characteristic(const std::string& n) const {
    for (const auto& c : characteristics)
      if (c.name == n) return c;
    throw ModelError("model '" + name + "' has no characteristic '" + n + "'");
  }
  [[nodiscard]] bool is_singular(cplx lam, double tol = 1e-12) const {
    return std::any_of(singular_lambdas.begin(), singular_lambdas.end(),
                       [&](cplx s) { return std::abs(lam - s) <= tol; });
  }
  /// A nonsingular lambda for residuals that do not depend on it.
  [[nodiscard]] cplx probe_lambda() const {
    for (cplx c : {cplx{1.0}, cplx{0.73, 0.41}, cplx{-1.37, 0.29}})
      if (!is_singular(c, 1e-6)) return c;
    return {2.71, -1.13};
  }
};

inline bool operator==(const ParamSpec& a, const ParamSpec& b) {
  return a.name == b.name && a.lo == b.lo && a.hi == b.hi;
}
inline bool operator==(const Binding& a, const Binding& b) {
  return a.characteristic == b.characteristic && a.param == b.param && a.scale == b.scale;
}
inline bool operator==(const SolutionFamily& a, const SolutionFamily& b) {
  return a.name == b.name && a.params == b.params && a.fields == b.fields && a.bindings == b.bindings;
}
inline bool operator==(const NamedCharacteristic& a, const NamedCharacteristic& b) {
  return a.name == b.name && a.R.components() == b.R.components();
}
inline bool operator==(const ModelDefinition& a, const ModelDefinition& b) {
  return a.name == b.name && a.field_count == b.field_count && a.dim == b.dim && a.U1 == b.U1 &&
         a.U2 == b.U2 && a.singular_lambdas == b.singular_lambdas && a.families == b.families &&
         a.characteristics == b.characteristics;
}

/// D2 U1 - D1 U2 + [U1, U2].
inline MatrixExpr zcc_residual_expr(const MatrixExpr& U1, const MatrixExpr& U2) {
  return simplify(mat_total_derivative(U1, 2) - mat_total_derivative(U2, 1) + commutator(U1, U2));
}
inline MatrixExpr zcc_residual_expr(const ModelDefinition& m) { return zcc_residual_expr(m.U1, m.U2); }

struct LambdaIndependenceReport {
  bool passed = true;
  double max_spread = 0.0;
  double tolerance = 1e-9;
  int jet_samples = 0;
  int lambda_samples = 0;
};

/// The ZCC residual must not depend on lambda: for each random jet assignment
/// its value is compared across random lambdas with |lambda| in [0.5, 2].
inline LambdaIndependenceReport check_lambda_independence(const ModelDefinition& m, std::uint64_t seed = 0,
                                                          int jet_samples = 20, int lambda_samples = 5) {
  LambdaIndependenceReport rep;
  rep.jet_samples = jet_samples;
  rep.lambda_samples = lambda_samples;
  MatrixExpr Z = zcc_residual_expr(m);
  std::vector<Symbol> syms = Z.free_symbols();
  Program prog(Z.entries());
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> mod(0.5, 2.0);
  std::uniform_real_distribution<double> arg(0.0, 2.0 * std::numbers::pi);
  std::vector<cplx> slots(prog.slots().size()), out(prog.output_count()), first, scratch;
  for (int s = 0; s < jet_samples; ++s) {
    for (std::size_t k = 0; k < slots.size(); ++k) slots[k] = u(rng);
    for (int l = 0; l < lambda_samples; ++l) {
      cplx lam;
      do {
        lam = std::polar(mod(rng), arg(rng));
      } while (m.is_singular(lam, 1e-3));
      if (auto idx = prog.slot_of(Symbol::lambda())) slots[*idx] = lam;
      prog.run(slots, out, scratch);
      if (l == 0) {
        first = out;
        continue;
      }
      double d = 0.0;
      for (std::size_t k = 0; k < out.size(); ++k) d += std::norm(out[k] - first[k]);
      rep.max_spread = std::max(rep.max_spread, std::sqrt(d));
    }
  }
  rep.passed = rep.max_spread <= rep.tolerance;
  return rep;
}

struct BindingCheck {
  bool passed = true;
  double worst_residual = 0.0;
  double worst_x1 = 0.0;
  double worst_x2 = 0.0;
  ParamValues worst_params;
};

/// max over random points of |scale * d(theta)/dp - R[theta]| with a central
/// difference of step h in the parameter.
inline BindingCheck check_binding(const SolutionFamily& fam, const Binding& b, const Characteristic& R,
                                  std::uint64_t seed = 0, int points = 20, double h = 1e-5, double tol = 1e-6) {
  BindingCheck rep;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(-2.0, 2.0);
  std::vector<JetIndex> needed;
  for (const auto& c : R.components())
    for (const auto& s : c.free_symbols())
      if (s.is_jet()) needed.push_back(s.jet);
  for (int n = 0; n < points; ++n) {
    ParamValues pv;
    for (const auto& p : fam.params) pv[p.name] = std::uniform_real_distribution<double>(p.lo, p.hi)(rng);
    double x1 = ux(rng), x2 = ux(rng);
    EvalContext jets = fam.eval_jets(pv, x1, x2, needed);
    EvalContext pc = fam.param_context(pv);
    cplx scale = evaluate(b.scale, pc);
    ParamValues plus = pv, minus = pv;
    plus[b.param] += h;
    minus[b.param] -= h;
    EvalContext cp = fam.param_context(plus), cm = fam.param_context(minus);
    cp.bind_coords(x1, x2);
    cm.bind_coords(x1, x2);
    double worst_here = 0.0;
    for (std::size_t k = 0; k < fam.fields.size(); ++k) {
      cplx fd = (evaluate(fam.fields[k], cp) - evaluate(fam.fields[k], cm)) / (2.0 * h);
      worst_here = std::max(worst_here, std::abs(scale * fd - evaluate(R[k], jets)));
    }
    if (n == 0 || worst_here > rep.worst_residual) {
      rep.worst_residual = worst_here;
      rep.worst_x1 = x1;
      rep.worst_x2 = x2;
      rep.worst_params = pv;
    }
  }
  rep.passed = rep.worst_residual < tol;
  return rep;
}

namespace detail {

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + '"';
}

inline Expr parse_at(const ConfigValue& v, const std::string& key, const std::set<std::string>& params) {
  try {
    return parse_expr(v.as_string(key), ParseOptions{params});
  } catch (const ParseError& e) {
    throw ConfigError("'" + key + "': " + e.what(), v.line);
  }
}

inline MatrixExpr read_matrix(const ConfigSection& sec, int dim) {
  MatrixExpr m(dim);
  for (const auto& [key, v] : sec.entries) {
    int r = 0, c = 0;
    char tail = 0;
    if (std::sscanf(key.c_str(), "r%dc%d%c", &r, &c, &tail) != 2)
      throw ConfigError("unexpected key '" + key + "' in [" + sec.name + "]", v.line);
    if (r < 1 || c < 1 || r > dim || c > dim)
      throw DimensionError("[" + sec.name + "] has entry " + key + " but the model dimension is " + std::to_string(dim));
    m.at(r - 1, c - 1) = parse_at(v, key, {});
  }
  for (int r = 1; r <= dim; ++r)
    for (int c = 1; c <= dim; ++c) {
      std::string key = "r" + std::to_string(r) + "c" + std::to_string(c);
      if (!sec.find(key)) throw DimensionError("[" + sec.name + "] is missing entry " + key);
    }
  return m;
}

inline void check_jet_fields(const Expr& e, int N, const std::string& where) {
  for (const auto& s : e.free_symbols())
    if (s.is_jet() && s.jet.field > N)
      throw ModelError(where + " uses " + to_string(s) + " but the model has " + std::to_string(N) + " field(s)");
}

}  // namespace detail

struct LoadOptions {
  bool check_bindings = true;
  bool check_lambda = true;
  std::uint64_t seed = 0;
};

/// Parses and validates a model file.
inline ModelDefinition load_model(const std::string& text, const LoadOptions& opts = {}) {
  auto sections = parse_config(text);
  ModelDefinition m;
  const ConfigSection* model = nullptr;
  const ConfigSection* u1 = nullptr;
  const ConfigSection* u2 = nullptr;
  for (const auto& s : sections) {
    if (s.name == "model") model = &s;
    if (s.name == "U1") u1 = &s;
    if (s.name == "U2") u2 = &s;
  }
  if (!model) throw ConfigError("missing [model] section", 1);
  if (!u1 || !u2) throw ConfigError("missing [U1] or [U2] section", model->line);
  m.name = model->at("name").as_string("name");
  m.field_count = model->at("fields").as_int("fields");
  m.dim = model->at("dim").as_int("dim");
  if (m.field_count < 1) throw ConfigError("fields must be at least 1", model->at("fields").line);
  if (m.dim < 1) throw ConfigError("dim must be at least 1", model->at("dim").line);
  if (const auto* sl = model->find("singular_lambdas")) {
    for (const auto& v : sl->as_array("singular_lambdas")) {
      if (v.kind == ConfigValue::Kind::Number) {
        m.singular_lambdas.emplace_back(v.num);
      } else {
        const auto& pair = v.as_array("singular_lambdas");
        if (pair.size() != 2) throw ConfigError("singular lambda must be a number or [re, im]", v.line);
        m.singular_lambdas.emplace_back(pair[0].as_number("re"), pair[1].as_number("im"));
      }
    }
  }
  m.U1 = detail::read_matrix(*u1, m.dim);
  m.U2 = detail::read_matrix(*u2, m.dim);
  for (const auto& e : m.U1.entries()) detail::check_jet_fields(e, m.field_count, "U1");
  for (const auto& e : m.U2.entries()) detail::check_jet_fields(e, m.field_count, "U2");

  struct PendingBinding {
    std::string characteristic;
    const ConfigSection* sec;
  };
  std::vector<PendingBinding> pending;
  for (const auto& s : sections) {
    if (s.name.rfind("solution.", 0) == 0) {
      SolutionFamily f;
      f.name = s.name.substr(9);
      std::set<std::string> pnames;
      if (const auto* pv = s.find("params")) {
        for (const auto& p : pv->as_array("params")) {
          const std::string& pn = p.as_string("params");
          if (!pnames.insert(pn).second) throw ConfigError("duplicate parameter '" + pn + "'", p.line);
          ParamSpec spec{pn};
          if (const auto* r = s.find("range_" + pn)) {
            const auto& lohi = r->as_array("range_" + pn);
            if (lohi.size() != 2) throw ConfigError("range_" + pn + " must be [lo, hi]", r->line);
            spec.lo = lohi[0].as_number("range_" + pn);
            spec.hi = lohi[1].as_number("range_" + pn);
            if (!(spec.lo <= spec.hi)) throw ConfigError("empty range for '" + pn + "'", r->line);
          }
          f.params.push_back(spec);
        }
      }
      for (int k = 1; k <= m.field_count; ++k) {
        std::string key = "theta" + std::to_string(k);
        Expr e = detail::parse_at(s.at(key), key, pnames);
        for (const auto& sym : e.free_symbols())
          if (sym.is_jet() || sym.kind == SymbolKind::Lambda)
            throw ConfigError("solution field '" + key + "' may depend only on x1, x2 and parameters",
                              s.at(key).line);
        f.fields.push_back(e);
      }
      for (const auto& [key, v] : s.entries) {
        bool known = key == "params" || key.rfind("range_", 0) == 0 || key.rfind("theta", 0) == 0;
        if (!known) throw ConfigError("unexpected key '" + key + "' in [" + s.name + "]", v.line);
        if (key.rfind("range_", 0) == 0 && !pnames.count(key.substr(6)))
          throw ConfigError("range for undeclared parameter '" + key.substr(6) + "'", v.line);
      }
      m.families.push_back(std::move(f));
    } else if (s.name.rfind("characteristic.", 0) == 0) {
      std::vector<Expr> comps;
      for (int k = 1; k <= m.field_count; ++k) {
        std::string key = "R" + std::to_string(k);
        Expr e = detail::parse_at(s.at(key), key, {});
        detail::check_jet_fields(e, m.field_count, s.name);
        comps.push_back(e);
      }
      try {
        m.characteristics.push_back({s.name.substr(15), Characteristic(std::move(comps))});
      } catch (const Error& e) {
        throw ConfigError(e.what(), s.line);
      }
    } else if (s.name.rfind("binding.", 0) == 0) {
      pending.push_back({s.name.substr(8), &s});
    } else if (!s.name.empty() && s.name != "model" && s.name != "U1" && s.name != "U2") {
      throw ConfigError("unknown section [" + s.name + "]", s.line);
    } else if (s.name.empty() && !s.entries.empty()) {
      throw ConfigError("key outside any section", s.entries.front().second.line);
    }
  }
  for (const auto& pb : pending) {
    const ConfigSection& s = *pb.sec;
    const std::string& sol = s.at("solution").as_string("solution");
    SolutionFamily* fam = nullptr;
    for (auto& f : m.families)
      if (f.name == sol) fam = &f;
    if (!fam) throw ConfigError("binding refers to unknown solution '" + sol + "'", s.at("solution").line);
    bool has_char = std::any_of(m.characteristics.begin(), m.characteristics.end(),
                                [&](const auto& c) { return c.name == pb.characteristic; });
    if (!has_char) throw ConfigError("binding for unknown characteristic '" + pb.characteristic + "'", s.line);
    const std::string& p = s.at("param").as_string("param");
    if (!fam->param(p)) throw ConfigError("solution '" + sol + "' has no parameter '" + p + "'", s.at("param").line);
    std::set<std::string> pnames;
    for (const auto& ps : fam->params) pnames.insert(ps.name);
    Expr scale = detail::parse_at(s.at("scale"), "scale", pnames);
    for (const auto& sym : scale.free_symbols())
      if (!sym.is_param()) throw ConfigError("binding scale may depend only on parameters", s.at("scale").line);
    if (fam->binding_for(pb.characteristic))
      throw ConfigError("duplicate binding for '" + pb.characteristic + "'", s.line);
    fam->bindings.push_back({pb.characteristic, p, scale});
  }

  if (opts.check_lambda) {
    auto rep = check_lambda_independence(m, opts.seed);
    if (!rep.passed)
      throw ModelError("zero-curvature residual of model '" + m.name + "' depends on lambda (spread " +
                       std::to_string(rep.max_spread) + ")");
  }
  if (opts.check_bindings) {
    for (const auto& f : m.families)
      for (const auto& b : f.bindings) {
        auto rep = check_binding(f, b, m.characteristic(b.characteristic).R, opts.seed);
        if (!rep.passed) {
          std::ostringstream os;
          os << "binding of '" << b.characteristic << "' to parameter '" << b.param << "' of solution '" << f.name
             << "' fails: residual " << rep.worst_residual << " at x1=" << rep.worst_x1 << ", x2=" << rep.worst_x2;
          for (const auto& [k, v] : rep.worst_params) os << ", " << k << "=" << v;
          throw ModelError(os.str());
        }
      }
  }
  return m;
}

/// Model file text that load_model reads back to an equal definition.
inline std::string serialize(const ModelDefinition& m) {
  std::ostringstream os;
  os << "[model]\nname = " << detail::quote(m.name) << "\nfields = " << m.field_count << "\ndim = " << m.dim
     << "\nsingular_lambdas = [";
  for (std::size_t k = 0; k < m.singular_lambdas.size(); ++k) {
    cplx s = m.singular_lambdas[k];
    os << (k ? ", " : "");
    if (s.imag() == 0.0)
      os << detail::fmt_double(s.real());
    else
      os << "[" << detail::fmt_double(s.real()) << ", " << detail::fmt_double(s.imag()) << "]";
  }
  os << "]\n";
  for (int a = 1; a <= 2; ++a) {
    os << "\n[U" << a << "]\n";
    const MatrixExpr& U = m.U(a);
    for (int r = 0; r < m.dim; ++r)
      for (int c = 0; c < m.dim; ++c)
        os << "r" << r + 1 << "c" << c + 1 << " = " << detail::quote(to_string(U(r, c))) << "\n";
  }
  for (const auto& f : m.families) {
    os << "\n[solution." << f.name << "]\nparams = [";
    for (std::size_t k = 0; k < f.params.size(); ++k) os << (k ? ", " : "") << detail::quote(f.params[k].name);
    os << "]\n";
    for (std::size_t k = 0; k < f.fields.size(); ++k)
      os << "theta" << k + 1 << " = " << detail::quote(to_string(f.fields[k])) << "\n";
    for (const auto& p : f.params)
      os << "range_" << p.name << " = [" << detail::fmt_double(p.lo) << ", " << detail::fmt_double(p.hi) << "]\n";
  }
  for (const auto& c : m.characteristics) {
    os << "\n[characteristic." << c.name << "]\n";
    for (std::size_t k = 0; k < c.R.size(); ++k) os << "R" << k + 1 << " = " << detail::quote(to_string(c.R[k])) << "\n";
  }
  for (const auto& f : m.families)
    for (const auto& b : f.bindings)
      os << "\n[binding." << b.characteristic << "]\nsolution = " << detail::quote(f.name)
         << "\nparam = " << detail::quote(b.param) << "\nscale = " << detail::quote(to_string(b.scale)) << "\n";
  return os.str();
}

inline const char* sine_gordon_model_text() {
  return R"model(# sine-Gordon in light-cone coordinates: theta_12 = sin(theta)
[model]
name = "sine-gordon"
fields = 1
dim = 2
singular_lambdas = [0]

[U1]
r1c1 = "-i*lambda"
r1c2 = "-theta1_1/2"
r2c1 = "theta1_1/2"
r2c2 = "i*lambda"

[U2]
r1c1 = "i*cos(theta1)/(4*lambda)"
r1c2 = "i*sin(theta1)/(4*lambda)"
r2c1 = "i*sin(theta1)/(4*lambda)"
r2c2 = "-i*cos(theta1)/(4*lambda)"

[solution.kink]
params = ["a", "d"]
theta1 = "4*atan(exp(a*x1 + x2/a + d))"
range_a = [0.5, 2]
range_d = [-1, 1]

[characteristic.trans1]
R1 = "theta1_1"

[characteristic.trans2]
R1 = "theta1_2"

[characteristic.flow3]
R1 = "theta1_111 + theta1_1^3/2"

# not a symmetry; kept as a negative control
[characteristic.bogus]
R1 = "theta1^2"

[binding.trans1]
solution = "kink"
param = "d"
scale = "a"

[binding.trans2]
solution = "kink"
param = "d"
scale = "1/a"

[binding.flow3]
solution = "kink"
param = "d"
scale = "a^3"
)model";
}

inline std::vector<std::string> builtin_names() { return {"sine-gordon"}; }

inline const ModelDefinition& builtin(const std::string& name) {
  if (name == "sine-gordon") {
    static const ModelDefinition sg = load_model(sine_gordon_model_text());
    return sg;
  }
  throw ModelError("unknown built-in model '" + name + "'");
}

}  // namespace solsurf
