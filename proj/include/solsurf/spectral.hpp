#pragma once

// Wavefunctions of D_a Phi = U^a Phi on rectangular grids, their variations
// along symmetry directions, and the residuals of the symmetry criteria.

#include <cfloat>
#include <optional>

#include "solsurf/models.hpp"

namespace solsurf {

class IntegrationError : public Error {
 public:
  using Error::Error;
};

class SingularLambdaError : public Error {
 public:
  using Error::Error;
};

struct GridSpec {
  double x1_lo = -2.0;
  double x1_hi = 2.0;
  int n1 = 81;
  double x2_lo = -2.0;
  double x2_hi = 2.0;
  int n2 = 81;
  int base_i = 0;
  int base_j = 0;

  /// Square [lo, hi]^2 with spacing close to h; the base node is (0, 0).
  static GridSpec square(double lo, double hi, double h) {
    GridSpec g;
    g.x1_lo = g.x2_lo = lo;
    g.x1_hi = g.x2_hi = hi;
    g.n1 = g.n2 = static_cast<int>(std::lround((hi - lo) / h)) + 1;
    return g;
  }

  void validate() const {
    if (n1 < 2 || n2 < 2) throw Error("grid needs at least 2 samples per axis");
    if (!(x1_hi > x1_lo) || !(x2_hi > x2_lo)) throw Error("grid ranges must be strictly increasing");
    if (base_i < 0 || base_i >= n1 || base_j < 0 || base_j >= n2) throw Error("base node outside the grid");
  }
  [[nodiscard]] double h1() const { return (x1_hi - x1_lo) / (n1 - 1); }
  [[nodiscard]] double h2() const { return (x2_hi - x2_lo) / (n2 - 1); }
  [[nodiscard]] double h(int axis) const { return axis == 1 ? h1() : h2(); }
  [[nodiscard]] double x1(int i) const { return i == n1 - 1 ? x1_hi : x1_lo + i * h1(); }
  [[nodiscard]] double x2(int j) const { return j == n2 - 1 ? x2_hi : x2_lo + j * h2(); }
  [[nodiscard]] int count(int axis) const { return axis == 1 ? n1 : n2; }
  [[nodiscard]] bool on_boundary(int i, int j) const { return i == 0 || j == 0 || i == n1 - 1 || j == n2 - 1; }
  /// The node farthest from the base along both axes.
  [[nodiscard]] std::pair<int, int> far_corner() const {
    return {base_i < n1 / 2 ? n1 - 1 : 0, base_j < n2 / 2 ? n2 - 1 : 0};
  }
  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// An n x n complex matrix per grid node, stored contiguously.
class MatrixGrid {
 public:
  MatrixGrid() = default;
  MatrixGrid(const GridSpec& spec, int dim)
      : spec_(spec), dim_(dim), data_(static_cast<std::size_t>(spec.n1) * spec.n2 * dim * dim) {}

  [[nodiscard]] const GridSpec& spec() const { return spec_; }
  [[nodiscard]] int dim() const { return dim_; }

  Eigen::Map<NumericMatrix> operator()(int i, int j) { return {data_.data() + offset(i, j), dim_, dim_}; }
  Eigen::Map<const NumericMatrix> operator()(int i, int j) const {
    return {data_.data() + offset(i, j), dim_, dim_};
  }

 private:
  [[nodiscard]] std::size_t offset(int i, int j) const {
    return (static_cast<std::size_t>(i) * spec_.n2 + static_cast<std::size_t>(j)) * dim_ * dim_;
  }

  GridSpec spec_;
  int dim_ = 0;
  std::vector<cplx> data_;
};

/// Perturbs every jet theta^k_J by eps * D_J R^k before evaluation.
struct JetShift {
  Characteristic R;
  double eps = 0.0;
};

/// Matrices of jet expressions evaluated on an explicit solution. Family jets
/// come from symbolic x-derivatives of the closed form; everything is compiled
/// once and then evaluated per point without allocation.
class OnShellEvaluator {
 public:
  OnShellEvaluator(const SolutionFamily& fam, const ParamValues& params, const std::vector<MatrixExpr>& mats,
                   std::optional<JetShift> shift = std::nullopt) {
    for (const auto& m : mats) {
      if (dim_ && m.dim() != dim_) throw DimensionError("on-shell matrices must share one dimension");
      dim_ = m.dim();
      for (const auto& s : m.free_symbols()) {
        if (s.is_param()) throw Error("matrix entry contains family parameter '" + s.name + "'");
        if (s.is_jet()) needed_.push_back(s.jet);
      }
    }
    std::sort(needed_.begin(), needed_.end());
    needed_.erase(std::unique(needed_.begin(), needed_.end()), needed_.end());

    std::vector<JetIndex> all = needed_;
    std::vector<Expr> shift_exprs;
    if (shift && shift->eps != 0.0) {
      eps_ = shift->eps;
      ProlongationCache pc(shift->R);
      for (const auto& j : needed_) {
        shift_exprs.push_back(pc.total_derivative_of(j));
        for (const auto& s : shift_exprs.back().free_symbols())
          if (s.is_jet()) all.push_back(s.jet);
      }
      std::sort(all.begin(), all.end());
      all.erase(std::unique(all.begin(), all.end()), all.end());
    }

    // environment: x1, x2, lambda, params, family jets
    env_syms_ = {Symbol::x1(), Symbol::x2(), Symbol::lambda()};
    for (const auto& p : fam.params) env_syms_.push_back(Symbol::param(p.name));
    jet_base_ = env_syms_.size();
    std::vector<Expr> jet_exprs;
    for (const auto& j : all) {
      env_syms_.push_back(Symbol::jet_var(j));
      jet_exprs.push_back(fam.jet_expr(j));
    }
    env_.assign(env_syms_.size(), cplx{});
    EvalContext pc = fam.param_context(params);
    for (std::size_t k = 3; k < jet_base_; ++k) env_[k] = pc.at(env_syms_[k]);

    jets_ = Program(jet_exprs);
    jets_gather_ = gather(jets_);
    if (!shift_exprs.empty()) {
      shift_ = Program(shift_exprs);
      shift_gather_ = gather(shift_);
      for (const auto& j : needed_) shift_targets_.push_back(index_of(Symbol::jet_var(j)));
    }
    std::vector<Expr> entries;
    for (const auto& m : mats) entries.insert(entries.end(), m.entries().begin(), m.entries().end());
    count_ = mats.size();
    mats_ = Program(entries);
    mats_gather_ = gather(mats_);
  }

  void set_lambda(cplx lam) { env_[2] = lam; }
  [[nodiscard]] int dim() const { return dim_; }
  [[nodiscard]] std::size_t size() const { return count_; }

  /// Writes matrix k at (x1, x2) into out[k].
  void eval(double x1, double x2, std::vector<NumericMatrix>& out) {
    env_[0] = x1;
    env_[1] = x2;
    run(jets_, jets_gather_, env_, jet_out_);
    for (std::size_t k = 0; k < jet_out_.size(); ++k) env_[jet_base_ + k] = jet_out_[k];
    const std::vector<cplx>* env = &env_;
    if (eps_ != 0.0) {
      run(shift_, shift_gather_, env_, shift_out_);
      shifted_ = env_;
      for (std::size_t k = 0; k < shift_targets_.size(); ++k) shifted_[shift_targets_[k]] += eps_ * shift_out_[k];
      env = &shifted_;
    }
    run(mats_, mats_gather_, *env, mat_out_);
    out.resize(count_);
    const auto n = static_cast<std::size_t>(dim_);
    for (std::size_t m = 0; m < count_; ++m) {
      out[m].resize(dim_, dim_);
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c)
          out[m](static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = mat_out_[m * n * n + r * n + c];
    }
  }

 private:
  std::size_t index_of(const Symbol& s) const {
    auto it = std::find(env_syms_.begin(), env_syms_.end(), s);
    if (it == env_syms_.end()) throw Error("on-shell evaluation has no value for " + to_string(s));
    return static_cast<std::size_t>(it - env_syms_.begin());
  }
  std::vector<std::size_t> gather(const Program& p) const {
    std::vector<std::size_t> g;
    for (const auto& s : p.slots()) g.push_back(index_of(s));
    return g;
  }
  void run(const Program& p, const std::vector<std::size_t>& g, const std::vector<cplx>& env, std::vector<cplx>& out) {
    slots_.resize(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) slots_[k] = env[g[k]];
    out.resize(p.output_count());
    p.run(slots_, out, scratch_);
  }

  int dim_ = 0;
  std::size_t count_ = 0;
  double eps_ = 0.0;
  std::vector<JetIndex> needed_;
  std::vector<Symbol> env_syms_;
  std::size_t jet_base_ = 0;
  std::vector<cplx> env_, shifted_;
  Program jets_, shift_, mats_;
  std::vector<std::size_t> jets_gather_, shift_gather_, mats_gather_, shift_targets_;
  std::vector<cplx> slots_, scratch_, jet_out_, shift_out_, mat_out_;
};

/// Evaluates each matrix at every node.
inline std::vector<MatrixGrid> evaluate_on_grid(const SolutionFamily& fam, const ParamValues& params, cplx lam,
                                                const GridSpec& spec, const std::vector<MatrixExpr>& mats) {
  spec.validate();
  OnShellEvaluator ev(fam, params, mats);
  ev.set_lambda(lam);
  std::vector<MatrixGrid> out;
  for (const auto& m : mats) out.emplace_back(spec, m.dim());
  std::vector<NumericMatrix> vals;
  for (int i = 0; i < spec.n1; ++i)
    for (int j = 0; j < spec.n2; ++j) {
      ev.eval(spec.x1(i), spec.x2(j), vals);
      for (std::size_t k = 0; k < mats.size(); ++k) out[k](i, j) = vals[k];
    }
  return out;
}

// ---------------------------------------------------------------------------
// Residual reports

struct ResidualReport {
  double max_abs = 0.0;
  double mean_abs = 0.0;
  int argmax_i = 0;
  int argmax_j = 0;
  double boundary_max_abs = 0.0;
  ParamValues params;
  std::vector<std::pair<std::string, double>> terms;
  std::size_t nodes = 0;
};

/// Accumulates per-node magnitudes; boundary nodes are tracked separately.
class ResidualAccumulator {
 public:
  void add(int i, int j, double v, bool boundary = false) {
    if (boundary) {
      r_.boundary_max_abs = std::max(r_.boundary_max_abs, v);
      return;
    }
    if (r_.nodes == 0 || v > r_.max_abs) {
      r_.max_abs = v;
      r_.argmax_i = i;
      r_.argmax_j = j;
    }
    sum_ += v;
    ++r_.nodes;
  }
  [[nodiscard]] ResidualReport report(const ParamValues& params = {}) const {
    ResidualReport r = r_;
    r.mean_abs = r.nodes ? sum_ / static_cast<double>(r.nodes) : 0.0;
    r.params = params;
    return r;
  }

 private:
  ResidualReport r_;
  double sum_ = 0.0;
};

// ---------------------------------------------------------------------------
// Wavefunction

enum class PathOrder { RowFirst, ColumnFirst };

struct WavefunctionGrid {
  GridSpec spec;
  cplx lam;
  SolutionFamily family;
  ParamValues params;
  MatrixGrid phi;
};

struct IntegrationOptions {
  PathOrder order = PathOrder::RowFirst;
  std::optional<JetShift> shift;
  double blowup = 1e6;
};

namespace detail {

inline void check_lambda(const ModelDefinition& m, cplx lam) {
  if (m.is_singular(lam))
    throw SingularLambdaError("lambda = (" + std::to_string(lam.real()) + ", " + std::to_string(lam.imag()) +
                              ") is a singular value of model '" + m.name + "'");
}

/// Classical RK4 for Y' = U(t) Y along one grid line, from index start in both
/// directions. at(t) evaluates U; store(k, Y) receives each node value.
template <class At, class Store>
void march(At&& at, const std::vector<double>& t, int start, const NumericMatrix& y0, double blowup, Store&& store) {
  const int n = static_cast<int>(t.size());
  store(start, y0);
  for (int dir : {1, -1}) {
    NumericMatrix y = y0;
    NumericMatrix u0 = at(t[static_cast<std::size_t>(start)]);
    for (int k = start; k + dir >= 0 && k + dir < n; k += dir) {
      double ta = t[static_cast<std::size_t>(k)], tb = t[static_cast<std::size_t>(k + dir)];
      double h = tb - ta;
      NumericMatrix um = at(0.5 * (ta + tb));
      NumericMatrix u1 = at(tb);
      NumericMatrix k1 = u0 * y;
      NumericMatrix k2 = um * (y + 0.5 * h * k1);
      NumericMatrix k3 = um * (y + 0.5 * h * k2);
      NumericMatrix k4 = u1 * (y + h * k3);
      y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      if (!all_finite(y) || y.norm() > blowup)
        throw IntegrationError("wavefunction blew up (norm > " + std::to_string(blowup) + ") near t = " +
                               std::to_string(tb));
      store(k + dir, y);
      u0 = std::move(u1);
    }
  }
}

inline std::vector<double> line(const GridSpec& s, int axis) {
  std::vector<double> t(static_cast<std::size_t>(s.count(axis)));
  for (int k = 0; k < s.count(axis); ++k) t[static_cast<std::size_t>(k)] = axis == 1 ? s.x1(k) : s.x2(k);
  return t;
}

class LaxEvaluator {
 public:
  LaxEvaluator(const ModelDefinition& m, const SolutionFamily& fam, const ParamValues& params, cplx lam,
               const std::optional<JetShift>& shift)
      : ev1_(fam, params, {m.U1}, shift), ev2_(fam, params, {m.U2}, shift) {
    ev1_.set_lambda(lam);
    ev2_.set_lambda(lam);
  }
  NumericMatrix operator()(int axis, double x1, double x2) {
    (axis == 1 ? ev1_ : ev2_).eval(x1, x2, buf_);
    return buf_[0];
  }

 private:
  OnShellEvaluator ev1_, ev2_;
  std::vector<NumericMatrix> buf_;
};

}  // namespace detail

/// Phi(base) = I; RK4 along the base row then up every column (or the
/// transpose for ColumnFirst). U is evaluated at nodes and half-steps.
inline WavefunctionGrid integrate_wavefunction(const ModelDefinition& m, const SolutionFamily& fam,
                                               const ParamValues& params, cplx lam, const GridSpec& spec,
                                               const IntegrationOptions& opts = {}) {
  spec.validate();
  detail::check_lambda(m, lam);
  WavefunctionGrid w{spec, lam, fam, params, MatrixGrid(spec, m.dim)};
  detail::LaxEvaluator U(m, fam, params, lam, opts.shift);
  const int first = opts.order == PathOrder::RowFirst ? 1 : 2;
  const int second = 3 - first;
  auto tf = detail::line(spec, first), ts = detail::line(spec, second);
  const int bf = first == 1 ? spec.base_i : spec.base_j;
  const int bs = first == 1 ? spec.base_j : spec.base_i;
  auto node = [&](int kf, int ks) -> std::pair<int, int> {
    return first == 1 ? std::pair{kf, ks} : std::pair{ks, kf};
  };
  auto coords = [&](int axis, double t, double fixed) {
    return axis == 1 ? std::pair{t, fixed} : std::pair{fixed, t};
  };
  std::vector<NumericMatrix> base_line(tf.size());
  const double fixed_first = ts[static_cast<std::size_t>(bs)];
  detail::march(
      [&](double t) {
        auto [x1, x2] = coords(first, t, fixed_first);
        return U(first, x1, x2);
      },
      tf, bf, NumericMatrix::Identity(m.dim, m.dim), opts.blowup,
      [&](int k, const NumericMatrix& y) { base_line[static_cast<std::size_t>(k)] = y; });
  for (int kf = 0; kf < static_cast<int>(tf.size()); ++kf) {
    const double fixed = tf[static_cast<std::size_t>(kf)];
    detail::march(
        [&](double t) {
          auto [x1, x2] = coords(second, t, fixed);
          return U(second, x1, x2);
        },
        ts, bs, base_line[static_cast<std::size_t>(kf)], opts.blowup, [&](int ks, const NumericMatrix& y) {
          auto [i, j] = node(kf, ks);
          w.phi(i, j) = y;
        });
  }
  return w;
}

/// Phi at one node by the row-first path only; agrees bitwise with the grid value.
inline NumericMatrix integrate_to_node(const ModelDefinition& m, const SolutionFamily& fam, const ParamValues& params,
                                       cplx lam, const GridSpec& spec, int i, int j,
                                       const std::optional<JetShift>& shift = std::nullopt, double blowup = 1e6) {
  spec.validate();
  detail::check_lambda(m, lam);
  detail::LaxEvaluator U(m, fam, params, lam, shift);
  auto t1 = detail::line(spec, 1), t2 = detail::line(spec, 2);
  const int lo1 = std::min(i, spec.base_i), hi1 = std::max(i, spec.base_i);
  const int lo2 = std::min(j, spec.base_j), hi2 = std::max(j, spec.base_j);
  std::vector<double> s1(t1.begin() + lo1, t1.begin() + hi1 + 1), s2(t2.begin() + lo2, t2.begin() + hi2 + 1);
  NumericMatrix row_end, out;
  const double xb2 = spec.x2(spec.base_j);
  detail::march([&](double t) { return U(1, t, xb2); }, s1, spec.base_i - lo1, NumericMatrix::Identity(m.dim, m.dim),
                blowup, [&](int k, const NumericMatrix& y) {
                  if (k + lo1 == i) row_end = y;
                });
  const double x1 = spec.x1(i);
  detail::march([&](double t) { return U(2, x1, t); }, s2, spec.base_j - lo2, row_end, blowup,
                [&](int k, const NumericMatrix& y) {
                  if (k + lo2 == j) out = y;
                });
  return out;
}

struct WavefunctionAudit {
  double det_max_dev = 0.0;        // max |det Phi - 1|
  double unitarity_max = 0.0;      // max ||Phi^dagger Phi - I||_F
  double path_far_corner = 0.0;    // ||Phi_row - Phi_col|| at the far corner
  double path_max = 0.0;           // the same, maximised over the grid
};

inline WavefunctionAudit audit_wavefunction(const WavefunctionGrid& w, const WavefunctionGrid* column_first = nullptr) {
  WavefunctionAudit a;
  const auto& s = w.spec;
  NumericMatrix id = NumericMatrix::Identity(w.phi.dim(), w.phi.dim());
  for (int i = 0; i < s.n1; ++i)
    for (int j = 0; j < s.n2; ++j) {
      auto p = w.phi(i, j);
      a.det_max_dev = std::max(a.det_max_dev, std::abs(p.determinant() - 1.0));
      a.unitarity_max = std::max(a.unitarity_max, (p.adjoint() * p - id).norm());
      if (column_first) a.path_max = std::max(a.path_max, (p - column_first->phi(i, j)).norm());
    }
  if (column_first) {
    auto [i, j] = s.far_corner();
    a.path_far_corner = (w.phi(i, j) - column_first->phi(i, j)).norm();
  }
  return a;
}

// ---------------------------------------------------------------------------
// Zero-curvature residuals

inline ResidualReport matrix_norm_report(const MatrixGrid& g, const ParamValues& params) {
  ResidualAccumulator acc;
  for (int i = 0; i < g.spec().n1; ++i)
    for (int j = 0; j < g.spec().n2; ++j) acc.add(i, j, g(i, j).norm());
  return acc.report(params);
}

/// ||D2 U1 - D1 U2 + [U1, U2]||_F over the grid.
inline ResidualReport zcc_residual_on(const ModelDefinition& m, const SolutionFamily& fam, const ParamValues& params,
                                      const GridSpec& spec) {
  auto g = evaluate_on_grid(fam, params, m.probe_lambda(), spec, {zcc_residual_expr(m)});
  return matrix_norm_report(g[0], params);
}

/// pr w_R applied to the ZCC matrix, evaluated on the solution.
inline ResidualReport zcc_symmetry_residual(const ModelDefinition& m, const Characteristic& R,
                                            const SolutionFamily& fam, const ParamValues& params,
                                            const GridSpec& spec) {
  MatrixExpr pz = simplify(mat_prolong(R, zcc_residual_expr(m)));
  auto g = evaluate_on_grid(fam, params, m.probe_lambda(), spec, {pz});
  return matrix_norm_report(g[0], params);
}

// ---------------------------------------------------------------------------
// Variation V = pr w_R Phi

enum class VariationMethod { FamilyParameter, JetShift, Auto };

inline const char* to_string(VariationMethod v) {
  switch (v) {
    case VariationMethod::FamilyParameter: return "family-parameter";
    case VariationMethod::JetShift: return "jet-shift";
    case VariationMethod::Auto: return "auto";
  }
  return "?";
}

struct HalvingDiagnostic {
  double coarse_diff = 0.0;  // ||V(2e) - V(e)||
  double fine_diff = 0.0;    // ||V(e) - V(e/2)||
  double ratio = 0.0;
  bool roundoff_limited = false;
  bool converged = true;
};

struct VariationGrid {
  GridSpec spec;
  cplx lam;
  std::string characteristic;
  VariationMethod method = VariationMethod::FamilyParameter;
  double epsilon = 0.0;
  MatrixGrid v;
  HalvingDiagnostic halving;
};

struct VariationOptions {
  VariationMethod method = VariationMethod::Auto;
  std::optional<double> epsilon;
  bool halving_check = true;
};

class MissingBindingError : public Error {
 public:
  using Error::Error;
};

/// Central difference in the family parameter bound to the characteristic
/// (scale * (Phi(p+e) - Phi(p-e)) / 2e) or, without a binding, in the jet
/// shift theta -> theta +- e R[theta]. Both runs share Phi(base) = I.
inline VariationGrid variation_wavefunction(const ModelDefinition& m, const SolutionFamily& fam,
                                            const ParamValues& params, const NamedCharacteristic& ch, cplx lam,
                                            const GridSpec& spec, const VariationOptions& opts = {}) {
  const Binding* b = fam.binding_for(ch.name);
  VariationMethod method = opts.method;
  if (method == VariationMethod::Auto) method = b ? VariationMethod::FamilyParameter : VariationMethod::JetShift;
  if (method == VariationMethod::FamilyParameter && !b)
    throw MissingBindingError("characteristic '" + ch.name + "' has no binding to a parameter of solution '" +
                              fam.name + "'");
  VariationGrid out{spec, lam, ch.name, method, 0.0, MatrixGrid(spec, m.dim), {}};

  cplx scale = 1.0;
  double p0 = 0.0;
  if (method == VariationMethod::FamilyParameter) {
    scale = evaluate(b->scale, fam.param_context(params));
    p0 = params.at(b->param);
  }
  const double eps = opts.epsilon.value_or(1e-4 * std::max(1.0, std::abs(p0)));
  if (!(eps > 0.0)) throw Error("variation step must be positive");
  out.epsilon = eps;
  if (ch.R.is_zero()) return out;

  auto perturbed = [&](double e) {
    IntegrationOptions io;
    ParamValues p = params;
    if (method == VariationMethod::FamilyParameter)
      p[b->param] = p0 + e;
    else
      io.shift = JetShift{ch.R, e};
    return std::pair{p, io};
  };
  auto [pp, ip] = perturbed(eps);
  auto [pm, im] = perturbed(-eps);
  WavefunctionGrid plus = integrate_wavefunction(m, fam, pp, lam, spec, ip);
  WavefunctionGrid minus = integrate_wavefunction(m, fam, pm, lam, spec, im);
  for (int i = 0; i < spec.n1; ++i)
    for (int j = 0; j < spec.n2; ++j) out.v(i, j) = (scale / (2.0 * eps)) * (plus.phi(i, j) - minus.phi(i, j));

  if (opts.halving_check) {
    auto [ci, cj] = spec.far_corner();
    auto at_node = [&](double e) {
      auto [p1, i1] = perturbed(e);
      auto [p2, i2] = perturbed(-e);
      NumericMatrix a = integrate_to_node(m, fam, p1, lam, spec, ci, cj, i1.shift);
      NumericMatrix c = integrate_to_node(m, fam, p2, lam, spec, ci, cj, i2.shift);
      return NumericMatrix((scale / (2.0 * e)) * (a - c));
    };
    NumericMatrix v1 = out.v(ci, cj);
    NumericMatrix v2 = at_node(2.0 * eps), vh = at_node(0.5 * eps);
    auto& h = out.halving;
    h.coarse_diff = (v2 - v1).norm();
    h.fine_diff = (v1 - vh).norm();
    h.ratio = h.fine_diff > 0.0 ? h.coarse_diff / h.fine_diff : 0.0;
    double phi_scale = std::max(1.0, plus.phi(ci, cj).norm());
    h.roundoff_limited = h.coarse_diff < 256.0 * DBL_EPSILON * phi_scale * std::abs(scale) / eps;
    h.converged = h.roundoff_limited || (h.ratio >= 2.5 && h.ratio <= 6.5);
    if (!h.converged)
      warn("variation step halving for '" + ch.name + "' is not second order: |V(2e)-V(e)| = " +
           std::to_string(h.coarse_diff) + ", |V(e)-V(e/2)| = " + std::to_string(h.fine_diff));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Finite differences on matrix grids

/// d/dx^axis at node (i, j): central inside, second-order one-sided at the edges.
inline NumericMatrix grid_derivative(const MatrixGrid& g, int axis, int i, int j) {
  const auto& s = g.spec();
  const int n = s.count(axis);
  if (n < 3) throw Error("grid too small for second-order differences (need at least 3 samples per axis)");
  const double h = s.h(axis);
  const int k = axis == 1 ? i : j;
  auto at = [&](int kk) { return axis == 1 ? g(kk, j) : g(i, kk); };
  if (k == 0) return (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h);
  if (k == n - 1) return (3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n - 3)) / (2.0 * h);
  return (at(k + 1) - at(k - 1)) / (2.0 * h);
}

/// For a = 1, 2: D_a V - (pr w_R U^a) Phi - U^a V. Interior nodes count toward
/// max/mean; edge nodes (one-sided stencils) only toward boundary_max_abs.
inline ResidualReport lsp_symmetry_residual(const ModelDefinition& m, const Characteristic& R,
                                            const WavefunctionGrid& wave, const VariationGrid& var) {
  if (!(wave.spec == var.spec)) throw Error("wavefunction and variation grids differ");
  if (wave.lam != var.lam) throw Error("wavefunction and variation use different lambda");
  const auto& s = wave.spec;
  if (s.n1 < 3 || s.n2 < 3) throw Error("grid too small for central differences (need n >= 3)");
  ProlongationCache pc(R);
  std::vector<MatrixExpr> mats{m.U1, m.U2, m.U1.map([&](const Expr& e) { return pc.apply(e); }),
                               m.U2.map([&](const Expr& e) { return pc.apply(e); })};
  auto g = evaluate_on_grid(wave.family, wave.params, wave.lam, s, mats);
  ResidualAccumulator total, a1, a2;
  for (int i = 0; i < s.n1; ++i)
    for (int j = 0; j < s.n2; ++j) {
      bool edge = s.on_boundary(i, j);
      double r[2];
      for (int a = 1; a <= 2; ++a) {
        const std::size_t ai = static_cast<std::size_t>(a - 1);
        NumericMatrix res = grid_derivative(var.v, a, i, j) - g[2 + ai](i, j) * wave.phi(i, j) - g[ai](i, j) * var.v(i, j);
        r[ai] = res.norm();
      }
      a1.add(i, j, r[0], edge);
      a2.add(i, j, r[1], edge);
      total.add(i, j, std::max(r[0], r[1]), edge);
    }
  ResidualReport rep = total.report(wave.params);
  rep.terms = {{"alpha1", a1.report().max_abs}, {"alpha2", a2.report().max_abs}};
  return rep;
}

struct GroupDirection {
  std::array<double, 3> q{};
  double defect = 0.0;  // distance of V Phi^-1 from the algebra span
};

/// Components of V Phi^{-1} in the basis e_j at one node.
inline GroupDirection extract_group_direction(const WavefunctionGrid& wave, const VariationGrid& var, int i, int j) {
  NumericMatrix x = var.v(i, j) * inverse(wave.phi(i, j));
  auto p = project_e3(x);
  return {p.x, p.defect};
}

}  // namespace solsurf
