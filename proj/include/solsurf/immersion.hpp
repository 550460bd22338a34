#pragma once

// Immersion functions F in the algebra from the three symmetry ingredients
// (lambda-conformal, gauge, generalized symmetry), their tangent matrices
// A^a, and surfaces integrated back from D_a F = Phi^-1 A^a Phi.

#include "solsurf/spectral.hpp"

namespace solsurf {

struct ImmersionSpec {
  std::optional<Expr> alpha;  // alpha(lambda)
  std::optional<MatrixExpr> S;
  std::optional<NamedCharacteristic> characteristic;

  void validate(const ModelDefinition& m) const {
    if (!alpha && !S && !characteristic) throw Error("immersion needs alpha, S or a characteristic");
    if (alpha)
      for (const auto& s : alpha->free_symbols())
        if (s.kind != SymbolKind::Lambda) throw Error("alpha may depend only on lambda, found " + to_string(s));
    if (S) {
      if (S->dim() != m.dim) throw DimensionError("gauge S has the wrong dimension");
      for (const auto& s : S->free_symbols())
        if (s.is_param()) throw Error("gauge S contains family parameter '" + s.name + "'");
    }
    if (characteristic && characteristic->R.size() != static_cast<std::size_t>(m.field_count))
      throw Error("characteristic has " + std::to_string(characteristic->R.size()) + " components, model has " +
                  std::to_string(m.field_count) + " fields");
  }
};

/// A^a = alpha dU^a/dlambda + (D_a S + [S, U^a]) + pr w_R U^a, present terms only.
inline std::array<MatrixExpr, 2> tangent_matrices(const ModelDefinition& m, const ImmersionSpec& spec) {
  spec.validate(m);
  std::array<MatrixExpr, 2> A{MatrixExpr(m.dim), MatrixExpr(m.dim)};
  std::optional<ProlongationCache> pc;
  if (spec.characteristic) pc.emplace(spec.characteristic->R);
  for (int a = 1; a <= 2; ++a) {
    const MatrixExpr& U = m.U(a);
    MatrixExpr& out = A[static_cast<std::size_t>(a - 1)];
    if (spec.alpha) out = out + (*spec.alpha) * mat_partial(U, Symbol::lambda());
    if (spec.S) out = out + mat_total_derivative(*spec.S, a) + commutator(*spec.S, U);
    if (pc) out = out + U.map([&](const Expr& e) { return pc->apply(e); });
    out = simplify(out);
  }
  return A;
}

struct ImmersionGrid {
  GridSpec spec;
  cplx lam;
  MatrixGrid f;            // f(base) = 0
  NumericMatrix offset;    // the subtracted constant: unshifted F = f + offset
  std::optional<HalvingDiagnostic> halving;
};

namespace detail {

inline ImmersionGrid base_shifted(const GridSpec& spec, cplx lam, MatrixGrid raw) {
  NumericMatrix c = raw(spec.base_i, spec.base_j);
  for (int i = 0; i < spec.n1; ++i)
    for (int j = 0; j < spec.n2; ++j) raw(i, j) -= c;
  return {spec, lam, std::move(raw), c, std::nullopt};
}

}  // namespace detail

/// F = Phi^-1 V with V = pr w_R Phi.
inline ImmersionGrid immersion_generalized(const WavefunctionGrid& wave, const VariationGrid& var) {
  if (!(wave.spec == var.spec) || wave.lam != var.lam) throw Error("wavefunction and variation grids differ");
  MatrixGrid raw(wave.spec, wave.phi.dim());
  for (int i = 0; i < wave.spec.n1; ++i)
    for (int j = 0; j < wave.spec.n2; ++j) raw(i, j) = inverse(wave.phi(i, j)) * var.v(i, j);
  return detail::base_shifted(wave.spec, wave.lam, std::move(raw));
}

/// F = Phi^-1 S Phi with S evaluated on the solution.
inline ImmersionGrid immersion_gauge(const WavefunctionGrid& wave, const MatrixExpr& S) {
  auto s = evaluate_on_grid(wave.family, wave.params, wave.lam, wave.spec, {S})[0];
  MatrixGrid raw(wave.spec, wave.phi.dim());
  for (int i = 0; i < wave.spec.n1; ++i)
    for (int j = 0; j < wave.spec.n2; ++j) {
      NumericMatrix p = wave.phi(i, j);
      raw(i, j) = inverse(p) * s(i, j) * p;
    }
  return detail::base_shifted(wave.spec, wave.lam, std::move(raw));
}

struct SymTafelOptions {
  std::optional<double> dlam;  // default 1e-4 max(1, |lambda|)
  bool halving_check = true;
};

/// F = alpha(lambda) Phi^-1 dPhi/dlambda, the derivative by central
/// differences over full re-integrations at lambda +- dlam.
inline ImmersionGrid immersion_symtafel(const ModelDefinition& m, const SolutionFamily& fam, const ParamValues& params,
                                        cplx lam, const GridSpec& spec, const Expr& alpha,
                                        const SymTafelOptions& opts = {}) {
  for (const auto& s : alpha.free_symbols())
    if (s.kind != SymbolKind::Lambda) throw Error("alpha may depend only on lambda, found " + to_string(s));
  const double dl = opts.dlam.value_or(1e-4 * std::max(1.0, std::abs(lam)));
  if (!(dl > 0.0)) throw Error("lambda step must be positive");
  for (cplx s : m.singular_lambdas)
    if (std::abs(s - lam) <= 4.0 * dl) throw SingularLambdaError("lambda too close to a singular value for d/dlambda");
  EvalContext ctx;
  ctx.bind(Symbol::lambda(), lam);
  const cplx a = evaluate(alpha, ctx);

  auto w0 = integrate_wavefunction(m, fam, params, lam, spec);
  auto wp = integrate_wavefunction(m, fam, params, lam + dl, spec);
  auto wm = integrate_wavefunction(m, fam, params, lam - dl, spec);
  MatrixGrid raw(spec, m.dim);
  for (int i = 0; i < spec.n1; ++i)
    for (int j = 0; j < spec.n2; ++j)
      raw(i, j) = (a / (2.0 * dl)) * inverse(w0.phi(i, j)) * (wp.phi(i, j) - wm.phi(i, j));
  ImmersionGrid out = detail::base_shifted(spec, lam, std::move(raw));

  if (opts.halving_check) {
    auto [ci, cj] = spec.far_corner();
    auto dphi = [&](double e) {
      return NumericMatrix((integrate_to_node(m, fam, params, lam + e, spec, ci, cj) -
                            integrate_to_node(m, fam, params, lam - e, spec, ci, cj)) /
                           (2.0 * e));
    };
    NumericMatrix d1 = (wp.phi(ci, cj) - wm.phi(ci, cj)) / (2.0 * dl);
    HalvingDiagnostic h;
    h.coarse_diff = (dphi(2.0 * dl) - d1).norm();
    h.fine_diff = (d1 - dphi(0.5 * dl)).norm();
    h.ratio = h.fine_diff > 0.0 ? h.coarse_diff / h.fine_diff : 0.0;
    h.roundoff_limited = h.coarse_diff < 256.0 * DBL_EPSILON * std::max(1.0, w0.phi(ci, cj).norm()) / dl;
    h.converged = h.roundoff_limited || (h.ratio >= 2.5 && h.ratio <= 6.5);
    if (!h.converged)
      warn("lambda step halving is not second order: ratio " + std::to_string(h.ratio));
    out.halving = h;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Tangents

struct TangentGrid {
  std::array<MatrixExpr, 2> A;
  MatrixGrid a1, a2;  // A^a on the solution
  [[nodiscard]] const MatrixGrid& a(int axis) const { return axis == 1 ? a1 : a2; }
};

inline TangentGrid evaluate_tangents(const ModelDefinition& m, const ImmersionSpec& spec, const WavefunctionGrid& wave) {
  auto A = tangent_matrices(m, spec);
  auto g = evaluate_on_grid(wave.family, wave.params, wave.lam, wave.spec, {A[0], A[1]});
  return {A, std::move(g[0]), std::move(g[1])};
}

/// Phi^-1 a Phi at one node.
inline NumericMatrix pulled_back(const TangentGrid& t, const WavefunctionGrid& wave, int axis, int i, int j) {
  NumericMatrix p = wave.phi(i, j);
  return inverse(p) * t.a(axis)(i, j) * p;
}

struct RankCheck {
  bool independent = false;
  double g11 = 0.0, g12 = 0.0, g22 = 0.0;
  double det = 0.0;
};

/// Gram matrix of the two pulled-back tangents; independent iff
/// det G > 1e-10 (tr G)^2 / 4.
inline RankCheck rank_check(const NumericMatrix& t1, const NumericMatrix& t2) {
  RankCheck r;
  r.g11 = inner_product(t1, t1);
  r.g12 = inner_product(t1, t2);
  r.g22 = inner_product(t2, t2);
  r.det = r.g11 * r.g22 - r.g12 * r.g12;
  double tr = r.g11 + r.g22;
  r.independent = r.det > 1e-10 * tr * tr / 4.0;
  return r;
}

inline RankCheck rank_check(const TangentGrid& t, const WavefunctionGrid& wave, int i, int j) {
  return rank_check(pulled_back(t, wave, 1, i, j), pulled_back(t, wave, 2, i, j));
}

struct RankSummary {
  std::size_t dependent = 0;
  std::size_t nodes = 0;
  double min_det = 0.0;
};

inline RankSummary rank_summary(const TangentGrid& t, const WavefunctionGrid& wave) {
  RankSummary s;
  bool first = true;
  for (int i = 0; i < wave.spec.n1; ++i)
    for (int j = 0; j < wave.spec.n2; ++j) {
      auto r = rank_check(t, wave, i, j);
      ++s.nodes;
      if (!r.independent) ++s.dependent;
      s.min_det = first ? r.det : std::min(s.min_det, r.det);
      first = false;
    }
  return s;
}

/// For a = 1, 2: D_a F (finite differences) - Phi^-1 a_a Phi. Interior nodes only
/// count toward max/mean.
inline ResidualReport tangent_consistency(const ImmersionGrid& F, const TangentGrid& t, const WavefunctionGrid& wave) {
  if (!(F.spec == wave.spec)) throw Error("immersion and wavefunction grids differ");
  const auto& s = wave.spec;
  ResidualAccumulator total, a1, a2;
  for (int i = 0; i < s.n1; ++i)
    for (int j = 0; j < s.n2; ++j) {
      bool edge = s.on_boundary(i, j);
      NumericMatrix p = wave.phi(i, j);
      NumericMatrix pinv = inverse(p);
      double r[2];
      for (int a = 1; a <= 2; ++a)
        r[a - 1] = (grid_derivative(F.f, a, i, j) - pinv * t.a(a)(i, j) * p).norm();
      a1.add(i, j, r[0], edge);
      a2.add(i, j, r[1], edge);
      total.add(i, j, std::max(r[0], r[1]), edge);
    }
  ResidualReport rep = total.report(wave.params);
  rep.terms = {{"alpha1", a1.report().max_abs}, {"alpha2", a2.report().max_abs}};
  return rep;
}

// ---------------------------------------------------------------------------
// Surfaces from tangents

struct ClosureAudit {
  int rectangles = 0;
  double max_ratio = 0.0;  // |loop integral| / (perimeter * max ||integrand||)
  double threshold = 1e-4;
  bool passed = true;
};

struct TangentSurface {
  WavefunctionGrid wave;
  TangentGrid tangents;
  ImmersionGrid F;
  ClosureAudit closure;
  RankSummary rank;
};

namespace detail {

// Integral of the a-th pulled-back tangent from node k0 to k1 along one grid
// line, composite trapezoid.
inline NumericMatrix trapezoid(const std::vector<NumericMatrix>& g, int k0, int k1, double h) {
  NumericMatrix acc = NumericMatrix::Zero(g[0].rows(), g[0].cols());
  int dir = k1 >= k0 ? 1 : -1;
  for (int k = k0; k != k1; k += dir)
    acc += (0.5 * h * dir) * (g[static_cast<std::size_t>(k)] + g[static_cast<std::size_t>(k + dir)]);
  return acc;
}

}  // namespace detail

/// F with F(base) = 0 from trapezoidal integration of Phi^-1 A^a Phi along
/// the base row then up each column, plus a closure audit on random rectangles.
inline TangentSurface integrate_surface_from_tangents(const ModelDefinition& m, const ImmersionSpec& ispec,
                                                      const SolutionFamily& fam, const ParamValues& params, cplx lam,
                                                      const GridSpec& spec, std::uint64_t seed = 0,
                                                      int rectangles = 20) {
  auto wave = integrate_wavefunction(m, fam, params, lam, spec);
  auto tangents = evaluate_tangents(m, ispec, wave);
  const int n1 = spec.n1, n2 = spec.n2;
  MatrixGrid g1(spec, m.dim), g2(spec, m.dim);
  double gmax = 0.0;
  for (int i = 0; i < n1; ++i)
    for (int j = 0; j < n2; ++j) {
      g1(i, j) = pulled_back(tangents, wave, 1, i, j);
      g2(i, j) = pulled_back(tangents, wave, 2, i, j);
      gmax = std::max({gmax, g1(i, j).norm(), g2(i, j).norm()});
    }
  auto row = [&](const MatrixGrid& g, int j) {
    std::vector<NumericMatrix> v;
    for (int i = 0; i < n1; ++i) v.emplace_back(g(i, j));
    return v;
  };
  auto col = [&](const MatrixGrid& g, int i) {
    std::vector<NumericMatrix> v;
    for (int j = 0; j < n2; ++j) v.emplace_back(g(i, j));
    return v;
  };

  MatrixGrid f(spec, m.dim);
  auto base_row = row(g1, spec.base_j);
  for (int i = 0; i < n1; ++i) {
    NumericMatrix fi = detail::trapezoid(base_row, spec.base_i, i, spec.h1());
    auto c = col(g2, i);
    NumericMatrix acc = fi;
    f(i, spec.base_j) = acc;
    for (int j = spec.base_j + 1; j < n2; ++j) {
      acc += (0.5 * spec.h2()) * (c[static_cast<std::size_t>(j - 1)] + c[static_cast<std::size_t>(j)]);
      f(i, j) = acc;
    }
    acc = fi;
    for (int j = spec.base_j - 1; j >= 0; --j) {
      acc -= (0.5 * spec.h2()) * (c[static_cast<std::size_t>(j + 1)] + c[static_cast<std::size_t>(j)]);
      f(i, j) = acc;
    }
  }

  ClosureAudit audit;
  audit.rectangles = rectangles;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> ui(0, n1 - 1), uj(0, n2 - 1);
  for (int r = 0; r < rectangles; ++r) {
    int i0 = ui(rng), i1 = ui(rng), j0 = uj(rng), j1 = uj(rng);
    if (i0 == i1) i1 = i0 == 0 ? 1 : i0 - 1;
    if (j0 == j1) j1 = j0 == 0 ? 1 : j0 - 1;
    if (i0 > i1) std::swap(i0, i1);
    if (j0 > j1) std::swap(j0, j1);
    NumericMatrix loop = detail::trapezoid(row(g1, j0), i0, i1, spec.h1()) +
                         detail::trapezoid(col(g2, i1), j0, j1, spec.h2()) +
                         detail::trapezoid(row(g1, j1), i1, i0, spec.h1()) +
                         detail::trapezoid(col(g2, i0), j1, j0, spec.h2());
    double perimeter = 2.0 * ((spec.x1(i1) - spec.x1(i0)) + (spec.x2(j1) - spec.x2(j0)));
    double ratio = gmax > 0.0 ? loop.norm() / (perimeter * gmax) : 0.0;
    audit.max_ratio = std::max(audit.max_ratio, ratio);
  }
  audit.passed = audit.max_ratio < audit.threshold;

  RankSummary rank = rank_summary(tangents, wave);
  if (rank.nodes && rank.dependent == rank.nodes)
    warn("tangents are linearly dependent at every node; the immersion may still exist pointwise");
  ImmersionGrid F{spec, lam, std::move(f), NumericMatrix::Zero(m.dim, m.dim), std::nullopt};
  return {std::move(wave), std::move(tangents), std::move(F), audit, rank};
}

/// max over nodes of ||A - B||, optionally interior only.
inline double max_difference(const MatrixGrid& a, const MatrixGrid& b, bool interior_only = true) {
  double worst = 0.0;
  const auto& s = a.spec();
  for (int i = 0; i < s.n1; ++i)
    for (int j = 0; j < s.n2; ++j) {
      if (interior_only && s.on_boundary(i, j)) continue;
      worst = std::max(worst, (a(i, j) - b(i, j)).norm());
    }
  return worst;
}

}  // namespace solsurf
