#pragma once

// Matrix-valued expressions and numerics over su(n). The shipped geometry
// uses su(2) with basis e_j = sigma_j / (2i) and the scaled Killing form
// <X, Y> = -2 Re tr(XY), under which {e_j} is orthonormal.

#include <array>

#include <Eigen/Dense>

#include "solsurf/diagnostics.hpp"
#include "solsurf/symexpr.hpp"

namespace solsurf {

using NumericMatrix = Eigen::MatrixXcd;

class DimensionError : public Error {
 public:
  using Error::Error;
};

class SingularMatrixError : public Error {
 public:
  using Error::Error;
};

/// n x n matrix of expressions, row-major.
class MatrixExpr {
 public:
  MatrixExpr() = default;
  explicit MatrixExpr(int dim) : dim_(dim), entries_(static_cast<std::size_t>(dim * dim)) {}
  MatrixExpr(int dim, std::vector<Expr> row_major) : dim_(dim), entries_(std::move(row_major)) {
    if (dim < 1 || entries_.size() != static_cast<std::size_t>(dim * dim))
      throw DimensionError("matrix of dimension " + std::to_string(dim) + " needs " + std::to_string(dim * dim) +
                           " entries, got " + std::to_string(entries_.size()));
  }

  static MatrixExpr identity(int dim) {
    MatrixExpr m(dim);
    for (int k = 0; k < dim; ++k) m.at(k, k) = Expr::integer(1);
    return m;
  }

  [[nodiscard]] int dim() const { return dim_; }
  [[nodiscard]] const Expr& operator()(int r, int c) const { return entries_[index(r, c)]; }
  Expr& at(int r, int c) { return entries_[index(r, c)]; }
  [[nodiscard]] const std::vector<Expr>& entries() const { return entries_; }

  [[nodiscard]] bool is_zero() const {
    return std::all_of(entries_.begin(), entries_.end(), [](const Expr& e) { return e.is_zero(); });
  }

  [[nodiscard]] std::vector<Symbol> free_symbols() const {
    std::vector<Symbol> out;
    for (const auto& e : entries_) {
      std::vector<Symbol> merged;
      std::set_union(out.begin(), out.end(), e.free_symbols().begin(), e.free_symbols().end(),
                     std::back_inserter(merged));
      out = std::move(merged);
    }
    return out;
  }

  template <class F>
  [[nodiscard]] MatrixExpr map(F&& f) const {
    MatrixExpr m(dim_);
    for (std::size_t k = 0; k < entries_.size(); ++k) m.entries_[k] = f(entries_[k]);
    return m;
  }

  friend bool operator==(const MatrixExpr& a, const MatrixExpr& b) {
    return a.dim_ == b.dim_ && a.entries_ == b.entries_;
  }

 private:
  [[nodiscard]] std::size_t index(int r, int c) const { return static_cast<std::size_t>(r * dim_ + c); }

  int dim_ = 0;
  std::vector<Expr> entries_;
};

inline void require_same_dim(int a, int b) {
  if (a != b) throw DimensionError("dimension mismatch: " + std::to_string(a) + " vs " + std::to_string(b));
}

inline MatrixExpr operator+(const MatrixExpr& a, const MatrixExpr& b) {
  require_same_dim(a.dim(), b.dim());
  MatrixExpr m(a.dim());
  for (int r = 0; r < a.dim(); ++r)
    for (int c = 0; c < a.dim(); ++c) m.at(r, c) = a(r, c) + b(r, c);
  return m;
}

inline MatrixExpr operator-(const MatrixExpr& a, const MatrixExpr& b) {
  require_same_dim(a.dim(), b.dim());
  MatrixExpr m(a.dim());
  for (int r = 0; r < a.dim(); ++r)
    for (int c = 0; c < a.dim(); ++c) m.at(r, c) = a(r, c) - b(r, c);
  return m;
}

inline MatrixExpr operator*(const MatrixExpr& a, const MatrixExpr& b) {
  require_same_dim(a.dim(), b.dim());
  const int n = a.dim();
  MatrixExpr m(n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      std::vector<Expr> terms;
      for (int k = 0; k < n; ++k) terms.push_back(a(r, k) * b(k, c));
      m.at(r, c) = add(std::move(terms));
    }
  return m;
}

inline MatrixExpr operator*(const Expr& s, const MatrixExpr& a) {
  return a.map([&](const Expr& e) { return s * e; });
}

inline MatrixExpr commutator(const MatrixExpr& a, const MatrixExpr& b) { return a * b - b * a; }

inline NumericMatrix commutator(const NumericMatrix& a, const NumericMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError("commutator of matrices with different dimensions");
  return a * b - b * a;
}

inline MatrixExpr simplify(const MatrixExpr& m) {
  return m.map([](const Expr& e) { return simplify(e); });
}

inline MatrixExpr mat_partial(const MatrixExpr& m, const Symbol& s) {
  return m.map([&](const Expr& e) { return partial(e, s); });
}

inline MatrixExpr mat_total_derivative(const MatrixExpr& m, int axis) {
  return m.map([&](const Expr& e) { return total_derivative(e, axis); });
}

/// Entrywise pr w_R.
inline MatrixExpr mat_prolong(const Characteristic& R, const MatrixExpr& m) {
  ProlongationCache cache(R);
  return m.map([&](const Expr& e) { return cache.apply(e); });
}

inline NumericMatrix evaluate(const MatrixExpr& m, const EvalContext& ctx) {
  NumericMatrix out(m.dim(), m.dim());
  for (int r = 0; r < m.dim(); ++r)
    for (int c = 0; c < m.dim(); ++c) out(r, c) = evaluate(m(r, c), ctx);
  return out;
}

// ---------------------------------------------------------------------------
// su(2)

inline std::array<NumericMatrix, 3> pauli() {
  const cplx I{0.0, 1.0};
  NumericMatrix s1(2, 2), s2(2, 2), s3(2, 2);
  s1 << 0.0, 1.0, 1.0, 0.0;
  s2 << 0.0, -I, I, 0.0;
  s3 << 1.0, 0.0, 0.0, -1.0;
  return {s1, s2, s3};
}

/// e_j = sigma_j / (2i): trace-free, anti-Hermitian, orthonormal for inner_product.
inline std::array<NumericMatrix, 3> su2_basis() {
  auto s = pauli();
  const cplx two_i{0.0, 2.0};
  return {s[0] / two_i, s[1] / two_i, s[2] / two_i};
}

/// The same basis as exact expressions.
inline std::array<MatrixExpr, 3> su2_basis_exprs() {
  const Expr i = Expr::imag();
  const Expr h = frac(1, 2);
  const Expr z{};
  return {MatrixExpr(2, {z, -(h * i), -(h * i), z}),          // sigma_1 / 2i
          MatrixExpr(2, {z, -h, h, z}),                        // sigma_2 / 2i
          MatrixExpr(2, {-(h * i), z, z, h * i})};             // sigma_3 / 2i
}

inline double frobenius_norm(const NumericMatrix& m) { return m.norm(); }

/// ||X + X^dagger||_F
inline double anti_hermitian_defect(const NumericMatrix& m) { return (m + m.adjoint()).norm(); }

inline cplx determinant(const NumericMatrix& m) { return m.determinant(); }

inline NumericMatrix inverse(const NumericMatrix& m) {
  if (m.rows() != m.cols()) throw DimensionError("inverse of a non-square matrix");
  cplx d = m.determinant();
  if (std::abs(d) <= 1e-12) throw SingularMatrixError("matrix is singular (|det| = " + std::to_string(std::abs(d)) + ")");
  if (m.rows() == 2) {
    NumericMatrix inv(2, 2);
    inv << m(1, 1), -m(0, 1), -m(1, 0), m(0, 0);
    return inv / d;
  }
  return m.inverse();
}

inline bool all_finite(const NumericMatrix& m) {
  for (Eigen::Index k = 0; k < m.size(); ++k)
    if (!std::isfinite(m.data()[k].real()) || !std::isfinite(m.data()[k].imag())) return false;
  return true;
}

/// Distance of X from su(n): trace plus anti-Hermitian defect.
inline double algebra_defect(const NumericMatrix& m) { return std::abs(m.trace()) + anti_hermitian_defect(m); }

/// Scaled Killing form -2 Re tr(XY); positive definite on su(2).
inline double inner_product(const NumericMatrix& x, const NumericMatrix& y) {
  if (x.rows() != y.rows() || x.cols() != y.cols()) throw DimensionError("inner product of matrices with different dimensions");
  constexpr double tol = 1e-8;
  if (algebra_defect(x) > tol || algebra_defect(y) > tol)
    warn_once("inner_product.off_algebra", "inner_product called with an argument outside su(n) (defect > 1e-8)");
  return -2.0 * (x * y).trace().real();
}

struct E3Projection {
  std::array<double, 3> x{};
  double defect = 0.0;  // ||X - sum_j x_j e_j||_F
};

/// Coordinates of X in the su(2) basis, with the reconstruction error.
inline E3Projection project_e3(const NumericMatrix& m) {
  if (m.rows() != 2 || m.cols() != 2) throw DimensionError("E3 projection needs a 2x2 matrix");
  static const auto basis = su2_basis();
  E3Projection p;
  NumericMatrix rec = NumericMatrix::Zero(2, 2);
  for (std::size_t j = 0; j < 3; ++j) {
    p.x[j] = -2.0 * (m * basis[j]).trace().real();
    rec += p.x[j] * basis[j];
  }
  p.defect = (m - rec).norm();
  return p;
}

/// Coordinates x_j = <X, e_j>; throws when X lies outside su(2) by more than tol.
inline std::array<double, 3> to_e3(const NumericMatrix& m, double tol = 1e-6) {
  auto p = project_e3(m);
  if (p.defect > tol)
    throw Error("matrix lies outside su(2): reconstruction error " + std::to_string(p.defect));
  return p.x;
}

inline NumericMatrix from_e3(const std::array<double, 3>& x) {
  static const auto basis = su2_basis();
  return x[0] * basis[0] + x[1] * basis[1] + x[2] * basis[2];
}

}  // namespace solsurf
