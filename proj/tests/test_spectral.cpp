#include <gtest/gtest.h>

#include "solsurf/spectral.hpp"

using namespace solsurf;

namespace {

const cplx I{0.0, 1.0};

const ModelDefinition& sg() { return builtin("sine-gordon"); }
const SolutionFamily& kink() { return sg().family("kink"); }

// The sine-Gordon pair with a non-solution background theta = x1 x2 added.
const ModelDefinition& sg_with_saddle() {
  static const ModelDefinition m =
      load_model(std::string(sine_gordon_model_text()) + "\n[solution.saddle]\nparams = []\ntheta1 = \"x1*x2\"\n");
  return m;
}

ModelDefinition constant_model(const std::string& u1, const std::string& u2) {
  return load_model("[model]\nname = \"const\"\nfields = 1\ndim = 2\n[U1]\nr1c1 = \"" + u1 +
                    "\"\nr1c2 = \"0\"\nr2c1 = \"0\"\nr2c2 = \"-(" + u1 + ")\"\n[U2]\nr1c1 = \"" + u2 +
                    "\"\nr1c2 = \"0\"\nr2c1 = \"0\"\nr2c2 = \"-(" + u2 + ")\"\n[solution.flat]\nparams = []\ntheta1 = \"0\"\n");
}

const ParamValues kA1{{"a", 1.0}, {"d", 0.0}};

}  // namespace

TEST(Grid, Spacing) {
  GridSpec g = GridSpec::square(-5.0, 5.0, 0.1);
  EXPECT_EQ(g.n1, 101);
  EXPECT_NEAR(g.h1(), 0.1, 1e-15);
  EXPECT_EQ(g.x1(100), 5.0);
  EXPECT_EQ(g.far_corner(), (std::pair{100, 100}));
  GridSpec bad = g;
  bad.n2 = 1;
  EXPECT_THROW(bad.validate(), Error);
  bad = g;
  bad.base_i = 101;
  EXPECT_THROW(bad.validate(), Error);
}

TEST(Wavefunction, ZeroPotentialGivesIdentity) {
  auto m = constant_model("0", "0");
  auto w = integrate_wavefunction(m, m.family("flat"), {}, 1.0, GridSpec::square(-1, 1, 0.1));
  for (int i = 0; i < w.spec.n1; ++i)
    for (int j = 0; j < w.spec.n2; ++j) EXPECT_EQ(w.phi(i, j), NumericMatrix::Identity(2, 2));
}

TEST(Wavefunction, ConstantDiagonalPotential) {
  auto m = constant_model("-i*lambda", "0");
  GridSpec g = GridSpec::square(-0.5, 0.5, 0.01);
  cplx lam = 1.0;
  auto w = integrate_wavefunction(m, m.family("flat"), {}, lam, g);
  double worst = 0.0;
  for (int i = 0; i < g.n1; ++i) {
    double dx = g.x1(i) - g.x1(0);
    NumericMatrix want = NumericMatrix::Zero(2, 2);
    want(0, 0) = std::exp(-I * lam * dx);
    want(1, 1) = std::exp(I * lam * dx);
    for (int j = 0; j < g.n2; j += 20) worst = std::max(worst, (w.phi(i, j) - want).cwiseAbs().maxCoeff());
  }
  EXPECT_LT(worst, 1e-10);
}

TEST(Wavefunction, InteriorBaseNode) {
  auto m = constant_model("-i*lambda", "lambda");
  GridSpec g = GridSpec::square(-1.0, 1.0, 0.05);
  g.base_i = 10;
  g.base_j = 25;
  auto w = integrate_wavefunction(m, m.family("flat"), {}, 1.0, g);
  EXPECT_LT((w.phi(10, 25) - NumericMatrix::Identity(2, 2)).norm(), 1e-15);
  double dx = g.x1(0) - g.x1(10), dy = g.x2(0) - g.x2(25);
  EXPECT_LT(std::abs(w.phi(0, 0)(0, 0) - std::exp(-I * dx + dy)), 1e-6);
  NumericMatrix single = integrate_to_node(m, m.family("flat"), {}, 1.0, g, 0, 0);
  EXPECT_EQ(single, NumericMatrix(w.phi(0, 0)));
}

TEST(Wavefunction, SingularLambdaRejected) {
  EXPECT_THROW(integrate_wavefunction(sg(), kink(), kA1, 0.0, GridSpec::square(-1, 1, 0.1)), SingularLambdaError);
}

TEST(Wavefunction, BlowUpGuard) {
  auto m = constant_model("20", "0");
  IntegrationOptions io;
  EXPECT_THROW(integrate_wavefunction(m, m.family("flat"), {}, 1.0, GridSpec::square(-1, 1, 0.1), io), IntegrationError);
}

TEST(Wavefunction, KinkDeterminantAndUnitarity) {
  GridSpec g = GridSpec::square(-5.0, 5.0, 0.01);
  auto w = integrate_wavefunction(sg(), kink(), kA1, 1.0, g);
  auto a = audit_wavefunction(w);
  EXPECT_LT(a.det_max_dev, 1e-8);
  EXPECT_LT(a.unitarity_max, 1e-6);
  EXPECT_EQ(w.phi(0, 0), NumericMatrix::Identity(2, 2));
}

TEST(Wavefunction, DeterminantDefectIsFifthOrder) {
  // One RK4 step with U^2 = c I has det = 1 + c^3 h^6 / 72 + O(h^8).
  auto dev = [](double h) {
    auto w = integrate_wavefunction(sg(), kink(), kA1, 1.0, GridSpec::square(-5.0, 5.0, h));
    return audit_wavefunction(w).det_max_dev;
  };
  EXPECT_NEAR(std::log2(dev(0.1) / dev(0.05)), 5.0, 0.3);
}

TEST(Wavefunction, RowMatchesSingleNodePath) {
  GridSpec g = GridSpec::square(-2.0, 2.0, 0.1);
  auto w = integrate_wavefunction(sg(), kink(), kA1, 1.0, g);
  EXPECT_EQ(NumericMatrix(w.phi(17, 33)), integrate_to_node(sg(), kink(), kA1, 1.0, g, 17, 33));
}

TEST(Wavefunction, PathIndependenceTracksZeroCurvature) {
  GridSpec g = GridSpec::square(-2.0, 2.0, 0.02);
  IntegrationOptions col;
  col.order = PathOrder::ColumnFirst;
  auto row = integrate_wavefunction(sg(), kink(), kA1, 1.0, g);
  auto other = integrate_wavefunction(sg(), kink(), kA1, 1.0, g, col);
  EXPECT_LT(audit_wavefunction(row, &other).path_far_corner, 1e-6);

  const auto& m = sg_with_saddle();
  auto r2 = integrate_wavefunction(m, m.family("saddle"), {}, 1.0, g);
  auto c2 = integrate_wavefunction(m, m.family("saddle"), {}, 1.0, g, col);
  EXPECT_GT(audit_wavefunction(r2, &c2).path_far_corner, 1e-2);
}

TEST(Wavefunction, FourthOrderInH) {
  // Richardson: ||Phi_h - Phi_{h/2}|| / ||Phi_{h/2} - Phi_{h/4}|| ~ 16 at the far corner.
  auto corner = [](double h) {
    GridSpec g = GridSpec::square(-2.0, 2.0, h);
    return integrate_to_node(sg(), kink(), kA1, 1.0, g, g.n1 - 1, g.n2 - 1);
  };
  NumericMatrix a = corner(0.2), b = corner(0.1), c = corner(0.05);
  double ratio = (a - b).norm() / (b - c).norm();
  EXPECT_NEAR(std::log2(ratio), 4.0, 0.4);
}

TEST(Zcc, OnShellAndOffShell) {
  auto on = zcc_residual_on(sg(), kink(), kA1, GridSpec::square(-5.0, 5.0, 0.1));
  EXPECT_LT(on.max_abs, 1e-10);
  EXPECT_GE(on.max_abs, on.mean_abs);
  const auto& m = sg_with_saddle();
  auto off = zcc_residual_on(m, m.family("saddle"), {}, GridSpec::square(-2.0, 2.0, 0.1));
  EXPECT_GT(off.max_abs, 0.1);
}

TEST(Zcc, SymmetryCriterionDiscriminates) {
  GridSpec g = GridSpec::square(-2.0, 2.0, 0.1);
  ParamValues p{{"a", 1.3}, {"d", 0.2}};
  for (const char* c : {"trans1", "trans2", "flow3"})
    EXPECT_LT(zcc_symmetry_residual(sg(), sg().characteristic(c).R, kink(), p, g).max_abs, 1e-8) << c;
  EXPECT_GT(zcc_symmetry_residual(sg(), sg().characteristic("bogus").R, kink(), p, g).max_abs, 1e-2);
}

TEST(Variation, Trans1IsTranslation) {
  GridSpec g = GridSpec::square(-2.0, 2.0, 0.05);
  const auto& ch = sg().characteristic("trans1");
  auto w = integrate_wavefunction(sg(), kink(), kA1, 1.0, g);
  auto v = variation_wavefunction(sg(), kink(), kA1, ch, 1.0, g);
  EXPECT_EQ(v.method, VariationMethod::FamilyParameter);
  EXPECT_EQ(v.epsilon, 1e-4);
  EXPECT_LT(v.v(0, 0).norm(), 1e-15);
  EXPECT_TRUE(v.halving.converged) << v.halving.ratio;
  // Shared normalization Phi(base) = I makes V = U1 Phi - Phi U1(base).
  auto U = evaluate_on_grid(kink(), kA1, 1.0, g, {sg().U1})[0];
  NumericMatrix u0 = U(0, 0);
  double worst = 0.0, qworst = 0.0;
  for (int i = 0; i < g.n1; i += 4)
    for (int j = 0; j < g.n2; j += 4) {
      NumericMatrix want = U(i, j) * w.phi(i, j) - w.phi(i, j) * u0;
      worst = std::max(worst, (v.v(i, j) - want).norm());
      auto q = extract_group_direction(w, v, i, j);
      auto qe = to_e3(U(i, j) - w.phi(i, j) * u0 * inverse(w.phi(i, j)));
      for (std::size_t k = 0; k < 3; ++k) qworst = std::max(qworst, std::abs(q.q[k] - qe[k]));
    }
  EXPECT_LT(worst, 5e-4);
  EXPECT_LT(qworst, 5e-4);
  auto q0 = extract_group_direction(w, v, 0, 0);
  EXPECT_EQ(q0.q, (std::array<double, 3>{0.0, 0.0, 0.0}));
}

TEST(Variation, Flow3IsASquaredTrans1) {
  GridSpec g = GridSpec::square(-2.0, 2.0, 0.05);
  ParamValues p{{"a", 1.3}, {"d", 0.0}};
  auto vt = variation_wavefunction(sg(), kink(), p, sg().characteristic("trans1"), 1.0, g);
  auto vf = variation_wavefunction(sg(), kink(), p, sg().characteristic("flow3"), 1.0, g);
  double worst = 0.0, scale = 0.0;
  for (int i = 0; i < g.n1; ++i)
    for (int j = 0; j < g.n2; ++j) {
      worst = std::max(worst, (vf.v(i, j) - 1.69 * vt.v(i, j)).norm());
      scale = std::max(scale, vf.v(i, j).norm());
    }
  EXPECT_LT(worst / scale, 5e-4);
}

TEST(Variation, MissingBindingAndJetShift) {
  GridSpec g = GridSpec::square(-1.0, 1.0, 0.1);
  const auto& bogus = sg().characteristic("bogus");
  VariationOptions fp;
  fp.method = VariationMethod::FamilyParameter;
  EXPECT_THROW(variation_wavefunction(sg(), kink(), kA1, bogus, 1.0, g, fp), MissingBindingError);
  auto v = variation_wavefunction(sg(), kink(), kA1, bogus, 1.0, g);
  EXPECT_EQ(v.method, VariationMethod::JetShift);
  EXPECT_LT(v.v(0, 0).norm(), 1e-15);

  // For a bound characteristic both methods estimate the same derivative.
  const auto& t1 = sg().characteristic("trans1");
  VariationOptions js;
  js.method = VariationMethod::JetShift;
  auto a = variation_wavefunction(sg(), kink(), kA1, t1, 1.0, g);
  auto b = variation_wavefunction(sg(), kink(), kA1, t1, 1.0, g, js);
  double worst = 0.0;
  for (int i = 0; i < g.n1; ++i)
    for (int j = 0; j < g.n2; ++j) worst = std::max(worst, (a.v(i, j) - b.v(i, j)).norm());
  EXPECT_LT(worst, 1e-4);
}

TEST(LspSymmetry, Trans1ConvergesAtSecondOrder) {
  auto residual = [](double h) {
    GridSpec g = GridSpec::square(-2.0, 2.0, h);
    const auto& ch = sg().characteristic("trans1");
    auto w = integrate_wavefunction(sg(), kink(), kA1, 1.0, g);
    auto v = variation_wavefunction(sg(), kink(), kA1, ch, 1.0, g);
    return lsp_symmetry_residual(sg(), ch.R, w, v);
  };
  auto coarse = residual(0.05), fine = residual(0.025);
  EXPECT_NEAR(std::log2(coarse.max_abs / fine.max_abs), 2.0, 0.4);
  EXPECT_LT(fine.max_abs, 1e-3);
  EXPECT_GT(coarse.boundary_max_abs, 0.0);
  ASSERT_EQ(coarse.terms.size(), 2U);
}

TEST(LspSymmetry, ZeroAndCorruptedVariations) {
  GridSpec g = GridSpec::square(-1.0, 1.0, 0.1);
  auto w = integrate_wavefunction(sg(), kink(), kA1, 1.0, g);
  NamedCharacteristic zero{"zero", Characteristic({Expr{}})};
  auto v = variation_wavefunction(sg(), kink(), kA1, zero, 1.0, g, {VariationMethod::JetShift, {}, true});
  EXPECT_EQ(lsp_symmetry_residual(sg(), zero.R, w, v).max_abs, 0.0);
  auto gd = extract_group_direction(w, v, 5, 5);
  EXPECT_EQ(gd.q, (std::array<double, 3>{0.0, 0.0, 0.0}));

  NumericMatrix c = from_e3({0.3, -0.2, 0.5});
  for (int i = 0; i < g.n1; ++i)
    for (int j = 0; j < g.n2; ++j) v.v(i, j) += c;
  auto rep = lsp_symmetry_residual(sg(), zero.R, w, v);
  EXPECT_GT(rep.max_abs, 0.1);
  GridSpec tiny = GridSpec::square(0.0, 1.0, 1.0);
  auto wt = integrate_wavefunction(sg(), kink(), kA1, 1.0, tiny);
  auto vt = variation_wavefunction(sg(), kink(), kA1, zero, 1.0, tiny, {VariationMethod::JetShift, {}, false});
  EXPECT_THROW(lsp_symmetry_residual(sg(), zero.R, wt, vt), Error);
}
