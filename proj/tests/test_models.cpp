#include <gtest/gtest.h>

#include <random>

#include "solsurf/models.hpp"

using namespace solsurf;

namespace {

const cplx I{0.0, 1.0};

std::string replace(std::string s, const std::string& from, const std::string& to) {
  auto p = s.find(from);
  EXPECT_NE(p, std::string::npos) << from;
  if (p != std::string::npos) s.replace(p, from.size(), to);
  return s;
}

// Kink derivatives in closed form: xi = a x1 + x2/a + d, theta_1 = 2a sech(xi).
double sech(double x) { return 1.0 / std::cosh(x); }

}  // namespace

TEST(Builtin, SineGordonShape) {
  const auto& m = builtin("sine-gordon");
  EXPECT_EQ(m.name, "sine-gordon");
  EXPECT_EQ(m.field_count, 1);
  EXPECT_EQ(m.dim, 2);
  ASSERT_EQ(m.singular_lambdas.size(), 1U);
  EXPECT_EQ(m.singular_lambdas[0], cplx{});
  EXPECT_EQ(to_string(m.U1(0, 0)), "-i*lambda");
  for (const char* c : {"trans1", "trans2", "flow3", "bogus"}) EXPECT_NO_THROW((void)m.characteristic(c));
  const auto& kink = m.family("kink");
  EXPECT_TRUE(kink.binding_for("trans1"));
  EXPECT_FALSE(kink.binding_for("bogus"));
  EXPECT_THROW(builtin("nope"), ModelError);
  EXPECT_THROW((void)m.family("breather"), ModelError);
}

TEST(Builtin, ZccResidualIsSineGordonTimesSigma2) {
  const auto& m = builtin("sine-gordon");
  MatrixExpr Z = zcc_residual_expr(m);
  NumericMatrix s2 = pauli()[1];
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  double worst = 0.0;
  for (int n = 0; n < 50; ++n) {
    EvalContext ctx;
    for (const auto& s : Z.free_symbols()) ctx.bind(s, u(rng));
    ctx.bind(Symbol::lambda(), cplx{u(rng), u(rng)});
    double th = ctx.at(Symbol::theta(1)).real();
    double th12 = ctx.find(Symbol::theta(1, 1, 1)).value_or(0.0).real();
    NumericMatrix want = (I / 2.0) * (std::sin(th) - th12) * s2;
    worst = std::max(worst, (evaluate(Z, ctx) - want).norm());
  }
  EXPECT_LT(worst, 1e-12);
}

TEST(Builtin, KinkSolvesSineGordon) {
  const auto& kink = builtin("sine-gordon").family("kink");
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> ux(-3.0, 3.0), ua(0.5, 2.0), ud(-1.0, 1.0);
  for (int n = 0; n < 50; ++n) {
    ParamValues p{{"a", ua(rng)}, {"d", ud(rng)}};
    auto ctx = kink.eval_jets(p, ux(rng), ux(rng), {{1, 0, 0}, {1, 1, 1}});
    EXPECT_LT(std::abs(ctx.at(Symbol::theta(1, 1, 1)) - std::sin(ctx.at(Symbol::theta(1)))), 1e-10);
  }
}

TEST(Builtin, Flow3IsASquaredTrans1OnTheKink) {
  const auto& m = builtin("sine-gordon");
  const auto& kink = m.family("kink");
  const Expr& R = m.characteristic("flow3").R[0];
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ux(-3.0, 3.0), ua(0.5, 2.0), ud(-1.0, 1.0);
  for (int n = 0; n < 50; ++n) {
    double a = ua(rng), d = ud(rng), x1 = ux(rng), x2 = ux(rng);
    auto ctx = kink.eval_jets({{"a", a}, {"d", d}}, x1, x2, {{1, 1, 0}, {1, 3, 0}});
    cplx th1 = ctx.at(Symbol::theta(1, 1, 0));
    EXPECT_LT(std::abs(evaluate(R, ctx) - a * a * th1), 1e-10);
    double xi = a * x1 + x2 / a + d;
    EXPECT_LT(std::abs(th1 - 2.0 * a * sech(xi)), 1e-12);
    EXPECT_LT(std::abs(evaluate(R, ctx) - 2.0 * a * a * a * sech(xi)), 1e-10);
  }
}

TEST(EvalJets, KinkAtOrigin) {
  const auto& kink = builtin("sine-gordon").family("kink");
  auto ctx = kink.eval_jets({{"a", 1.0}, {"d", 0.0}}, 0.0, 0.0, {{1, 0, 0}, {1, 1, 0}});
  EXPECT_NEAR(ctx.at(Symbol::theta(1)).real(), std::numbers::pi, 1e-15);
  EXPECT_NEAR(ctx.at(Symbol::theta(1, 1, 0)).real(), 2.0, 1e-14);
  EXPECT_EQ(ctx.at(Symbol::x1()), cplx{});
  EXPECT_THROW(kink.eval_jets({{"a", 1.0}, {"d", 0.0}}, 0.0, 0.0, {{2, 1, 0}}), ModelError);
  EXPECT_THROW(kink.eval_jets({{"a", 1.0}}, 0.0, 0.0, {{1, 0, 0}}), ModelError);
}

TEST(LambdaIndependence, Examples) {
  ModelDefinition m = builtin("sine-gordon");
  auto rep = check_lambda_independence(m);
  EXPECT_TRUE(rep.passed);
  EXPECT_LT(rep.max_spread, 1e-9);

  ModelDefinition bad = m;
  bad.U2 = Expr::lambda() * m.U2;
  EXPECT_FALSE(check_lambda_independence(bad).passed);

  ModelDefinition zero = m;
  zero.U1 = MatrixExpr(2);
  zero.U2 = MatrixExpr(2);
  rep = check_lambda_independence(zero);
  EXPECT_TRUE(rep.passed);
  EXPECT_EQ(rep.max_spread, 0.0);
}

TEST(LoadModel, RoundTrip) {
  const auto& m = builtin("sine-gordon");
  std::string text = serialize(m);
  ModelDefinition back = load_model(text);
  EXPECT_TRUE(back == m);
  EXPECT_EQ(serialize(back), text);
}

TEST(LoadModel, DimensionMismatch) {
  std::string t = sine_gordon_model_text();
  t = replace(t, "r2c2 = \"-i*cos(theta1)/(4*lambda)\"\n",
              "r2c2 = \"-i*cos(theta1)/(4*lambda)\"\nr1c3 = \"0\"\nr2c3 = \"0\"\nr3c1 = \"0\"\nr3c2 = \"0\"\nr3c3 = \"0\"\n");
  EXPECT_THROW(load_model(t), DimensionError);
  std::string missing = replace(sine_gordon_model_text(), "r2c1 = \"theta1_1/2\"\n", "");
  EXPECT_THROW(load_model(missing), DimensionError);
}

TEST(LoadModel, WrongBindingDirectionFails) {
  std::string t = sine_gordon_model_text();
  t = replace(t, "[binding.trans1]\nsolution = \"kink\"\nparam = \"d\"", "[binding.trans1]\nsolution = \"kink\"\nparam = \"a\"");
  try {
    load_model(t);
    FAIL();
  } catch (const ModelError& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("trans1"), std::string::npos);
    EXPECT_NE(msg.find("residual"), std::string::npos);
  }
  const auto& kink = builtin("sine-gordon").family("kink");
  auto rep = check_binding(kink, {"trans1", "a", Expr::param("a")}, Characteristic({parse_expr("theta1_1")}));
  EXPECT_FALSE(rep.passed);
  EXPECT_GT(rep.worst_residual, 1e-3);
}

TEST(LoadModel, ShippedBindingsHold) {
  const auto& m = builtin("sine-gordon");
  const auto& kink = m.family("kink");
  for (const auto& b : kink.bindings) {
    auto rep = check_binding(kink, b, m.characteristic(b.characteristic).R, 7);
    EXPECT_TRUE(rep.passed) << b.characteristic << " " << rep.worst_residual;
  }
}

TEST(LoadModel, LambdaDependentPairRejected) {
  std::string t = replace(sine_gordon_model_text(), "r1c2 = \"-theta1_1/2\"", "r1c2 = \"-lambda*theta1_1/2\"");
  EXPECT_THROW(load_model(t), ModelError);
}

TEST(LoadModel, ConfigErrorsCarryLocation) {
  try {
    load_model("[model]\nname = \"x\"\nfields = 1\ndim = 1\n[U1]\nr1c1 = \"sin(\"\n[U2]\nr1c1 = \"0\"\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line(), 6);
  }
  EXPECT_THROW(load_model("[model]\nname = \"x\"\n"), ConfigError);
  EXPECT_THROW(load_model("[model\n"), ConfigError);
  std::string t = replace(sine_gordon_model_text(), "R1 = \"theta1^2\"", "R1 = \"a*theta1^2\"");
  EXPECT_THROW(load_model(t), ConfigError);
  t = replace(sine_gordon_model_text(), "R1 = \"theta1^2\"", "R1 = \"theta2^2\"");
  EXPECT_THROW(load_model(t), ModelError);
  t = replace(sine_gordon_model_text(), "[binding.trans2]\nsolution = \"kink\"", "[binding.trans2]\nsolution = \"breather\"");
  EXPECT_THROW(load_model(t), ConfigError);
}

TEST(LoadModel, ComplexSingularLambdasAndRanges) {
  std::string t = replace(sine_gordon_model_text(), "singular_lambdas = [0]", "singular_lambdas = [0, [0.5, -2]]");
  t = replace(t, "range_a = [0.5, 2]", "range_a = [0.75, 1.25]");
  ModelDefinition m = load_model(t);
  ASSERT_EQ(m.singular_lambdas.size(), 2U);
  EXPECT_EQ(m.singular_lambdas[1], (cplx{0.5, -2.0}));
  EXPECT_EQ(m.family("kink").param("a")->lo, 0.75);
  EXPECT_TRUE(load_model(serialize(m)) == m);
}

TEST(ConfigText, Values) {
  auto secs = parse_config("# c\n[a.b]\nk = \"x # y\" # comment\nn = -1.5e2\narr = [1, [2, 3], \"s\",]\n");
  ASSERT_EQ(secs.size(), 2U);
  EXPECT_EQ(secs[1].name, "a.b");
  EXPECT_EQ(secs[1].at("k").str, "x # y");
  EXPECT_EQ(secs[1].at("n").num, -150.0);
  EXPECT_EQ(secs[1].at("arr").items.size(), 3U);
  EXPECT_EQ(secs[1].at("arr").items[1].items[1].num, 3.0);
  EXPECT_THROW(parse_config("k = \"open\n"), ConfigError);
  EXPECT_THROW(parse_config("[s]\nk = 1\nk = 2\n"), ConfigError);
  EXPECT_THROW(parse_config("[s]\nk = 1 2\n"), ConfigError);
}
