#include <gtest/gtest.h>

#include <numbers>

#include "random_exprs.hpp"
#include "solsurf/symexpr.hpp"

using namespace solsurf;

namespace {

Expr P(const char* s) { return parse_expr(s); }

double rel_diff(cplx a, cplx b) { return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}); }

}  // namespace

TEST(Parse, FunctionOfJetVariable) {
  Expr e = P("sin(theta1)");
  ASSERT_EQ(e.op(), Op::Func);
  EXPECT_EQ(e.fn(), Fn::Sin);
  EXPECT_EQ(e.arg(0), Expr::theta(1));
}

TEST(Parse, JetIndexIsAMultiset) {
  EXPECT_EQ(P("theta1_12"), P("theta1_21"));
  Expr e = P("theta2_112");
  ASSERT_EQ(e.op(), Op::Symbol);
  EXPECT_EQ(e.symbol_value().jet, (JetIndex{2, 2, 1}));
}

TEST(Parse, PrecedenceAndAssociativity) {
  Expr e = P("lambda^2 + i*x1");
  EXPECT_EQ(e, Expr::raw_sum({Expr::raw_power(Expr::lambda(), Expr::integer(2)),
                              Expr::raw_product({Expr::imag(), Expr::x1()})}));
  // ^ is right-associative and binds tighter than unary minus.
  EXPECT_EQ(P("x1^x2^2"), Expr::raw_power(Expr::x1(), Expr::raw_power(Expr::x2(), Expr::integer(2))));
  EXPECT_EQ(P("-x1^2"), Expr::raw_neg(Expr::raw_power(Expr::x1(), Expr::integer(2))));
  EXPECT_EQ(P("-3"), Expr::integer(-3));
  EXPECT_EQ(P("1/2"), frac(1, 2));
}

TEST(Parse, Errors) {
  try {
    P("sin(theta1) + * 2");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), 14U);
  }
  EXPECT_THROW(P("foo(theta1)"), ParseError);
  EXPECT_THROW(P("theta1_13"), ParseError);
  EXPECT_THROW(P("theta0"), ParseError);
  EXPECT_THROW(P("theta12"), ParseError);
  EXPECT_THROW(P("(x1"), ParseError);
  EXPECT_THROW(P("sin"), ParseError);
  EXPECT_THROW(P("Alpha"), ParseError);
  EXPECT_THROW(parse_expr("a*b", ParseOptions{std::set<std::string>{"a"}}), ParseError);
  EXPECT_NO_THROW(parse_expr("a*b", ParseOptions{std::set<std::string>{"a", "b"}}));
}

TEST(Parse, FreeSymbolsAreThoseLexicallyPresent) {
  auto fs = free_symbols(P("cos(theta1_1)*theta1_12 + a"));
  std::vector<Symbol> expected{Symbol::theta(1, 1, 0), Symbol::theta(1, 1, 1), Symbol::param("a")};
  std::sort(expected.begin(), expected.end());
  EXPECT_EQ(fs, expected);
}

TEST(Partial, Examples) {
  EXPECT_EQ(partial(P("sin(theta1)"), Symbol::theta(1)), P("cos(theta1)"));
  EXPECT_TRUE(partial(P("theta1_1"), Symbol::theta(1)).is_zero());
  EXPECT_EQ(partial(P("lambda*x1"), Symbol::lambda()), Expr::x1());
}

TEST(TotalDerivative, Examples) {
  EXPECT_EQ(total_derivative(P("theta1"), 1), P("theta1_1"));
  EXPECT_TRUE(total_derivative(P("x1"), 2).is_zero());
  EXPECT_EQ(total_derivative(P("sin(theta1_1)"), 2), P("cos(theta1_1)*theta1_12"));
  EXPECT_THROW(total_derivative(P("a*theta1"), 1), Error);
}

TEST(Prolongation, Examples) {
  Characteristic R({P("theta1_1")});
  EXPECT_EQ(prolong_scalar(R, P("theta1")), P("theta1_1"));
  EXPECT_EQ(prolong_scalar(R, P("sin(theta1_11)")), P("cos(theta1_11)*theta1_111"));
  EXPECT_TRUE(prolong_scalar(R, P("lambda*x2")).is_zero());
  EXPECT_THROW(Characteristic({P("lambda*theta1")}), Error);
  EXPECT_THROW(Characteristic({P("a*theta1")}), Error);
}

TEST(Evaluate, Examples) {
  EvalContext ctx;
  ctx.bind(Symbol::theta(1), std::numbers::pi / 2);
  EXPECT_NEAR(std::abs(evaluate(P("sin(theta1)"), ctx) - 1.0), 0.0, 1e-15);
  ctx.bind(Symbol::lambda(), cplx{0.0, 1.0});
  EXPECT_NEAR(std::abs(evaluate(P("lambda^2"), ctx) + 1.0), 0.0, 1e-15);
  try {
    evaluate(P("theta1_1"), ctx);
    FAIL();
  } catch (const EvalError& e) {
    EXPECT_NE(std::string(e.what()).find("theta1_1"), std::string::npos);
  }
  EvalContext zero;
  zero.bind(Symbol::x1(), 0.0);
  EXPECT_THROW(evaluate(P("log(x1)"), zero), EvalError);
  EXPECT_THROW(evaluate(P("1/x1"), zero), EvalError);
}

TEST(Simplify, Examples) {
  EXPECT_EQ(simplify(Expr::raw_sum({Expr::raw_product({Expr::integer(0), Expr::theta(1)}),
                                    Expr::raw_product({Expr::integer(1), Expr::lambda()})})),
            Expr::lambda());
  Expr trig = P("sin(theta1)^2 + cos(theta1)^2");
  EXPECT_EQ(simplify(trig), trig);
  EXPECT_EQ(simplify(P("x1 + 2*x1 - 3*x1")), Expr{});
  EXPECT_EQ(simplify(P("lambda*lambda^(-1)")), Expr::integer(1));
  EXPECT_EQ(simplify(P("2*3 + x1*0")), Expr::integer(6));
}

TEST(Program, MatchesTreeEvaluation) {
  std::mt19937_64 rng(11);
  for (int n = 0; n < 50; ++n) {
    Expr a = gen::random_smooth(rng, 4);
    Expr b = gen::random_smooth(rng, 4);
    Program prog({a, b, a * b});
    EvalContext ctx = gen::random_context(rng, {a, b});
    std::vector<cplx> slots;
    for (const auto& s : prog.slots()) slots.push_back(ctx.at(s));
    std::vector<cplx> out(3), scratch;
    prog.run(slots, out, scratch);
    EXPECT_LT(rel_diff(out[0], evaluate(a, ctx)), 1e-13);
    EXPECT_LT(rel_diff(out[2], evaluate(a * b, ctx)), 1e-13);
  }
}

// ---------------------------------------------------------------------------
// Properties

TEST(Properties, ProlongationCommutesWithTotalDerivatives) {
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  for (int n = 0; n < 200; ++n) {
    Expr e = gen::random_smooth(rng, 5);
    Characteristic R = gen::random_polynomial_characteristic(rng);
    ProlongationCache pr(R);
    for (int axis = 1; axis <= 2; ++axis) {
      Expr lhs = total_derivative(pr.apply(e), axis);
      Expr rhs = pr.apply(total_derivative(e, axis));
      Program prog({lhs, rhs});
      for (int k = 0; k < 10; ++k) {
        EvalContext ctx = gen::random_context(rng, {lhs, rhs});
        std::vector<cplx> slots, out(2), scratch;
        for (const auto& s : prog.slots()) slots.push_back(ctx.at(s));
        prog.run(slots, out, scratch);
        worst = std::max(worst, rel_diff(out[0], out[1]));
      }
    }
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(Properties, TotalDerivativesCommute) {
  std::mt19937_64 rng(7);
  double worst = 0.0;
  for (int n = 0; n < 200; ++n) {
    Expr e = gen::random_smooth(rng, 5);
    Expr d12 = total_derivative(total_derivative(e, 1), 2);
    Expr d21 = total_derivative(total_derivative(e, 2), 1);
    Program prog({d12, d21});
    for (int k = 0; k < 10; ++k) {
      EvalContext ctx = gen::random_context(rng, {d12, d21});
      std::vector<cplx> slots, out(2), scratch;
      for (const auto& s : prog.slots()) slots.push_back(ctx.at(s));
      prog.run(slots, out, scratch);
      worst = std::max(worst, rel_diff(out[0], out[1]));
    }
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(Properties, ProlongationIsLinear) {
  std::mt19937_64 rng(99);
  for (int n = 0; n < 100; ++n) {
    Expr e = gen::random_smooth(rng, 4);
    Expr f = gen::random_smooth(rng, 4);
    Characteristic R = gen::random_polynomial_characteristic(rng);
    Expr a = frac(3, 7);
    Expr lhs = prolong_scalar(R, a * e + f);
    Expr rhs = a * prolong_scalar(R, e) + prolong_scalar(R, f);
    EvalContext ctx = gen::random_context(rng, {lhs, rhs});
    EXPECT_LT(rel_diff(evaluate(lhs, ctx), evaluate(rhs, ctx)), 1e-12);
  }
}

TEST(Properties, PartialMatchesCentralDifferenceAtSecondOrder) {
  std::mt19937_64 rng(5);
  Symbol s = Symbol::theta(1);
  int checked = 0;
  for (int n = 0; n < 400 && checked < 20; ++n) {
    Expr e = gen::random_smooth(rng, 4);
    if (!e.depends_on(s)) continue;
    Expr de = partial(e, s);
    EvalContext ctx = gen::random_context(rng, {e, de});
    double s0 = ctx.at(s).real();
    auto fd = [&](double h) {
      EvalContext p = ctx, m = ctx;
      p.bind(s, s0 + h);
      m.bind(s, s0 - h);
      return (evaluate(e, p) - evaluate(e, m)) / (2.0 * h);
    };
    cplx exact = evaluate(de, ctx);
    double e3 = std::abs(fd(1e-3) - exact);
    double e4 = std::abs(fd(1e-4) - exact);
    if (e3 < 1e-8) continue;  // third derivative vanishes locally; ratio is noise
    ++checked;
    EXPECT_GT(e3 / e4, 50.0) << to_string(e);
    EXPECT_LT(e3 / e4, 200.0) << to_string(e);
  }
  EXPECT_GE(checked, 10);
}

TEST(Properties, PrintParseRoundTrip) {
  std::mt19937_64 rng(1234);
  for (int n = 0; n < 500; ++n) {
    Expr e = gen::random_raw(rng, 5);
    std::string text = to_string(e);
    Expr back = parse_expr(text);
    ASSERT_EQ(back, e) << text << "  reprinted as  " << to_string(back);
  }
  for (const char* s : {"-(3)*x1", "x1 - -3", "(1/2)^x1", "x1/2", "x1*2^(-1)", "--x1", "-x1*x2 + (-1/3)"}) {
    Expr e = P(s);
    EXPECT_EQ(parse_expr(to_string(e)), e) << s;
  }
}
