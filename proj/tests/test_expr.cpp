#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "conred/expr.hpp"
#include "testutil.hpp"

using conred::EvalEnv;
using conred::ExprKind;
using conred::FunId;
using conred::ParseError;
using conred::ScalarExpr;
using conred::parse_expression;

TEST_CASE("parse builds the documented trees") {
  SECTION("x1 + 2*y1") {
    ScalarExpr e = parse_expression("x1 + 2*y1");
    REQUIRE(e.kind() == ExprKind::Add);
    REQUIRE(e.lhs().kind() == ExprKind::Variable);
    REQUIRE(e.lhs().variable_name() == "x1");
    REQUIRE(e.rhs().kind() == ExprKind::Mul);
    REQUIRE(e.rhs().lhs().constant_value() == 2.0);
    REQUIRE(e.rhs().rhs().variable_name() == "y1");
  }
  SECTION("sin(x1)^2 keeps the power outside the call") {
    ScalarExpr e = parse_expression("sin(x1)^2");
    REQUIRE(e.kind() == ExprKind::Pow);
    REQUIRE(e.exponent() == 2);
    REQUIRE(e.child().kind() == ExprKind::Fun);
    REQUIRE(e.child().fun_id() == FunId::Sin);
  }
  SECTION("power binds tighter than unary minus") {
    ScalarExpr e = parse_expression("-x1^2");
    REQUIRE(e.kind() == ExprKind::Neg);
    REQUIRE(e.child().kind() == ExprKind::Pow);
  }
  SECTION("incomplete input reports the byte offset") {
    try {
      parse_expression("x1 +");
      FAIL("expected ParseError");
    } catch (const ParseError& err) {
      REQUIRE(err.offset == 4);
      REQUIRE_FALSE(err.expected.empty());
    }
  }
  SECTION("unknown function is rejected with its offset") {
    try {
      parse_expression("1 + tan(x1)");
      FAIL("expected ParseError");
    } catch (const ParseError& err) {
      REQUIRE(err.offset == 4);
    }
  }
  SECTION("trailing garbage is rejected") {
    REQUIRE_THROWS_AS(parse_expression("x1 x2"), ParseError);
  }
}

TEST_CASE("evaluate covers arithmetic and domain errors") {
  EvalEnv env{{"x1", 1.0}, {"y1", 3.0}, {"x2", 0.0}};
  REQUIRE(parse_expression("x1+2*y1").evaluate(env) == 7.0);
  REQUIRE_THROWS_AS(parse_expression("x1/x2").evaluate(env), conred::EvalError);
  REQUIRE_THROWS_AS(parse_expression("log(0-x1)").evaluate(env), conred::EvalError);
  REQUIRE_THROWS_AS(parse_expression("sqrt(0-x1)").evaluate(env), conred::EvalError);
  REQUIRE_THROWS_AS(parse_expression("z9").evaluate(env), conred::EvalError);
  REQUIRE(parse_expression("x1^3").differentiate("x1").evaluate({{"x1", 2.0}}) == 12.0);
}

TEST_CASE("differentiate matches the handbook rules") {
  REQUIRE(parse_expression("x1^2").differentiate("x1").str() == "2*x1");
  REQUIRE(parse_expression("sin(y1)").differentiate("x1").str() == "0");
  REQUIRE(parse_expression("x1*y1").differentiate("x1").str() == "y1");
  REQUIRE(parse_expression("sin(x1)").differentiate("x1").str() == "cos(x1)");
  REQUIRE(parse_expression("cos(x1)").differentiate("x1").str() == "-sin(x1)");
  REQUIRE(parse_expression("exp(x1)").differentiate("x1").str() == "exp(x1)");

  // second derivative through the memo cache
  ScalarExpr e = parse_expression("x1^3");
  ScalarExpr d2 = e.differentiate("x1").differentiate("x1");
  REQUIRE(d2.evaluate({{"x1", 5.0}}) == 30.0);
  REQUIRE(e.differentiate("x1").differentiate("x1").same_structure(d2));
}

TEST_CASE("simplify_basic folds constants and identities") {
  REQUIRE(parse_expression("0*sin(x1)+y1").simplified().str() == "y1");
  REQUIRE(parse_expression("2*3").simplified().str() == "6");
  REQUIRE(parse_expression("x1^0").simplified().str() == "1");
  REQUIRE(parse_expression("x1^1").simplified().str() == "x1");
  REQUIRE(parse_expression("x1+0").simplified().str() == "x1");
  REQUIRE(parse_expression("1*x1").simplified().str() == "x1");
  REQUIRE(parse_expression("0/x1").simplified().str() == "0");
  REQUIRE(parse_expression("x1/1").simplified().str() == "x1");
  REQUIRE(parse_expression("0-x1").simplified().str() == "-x1");
  // log of a non-positive constant must not fold away the error
  REQUIRE(parse_expression("log(0-1)").simplified().kind() == ExprKind::Fun);
}

TEST_CASE("round trip: parse(str(e)) is structurally e") {
  std::mt19937_64 gen(2024);
  const std::vector<std::string> vars{"x1", "x2", "x3"};
  for (int trial = 0; trial < 300; ++trial) {
    ScalarExpr e = testutil::random_expr(gen, vars, 5);
    ScalarExpr back = parse_expression(e.str());
    INFO("expr: " << e.str());
    REQUIRE(back.same_structure(e));

    ScalarExpr s = e.simplified();
    REQUIRE(parse_expression(s.str()).same_structure(s));
  }
}

TEST_CASE("derivatives agree with central finite differences") {
  std::mt19937_64 gen(77);
  const std::vector<std::string> vars{"x1", "x2", "x3"};
  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    ScalarExpr e = testutil::random_expr(gen, vars, 5);
    for (const auto& var : vars) {
      ScalarExpr de = e.differentiate(var);
      for (int pt = 0; pt < 10; ++pt) {
        EvalEnv env;
        for (const auto& v : vars) env[v] = testutil::urand(gen, 0.3, 1.2);
        double value = 0.0, sym = 0.0, fd = 0.0;
        try {
          value = e.evaluate(env);
          sym = de.evaluate(env);
          fd = testutil::central_fd(e, var, env);
        } catch (const conred::EvalError&) {
          continue;  // point outside the expression's domain
        }
        if (!std::isfinite(fd) || std::abs(value) > 1e6 || std::abs(sym) > 1e6) continue;
        REQUIRE(std::abs(sym - fd) <= 1e-5 * (1.0 + std::abs(value)) + 1e-7 * std::abs(sym));
        ++checked;
      }
    }
  }
  REQUIRE(checked > 1500);
}

TEST_CASE("simplify_basic never changes evaluation") {
  std::mt19937_64 gen(91);
  const std::vector<std::string> vars{"x1", "x2"};
  for (int trial = 0; trial < 200; ++trial) {
    ScalarExpr e = testutil::random_expr(gen, vars, 4);
    ScalarExpr s = e.simplified();
    for (int pt = 0; pt < 5; ++pt) {
      EvalEnv env;
      for (const auto& v : vars) env[v] = testutil::urand(gen, 0.3, 1.5);
      double a = 0.0, b = 0.0;
      try {
        a = e.evaluate(env);
        b = s.evaluate(env);
      } catch (const conred::EvalError&) {
        continue;
      }
      REQUIRE(std::abs(a - b) <= 1e-12 * (1.0 + std::abs(a)));
    }
  }
}

TEST_CASE("substitution composes expressions") {
  ScalarExpr e = parse_expression("x1^2 + y1");
  ScalarExpr sub = e.substitute({{"x1", parse_expression("u+1")}, {"y1", parse_expression("2*u")}});
  EvalEnv env{{"u", 3.0}};
  REQUIRE(sub.evaluate(env) == 22.0);
}
