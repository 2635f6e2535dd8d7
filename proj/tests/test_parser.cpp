#include <gtest/gtest.h>

#include "support.hpp"

using namespace cla;
using namespace testing_support;

TEST(Parser, AtomAndInferredSignature) {
  const ParsedFormula p = parse_formula("E(x,y)");
  EXPECT_EQ(p.vars, (std::vector<Variable>{"x", "y"}));
  ASSERT_TRUE(p.formula.is_atom());
  EXPECT_EQ(p.signature.arity("E"), 2u);
}

TEST(Parser, AggregationBindsFreshVariable) {
  const ParsedFormula p = parse_formula("am{y}(E(x,y))");
  EXPECT_EQ(p.vars, (std::vector<Variable>{"x"}));
  ASSERT_TRUE(p.formula.is_agg());
  EXPECT_EQ(p.formula.as_agg().aggregator.kind(), AggregatorKind::Mean);
  EXPECT_EQ(free_vars(p.formula), (std::set<Variable>{"x"}));
}

TEST(Parser, ConnectivesNumbersAndEquality) {
  const Signature sig({{"P", 1}, {"R", 2}});
  const ParsedFormula p = parse_formula("and(P(x), implies(x = y, or(0.25, R(x,y))))", sig);
  EXPECT_EQ(p.vars, (std::vector<Variable>{"x", "y"}));
  ContinuousStructure a(2, sig);
  a.set("P", {1}, 0.8);
  a.set("R", {1, 2}, 0.5);
  // implies(0, ...) = 1, and(0.8, 1) = 0.8
  EXPECT_NEAR(evaluate(a, p.formula, p.vars, {1, 2}), 0.8, 1e-15);
  // x = y: implies(1, or(0.25, R(1,1)=0)) = 0.25, and(0.8, 0.25) = 0.05
  EXPECT_NEAR(evaluate(a, p.formula, p.vars, {1, 1}), 0.05, 1e-15);
}

TEST(Parser, VariadicMinMaxAvg) {
  const ParsedFormula p = parse_formula("max(P(x), Q(x), 0.5)");
  ASSERT_TRUE(p.formula.is_conn());
  EXPECT_EQ(p.formula.as_conn().connective.name(), "max3");
}

TEST(Parser, ShadowedBindersRenamedApart) {
  const ParsedFormula p = parse_formula("max{y}(am{y}(E(y,y)))");
  ASSERT_TRUE(p.formula.is_agg());
  const auto& outer = p.formula.as_agg();
  ASSERT_TRUE(outer.body.is_agg());
  EXPECT_NE(outer.bound, outer.body.as_agg().bound);
}

TEST(Parser, BinderDoesNotCaptureFreeName) {
  // the inner binder is also called x, which is free outside
  const ParsedFormula p = parse_formula("and(P(x), max{x}(P(x)))");
  EXPECT_EQ(p.vars, (std::vector<Variable>{"x"}));
  const auto& agg = p.formula.as_conn().args[1].as_agg();
  EXPECT_NE(agg.bound, "x");
}

TEST(Parser, ExistsExpandsWithAmbientInstances) {
  const ParsedFormula p = parse_formula("exists y. E(x,y)");
  ASSERT_TRUE(p.formula.is_conn());
  EXPECT_EQ(p.formula.as_conn().connective.name(), "max2");
  const ParsedFormula s = parse_formula("forall y. P(y)");
  ASSERT_TRUE(s.formula.is_agg());
  EXPECT_EQ(s.formula.as_agg().aggregator.kind(), AggregatorKind::Min);
}

TEST(Parser, DeclaredVariables) {
  const ParsedFormula p = parse_formula("P(x)", nullptr, std::vector<Variable>{"x", "z"});
  EXPECT_EQ(p.vars, (std::vector<Variable>{"x", "z"}));
  EXPECT_THROW(parse_formula("E(x,y)", nullptr, std::vector<Variable>{"x"}), ValidationError);
  EXPECT_THROW(parse_formula("P(x)", nullptr, std::vector<Variable>{"x", "x"}), ValidationError);
}

TEST(Parser, Errors) {
  const Signature sig({{"E", 2}});
  EXPECT_THROW(parse_formula("E(x)", sig), ValidationError);
  EXPECT_THROW(parse_formula("F(x)", sig), ValidationError);
  EXPECT_THROW(parse_formula("and(E(x,y))", sig), ValidationError);
  EXPECT_THROW(parse_formula("foo{y}(E(x,y))", sig), ValidationError);
  EXPECT_THROW(parse_formula("1.5", sig), ValidationError);
  EXPECT_THROW(parse_formula("am{y}(E(x,y)", sig), ValidationError);
  EXPECT_THROW(parse_formula("E(x,y) junk", sig), ValidationError);
  EXPECT_THROW(parse_formula("", sig), ValidationError);
}

TEST(Parser, RoundTripThroughPrinter) {
  Stream rng(5);
  const Signature sig = test_signature();
  for (int trial = 0; trial < 200; ++trial) {
    FormulaGen gen{sig, rng};
    gen.allow_agg = true;
    const Formula f = gen.formula({"x", "y"}, 4);
    const std::string text = to_string(f);
    const ParsedFormula p = parse_formula(text, sig, std::vector<Variable>{"x", "y"});
    const std::size_t n = 4 + rng.below(2);
    const ContinuousStructure a = random_structure(n, sig, rng);
    const Tuple t = random_tuple(2, n, rng);
    double v = 0.0;
    try {
      v = evaluate(a, p.formula, p.vars, t);
    } catch (const EmptyAggregation&) {
      EXPECT_THROW(reference_eval(a, f, {"x", "y"}, t), EmptyAggregation) << text;
      continue;
    }
    EXPECT_NEAR(v, reference_eval(a, f, {"x", "y"}, t), 1e-12) << text;
  }
}
