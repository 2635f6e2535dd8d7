#include <gtest/gtest.h>

#include "support.hpp"

using namespace cla;
using namespace testing_support;

namespace {

Formula P(Variable v) { return Formula::atom("P", {std::move(v)}); }
Formula Q(Variable v) { return Formula::atom("Q", {std::move(v)}); }
Formula R1(Variable v) { return Formula::atom("R", {std::move(v)}); }
Formula R(Variable a, Variable b) { return Formula::atom("R", {std::move(a), std::move(b)}); }
Formula E(Variable a, Variable b) { return Formula::atom("E", {std::move(a), std::move(b)}); }

const IdentityPattern one = IdentityPattern::distinct(1);

IntegrationConfig quad(std::size_t res = 256) {
  IntegrationConfig c;
  c.method = Method::Quadrature;
  c.resolution = res;
  return c;
}

IntegrationConfig mc(std::size_t samples, std::uint64_t seed = 1) {
  IntegrationConfig c;
  c.method = Method::MonteCarlo;
  c.samples = samples;
  c.seed = seed;
  return c;
}

DensityModel model(std::vector<RelationSymbol> rels) { return DensityModel(Signature(std::move(rels))); }

// Random aggregation-free formula with at most three distinct atoms under p.
Formula small_formula(const Signature& sig, Stream& rng, const std::vector<Variable>& vars, const IdentityPattern& p) {
  for (;;) {
    FormulaGen gen{sig, rng};
    Formula f = gen.formula(vars, 3);
    if (normalize_under(f, p, vars).atoms.size() <= kMaxQuadratureDim) return f;
  }
}

}  // namespace

TEST(ProbInInterval, IntervalLength) {
  const auto m = model({{"R", 1}});
  const auto e = prob_in_interval(R1("x"), one, {"x"}, Interval::closed(0.2, 0.7), m, quad());
  EXPECT_NEAR(e.value, 0.5, 1e-12);
  EXPECT_EQ(e.method, Method::Quadrature);
}

TEST(ProbInInterval, MinOfTwoUniforms) {
  // P(min(U,V) <= 1/2) = 1 - (1/2)^2
  const auto m = model({{"R", 1}, {"Q", 1}});
  const Formula psi = Formula::conn(builtin("min2"), {R1("x"), Q("x")});
  const auto a = prob_in_interval(psi, one, {"x"}, Interval::closed(0.0, 0.5), m, mc(100000));
  EXPECT_NEAR(a.value, 0.75, 0.01);
  EXPECT_GT(a.error, 0.0);
  EXPECT_NEAR(a.error, hoeffding_half_width(100000), 1e-15);
  const auto b = prob_in_interval(psi, one, {"x"}, Interval::closed(0.0, 0.5), m, quad());
  EXPECT_NEAR(b.value, 0.75, 0.005);
  EXPECT_LE(std::abs(b.value - 0.75), b.error + 1e-12);
}

TEST(ProbInInterval, Constant) {
  const auto m = model({{"R", 1}});
  const auto e = prob_in_interval(Formula::constant(0.4), one, {"x"}, Interval::closed(0.0, 0.3), m);
  EXPECT_EQ(e.value, 0.0);
  EXPECT_EQ(e.method, Method::Exact);
}

TEST(ProbInInterval, NonUniformDensityAndPatternRestriction) {
  // E(x,x) under x = y uses the diagonal density 2u: P(E <= 1/2) = 1/4
  auto m = model({{"E", 2}});
  m.set("E", IdentityPattern::from_blocks(2, {{1, 2}}), Density::polynomial({0.0, 2.0}));
  const auto diag = prob_in_interval(E("x", "y"), IdentityPattern::from_blocks(2, {{1, 2}}), {"x", "y"},
                                     Interval::closed(0.0, 0.5), m, quad());
  EXPECT_NEAR(diag.value, 0.25, 1e-9);
  const auto off = prob_in_interval(E("x", "y"), IdentityPattern::distinct(2), {"x", "y"},
                                    Interval::closed(0.0, 0.5), m, quad());
  EXPECT_NEAR(off.value, 0.5, 1e-9);
}

TEST(ProbInInterval, QuadratureRejectsHighDimension) {
  const auto m = model({{"P", 1}, {"Q", 1}, {"R", 1}, {"S", 1}});
  const Formula psi = Formula::conn(builtin("avg4"), {P("x"), Q("x"), R1("x"), Formula::atom("S", {"x"})});
  EXPECT_THROW(prob_in_interval(psi, one, {"x"}, Interval::closed(0.0, 0.5), m, quad()), ValidationError);
  const auto e = prob_in_interval(psi, one, {"x"}, Interval::closed(0.0, 0.5), m, mc(20000));
  EXPECT_NEAR(e.value, 0.5, 0.02);
}

TEST(ProbProperty, Additivity) {
  const auto m = model({{"P", 1}, {"Q", 1}, {"E", 2}});
  Stream rng(61);
  for (int trial = 0; trial < 20; ++trial) {
    const Formula psi = small_formula(m.signature(), rng, {"x", "y"}, IdentityPattern::distinct(2));
    const double a = rng.uniform();
    for (const auto& cfg : {quad(64), mc(20000, 1 + trial)}) {
      Interval left = Interval::closed(0.0, a);
      Interval right{a, 1.0, true, false};
      const auto p = prob_in_interval(psi, IdentityPattern::distinct(2), {"x", "y"}, left, m, cfg);
      const auto q = prob_in_interval(psi, IdentityPattern::distinct(2), {"x", "y"}, right, m, cfg);
      EXPECT_NEAR(p.value + q.value, 1.0, p.error + q.error + 1e-9) << to_string(psi);
    }
  }
}

TEST(ProbProperty, QuadratureAgreesWithMonteCarlo) {
  const auto m = model({{"P", 1}, {"Q", 1}, {"E", 2}});
  Stream rng(62);
  for (int trial = 0; trial < 20; ++trial) {
    const Formula psi = small_formula(m.signature(), rng, {"x", "y"}, IdentityPattern::distinct(2));
    const Interval j = Interval::closed(0.2, 0.7);
    const auto p = prob_in_interval(psi, IdentityPattern::distinct(2), {"x", "y"}, j, m, quad(128));
    const auto q = prob_in_interval(psi, IdentityPattern::distinct(2), {"x", "y"}, j, m, mc(50000, 7 + trial));
    EXPECT_NEAR(p.value, q.value, p.error + q.error) << to_string(psi);
  }
}

TEST(Independence, TwoEvents) {
  const auto m = model({{"E", 2}});
  const auto r = independence_gap(E("x", "y"), {"x", "y"}, one, Interval::closed(0.0, 0.5), 10, 2, 100000, m, 3, 4);
  EXPECT_LE(r.gap, 0.02);
  ASSERT_EQ(r.marginals.size(), 2u);
  EXPECT_NEAR(r.marginals[0], 0.5, 0.01);
}

TEST(Independence, SingleEventHasNoGap) {
  const auto m = model({{"E", 2}});
  const auto r = independence_gap(E("x", "y"), {"x", "y"}, one, Interval::closed(0.0, 0.5), 10, 1, 2000, m, 3);
  EXPECT_EQ(r.gap, 0.0);
}

TEST(Independence, MergedDuplicateAtom) {
  const auto m = model({{"E", 2}});
  const Formula psi = Formula::conn(builtin("and"), {E("x", "y"), E("x", "y")});
  const auto r = independence_gap(psi, {"x", "y"}, one, Interval::closed(0.0, 0.5), 10, 3, 50000, m, 4, 4);
  EXPECT_LE(r.gap, 0.02);
  EXPECT_NEAR(r.marginals[0], 0.75, 0.01);
}

TEST(Histogram, UniformQuarters) {
  const auto m = model({{"R", 2}});
  const auto h = histogram_profile(R("x", "y"), one, {"x", "y"}, {}, 4, m, quad());
  for (double a : h.alpha) EXPECT_NEAR(a, 0.25, 1e-9);
}

TEST(Histogram, FixedPrefixAndDensity) {
  // and(P(x), R(x,y)) with P fixed at 1 leaves C(u) = u; R has density 2u
  auto m = model({{"P", 1}, {"R", 2}});
  m.set("R", IdentityPattern::distinct(2), Density::polynomial({0.0, 2.0}));
  const Formula inner = Formula::conn(builtin("and"), {P("x"), R("x", "y")});
  const auto h = histogram_profile(inner, one, {"x", "y"}, {1.0}, 2, m, quad());
  EXPECT_NEAR(h.alpha[0], 0.25, 1e-9);
  EXPECT_NEAR(h.alpha[1], 0.75, 1e-9);
  EXPECT_THROW(histogram_profile(inner, one, {"x", "y"}, {}, 2, m, quad()), ValidationError);
}

TEST(HistogramProperty, ProfilesSumToOne) {
  const auto m = model({{"P", 1}, {"Q", 1}, {"E", 2}});
  Stream rng(63);
  for (int trial = 0; trial < 30; ++trial) {
    const Formula inner = small_formula(m.signature(), rng, {"x", "y"}, IdentityPattern::distinct(2));
    const SplitBody sb = split_body(inner, one, {"x", "y"}, m);
    std::vector<double> fixed(sb.y_free.size());
    for (auto& r : fixed) r = rng.uniform();
    const auto h = histogram_profile(inner, one, {"x", "y"}, fixed, 1 + rng.below(6), m, quad(128));
    double sum = 0.0;
    for (double a : h.alpha) sum += a;
    EXPECT_NEAR(sum, 1.0, 1e-9) << to_string(inner);
  }
}

TEST(BuildD, MeanOfUniform) {
  const auto m = model({{"R", 2}});
  EliminationConfig cfg;
  const auto d = build_D(Aggregator::mean(), "y", R("x", "y"), one, {"x"}, m, cfg);
  EXPECT_EQ(d.connective.arity(), 0u);
  EXPECT_NEAR(d.step.constant, 0.5, 0.005);
  ASSERT_TRUE(d.step.tolerance.has_value());
  cfg.method = Method::MonteCarlo;
  const auto e = build_D(Aggregator::mean(), "y", R("x", "y"), one, {"x"}, m, cfg);
  EXPECT_NEAR(e.step.constant, 0.5, 0.01);
}

TEST(BuildD, EssentialSupremumOfUniform) {
  const auto m = model({{"R", 2}});
  const auto d = build_D(Aggregator::max(), "y", R("x", "y"), one, {"x"}, m, {});
  EXPECT_NEAR(d.step.constant, 1.0, 1.0 / 512);
  EXPECT_EQ(d.step.statistic, "ess-sup");
}

TEST(BuildD, EssentialInfimumRespectsSupport) {
  // density vanishing on [0, 1/4]: ess-inf is 1/4, not 0
  auto m = model({{"R", 2}});
  m.set("R", IdentityPattern::distinct(2), Density::piecewise({0.0, 0.25, 1.0}, {{0.0}, {-1.0 / 3, 4.0 / 3}}));
  const auto d = build_D(Aggregator::min(), "y", R("x", "y"), one, {"x"}, m, {});
  EXPECT_NEAR(d.step.constant, 0.25, 1.0 / 512);
}

TEST(BuildD, HalfSquareTable) {
  // E[max(0, r + U - 1)] = r^2 / 2
  const auto m = model({{"P", 1}, {"R", 2}});
  const Formula phi = Formula::conn(builtin("and"), {P("x"), R("x", "y")});
  const auto d = build_D(Aggregator::mean(), "y", phi, one, {"x"}, m, {});
  ASSERT_EQ(d.connective.arity(), 1u);
  ASSERT_TRUE(d.step.table);
  EXPECT_EQ(d.step.table->point_count(), 17u);
  for (double r : {0.0, 0.5, 1.0}) EXPECT_NEAR(d.connective({r}), r * r / 2, 0.01);
  for (std::size_t i = 0; i < 17; ++i) {
    const double r = d.step.table->point(i)[0];
    EXPECT_NEAR(d.step.table->values()[i], r * r / 2, 0.01);
  }
}

TEST(BuildD, ReplicaCase) {
  const auto m = model({{"P", 1}});
  const auto d = build_D(Aggregator::max(), "y", Formula::constant(0.3), one, {"x"}, m, {});
  EXPECT_EQ(d.connective.arity(), 0u);
  EXPECT_DOUBLE_EQ(d.step.constant, 0.3);
  const auto e = build_D(Aggregator::mean(), "y", Formula::conn(builtin("not"), {P("x")}), one, {"x"}, m, {});
  ASSERT_EQ(e.connective.arity(), 1u);
  EXPECT_NEAR(e.connective({0.25}), 0.75, 1e-12);
  EXPECT_EQ(e.step.s, 0u);
}

TEST(BuildD, RejectsExternalAggregator) {
  const auto m = model({{"R", 2}});
  EXPECT_THROW(build_D(threshold_aggregator(), "y", R("x", "y"), one, {"x"}, m, {}), UnsupportedAggregator);
  EliminationConfig cfg;
  cfg.allow_generic = true;
  cfg.budget = 4000;
  const auto d = build_D(threshold_aggregator(), "y", R("x", "y"), one, {"x"}, m, cfg);
  EXPECT_FALSE(d.step.trusted);
}

TEST(BuildD, MonteCarloStabilization) {
  const auto m = model({{"P", 1}, {"R", 2}});
  const Formula phi = Formula::conn(builtin("and"), {P("x"), R("x", "y")});
  EliminationConfig cfg;
  cfg.method = Method::MonteCarlo;
  cfg.grid = 5;
  const auto d = build_D(Aggregator::mean(), "y", phi, one, {"x"}, m, cfg);
  ASSERT_TRUE(d.step.stabilization.has_value());
  ASSERT_TRUE(d.step.tolerance.has_value());
  EXPECT_LE(*d.step.stabilization, *d.step.tolerance);
}

TEST(Eliminate, Examples) {
  const auto m = model({{"P", 1}, {"R", 2}, {"E", 2}});
  const auto a = eliminate(Formula::agg(Aggregator::mean(), "y", R("x", "y")), one, {"x"}, m);
  ASSERT_TRUE(a.output.is_const());
  EXPECT_NEAR(a.output.as_const().value, 0.5, 0.005);
  ASSERT_EQ(a.trace.size(), 1u);

  const auto b = eliminate(Formula::agg(Aggregator::mean(), "y", Formula::conn(builtin("and"), {P("x"), R("x", "y")})),
                           one, {"x"}, m);
  ASSERT_TRUE(b.output.is_conn());
  ASSERT_EQ(b.output.as_conn().args.size(), 1u);
  EXPECT_TRUE(same_formula(b.output.as_conn().args[0], P("x")));
  EXPECT_NEAR(b.output.as_conn().connective({0.5}), 0.125, 0.01);

  const auto c = eliminate(Formula::agg(Aggregator::max(), "y", Formula::constant(0.3)), one, {"x"}, m);
  ASSERT_TRUE(c.output.is_const());
  EXPECT_DOUBLE_EQ(c.output.as_const().value, 0.3);
}

TEST(Eliminate, AggregationFreeUnchanged) {
  const auto m = model({{"P", 1}});
  const Formula f = Formula::conn(builtin("not"), {P("x")});
  const auto r = eliminate(f, one, {"x"}, m);
  EXPECT_TRUE(same_formula(r.output, f));
  EXPECT_TRUE(r.trace.empty());
  EXPECT_EQ(r.tolerance(), 0.0);
}

TEST(Eliminate, NestedSentence) {
  const auto m = model({{"E", 2}});
  const Formula f = Formula::agg(Aggregator::max(), "x", Formula::agg(Aggregator::mean(), "y", E("x", "y")));
  const auto r = eliminate(f, IdentityPattern{}, {}, m);
  ASSERT_TRUE(r.output.is_const());
  EXPECT_NEAR(r.output.as_const().value, 0.5, 0.005);
  ASSERT_EQ(r.trace.size(), 2u);
  EXPECT_EQ(r.trace[0].aggregator, "am");
  EXPECT_EQ(r.trace[1].aggregator, "max");
}

TEST(Eliminate, ConnectiveRecursion) {
  const auto m = model({{"P", 1}, {"E", 2}});
  const Formula f = Formula::conn(builtin("and"), {P("x"), Formula::agg(Aggregator::mean(), "y", E("x", "y"))});
  const auto r = eliminate(f, one, {"x"}, m);
  ASSERT_TRUE(r.output.is_conn());
  EXPECT_TRUE(same_formula(r.output.as_conn().args[0], P("x")));
  ASSERT_TRUE(r.output.as_conn().args[1].is_const());
  EXPECT_NEAR(r.output.as_conn().args[1].as_const().value, 0.5, 0.005);
}

TEST(Eliminate, BodyUnderExtendedPattern) {
  // E(x,x) does not mention y, E(x,y) does
  const auto m = model({{"E", 2}});
  const Formula body = Formula::conn(builtin("avg2"), {E("x", "x"), E("x", "y")});
  const auto r = eliminate(Formula::agg(Aggregator::mean(), "y", body), one, {"x"}, m);
  ASSERT_EQ(r.trace.size(), 1u);
  EXPECT_EQ(r.trace[0].t, 1u);
  EXPECT_EQ(r.trace[0].s, 1u);
  ASSERT_TRUE(r.output.is_conn());
  // D(r) = (r + 1/2) / 2
  EXPECT_NEAR(r.output.as_conn().connective({0.2}), 0.35, 0.005);
}

TEST(LimitProb, Examples) {
  const auto m = model({{"R", 2}});
  const Formula f = Formula::agg(Aggregator::mean(), "y", R("x", "y"));
  const auto in = limit_prob(f, one, {"x"}, Interval::closed(0.4, 0.6), m);
  EXPECT_EQ(in.estimate.value, 1.0);
  const auto out = limit_prob(f, one, {"x"}, Interval::closed(0.8, 1.0), m);
  EXPECT_EQ(out.estimate.value, 0.0);
  ASSERT_TRUE(in.elimination_error.has_value());
  EXPECT_EQ(*in.elimination_error, 0.0);

  const auto r = limit_prob(R1("x"), one, {"x"}, Interval::closed(0.0, 0.25), model({{"R", 1}}));
  EXPECT_NEAR(r.estimate.value, 0.25, 1e-12);
}

TEST(LimitProb, ToleranceWidensErrorNearBoundary) {
  // eliminated constant ~0.5 sits on the interval edge
  const auto m = model({{"R", 2}});
  const Formula f = Formula::agg(Aggregator::mean(), "y", R("x", "y"));
  const auto r = limit_prob(f, one, {"x"}, Interval::closed(0.5, 0.9), m);
  ASSERT_TRUE(r.elimination_error.has_value());
  EXPECT_EQ(*r.elimination_error, 1.0);
}

TEST(InferenceProperty, NIndependenceAcrossTuples) {
  // same pattern, different tuples and n: frequencies agree (z-test at 0.01)
  const auto m = model({{"R", 1}, {"Q", 1}});
  const Formula psi = Formula::conn(builtin("min2"), {R1("x"), Q("x")});
  const Evaluator ev(psi, {"x"}, m.signature());
  const Interval j = Interval::closed(0.0, 0.5);
  const std::size_t reps = 4000;
  double hits_a = 0, hits_b = 0;
  for (std::size_t s = 0; s < reps; ++s) {
    hits_a += j.contains(ev(sample_structure(10, m, 71, s), {3})) ? 1 : 0;
    hits_b += j.contains(ev(sample_structure(40, m, 72, s), {17})) ? 1 : 0;
  }
  EXPECT_LT(std::abs(two_proportion_z(hits_a, reps, hits_b, reps)), 2.576);
}
