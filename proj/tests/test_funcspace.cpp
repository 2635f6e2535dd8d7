#include <gtest/gtest.h>

#include "support.hpp"

using namespace cla;
using namespace testing_support;

TEST(Builtins, Examples) {
  EXPECT_NEAR(builtin("and")({0.7, 0.6}), 0.3, 1e-15);
  EXPECT_DOUBLE_EQ(builtin("not")({0.25}), 0.75);
  EXPECT_NEAR(builtin("implies")({0.9, 0.2}), 0.3, 1e-15);
  EXPECT_DOUBLE_EQ(builtin("max3")({0.1, 0.8, 0.5}), 0.8);
  EXPECT_DOUBLE_EQ(builtin("abs_diff")({0.4, 0.4}), 0.0);
  EXPECT_DOUBLE_EQ(builtin("or")({0.7, 0.6}), 1.0);
  EXPECT_DOUBLE_EQ(builtin("min4")({0.7, 0.6, 0.2, 0.9}), 0.2);
  EXPECT_DOUBLE_EQ(builtin("avg2")({0.2, 0.6}), 0.4);
  EXPECT_DOUBLE_EQ(builtin("const_0.3")({}), 0.3);
  EXPECT_DOUBLE_EQ(builtin("identity")({0.42}), 0.42);
}

TEST(Builtins, Errors) {
  EXPECT_THROW(builtin("nand"), ValidationError);
  EXPECT_THROW(builtin("min0"), ValidationError);
  EXPECT_THROW(builtin("const_1.5"), ValidationError);
  EXPECT_THROW(builtin("and")({0.5}), ValidationError);
}

TEST(Connective, CompositionAndRootClamp) {
  // x + y - 0.2 would leave [0,1] without the clamp at the root
  const Connective c(2, Expr::node(ExprOp::Diff, {Expr::node(ExprOp::Sum, {Expr::arg(0), Expr::arg(1)}), Expr::constant(0.2)}),
                     "shifted_sum");
  EXPECT_DOUBLE_EQ(c({1.0, 1.0}), 1.0);
  EXPECT_DOUBLE_EQ(c({0.0, 0.1}), 0.0);
  EXPECT_NEAR(c({0.3, 0.4}), 0.5, 1e-15);
  EXPECT_THROW(Connective(1, Expr::arg(1), "bad"), ValidationError);
}

TEST(Connective, FixAndPermute) {
  const Connective c = builtin("implies");
  const std::vector<std::optional<double>> fixed{0.9, std::nullopt};
  const Connective g = c.fix(fixed, "implies_0.9");
  EXPECT_EQ(g.arity(), 1u);
  EXPECT_NEAR(g({0.2}), 0.3, 1e-15);
  const std::vector<std::size_t> order{1, 0};
  const Connective h = c.permute(order, "swapped");
  EXPECT_NEAR(h({0.2, 0.9}), 0.3, 1e-15);
}

namespace {

ExprPtr random_expr(std::size_t arity, int depth, Stream& rng) {
  if (depth == 0 || rng.below(4) == 0) {
    if (rng.below(5) == 0) return Expr::constant(rng.uniform());
    return Expr::arg(rng.below(arity));
  }
  static const ExprOp unary[] = {ExprOp::Abs, ExprOp::Complement, ExprOp::Clamp};
  static const ExprOp nary[] = {ExprOp::Sum, ExprOp::Diff, ExprOp::Prod, ExprOp::Min, ExprOp::Max, ExprOp::Avg};
  if (rng.below(3) == 0) return Expr::node(unary[rng.below(3)], {random_expr(arity, depth - 1, rng)});
  const ExprOp op = nary[rng.below(6)];
  const std::size_t kids = (op == ExprOp::Diff) ? 2 : 2 + rng.below(2);
  std::vector<ExprPtr> ks;
  for (std::size_t i = 0; i < kids; ++i) ks.push_back(random_expr(arity, depth - 1, rng));
  return Expr::node(op, std::move(ks));
}

std::vector<double> random_point(std::size_t k, Stream& rng) {
  std::vector<double> x(k);
  for (auto& v : x) v = rng.below(8) == 0 ? static_cast<double>(rng.below(2)) : rng.uniform();
  return x;
}

}  // namespace

TEST(ConnectiveProperty, OutputsStayInUnitInterval) {
  Stream rng(31);
  std::size_t points = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 1 + rng.below(4);
    const Connective c(k, random_expr(k, 4, rng), "random");
    for (int i = 0; i < 1000; ++i, ++points) {
      const double v = c(random_point(k, rng));
      ASSERT_GE(v, 0.0);
      ASSERT_LE(v, 1.0);
    }
  }
  EXPECT_EQ(points, 100000u);
}

TEST(ConnectiveProperty, LipschitzBoundHolds) {
  Stream rng(32);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 1 + rng.below(3);
    const Connective c(k, random_expr(k, 4, rng), "random");
    const double lip = c.lipschitz();
    for (int i = 0; i < 200; ++i) {
      const auto x = random_point(k, rng);
      const double eta = 0.05 * rng.uniform();
      auto y = x;
      for (auto& v : y) v = std::clamp(v + eta * (2.0 * rng.uniform() - 1.0), 0.0, 1.0);
      EXPECT_LE(std::abs(c(x) - c(y)), lip * eta + 1e-12);
    }
  }
}

TEST(ConnectiveProperty, RangeEnclosesValues) {
  Stream rng(33);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 1 + rng.below(3);
    const Connective c(k, random_expr(k, 4, rng), "random");
    std::vector<Range> box(k);
    for (auto& b : box) {
      const double a = rng.uniform(), w = 0.3 * rng.uniform();
      b = {a, std::min(1.0, a + w)};
    }
    const Range r = c.range(box);
    for (int i = 0; i < 100; ++i) {
      std::vector<double> x(k);
      for (std::size_t j = 0; j < k; ++j) x[j] = box[j].lo + (box[j].hi - box[j].lo) * rng.uniform();
      const double v = c(x);
      EXPECT_GE(v, r.lo - 1e-12);
      EXPECT_LE(v, r.hi + 1e-12);
    }
  }
}

TEST(Aggregators, Examples) {
  EXPECT_NEAR(Aggregator::mean()({0.2, 0.4, 0.6}), 0.4, 1e-15);
  EXPECT_DOUBLE_EQ(Aggregator::max()({0.2, 0.9, 0.4}), 0.9);
  EXPECT_DOUBLE_EQ(Aggregator::min()({0.5}), 0.5);
  EXPECT_THROW(Aggregator::min()(std::span<const double>{}), EmptyAggregation);
  EXPECT_THROW(aggregator("median"), ValidationError);
}

TEST(AggregatorProperty, Symmetric) {
  Stream rng(34);
  for (const auto& a : {Aggregator::min(), Aggregator::max(), Aggregator::mean(), threshold_aggregator()}) {
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<double> v(1 + rng.below(50));
      for (auto& x : v) x = rng.uniform();
      const double before = a(v);
      std::shuffle(v.begin(), v.end(), rng.engine());
      EXPECT_EQ(a(v), before) << a.name();
    }
  }
}

TEST(Tabulate, ConstantWhenNullary) {
  const TabulatedFunction t = tabulate({}, [](std::span<const double>) { return 0.3; });
  EXPECT_EQ(t.arity(), 0u);
  EXPECT_DOUBLE_EQ(t(std::vector<double>{}), 0.3);
}

TEST(Tabulate, IdentityExact) {
  const TabulatedFunction t = tabulate({{0.0, 0.5, 1.0}}, [](std::span<const double> r) { return r[0]; });
  for (double x = 0.0; x <= 1.0; x += 0.01) EXPECT_NEAR(t(std::vector<double>{x}), x, 1e-15);
}

TEST(Tabulate, MinOnCoarseGrid) {
  const TabulatedFunction t =
      tabulate({uniform_nodes(5), uniform_nodes(5)}, [](std::span<const double> r) { return std::min(r[0], r[1]); });
  EXPECT_NEAR(t(std::vector<double>{0.3, 0.7}), 0.3, 0.125);
  // exact at the nodes
  for (std::size_t i = 0; i < t.point_count(); ++i) {
    const auto p = t.point(i);
    EXPECT_DOUBLE_EQ(t(p), std::min(p[0], p[1]));
  }
}

TEST(Tabulate, HalfSquareOnElevenNodes) {
  const TabulatedFunction t = tabulate({uniform_nodes(11)}, [](std::span<const double> r) { return r[0] * r[0] / 2; });
  EXPECT_NEAR(t(std::vector<double>{0.5}), 0.125, 0.01);
}

TEST(Tabulate, ClampsOutOfRangeOracle) {
  const TabulatedFunction t = tabulate({uniform_nodes(3)}, [](std::span<const double> r) { return 2.0 * r[0]; });
  EXPECT_EQ(t.clamped_count(), 1u);
  EXPECT_DOUBLE_EQ(t(std::vector<double>{1.0}), 1.0);
}

TEST(Tabulate, RejectsBadGrids) {
  EXPECT_THROW(TabulatedFunction({{0.0, 0.5}}, {0.0, 0.0}), ValidationError);
  EXPECT_THROW(TabulatedFunction({{0.0, 0.6, 0.5, 1.0}}, {0, 0, 0, 0}), ValidationError);
  EXPECT_THROW(TabulatedFunction({{0.0, 1.0}}, {0.0}), ValidationError);
}

TEST(TabulateProperty, RangeMatchesDenseScan) {
  Stream rng(35);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = 1 + rng.below(2);
    std::vector<std::vector<double>> grids(k, uniform_nodes(2 + rng.below(6)));
    std::vector<double> vals(k == 1 ? grids[0].size() : grids[0].size() * grids[1].size());
    for (auto& v : vals) v = rng.uniform();
    const TabulatedFunction t(grids, vals);
    std::vector<std::pair<double, double>> box(k);
    for (auto& b : box) {
      const double a = rng.uniform();
      b = {a, std::min(1.0, a + 0.4 * rng.uniform())};
    }
    const auto [lo, hi] = t.range(box);
    double mn = 1, mx = 0;
    const int steps = 200;
    std::vector<double> x(k);
    for (int i = 0; i <= steps; ++i)
      for (int j = 0; j <= (k == 2 ? steps : 0); ++j) {
        x[0] = box[0].first + (box[0].second - box[0].first) * i / steps;
        if (k == 2) x[1] = box[1].first + (box[1].second - box[1].first) * j / steps;
        const double v = t(x);
        mn = std::min(mn, v);
        mx = std::max(mx, v);
      }
    EXPECT_LE(lo, mn + 1e-12);
    EXPECT_GE(hi, mx - 1e-12);
  }
}

TEST(Continuity, ThresholdIsFalsified) {
  ContinuityParams params;
  const ContinuityReport r = falsify_continuity(threshold_aggregator(), params);
  ASSERT_TRUE(r.falsified);
  ASSERT_TRUE(r.witness.has_value());
  EXPECT_DOUBLE_EQ(r.witness->gap, 1.0);
  EXPECT_TRUE(witness_is_valid(threshold_aggregator(), *r.witness, params));
  EXPECT_LE(r.trials_run, params.trials);
}

TEST(Continuity, MinMaxMeanSurvive) {
  ContinuityParams params;
  params.trials = 2000;
  for (const auto& a : {Aggregator::min(), Aggregator::max(), Aggregator::mean()}) {
    const ContinuityReport r = falsify_continuity(a, params);
    EXPECT_FALSE(r.falsified) << a.name();
    EXPECT_EQ(r.trials_run, params.trials);
  }
}

TEST(Continuity, HistogramConditionsOracle) {
  // two bins, profile (0.5, 0.5): one pair that matches and one that does not
  const std::vector<double> alpha{0.5, 0.5};
  std::vector<double> q(10), q2(10);
  for (std::size_t i = 0; i < 10; ++i) {
    q[i] = i < 5 ? 0.1 : 0.9;
    q2[i] = i < 5 ? 0.2 : 0.8;
  }
  EXPECT_TRUE(satisfies_histogram_conditions(q, q2, alpha, 0.05, 2, 10));
  std::vector<double> skewed(10, 0.1);
  EXPECT_FALSE(satisfies_histogram_conditions(q, skewed, alpha, 0.05, 2, 10));
  EXPECT_FALSE(satisfies_histogram_conditions(q, q2, alpha, 0.05, 2, 11));
}
