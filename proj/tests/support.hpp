#pragma once

// Shared test helpers: a brute-force reference evaluator that works directly
// on variable names, and random generators for structures and formulas.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "cla.hpp"

namespace testing_support {

using namespace cla;

// Evaluates by the inductive definition: the environment maps every variable
// in scope to an element; an aggregation collects the body values for all
// elements not assigned to any variable in scope, then applies F.
inline double reference_eval(const ContinuousStructure& a, const Formula& f, std::map<std::string, Element>& env) {
  if (f.is_const()) return f.as_const().value;
  if (f.is_eq()) return env.at(f.as_eq().lhs) == env.at(f.as_eq().rhs) ? 1.0 : 0.0;
  if (f.is_atom()) {
    Tuple t;
    for (const auto& v : f.as_atom().args) t.push_back(env.at(v));
    return a.value(f.as_atom().relation, t);
  }
  if (f.is_conn()) {
    std::vector<double> args;
    for (const auto& g : f.as_conn().args) args.push_back(reference_eval(a, g, env));
    return f.as_conn().connective(args);
  }
  const auto& g = f.as_agg();
  std::vector<Element> taken;
  for (const auto& [name, e] : env) taken.push_back(e);
  std::vector<Element> range;
  for (Element b = 1; b <= a.n(); ++b)
    if (std::find(taken.begin(), taken.end(), b) == taken.end()) range.push_back(b);
  std::vector<double> values;
  auto saved = env.find(g.bound) == env.end() ? std::optional<Element>() : std::optional<Element>(env[g.bound]);
  for (Element b : range) {
    env[g.bound] = b;
    values.push_back(reference_eval(a, g.body, env));
  }
  if (saved) env[g.bound] = *saved;
  else env.erase(g.bound);
  return g.aggregator(values);
}

inline double reference_eval(const ContinuousStructure& a, const Formula& f, const std::vector<Variable>& vars,
                             const Tuple& t) {
  std::map<std::string, Element> env;
  for (std::size_t i = 0; i < vars.size(); ++i) env[vars[i]] = t[i];
  return reference_eval(a, f, env);
}

inline Signature test_signature() { return Signature({{"P", 1}, {"Q", 1}, {"E", 2}, {"T", 3}}); }

// Values are sometimes drawn from {0, 0.5, 1} so that ties and boundary
// values occur.
inline ContinuousStructure random_structure(std::size_t n, const Signature& sig, Stream& rng) {
  ContinuousStructure a(n, sig);
  const bool coarse = rng.uniform() < 0.3;
  for (std::size_t r = 0; r < sig.size(); ++r)
    for (double& v : a.values(r)) v = coarse ? 0.5 * static_cast<double>(rng.below(3)) : rng.uniform();
  return a;
}

inline Tuple random_tuple(std::size_t k, std::size_t n, Stream& rng) {
  Tuple t(k);
  for (auto& e : t) e = static_cast<Element>(rng.below(n)) + 1;
  return t;
}

inline Connective random_connective(std::size_t arity, Stream& rng) {
  if (arity == 1) {
    static const char* unary[] = {"not", "identity", "min1", "avg1"};
    return builtin(unary[rng.below(4)]);
  }
  if (arity == 2) {
    static const char* binary[] = {"and", "or", "implies", "abs_diff", "min2", "max2", "avg2"};
    return builtin(binary[rng.below(7)]);
  }
  static const char* prefix[] = {"min", "max", "avg"};
  return builtin(prefix[rng.below(3)] + std::to_string(arity));
}

struct FormulaGen {
  Signature sig = test_signature();
  Stream& rng;
  std::size_t binders = 0;
  bool allow_agg = false;

  Variable pick(const std::vector<Variable>& scope) { return scope[rng.below(scope.size())]; }

  Formula atomic(const std::vector<Variable>& scope) {
    const auto k = rng.below(10);
    if (k == 0) return Formula::constant(rng.below(2) ? rng.uniform() : 0.5 * static_cast<double>(rng.below(3)));
    if (k <= 2) return Formula::eq(pick(scope), pick(scope));
    const auto& r = sig.relations()[rng.below(sig.size())];
    std::vector<Variable> args;
    for (std::size_t i = 0; i < r.arity; ++i) args.push_back(pick(scope));
    return Formula::atom(r.name, std::move(args));
  }

  Formula formula(std::vector<Variable> scope, int depth) {
    if (depth <= 0) return atomic(scope);
    const auto k = rng.below(10);
    if (k < 3) return atomic(scope);
    if (allow_agg && k >= 8) {
      const Variable y = "y" + std::to_string(binders++);
      static const char* aggs[] = {"min", "max", "am"};
      if (k == 9 && rng.below(2)) {
        // first-order quantifier through the max/min expansion
        auto inner = scope;
        inner.push_back(y);
        const Formula body = formula(inner, depth - 1);
        std::set<std::string> used(scope.begin(), scope.end());
        collect_names(body, used);
        used.insert(y);
        NameSupply names(used);
        return expand_fo_quantifier(rng.below(2) ? Quantifier::Exists : Quantifier::Forall, y, body, scope, names);
      }
      scope.push_back(y);
      return Formula::agg(aggregator(aggs[rng.below(3)]), y, formula(scope, depth - 1));
    }
    const std::size_t arity = 1 + rng.below(3);
    std::vector<Formula> args;
    for (std::size_t i = 0; i < arity; ++i) args.push_back(formula(scope, depth - 1));
    return Formula::conn(random_connective(arity, rng), std::move(args));
  }
};

// Two-proportion z statistic.
inline double two_proportion_z(double hits1, double n1, double hits2, double n2) {
  const double p1 = hits1 / n1, p2 = hits2 / n2;
  const double p = (hits1 + hits2) / (n1 + n2);
  const double se = std::sqrt(p * (1.0 - p) * (1.0 / n1 + 1.0 / n2));
  return se == 0.0 ? 0.0 : (p1 - p2) / se;
}

// One-sample Kolmogorov-Smirnov statistic against a CDF.
template <class Cdf>
double ks_statistic(std::vector<double> xs, Cdf&& cdf) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

// Critical value at significance 0.01 (asymptotic).
inline double ks_critical_01(std::size_t n) { return 1.62762 / std::sqrt(static_cast<double>(n)); }

}  // namespace testing_support
